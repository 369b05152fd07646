//! Fill-in-the-blank quizzes over the test split, and quiz-size calibration.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::behavior::stats::pearson_correlation;
use crate::corpus::{Member, NearSynonymPair, SentencePool, TargetSentence};
use crate::instances::ExampleSet;
use crate::{jsonl, Error, Result};

pub const BLANK: &str = "___";

/// Independent quizzes per k during calibration.
pub const CALIBRATION_QUIZZES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuizQuestion {
    /// Kept with its original word; agents fill or mask the slot themselves.
    pub question: TargetSentence,
    pub gold: Member,
}

impl QuizQuestion {
    pub fn id(&self) -> &str {
        &self.question.sentence_id
    }

    pub fn blanked_tokens(&self) -> Vec<String> {
        let mut tokens = self.question.tokens.clone();
        tokens[self.question.target_index] = BLANK.to_string();
        tokens
    }

    pub fn blanked_text(&self) -> String {
        self.blanked_tokens().join(" ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quiz {
    pub quiz_id: String,
    pub pair_id: String,
    pub k: usize,
    pub seed: u64,
    pub questions: Vec<QuizQuestion>,
}

impl Quiz {
    pub fn ids(&self) -> HashSet<&str> {
        self.questions.iter().map(QuizQuestion::id).collect()
    }

    pub fn sentences(&self) -> Vec<&TargetSentence> {
        self.questions.iter().map(|q| &q.question).collect()
    }

    /// One record per question, preceded by a header line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = QuizRecord::Header { quiz_id: self.quiz_id.clone(), pair_id: self.pair_id.clone(), k: self.k, seed: self.seed };
        let rows = self.questions.iter().map(|q| QuizRecord::Question(q.clone()));
        jsonl::write_records(path, std::iter::once(header).chain(rows))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut records = jsonl::read_records::<QuizRecord>(path)?.into_iter();
        let Some(QuizRecord::Header { quiz_id, pair_id, k, seed }) = records.next() else {
            return Err(Error::Malformed(format!("{}: missing quiz header", path.display())));
        };
        let questions = records
            .map(|r| match r {
                QuizRecord::Question(q) => Ok(q),
                QuizRecord::Header { .. } => Err(Error::Malformed(format!("{}: repeated quiz header", path.display()))),
            })
            .collect::<Result<Vec<_>>>()?;
        if questions.len() != k {
            return Err(Error::Malformed(format!("{}: header says k={k}, found {}", path.display(), questions.len())));
        }
        Ok(Self { quiz_id, pair_id, k, seed, questions })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum QuizRecord {
    Header { quiz_id: String, pair_id: String, k: usize, seed: u64 },
    Question(QuizQuestion),
}

/// `k` test-split questions, gold-balanced (w1 takes the odd one out).
pub fn make_quiz(pool: &SentencePool, k: usize, seed: u64) -> Result<Quiz> {
    make_quiz_excluding(pool, k, seed, &HashSet::new())
}

/// As [`make_quiz`], never drawing a sentence whose id is in `exclude`.
pub fn make_quiz_excluding(pool: &SentencePool, k: usize, seed: u64, exclude: &HashSet<String>) -> Result<Quiz> {
    if k == 0 {
        return Err(Error::EmptyQuiz);
    }
    let pair = pool.pair();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut questions = Vec::with_capacity(k);
    for (member, need) in [(Member::First, k - k / 2), (Member::Second, k / 2)] {
        let available: Vec<&TargetSentence> =
            pool.test(member).iter().filter(|s| !exclude.contains(&s.sentence_id)).collect();
        if available.len() < need {
            return Err(Error::PoolTooSmall(format!(
                "quiz of {k} needs {need} test sentences for '{}', have {}",
                pair.word(member),
                available.len()
            )));
        }
        for i in index::sample(&mut rng, available.len(), need) {
            let s = available[i];
            questions.push(QuizQuestion { question: s.clone(), gold: s.context_owner });
        }
    }
    questions.shuffle(&mut rng);
    Ok(Quiz { quiz_id: format!("{}-k{k}-s{seed}", pair.id()), pair_id: pair.id().to_string(), k, seed, questions })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub chosen: Member,
    pub gold: Member,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuizResult {
    pub quiz_id: String,
    pub set_id: String,
    pub accuracy: f64,
    pub per_question: Vec<QuestionOutcome>,
}

impl QuizResult {
    pub fn correct(&self) -> usize {
        self.per_question.iter().filter(|o| o.chosen == o.gold).count()
    }
}

/// The result-file row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub set_id: String,
    pub quiz_id: String,
    pub accuracy: f64,
}

impl From<&QuizResult> for ResultRow {
    fn from(r: &QuizResult) -> Self {
        Self { set_id: r.set_id.clone(), quiz_id: r.quiz_id.clone(), accuracy: r.accuracy }
    }
}

fn check_pairs(agent: &Agent, set: &ExampleSet, quiz: &Quiz, pair: &NearSynonymPair) -> Result<()> {
    for found in [agent.pair_id(), &set.pair_id, &quiz.pair_id] {
        if found != pair.id() {
            return Err(Error::PairMismatch { expected: pair.id().to_string(), found: found.to_string() });
        }
    }
    Ok(())
}

/// Answers every question with the agent reading `set`.
pub fn run_quiz(agent: &Agent, set: &ExampleSet, quiz: &Quiz, pair: &NearSynonymPair) -> Result<QuizResult> {
    check_pairs(agent, set, quiz, pair)?;
    if quiz.questions.is_empty() {
        return Err(Error::EmptyQuiz);
    }
    let answers = agent.answer_fitb_batch(set, &quiz.sentences(), pair)?;
    let per_question: Vec<QuestionOutcome> = quiz
        .questions
        .iter()
        .zip(answers)
        .map(|(q, a)| QuestionOutcome { question_id: q.id().to_string(), chosen: a.chosen, gold: q.gold })
        .collect();
    let correct = per_question.iter().filter(|o| o.chosen == o.gold).count();
    Ok(QuizResult {
        quiz_id: quiz.quiz_id.clone(),
        set_id: set.set_id(),
        accuracy: correct as f64 / per_question.len() as f64,
        per_question,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KCalibration {
    pub k: usize,
    /// All pairwise correlations between quizzes; `None` where a vector had zero variance.
    pub correlations: Vec<Option<f64>>,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub per_k: Vec<KCalibration>,
}

/// Pairwise Pearson correlations between accuracy vectors, with min and median.
pub fn summarize_correlations(k: usize, vectors: &[Vec<f64>]) -> KCalibration {
    let mut correlations = Vec::new();
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            correlations.push(pearson_correlation(&vectors[i], &vectors[j]).ok());
        }
    }
    let mut defined: Vec<f64> = correlations.iter().flatten().copied().collect();
    defined.sort_by(f64::total_cmp);
    let median = match defined.len() {
        0 => None,
        n if n % 2 == 1 => Some(defined[n / 2]),
        n => Some((defined[n / 2 - 1] + defined[n / 2]) / 2.0),
    };
    KCalibration {
        k,
        excluded: correlations.len() - defined.len(),
        min: defined.first().copied(),
        median,
        correlations,
    }
}

/// Calibration driven by any scorer returning one accuracy per set for a
/// (k, quiz seed) pair.
pub fn calibrate_with<F>(k_candidates: &[usize], seed: u64, mut score: F) -> Result<CalibrationReport>
where
    F: FnMut(usize, u64) -> Result<Vec<f64>>,
{
    if k_candidates.len() < 2 {
        return Err(Error::Config("calibration needs at least 2 k candidates".into()));
    }
    let per_k = k_candidates
        .iter()
        .map(|&k| {
            let vectors = (0..CALIBRATION_QUIZZES as u64)
                .map(|i| score(k, seed.wrapping_add(i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize_correlations(k, &vectors))
        })
        .collect::<Result<_>>()?;
    Ok(CalibrationReport { per_k })
}

/// For each k, five quizzes with distinct seeds; each quiz yields a vector of
/// per-set accuracies, and the vectors are correlated pairwise.
pub fn calibrate_quiz_size(
    agent: &Agent,
    sets: &[ExampleSet],
    pool: &SentencePool,
    k_candidates: &[usize],
    seed: u64,
) -> Result<CalibrationReport> {
    if sets.len() < 2 {
        return Err(Error::Config("calibration needs at least 2 example sets".into()));
    }
    let exclude: HashSet<String> = sets.iter().flat_map(ExampleSet::ids).collect();
    calibrate_with(k_candidates, seed, |k, quiz_seed| {
        let quiz = make_quiz_excluding(pool, k, quiz_seed, &exclude)?;
        sets.par_iter()
            .map(|set| run_quiz(agent, set, &quiz, pool.pair()).map(|r| r.accuracy))
            .collect()
    })
}
