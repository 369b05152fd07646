//! Exhaustive example-set search against a quiz, selection metrics, and the
//! mixture-model baseline.

pub mod gmm;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentMode, Aggregation, ModelInput};
use crate::corpus::{Member, NearSynonymPair, SentencePool, TargetSentence};
use crate::instances::ExampleSet;
use crate::quiz::{run_quiz, Quiz};
use crate::{jsonl, Error, Result};

pub use gmm::{gmm_baseline_select, ContextEmbedder, DiagonalGmm, GmmSelection, HashedContextEmbedder};

/// Candidate sentences per word in the standard setting.
pub const STANDARD_CANDIDATES: usize = 10;

/// Candidate example sentences per word plus the annotated helpful ones.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePool {
    pub pair_id: String,
    candidates: [Vec<TargetSentence>; 2],
    gold: [Vec<String>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub pair_id: String,
    pub word: String,
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub target_index: usize,
    pub gold: bool,
}

impl CandidatePool {
    /// Candidates must be authentic and belong to the word of their slot; gold
    /// ids must be candidates of the same word.
    pub fn new(pair_id: impl Into<String>, candidates: [Vec<TargetSentence>; 2], gold: [Vec<String>; 2]) -> Result<Self> {
        let pair_id = pair_id.into();
        let mut seen = HashSet::new();
        for m in Member::BOTH {
            for s in &candidates[m.slot()] {
                if s.pair_id != pair_id {
                    return Err(Error::PairMismatch { expected: pair_id, found: s.pair_id.clone() });
                }
                if s.filled_word != m || !s.is_authentic() {
                    return Err(Error::InvalidSentence {
                        id: s.sentence_id.clone(),
                        reason: format!("not an authentic {m} candidate"),
                    });
                }
                if !seen.insert(s.sentence_id.as_str()) {
                    return Err(Error::InvalidSentence { id: s.sentence_id.clone(), reason: "duplicate candidate".into() });
                }
            }
            for g in &gold[m.slot()] {
                if !candidates[m.slot()].iter().any(|s| &s.sentence_id == g) {
                    return Err(Error::InvalidSet(format!("gold id {g} is not a {m} candidate")));
                }
            }
        }
        Ok(Self { pair_id, candidates, gold })
    }

    pub fn candidates(&self, member: Member) -> &[TargetSentence] {
        &self.candidates[member.slot()]
    }

    pub fn gold(&self, member: Member) -> &[String] {
        &self.gold[member.slot()]
    }

    pub fn gold_ids(&self) -> BTreeSet<String> {
        self.gold.iter().flatten().cloned().collect()
    }

    pub fn ids(&self) -> HashSet<String> {
        self.candidates.iter().flatten().map(|s| s.sentence_id.clone()).collect()
    }

    /// Draws `per_word` test-split candidates per word, skipping `exclude`.
    /// `gold` picks the helpful ids among the drawn candidates of one word.
    pub fn sample(
        pool: &SentencePool,
        per_word: usize,
        exclude: &HashSet<String>,
        seed: u64,
        mut gold: impl FnMut(&[TargetSentence]) -> Vec<String>,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut candidates: [Vec<TargetSentence>; 2] = Default::default();
        let mut golds: [Vec<String>; 2] = Default::default();
        for m in Member::BOTH {
            let available: Vec<&TargetSentence> =
                pool.test(m).iter().filter(|s| !exclude.contains(&s.sentence_id)).collect();
            if available.len() < per_word {
                return Err(Error::PoolTooSmall(format!(
                    "need {per_word} candidates for '{}', have {}",
                    pool.pair().word(m),
                    available.len()
                )));
            }
            let mut picked: Vec<usize> = index::sample(&mut rng, available.len(), per_word).into_vec();
            picked.sort_unstable();
            candidates[m.slot()] = picked.into_iter().map(|i| available[i].clone()).collect();
            golds[m.slot()] = gold(&candidates[m.slot()]);
        }
        Self::new(pool.pair().id(), candidates, golds)
    }

    pub fn records(&self, pair: &NearSynonymPair) -> Vec<CandidateRecord> {
        let gold = self.gold_ids();
        Member::BOTH
            .iter()
            .flat_map(|&m| self.candidates(m).iter().map(move |s| (m, s)))
            .map(|(m, s)| CandidateRecord {
                pair_id: self.pair_id.clone(),
                word: pair.word(m).to_string(),
                sentence_id: s.sentence_id.clone(),
                tokens: s.tokens.clone(),
                target_index: s.target_index,
                gold: gold.contains(&s.sentence_id),
            })
            .collect()
    }

    pub fn save(&self, path: &Path, pair: &NearSynonymPair) -> Result<()> {
        jsonl::write_records(path, self.records(pair))
    }

    /// Reads the records of `pair` from a candidate-pool file.
    pub fn load(path: &Path, pair: &NearSynonymPair) -> Result<Self> {
        let mut candidates: [Vec<TargetSentence>; 2] = Default::default();
        let mut gold: [Vec<String>; 2] = Default::default();
        for r in jsonl::read_records::<CandidateRecord>(path)? {
            if r.pair_id != pair.id() {
                continue;
            }
            let m = pair
                .member_of_word(&r.word)
                .ok_or_else(|| Error::Malformed(format!("{}: '{}' is not a word of {}", r.sentence_id, r.word, pair.id())))?;
            if r.gold {
                gold[m.slot()].push(r.sentence_id.clone());
            }
            let s = TargetSentence {
                sentence_id: r.sentence_id,
                pair_id: r.pair_id,
                tokens: r.tokens,
                target_index: r.target_index,
                filled_word: m,
                context_owner: m,
                split: None,
            };
            s.validate(pair)?;
            candidates[m.slot()].push(s);
        }
        Self::new(pair.id(), candidates, gold)
    }
}

/// Indices into the two candidate lists; the set shows w1 candidates first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SetIndex {
    pub w1: [usize; 3],
    pub w2: [usize; 3],
}

impl SetIndex {
    pub fn materialize(&self, pool: &CandidatePool) -> Result<ExampleSet> {
        let pick = |m: Member, idx: &[usize; 3]| idx.iter().map(|&i| pool.candidates(m)[i].clone()).collect::<Vec<_>>();
        ExampleSet::from_slots(&pool.pair_id, &pick(Member::First, &self.w1), &pick(Member::Second, &self.w2))
    }

    pub fn ids(&self, pool: &CandidatePool) -> [String; 6] {
        let id = |m: Member, i: usize| pool.candidates(m)[i].sentence_id.clone();
        [
            id(Member::First, self.w1[0]),
            id(Member::First, self.w1[1]),
            id(Member::First, self.w1[2]),
            id(Member::Second, self.w2[0]),
            id(Member::Second, self.w2[1]),
            id(Member::Second, self.w2[2]),
        ]
    }
}

/// All 3-combinations of 0..n in lexicographic order.
pub fn combinations3(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Every 3+3 set, lexicographic in (w1 triple, w2 triple).
pub fn enumerate_example_sets(pool: &CandidatePool) -> Result<Vec<SetIndex>> {
    let n = Member::BOTH.map(|m| pool.candidates(m).len());
    if n.iter().any(|&c| c < ExampleSet::PER_WORD) {
        return Err(Error::PoolTooSmall(format!(
            "each word needs at least 3 candidates, have {}/{}",
            n[0], n[1]
        )));
    }
    let (c1, c2) = (combinations3(n[0]), combinations3(n[1]));
    Ok(c1.iter().flat_map(|&w1| c2.iter().map(move |&w2| SetIndex { w1, w2 })).collect())
}

/// P(entail) for every (candidate, question, fill) triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub pair_id: String,
    pub quiz_id: String,
    /// Candidate ids, w1 candidates first.
    pub example_ids: Vec<String>,
    pub question_ids: Vec<String>,
    pub gold: Vec<Member>,
    /// Number of w1 candidates; the rest are w2.
    pub n_first: usize,
    /// Indexed `[example][question][fill]`.
    cells: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_cells(
        pair_id: impl Into<String>,
        quiz: &Quiz,
        example_ids: Vec<String>,
        n_first: usize,
        cells: Vec<f64>,
    ) -> Result<Self> {
        let k = quiz.questions.len();
        if cells.len() != example_ids.len() * k * 2 {
            return Err(Error::Malformed(format!(
                "score matrix needs {} cells, got {}",
                example_ids.len() * k * 2,
                cells.len()
            )));
        }
        if let Some(p) = cells.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Malformed(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self {
            pair_id: pair_id.into(),
            quiz_id: quiz.quiz_id.clone(),
            example_ids,
            question_ids: quiz.questions.iter().map(|q| q.id().to_string()).collect(),
            gold: quiz.questions.iter().map(|q| q.gold).collect(),
            n_first,
            cells,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.example_ids.len(), self.question_ids.len(), 2)
    }

    pub fn get(&self, example: usize, question: usize, fill: Member) -> f64 {
        self.cells[(example * self.question_ids.len() + question) * 2 + fill.slot()]
    }

    fn row(&self, member: Member, i: usize) -> usize {
        match member {
            Member::First => i,
            Member::Second => self.n_first + i,
        }
    }

    /// Correct answers of one set, aggregating exactly as the agent does.
    pub fn correct(&self, set: &SetIndex, aggregation: Aggregation) -> usize {
        let rows1 = set.w1.map(|i| self.row(Member::First, i));
        let rows2 = set.w2.map(|i| self.row(Member::Second, i));
        (0..self.question_ids.len())
            .filter(|&q| {
                let s1 = aggregation.apply(&rows1.map(|r| self.get(r, q, Member::First)));
                let s2 = aggregation.apply(&rows2.map(|r| self.get(r, q, Member::Second)));
                let chosen = if s2 > s1 { Member::Second } else { Member::First };
                chosen == self.gold[q]
            })
            .count()
    }
}

/// One batched pass over all candidates × questions × fills.
pub fn build_score_matrix(agent: &Agent, pool: &CandidatePool, quiz: &Quiz, pair: &NearSynonymPair) -> Result<ScoreMatrix> {
    if agent.mode() != AgentMode::Entailment {
        return Err(Error::ModeMismatch { agent: agent.mode().name(), input: "entailment" });
    }
    if quiz.questions.is_empty() {
        return Err(Error::EmptyQuiz);
    }
    let filled: Vec<[TargetSentence; 2]> = quiz
        .questions
        .iter()
        .map(|q| Ok([crate::agent::fill_blank(&q.question, Member::First, pair)?, crate::agent::fill_blank(&q.question, Member::Second, pair)?]))
        .collect::<Result<_>>()?;
    let examples: Vec<&TargetSentence> = Member::BOTH.iter().flat_map(|&m| pool.candidates(m)).collect();
    let cells: Vec<f64> = examples
        .par_iter()
        .map(|e| {
            let batch: Vec<ModelInput<'_>> = filled
                .iter()
                .flat_map(|f| f.iter().map(|q| ModelInput::Entailment { example: e, question: q }))
                .collect();
            Ok(agent.predict(&batch)?.into_iter().map(|d| d.entail()).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    ScoreMatrix::from_cells(
        &pool.pair_id,
        quiz,
        examples.iter().map(|s| s.sentence_id.clone()).collect(),
        pool.candidates(Member::First).len(),
        cells,
    )
}

/// Correct-answer counts for every enumerated set, in enumeration order.
pub type SetScores = Vec<(SetIndex, usize)>;

pub fn score_sets_with_matrix(matrix: &ScoreMatrix, sets: &[SetIndex], aggregation: Aggregation) -> SetScores {
    sets.par_iter().map(|s| (*s, matrix.correct(s, aggregation))).collect()
}

/// Runs the full quiz once per set through the agent.
pub fn score_sets_directly(
    agent: &Agent,
    pool: &CandidatePool,
    quiz: &Quiz,
    pair: &NearSynonymPair,
    sets: &[SetIndex],
) -> Result<SetScores> {
    sets.par_iter()
        .map(|s| Ok((*s, run_quiz(agent, &s.materialize(pool)?, quiz, pair)?.correct())))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SelectionMetrics {
    pub fn compute(selected: &BTreeSet<String>, gold: &BTreeSet<String>) -> Option<Self> {
        if selected.is_empty() || gold.is_empty() {
            return None;
        }
        let hit = selected.intersection(gold).count() as f64;
        let precision = hit / selected.len() as f64;
        let recall = hit / gold.len() as f64;
        let f1 = if hit == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Some(Self { precision, recall, f1 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub pair_id: String,
    pub quiz_id: String,
    pub best_accuracy: f64,
    /// Ids of each best set, three w1 candidates then three w2 candidates.
    pub argmax_sets: Vec<[String; 6]>,
    pub selected_union: BTreeSet<String>,
    pub most_common_three: [Vec<String>; 2],
    /// Absent when the pool carries no gold annotation.
    pub metrics: Option<SelectionMetrics>,
}

/// Reduces per-set scores to the tied best sets and their statistics.
pub fn summarize_selection(pool: &CandidatePool, quiz: &Quiz, scores: &SetScores) -> Result<SelectionResult> {
    if quiz.questions.is_empty() {
        return Err(Error::EmptyQuiz);
    }
    let best = scores.iter().map(|(_, c)| *c).max().ok_or_else(|| Error::PoolTooSmall("no sets to score".into()))?;
    let argmax_sets: Vec<[String; 6]> = scores.iter().filter(|(_, c)| *c == best).map(|(s, _)| s.ids(pool)).collect();
    let selected_union: BTreeSet<String> = argmax_sets.iter().flatten().cloned().collect();
    let most_common_three = most_common_three(&argmax_sets);
    let metrics = SelectionMetrics::compute(&selected_union, &pool.gold_ids());
    Ok(SelectionResult {
        pair_id: pool.pair_id.clone(),
        quiz_id: quiz.quiz_id.clone(),
        best_accuracy: best as f64 / quiz.questions.len() as f64,
        argmax_sets,
        selected_union,
        most_common_three,
        metrics,
    })
}

/// Evaluates every set. Entailment agents read a precomputed score matrix;
/// context agents run each set's quiz directly.
pub fn select_best_sets(agent: &Agent, pool: &CandidatePool, quiz: &Quiz, pair: &NearSynonymPair) -> Result<SelectionResult> {
    if quiz.questions.is_empty() {
        return Err(Error::EmptyQuiz);
    }
    let sets = enumerate_example_sets(pool)?;
    let scores = match agent.mode() {
        AgentMode::Entailment => {
            let matrix = build_score_matrix(agent, pool, quiz, pair)?;
            score_sets_with_matrix(&matrix, &sets, agent.config().aggregation)
        }
        AgentMode::Context => score_sets_directly(agent, pool, quiz, pair, &sets)?,
    };
    summarize_selection(pool, quiz, &scores)
}

/// Per word, the three ids seen most often across the best sets; equal
/// counts go to the smaller id.
pub fn most_common_three(argmax_sets: &[[String; 6]]) -> [Vec<String>; 2] {
    [0usize, 3].map(|offset| {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for set in argmax_sets {
            for id in &set[offset..offset + 3] {
                *counts.entry(id.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.into_iter().take(3).map(|(id, _)| id.to_string()).collect()
    })
}

/// Result-file row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub pair_id: String,
    pub best_accuracy: f64,
    pub argmax_set_count: usize,
    pub selected_union: BTreeSet<String>,
    pub most_common_three: [Vec<String>; 2],
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl From<&SelectionResult> for SelectionRecord {
    fn from(r: &SelectionResult) -> Self {
        Self {
            pair_id: r.pair_id.clone(),
            best_accuracy: r.best_accuracy,
            argmax_set_count: r.argmax_sets.len(),
            selected_union: r.selected_union.clone(),
            most_common_three: r.most_common_three.clone(),
            precision: r.metrics.map(|m| m.precision),
            recall: r.metrics.map(|m| m.recall),
            f1: r.metrics.map(|m| m.f1),
        }
    }
}

pub fn write_selections(path: &Path, results: &[SelectionResult]) -> Result<()> {
    jsonl::write_records(path, results.iter().map(SelectionRecord::from))
}

pub fn read_selections(path: &Path) -> Result<Vec<SelectionRecord>> {
    jsonl::read_records(path)
}
