//! Session state, the events that change it, and the assignment generator.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, EXAMPLES_PER_WORD};
use crate::error::{Result, StudyError};

pub const SETS_PER_SESSION: usize = 15;
pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Entailment,
    Context,
    Random,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Entailment, Arm::Context, Arm::Random];

    /// Uniform over the three arms.
    pub fn draw(rng: &mut impl Rng) -> Arm {
        Arm::ALL[rng.random_range(0..Arm::ALL.len())]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretest,
    Posttest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub choice: String,
    pub at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadmeEvent {
    pub set_id: String,
    pub word: String,
    /// 0-based position in the arm's reveal order.
    pub example_index: usize,
    pub at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        participant_id: String,
        seed: u64,
        assigned_sets: Vec<String>,
        model_assignment: BTreeMap<String, Arm>,
        proficiency_score: Option<f64>,
        at: u64,
    },
    Answered {
        phase: Phase,
        question_id: String,
        choice: String,
        at: u64,
    },
    Readme {
        set_id: String,
        word: String,
        example_index: usize,
        at: u64,
    },
    Rated {
        set_id: String,
        rating: u8,
        at: u64,
    },
    Proficiency {
        score: f64,
        at: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySession {
    pub session_id: String,
    pub participant_id: String,
    pub seed: u64,
    pub assigned_sets: Vec<String>,
    pub model_assignment: BTreeMap<String, Arm>,
    pub pretest_answers: BTreeMap<String, Answer>,
    pub posttest_answers: BTreeMap<String, Answer>,
    pub readme_events: Vec<ReadmeEvent>,
    pub questionnaire: BTreeMap<String, u8>,
    pub proficiency_score: Option<f64>,
    pub created_at: u64,
}

/// Deterministic session id for a participant and seed.
pub fn session_id(participant_id: &str, seed: u64) -> String {
    let clean: String = participant_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{clean}-{seed}")
}

fn participant_hash(participant_id: &str) -> u64 {
    participant_id
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Picks 15 sets without replacement and one arm per set.
pub fn assign_sets(catalog: &Catalog, participant_id: &str, seed: u64) -> Result<(Vec<String>, BTreeMap<String, Arm>)> {
    let ids = catalog.set_ids();
    if ids.len() < SETS_PER_SESSION {
        return Err(StudyError::Precondition(format!(
            "catalog holds {} question sets, need at least {SETS_PER_SESSION}",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ participant_hash(participant_id));
    let assigned: Vec<String> = index::sample(&mut rng, ids.len(), SETS_PER_SESSION)
        .into_iter()
        .map(|i| ids[i].to_string())
        .collect();
    let arms = assigned.iter().map(|s| (s.clone(), Arm::draw(&mut rng))).collect();
    Ok((assigned, arms))
}

impl StudySession {
    pub fn from_event(event: &SessionEvent) -> Result<Self> {
        match event {
            SessionEvent::Created { session_id, participant_id, seed, assigned_sets, model_assignment, proficiency_score, at } => {
                if assigned_sets.len() != SETS_PER_SESSION {
                    return Err(StudyError::Invalid(format!("{} assigned sets, need {SETS_PER_SESSION}", assigned_sets.len())));
                }
                if assigned_sets.iter().any(|s| !model_assignment.contains_key(s)) || model_assignment.len() != assigned_sets.len() {
                    return Err(StudyError::Invalid("model assignment must cover exactly the assigned sets".into()));
                }
                Ok(Self {
                    session_id: session_id.clone(),
                    participant_id: participant_id.clone(),
                    seed: *seed,
                    assigned_sets: assigned_sets.clone(),
                    model_assignment: model_assignment.clone(),
                    pretest_answers: BTreeMap::new(),
                    posttest_answers: BTreeMap::new(),
                    readme_events: Vec::new(),
                    questionnaire: BTreeMap::new(),
                    proficiency_score: *proficiency_score,
                    created_at: *at,
                })
            }
            _ => Err(StudyError::Invalid("event log must start with a creation event".into())),
        }
    }

    /// Applies one event, enforcing the per-event invariants.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<()> {
        match event {
            SessionEvent::Created { .. } => return Err(StudyError::Invalid("session already created".into())),
            SessionEvent::Answered { phase, question_id, choice, at } => {
                let answer = Answer { choice: choice.clone(), at: *at };
                match phase {
                    Phase::Pretest => self.pretest_answers.insert(question_id.clone(), answer),
                    Phase::Posttest => self.posttest_answers.insert(question_id.clone(), answer),
                };
            }
            SessionEvent::Readme { set_id, word, example_index, at } => {
                let seen = self.readme_count(set_id, word);
                if seen >= EXAMPLES_PER_WORD {
                    return Err(StudyError::CapReached { set_id: set_id.clone(), word: word.clone() });
                }
                if *example_index != seen {
                    return Err(StudyError::Invalid(format!("readme index {example_index} out of order, expected {seen}")));
                }
                self.readme_events.push(ReadmeEvent { set_id: set_id.clone(), word: word.clone(), example_index: *example_index, at: *at });
            }
            SessionEvent::Rated { set_id, rating, .. } => {
                if !(MIN_RATING..=MAX_RATING).contains(rating) {
                    return Err(StudyError::Invalid(format!("difficulty rating must be 1-4, got {rating}")));
                }
                if !self.model_assignment.contains_key(set_id) {
                    return Err(StudyError::NotFound(format!("set {set_id} in session {}", self.session_id)));
                }
                self.questionnaire.insert(set_id.clone(), *rating);
            }
            SessionEvent::Proficiency { score, .. } => {
                if !score.is_finite() {
                    return Err(StudyError::Invalid("proficiency score must be finite".into()));
                }
                self.proficiency_score = Some(*score);
            }
        }
        Ok(())
    }

    pub fn replay(events: &[SessionEvent]) -> Result<Self> {
        let (first, rest) = events.split_first().ok_or_else(|| StudyError::Invalid("empty event log".into()))?;
        let mut session = Self::from_event(first)?;
        for e in rest {
            session.apply(e)?;
        }
        Ok(session)
    }

    pub fn readme_count(&self, set_id: &str, word: &str) -> usize {
        self.readme_events.iter().filter(|e| e.set_id == set_id && e.word == word).count()
    }

    pub fn arm(&self, set_id: &str) -> Result<Arm> {
        self.model_assignment
            .get(set_id)
            .copied()
            .ok_or_else(|| StudyError::NotFound(format!("set {set_id} in session {}", self.session_id)))
    }

    pub fn question_ids(&self, catalog: &Catalog) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for set_id in &self.assigned_sets {
            ids.extend(catalog.get(set_id)?.questions.iter().map(|q| q.question_id.clone()));
        }
        Ok(ids)
    }

    pub fn answers(&self, phase: Phase) -> &BTreeMap<String, Answer> {
        match phase {
            Phase::Pretest => &self.pretest_answers,
            Phase::Posttest => &self.posttest_answers,
        }
    }

    pub fn complete(&self, phase: Phase, catalog: &Catalog) -> Result<bool> {
        let answers = self.answers(phase);
        Ok(self.question_ids(catalog)?.iter().all(|q| answers.contains_key(q)))
    }
}
