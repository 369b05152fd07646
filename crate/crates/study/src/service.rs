//! Session operations behind the wire API. Each session has its own lock;
//! writes to one session are serialised, different sessions proceed in
//! parallel.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{group_report, StudyReport};
use crate::catalog::{Catalog, ExampleBank, ExampleSource, QuestionSet, StudyExample, EXAMPLES_PER_WORD};
use crate::error::{Result, StudyError};
use crate::session::{assign_sets, session_id, Phase, SessionEvent, StudySession};
use crate::store::SessionStore;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub question_id: String,
    pub text: String,
    pub choices: [String; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetView {
    pub set_id: String,
    pub questions: Vec<QuestionView>,
}

impl From<&QuestionSet> for SetView {
    fn from(set: &QuestionSet) -> Self {
        Self {
            set_id: set.set_id.clone(),
            questions: set
                .questions
                .iter()
                .map(|q| QuestionView { question_id: q.question_id.clone(), text: q.text.clone(), choices: q.choices.clone() })
                .collect(),
        }
    }
}

/// What a participant sees on creation; the arm assignment stays server-side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub participant_id: String,
    pub assigned_sets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretestView {
    pub session_id: String,
    pub sets: Vec<SetView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordExamples {
    pub word: String,
    /// Only the examples already revealed by readme clicks.
    pub revealed: Vec<StudyExample>,
    pub remaining: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosttestView {
    pub session_id: String,
    pub set: SetView,
    pub examples: Vec<WordExamples>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerAck {
    pub recorded: usize,
    pub pretest_complete: bool,
    pub posttest_complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadmeAck {
    pub example: StudyExample,
    pub example_index: usize,
    pub remaining: usize,
}

struct Entry {
    session: StudySession,
    events: usize,
}

type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

pub struct StudyService {
    catalog: Catalog,
    bank: ExampleBank,
    store: SessionStore,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    participants: Mutex<HashMap<String, String>>,
    clock: Clock,
}

fn wall_clock_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn text_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl StudyService {
    /// Checks the bank against the catalog and reloads any stored sessions.
    pub fn new(catalog: Catalog, bank: ExampleBank, store: SessionStore) -> Result<Self> {
        bank.check_covers(&catalog)?;
        let mut sessions = HashMap::new();
        let mut participants = HashMap::new();
        for (session, events) in store.load_all()? {
            participants.insert(session.participant_id.clone(), session.session_id.clone());
            sessions.insert(session.session_id.clone(), Arc::new(Mutex::new(Entry { session, events })));
        }
        Ok(Self {
            catalog,
            bank,
            store,
            sessions: RwLock::new(sessions),
            participants: Mutex::new(participants),
            clock: Box::new(wall_clock_ms),
        })
    }

    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>> {
        self.sessions.read().get(id).cloned().ok_or_else(|| StudyError::NotFound(format!("session {id}")))
    }

    fn commit(&self, entry: &mut Entry, event: SessionEvent) -> Result<()> {
        let mut next = entry.session.clone();
        next.apply(&event)?;
        self.store.append(&next, &event, entry.events + 1)?;
        entry.session = next;
        entry.events += 1;
        Ok(())
    }

    /// Samples 15 sets and their arms. Repeating the call with the same
    /// participant and seed returns the existing session.
    pub fn create_session(&self, participant_id: &str, seed: u64, proficiency_score: Option<f64>) -> Result<SessionView> {
        if participant_id.trim().is_empty() {
            return Err(StudyError::Invalid("participant_id must be nonempty".into()));
        }
        let id = session_id(participant_id, seed);
        let mut participants = self.participants.lock();
        if let Some(existing) = participants.get(participant_id) {
            if *existing == id {
                return self.session(&id).map(|s| SessionView {
                    session_id: s.session_id,
                    participant_id: s.participant_id,
                    assigned_sets: s.assigned_sets,
                });
            }
            return Err(StudyError::Duplicate(participant_id.to_string()));
        }
        let (assigned_sets, model_assignment) = assign_sets(&self.catalog, participant_id, seed)?;
        let event = SessionEvent::Created {
            session_id: id.clone(),
            participant_id: participant_id.to_string(),
            seed,
            assigned_sets: assigned_sets.clone(),
            model_assignment,
            proficiency_score,
            at: (self.clock)(),
        };
        let session = StudySession::from_event(&event)?;
        self.store.append(&session, &event, 1)?;
        participants.insert(participant_id.to_string(), id.clone());
        self.sessions.write().insert(id.clone(), Arc::new(Mutex::new(Entry { session, events: 1 })));
        Ok(SessionView { session_id: id, participant_id: participant_id.to_string(), assigned_sets })
    }

    pub fn session(&self, id: &str) -> Result<StudySession> {
        Ok(self.entry(id)?.lock().session.clone())
    }

    /// A copy of every session, sorted by id.
    pub fn sessions(&self) -> Vec<StudySession> {
        let entries: Vec<Arc<Mutex<Entry>>> = self.sessions.read().values().cloned().collect();
        let mut out: Vec<StudySession> = entries.iter().map(|e| e.lock().session.clone()).collect();
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }

    pub fn pretest(&self, id: &str) -> Result<PretestView> {
        let session = self.session(id)?;
        let sets = session
            .assigned_sets
            .iter()
            .map(|s| self.catalog.get(s).map(SetView::from))
            .collect::<Result<_>>()?;
        Ok(PretestView { session_id: session.session_id, sets })
    }

    pub fn submit_answers(&self, id: &str, phase: Phase, answers: &[(String, String)]) -> Result<AnswerAck> {
        let entry = self.entry(id)?;
        let mut entry = entry.lock();
        match phase {
            Phase::Pretest if !entry.session.posttest_answers.is_empty() => {
                return Err(StudyError::Precondition("pre-test is closed once the post-test has started".into()))
            }
            Phase::Posttest if !entry.session.complete(Phase::Pretest, &self.catalog)? => {
                return Err(StudyError::Precondition("pre-test incomplete".into()))
            }
            _ => {}
        }
        for (question_id, choice) in answers {
            let (set, question) = self
                .catalog
                .question(question_id)
                .ok_or_else(|| StudyError::NotFound(format!("question {question_id}")))?;
            if !entry.session.model_assignment.contains_key(&set.set_id) {
                return Err(StudyError::Invalid(format!("question {question_id} is not assigned to session {id}")));
            }
            if !question.choices.contains(choice) {
                return Err(StudyError::Invalid(format!("'{choice}' is not a choice for {question_id}")));
            }
        }
        for (question_id, choice) in answers {
            let event = SessionEvent::Answered { phase, question_id: question_id.clone(), choice: choice.clone(), at: (self.clock)() };
            self.commit(&mut entry, event)?;
        }
        Ok(AnswerAck {
            recorded: answers.len(),
            pretest_complete: entry.session.complete(Phase::Pretest, &self.catalog)?,
            posttest_complete: entry.session.complete(Phase::Posttest, &self.catalog)?,
        })
    }

    fn require_posttest(&self, session: &StudySession, set_id: &str) -> Result<()> {
        if !session.complete(Phase::Pretest, &self.catalog)? {
            return Err(StudyError::Precondition("pre-test incomplete".into()));
        }
        session.arm(set_id).map(|_| ())
    }

    /// The examples an arm shows for one word, in reveal order.
    pub fn arm_examples(&self, session: &StudySession, set_id: &str, word: &str) -> Result<Vec<StudyExample>> {
        let set = self.catalog.get(set_id)?;
        let arm = session.arm(set_id)?;
        let pool = self.bank.get(&set.pair_id, ExampleSource::from(arm), word)?;
        Ok(match ExampleSource::from(arm) {
            ExampleSource::Candidates => {
                let seed = session.seed ^ text_hash(set_id).rotate_left(17) ^ text_hash(word);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                index::sample(&mut rng, pool.len(), EXAMPLES_PER_WORD).into_iter().map(|i| pool[i].clone()).collect()
            }
            _ => pool.to_vec(),
        })
    }

    pub fn posttest(&self, id: &str, set_id: &str) -> Result<PosttestView> {
        let session = self.session(id)?;
        self.require_posttest(&session, set_id)?;
        let set = self.catalog.get(set_id)?;
        let examples = set
            .words()
            .iter()
            .map(|word| {
                let shown = session.readme_count(set_id, word);
                let all = self.arm_examples(&session, set_id, word)?;
                Ok(WordExamples { word: word.clone(), revealed: all[..shown].to_vec(), remaining: all.len() - shown })
            })
            .collect::<Result<_>>()?;
        Ok(PosttestView { session_id: session.session_id, set: SetView::from(set), examples })
    }

    /// Reveals the next example for `word`; at most three per word.
    pub fn readme(&self, id: &str, set_id: &str, word: &str) -> Result<ReadmeAck> {
        let entry = self.entry(id)?;
        let mut entry = entry.lock();
        self.require_posttest(&entry.session, set_id)?;
        let set = self.catalog.get(set_id)?;
        if !set.words().iter().any(|w| w == word) {
            return Err(StudyError::Invalid(format!("'{word}' is not a word of set {set_id}")));
        }
        let shown = entry.session.readme_count(set_id, word);
        let all = self.arm_examples(&entry.session, set_id, word)?;
        if shown >= all.len() {
            return Err(StudyError::CapReached { set_id: set_id.to_string(), word: word.to_string() });
        }
        let event = SessionEvent::Readme { set_id: set_id.to_string(), word: word.to_string(), example_index: shown, at: (self.clock)() };
        self.commit(&mut entry, event)?;
        Ok(ReadmeAck { example: all[shown].clone(), example_index: shown, remaining: all.len() - shown - 1 })
    }

    pub fn questionnaire(&self, id: &str, set_id: &str, rating: u8) -> Result<()> {
        let entry = self.entry(id)?;
        let mut entry = entry.lock();
        self.require_posttest(&entry.session, set_id)?;
        let event = SessionEvent::Rated { set_id: set_id.to_string(), rating, at: (self.clock)() };
        self.commit(&mut entry, event)
    }

    pub fn set_proficiency(&self, id: &str, score: f64) -> Result<()> {
        let entry = self.entry(id)?;
        let mut entry = entry.lock();
        let event = SessionEvent::Proficiency { score, at: (self.clock)() };
        self.commit(&mut entry, event)
    }

    /// Computed on a copy of all sessions taken at call time.
    pub fn report(&self) -> Result<StudyReport> {
        group_report(&self.sessions(), &self.catalog)
    }
}
