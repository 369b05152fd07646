//! Operator-supplied question sets and the example sentences each arm shows.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StudyError};
use crate::session::Arm;

pub const QUESTIONS_PER_SET: usize = 3;
pub const EXAMPLES_PER_WORD: usize = 3;
pub const CATALOG_FILE: &str = "question_sets.jsonl";
pub const EXAMPLES_FILE: &str = "examples.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyQuestion {
    pub question_id: String,
    /// Sentence with the blank written as `___`.
    pub text: String,
    pub choices: [String; 2],
    pub gold: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionSet {
    pub set_id: String,
    pub pair_id: String,
    pub questions: Vec<StudyQuestion>,
    pub provenance: String,
}

impl QuestionSet {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| StudyError::Invalid(format!("question set {}: {msg}", self.set_id));
        if self.questions.len() != QUESTIONS_PER_SET {
            return Err(bad(format!("expected 3 questions, got {}", self.questions.len())));
        }
        let words = &self.questions[0].choices;
        if words[0] == words[1] {
            return Err(bad("choices must be two different words".into()));
        }
        let mut ids = HashSet::new();
        for q in &self.questions {
            if &q.choices != words {
                return Err(bad(format!("question {} offers different choices", q.question_id)));
            }
            if !q.choices.contains(&q.gold) {
                return Err(bad(format!("question {} gold '{}' is not a choice", q.question_id, q.gold)));
            }
            if !ids.insert(q.question_id.as_str()) {
                return Err(bad(format!("duplicate question id {}", q.question_id)));
            }
        }
        Ok(())
    }

    pub fn words(&self) -> &[String; 2] {
        &self.questions[0].choices
    }
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| StudyError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// All question sets, keyed by set id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Catalog {
    sets: BTreeMap<String, QuestionSet>,
}

impl Catalog {
    pub fn new(sets: Vec<QuestionSet>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut question_ids = HashSet::new();
        for set in sets {
            set.validate()?;
            for q in &set.questions {
                if !question_ids.insert(q.question_id.clone()) {
                    return Err(StudyError::Invalid(format!("question id {} used twice", q.question_id)));
                }
            }
            if map.insert(set.set_id.clone(), set).is_some() {
                return Err(StudyError::Invalid("duplicate set id".into()));
            }
        }
        Ok(Self { sets: map })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Self::new(read_jsonl(&dir.join(CATALOG_FILE))?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(CATALOG_FILE), &self.sets.values().collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, set_id: &str) -> Result<&QuestionSet> {
        self.sets.get(set_id).ok_or_else(|| StudyError::NotFound(format!("question set {set_id}")))
    }

    pub fn set_ids(&self) -> Vec<&str> {
        self.sets.keys().map(String::as_str).collect()
    }

    pub fn sets(&self) -> impl Iterator<Item = &QuestionSet> {
        self.sets.values()
    }

    /// The set holding `question_id`, if any.
    pub fn question(&self, question_id: &str) -> Option<(&QuestionSet, &StudyQuestion)> {
        self.sets
            .values()
            .find_map(|s| s.questions.iter().find(|q| q.question_id == question_id).map(|q| (s, q)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyExample {
    pub sentence_id: String,
    pub text: String,
}

/// Where a bank entry came from: a model's selection, or the candidate pool
/// the random arm samples from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleSource {
    Entailment,
    Context,
    Candidates,
}

impl From<Arm> for ExampleSource {
    fn from(arm: Arm) -> Self {
        match arm {
            Arm::Entailment => ExampleSource::Entailment,
            Arm::Context => ExampleSource::Context,
            Arm::Random => ExampleSource::Candidates,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub pair_id: String,
    pub source: ExampleSource,
    pub word: String,
    pub examples: Vec<StudyExample>,
}

/// Example sentences per (pair, source, word), in reveal order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExampleBank {
    entries: BTreeMap<(String, ExampleSource, String), Vec<StudyExample>>,
}

impl ExampleBank {
    pub fn new(entries: Vec<BankEntry>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for e in entries {
            let limit_ok = match e.source {
                ExampleSource::Candidates => e.examples.len() >= EXAMPLES_PER_WORD,
                _ => e.examples.len() == EXAMPLES_PER_WORD,
            };
            if !limit_ok {
                return Err(StudyError::Invalid(format!(
                    "{} {:?} '{}': {} examples",
                    e.pair_id,
                    e.source,
                    e.word,
                    e.examples.len()
                )));
            }
            if map.insert((e.pair_id.clone(), e.source, e.word.clone()), e.examples).is_some() {
                return Err(StudyError::Invalid(format!("duplicate bank entry {} {:?} '{}'", e.pair_id, e.source, e.word)));
            }
        }
        Ok(Self { entries: map })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Self::new(read_jsonl(&dir.join(EXAMPLES_FILE))?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let entries: Vec<BankEntry> = self
            .entries
            .iter()
            .map(|((pair_id, source, word), examples)| BankEntry {
                pair_id: pair_id.clone(),
                source: *source,
                word: word.clone(),
                examples: examples.clone(),
            })
            .collect();
        write_jsonl(&dir.join(EXAMPLES_FILE), &entries)
    }

    pub fn get(&self, pair_id: &str, source: ExampleSource, word: &str) -> Result<&[StudyExample]> {
        self.entries
            .get(&(pair_id.to_string(), source, word.to_string()))
            .map(Vec::as_slice)
            .ok_or_else(|| StudyError::NotFound(format!("{source:?} examples for {pair_id} '{word}'")))
    }

    /// Every catalog pair has all three sources for both words.
    pub fn check_covers(&self, catalog: &Catalog) -> Result<()> {
        for set in catalog.sets() {
            for word in set.words() {
                for source in [ExampleSource::Entailment, ExampleSource::Context, ExampleSource::Candidates] {
                    self.get(&set.pair_id, source, word)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn question(id: &str, gold: &str) -> StudyQuestion {
        StudyQuestion {
            question_id: id.into(),
            text: "a ___ thing".into(),
            choices: ["little".into(), "small".into()],
            gold: gold.into(),
        }
    }

    #[test]
    fn set_shape_is_validated() {
        let mut set = QuestionSet {
            set_id: "s".into(),
            pair_id: "p".into(),
            questions: vec![question("a", "little"), question("b", "small"), question("c", "small")],
            provenance: "fixture".into(),
        };
        set.validate().unwrap();
        set.questions[2].gold = "tiny".into();
        assert!(set.validate().is_err());
        set.questions.pop();
        assert!(set.validate().is_err());
    }

    #[test]
    fn bank_requires_three_model_examples() {
        let ex = |n: usize| (0..n).map(|i| StudyExample { sentence_id: format!("e{i}"), text: "t".into() }).collect();
        let entry = |source, n| BankEntry { pair_id: "p".into(), source, word: "little".into(), examples: ex(n) };
        assert!(ExampleBank::new(vec![entry(ExampleSource::Entailment, 2)]).is_err());
        assert!(ExampleBank::new(vec![entry(ExampleSource::Candidates, 10)]).is_ok());
    }
}
