//! Word pairs, target sentences and balanced sentence pools.

mod inflection;
mod ingest;
mod pool;
mod tagger;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use inflection::{match_case, FormTag, InflectionTable};
pub use ingest::{ingest_corpus, read_corpus_dir, tokenize, Document, IngestOutput, SkipReport};
pub use pool::{build_pool, SentencePool};
pub use tagger::{PosTagger, RuleTagger, TagError};

/// Sentences outside this token range are dropped at ingest.
pub const MIN_SENTENCE_TOKENS: usize = 5;
pub const MAX_SENTENCE_TOKENS: usize = 60;

/// Coarse part-of-speech tag set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pos {
    #[serde(rename = "ADJ")]
    Adj,
    #[serde(rename = "NOUN")]
    Noun,
    #[serde(rename = "VERB")]
    Verb,
    #[serde(rename = "ADV")]
    Adv,
}

impl Pos {
    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Adj => "ADJ",
            Pos::Noun => "NOUN",
            Pos::Verb => "VERB",
            Pos::Adv => "ADV",
        }
    }
}

impl std::str::FromStr for Pos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ADJ" => Ok(Pos::Adj),
            "NOUN" => Ok(Pos::Noun),
            "VERB" => Ok(Pos::Verb),
            "ADV" => Ok(Pos::Adv),
            other => Err(Error::InvalidPair(format!("unknown part of speech '{other}'"))),
        }
    }
}

/// One of the two words of a pair. Serialized as `1` or `2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Member {
    First,
    Second,
}

impl Member {
    pub const BOTH: [Member; 2] = [Member::First, Member::Second];

    pub fn other(self) -> Member {
        match self {
            Member::First => Member::Second,
            Member::Second => Member::First,
        }
    }

    /// 0 or 1, for indexing per-member arrays.
    pub fn slot(self) -> usize {
        match self {
            Member::First => 0,
            Member::Second => 1,
        }
    }

    pub fn from_slot(slot: usize) -> Member {
        if slot == 0 {
            Member::First
        } else {
            Member::Second
        }
    }

    pub fn number(self) -> u8 {
        self.slot() as u8 + 1
    }
}

impl TryFrom<u8> for Member {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Member::First),
            2 => Ok(Member::Second),
            other => Err(format!("pair member must be 1 or 2, got {other}")),
        }
    }
}

impl From<Member> for u8 {
    fn from(m: Member) -> u8 {
        m.number()
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.number())
    }
}

/// The confusing word pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NearSynonymPair {
    id: String,
    words: [String; 2],
    pos: Pos,
    forms: InflectionTable,
}

impl NearSynonymPair {
    /// A pair that recognises each word by its exact lemma only.
    pub fn new(id: impl Into<String>, w1: &str, w2: &str, pos: Pos) -> Result<Self> {
        let id = id.into();
        let (w1, w2) = (w1.trim(), w2.trim());
        if id.trim().is_empty() {
            return Err(Error::InvalidPair("empty pair id".into()));
        }
        if w1.is_empty() || w2.is_empty() {
            return Err(Error::InvalidPair(format!("{id}: empty word")));
        }
        if w1.eq_ignore_ascii_case(w2) {
            return Err(Error::InvalidPair(format!("{id}: w1 == w2 ('{w1}')")));
        }
        if w1.split_whitespace().count() > 1 || w2.split_whitespace().count() > 1 {
            return Err(Error::InvalidPair(format!("{id}: multi-word entries are not supported")));
        }
        Ok(Self {
            id,
            words: [w1.to_lowercase(), w2.to_lowercase()],
            forms: InflectionTable::exact(w1, w2),
            pos,
        })
    }

    /// Switches to the generated table of regular inflections.
    pub fn with_regular_inflections(mut self) -> Self {
        self.forms = InflectionTable::regular(&self.words[0], &self.words[1], self.pos);
        self
    }

    pub fn with_form(mut self, member: Member, tag: FormTag, surface: &str) -> Self {
        self.forms.set_form(member, tag, surface);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn word(&self, member: Member) -> &str {
        &self.words[member.slot()]
    }

    pub fn pos(&self) -> Pos {
        self.pos
    }

    pub fn forms(&self) -> &InflectionTable {
        &self.forms
    }

    /// Which member (and which form of it) a token is, if any.
    pub fn identify(&self, token: &str) -> Option<(Member, FormTag)> {
        self.forms.identify(token)
    }

    pub fn member_of_word(&self, word: &str) -> Option<Member> {
        let lower = word.to_lowercase();
        Member::BOTH.into_iter().find(|m| self.words[m.slot()] == lower)
    }

    /// Parses one `pair_id<TAB>w1<TAB>w2<TAB>pos` line.
    pub fn parse_line(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::InvalidPair(format!(
                "expected 4 tab-separated columns, found {}: {line:?}",
                cols.len()
            )));
        }
        Self::new(cols[0].trim(), cols[1], cols[2], cols[3].parse()?)
    }

    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.id, self.words[0], self.words[1], self.pos.as_str())
    }
}

pub fn read_pairs(path: &Path) -> Result<Vec<NearSynonymPair>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(NearSynonymPair::parse_line)
        .collect()
}

pub fn write_pairs(path: &Path, pairs: &[NearSynonymPair]) -> Result<()> {
    let mut text = String::new();
    for p in pairs {
        text.push_str(&p.to_line());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// A sentence with one target-word slot.
///
/// `filled_word` names the pair member occupying the slot; `context_owner`
/// names the member the rest of the sentence was written for. Authentic
/// sentences have the two equal; swapped sentences do not.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSentence {
    pub sentence_id: String,
    pub pair_id: String,
    pub tokens: Vec<String>,
    pub target_index: usize,
    pub filled_word: Member,
    pub context_owner: Member,
    pub split: Option<Split>,
}

impl TargetSentence {
    pub fn is_authentic(&self) -> bool {
        self.filled_word == self.context_owner
    }

    pub fn target(&self) -> &str {
        &self.tokens[self.target_index]
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Checks the slot and uniqueness invariants against the pair.
    pub fn validate(&self, pair: &NearSynonymPair) -> Result<()> {
        let bad = |reason: String| Error::InvalidSentence {
            id: self.sentence_id.clone(),
            reason,
        };
        if self.pair_id != pair.id() {
            return Err(Error::PairMismatch {
                expected: pair.id().to_string(),
                found: self.pair_id.clone(),
            });
        }
        if self.target_index >= self.tokens.len() {
            return Err(bad(format!(
                "target_index {} out of range for {} tokens",
                self.target_index,
                self.tokens.len()
            )));
        }
        match pair.identify(self.target()) {
            Some((m, _)) if m == self.filled_word => {}
            _ => {
                return Err(bad(format!(
                    "token '{}' is not a form of {}",
                    self.target(),
                    pair.word(self.filled_word)
                )))
            }
        }
        let hits = self.tokens.iter().filter(|t| pair.identify(t).is_some()).count();
        if hits != 1 {
            return Err(bad(format!("{hits} target occurrences")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_invariants() {
        assert!(NearSynonymPair::new("p", "little", "little", Pos::Adj).is_err());
        assert!(NearSynonymPair::new("p", "", "small", Pos::Adj).is_err());
        assert!(NearSynonymPair::new("p", "a b", "small", Pos::Adj).is_err());
        assert!(NearSynonymPair::parse_line("p\tlittle\tsmall\tPREP").is_err());
        let p = NearSynonymPair::parse_line("p01\tlittle\tsmall\tADJ").unwrap();
        assert_eq!(p.word(Member::Second), "small");
        assert_eq!(p.to_line(), "p01\tlittle\tsmall\tADJ");
    }

    #[test]
    fn member_serializes_as_number() {
        assert_eq!(serde_json::to_string(&Member::Second).unwrap(), "2");
        assert_eq!(serde_json::from_str::<Member>("1").unwrap(), Member::First);
        assert!(serde_json::from_str::<Member>("3").is_err());
    }

    #[test]
    fn validate_rejects_double_occurrence() {
        let pair = NearSynonymPair::new("p", "little", "small", Pos::Adj).unwrap();
        let s = TargetSentence {
            sentence_id: "s".into(),
            pair_id: "p".into(),
            tokens: "a little and small dog".split(' ').map(String::from).collect(),
            target_index: 1,
            filled_word: Member::First,
            context_owner: Member::First,
            split: None,
        };
        assert!(s.validate(&pair).is_err());
    }
}
