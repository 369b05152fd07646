//! Entailment and context-modelling instances, normal and perturbed.
//!
//! Template ids follow the eight entailment cases (2-5 normal, 6-9 with the
//! example swapped) and the four context cases (11-12 normal, 13-14 with the
//! whole example set swapped).

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{match_case, Member, NearSynonymPair, SentencePool, Split, TargetSentence};
use crate::{jsonl, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntailLabel {
    Entail,
    NotEntail,
}

impl EntailLabel {
    pub fn class(self) -> usize {
        match self {
            EntailLabel::Entail => 0,
            EntailLabel::NotEntail => 1,
        }
    }
}

/// Replaces the target with the matching form of the other pair member.
///
/// Only the target token changes; `context_owner` stays put, so applying the
/// swap twice gives back the original sentence.
pub fn swap_target(s: &TargetSentence, pair: &NearSynonymPair) -> Result<TargetSentence> {
    if s.pair_id != pair.id() {
        return Err(Error::PairMismatch { expected: pair.id().into(), found: s.pair_id.clone() });
    }
    let token = s.tokens.get(s.target_index).ok_or_else(|| Error::InvalidSentence {
        id: s.sentence_id.clone(),
        reason: "target_index out of range".into(),
    })?;
    let (member, tag) = pair
        .identify(token)
        .filter(|(m, _)| *m == s.filled_word)
        .ok_or_else(|| Error::InvalidSentence {
            id: s.sentence_id.clone(),
            reason: format!("'{token}' is not a form of {}", pair.word(s.filled_word)),
        })?;
    let replacement = pair.forms().form(member.other(), tag).ok_or_else(|| Error::MissingInflection {
        form: token.clone(),
        target: pair.word(member.other()).to_string(),
    })?;
    let mut out = s.clone();
    out.tokens[s.target_index] = match_case(token, replacement);
    out.filled_word = member.other();
    Ok(out)
}

/// `entail` iff both the filled word and the context owner agree.
pub fn entail_label(example: &TargetSentence, question: &TargetSentence) -> Result<EntailLabel> {
    if example.pair_id != question.pair_id {
        return Err(Error::PairMismatch {
            expected: example.pair_id.clone(),
            found: question.pair_id.clone(),
        });
    }
    Ok(
        if example.filled_word == question.filled_word && example.context_owner == question.context_owner {
            EntailLabel::Entail
        } else {
            EntailLabel::NotEntail
        },
    )
}

/// Template id (2-9) of an (example, question) combination, relative to the
/// example's context owner.
pub fn entail_template(example: &TargetSentence, question: &TargetSentence) -> u8 {
    let a = example.context_owner;
    let base = if example.is_authentic() { 2 } else { 6 };
    let offset = match (question.filled_word == a, question.context_owner == a) {
        (true, true) => 0,
        (false, false) => 1,
        (false, true) => 2,
        (true, false) => 3,
    };
    base + offset
}

/// Six example sentences: slots 0-2 presented for w1, slots 3-5 for w2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleSet {
    pub pair_id: String,
    examples: Vec<TargetSentence>,
}

impl ExampleSet {
    pub const PER_WORD: usize = 3;

    pub fn new(pair_id: impl Into<String>, examples: Vec<TargetSentence>) -> Result<Self> {
        let pair_id = pair_id.into();
        if examples.len() != 2 * Self::PER_WORD {
            return Err(Error::InvalidSet(format!("expected 6 examples, got {}", examples.len())));
        }
        if let Some(s) = examples.iter().find(|s| s.pair_id != pair_id) {
            return Err(Error::PairMismatch { expected: pair_id, found: s.pair_id.clone() });
        }
        Ok(Self { pair_id, examples })
    }

    pub fn from_slots(pair_id: impl Into<String>, w1: &[TargetSentence], w2: &[TargetSentence]) -> Result<Self> {
        Self::new(pair_id, w1.iter().chain(w2).cloned().collect())
    }

    pub fn examples(&self) -> &[TargetSentence] {
        &self.examples
    }

    /// The three sentences sitting in `member`'s presentation slot.
    pub fn slot(&self, member: Member) -> &[TargetSentence] {
        let start = member.slot() * Self::PER_WORD;
        &self.examples[start..start + Self::PER_WORD]
    }

    /// Members whose target slot shows `member`'s word, in set order.
    pub fn displaying(&self, member: Member) -> impl Iterator<Item = &TargetSentence> {
        self.examples.iter().filter(move |s| s.filled_word == member)
    }

    pub fn ids(&self) -> Vec<String> {
        self.examples.iter().map(|s| s.sentence_id.clone()).collect()
    }

    pub fn set_id(&self) -> String {
        self.ids().join("+")
    }

    pub fn is_authentic(&self) -> bool {
        self.examples.iter().all(TargetSentence::is_authentic)
    }

    /// Every member swapped; slots unchanged.
    pub fn swapped(&self, pair: &NearSynonymPair) -> Result<Self> {
        let examples = self.examples.iter().map(|s| swap_target(s, pair)).collect::<Result<_>>()?;
        Self::new(self.pair_id.clone(), examples)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntailmentInstance {
    pub template: u8,
    pub example: TargetSentence,
    pub question: TargetSentence,
    pub label: EntailLabel,
    pub perturbed: bool,
}

impl EntailmentInstance {
    pub fn new(example: TargetSentence, question: TargetSentence) -> Result<Self> {
        let label = entail_label(&example, &question)?;
        Ok(Self {
            template: entail_template(&example, &question),
            perturbed: !example.is_authentic(),
            example,
            question,
            label,
        })
    }
}

/// A six-example set plus a question whose target is masked at encoding time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextInstance {
    pub template: u8,
    pub example_set: ExampleSet,
    /// Presentation order over `example_set` slots.
    pub order: [usize; 6],
    pub question: TargetSentence,
    pub answer: Member,
    pub perturbed: bool,
}

impl ContextInstance {
    pub fn ordered_examples(&self) -> impl Iterator<Item = &TargetSentence> {
        self.order.iter().map(|&i| &self.example_set.examples()[i])
    }
}

/// Normal-to-perturbed instance ratio, e.g. `2:1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixRatio {
    pub normal: u32,
    pub perturbed: u32,
}

impl MixRatio {
    pub fn new(normal: u32, perturbed: u32) -> Result<Self> {
        if normal == 0 || perturbed == 0 {
            return Err(Error::Config(format!("mix ratio weights must be positive, got {normal}:{perturbed}")));
        }
        Ok(Self { normal, perturbed })
    }

    /// (normal, perturbed) counts for `total` instances.
    pub fn split(&self, total: usize) -> (usize, usize) {
        let weight = (self.normal + self.perturbed) as f64;
        let normal = (total as f64 * self.normal as f64 / weight).round() as usize;
        (normal, total - normal)
    }
}

impl Default for MixRatio {
    fn default() -> Self {
        Self { normal: 2, perturbed: 1 }
    }
}

impl std::str::FromStr for MixRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("ratio must look like 2:1, got '{s}'")))?;
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| Error::Config(format!("ratio '{s}': {e}")));
        Self::new(parse(a)?, parse(b)?)
    }
}

impl fmt::Display for MixRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.normal, self.perturbed)
    }
}

/// What to build and from which split.
#[derive(Clone, Debug)]
pub struct BuildOptions {
    /// `None` builds normal instances only.
    pub ratio: Option<MixRatio>,
    /// Defaults to twice the number of sentences in the split.
    pub total: Option<usize>,
    pub split: Split,
    pub seed: u64,
}

impl BuildOptions {
    pub fn new(ratio: Option<MixRatio>, seed: u64) -> Self {
        Self { ratio, total: None, split: Split::Train, seed }
    }

    pub fn with_total(mut self, total: usize) -> Self {
        self.total = Some(total);
        self
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    fn counts(&self, pool: &SentencePool) -> (usize, usize) {
        let total = self.total.unwrap_or_else(|| {
            2 * Member::BOTH.iter().map(|&m| pool.split(self.split, m).len()).sum::<usize>()
        });
        match self.ratio {
            Some(r) => r.split(total),
            None => (total, 0),
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, from: &'a [TargetSentence], not: Option<&TargetSentence>) -> &'a TargetSentence {
    loop {
        let s = &from[rng.random_range(0..from.len())];
        if not.is_none_or(|n| n.sentence_id != s.sentence_id) {
            return s;
        }
    }
}

/// Balanced entailment instances covering templates 2-5 and (when perturbing) 6-9.
///
/// Each family produces half `entail` and half `not_entail`; the negatives
/// rotate through the three not-entail templates so every case is present.
pub fn build_entailment_instances(pool: &SentencePool, opts: &BuildOptions) -> Result<Vec<EntailmentInstance>> {
    let pair = pool.pair();
    let sources = [pool.split(opts.split, Member::First), pool.split(opts.split, Member::Second)];
    if sources.iter().any(|s| s.len() < 2) {
        return Err(Error::PoolTooSmall(format!(
            "entailment instances need at least 2 {:?} sentences per word",
            opts.split
        )));
    }
    let (n_normal, n_perturbed) = opts.counts(pool);
    if let Some(r) = opts.ratio {
        if n_normal == 0 || n_perturbed == 0 {
            return Err(Error::PoolTooSmall(format!(
                "{} instances cannot honour ratio {r}",
                n_normal + n_perturbed
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(n_normal + n_perturbed);
    for (count, perturbed) in [(n_normal, false), (n_perturbed, true)] {
        let positives = count / 2;
        for i in 0..count {
            let a = Member::from_slot(i % 2);
            let b = a.other();
            let example = pick(&mut rng, sources[a.slot()], None);
            let question = if i < positives {
                // 2 / 8: same context, same filled word as the (possibly swapped) example
                pick(&mut rng, sources[a.slot()], Some(example)).clone()
            } else {
                match (i - positives) % 3 {
                    0 => pick(&mut rng, sources[b.slot()], None).clone(),
                    1 => {
                        let q = pick(&mut rng, sources[a.slot()], Some(example));
                        if perturbed { q.clone() } else { swap_target(q, pair)? }
                    }
                    _ => swap_target(pick(&mut rng, sources[b.slot()], None), pair)?,
                }
            };
            let (example, question) = if perturbed && i < positives {
                (swap_target(example, pair)?, swap_target(&question, pair)?)
            } else if perturbed {
                (swap_target(example, pair)?, question)
            } else {
                (example.clone(), question)
            };
            out.push(EntailmentInstance::new(example, question)?);
        }
    }
    out.sort_by(|x, y| {
        (x.template, &x.example.sentence_id, &x.question.sentence_id).cmp(&(
            y.template,
            &y.example.sentence_id,
            &y.question.sentence_id,
        ))
    });
    Ok(out)
}

/// Context-modelling instances: authentic sets (templates 11-12) and, when
/// perturbing, fully swapped sets whose answer is the opposite word (13-14).
pub fn build_context_instances(pool: &SentencePool, opts: &BuildOptions) -> Result<Vec<ContextInstance>> {
    let pair = pool.pair();
    let sources = [pool.split(opts.split, Member::First), pool.split(opts.split, Member::Second)];
    if sources.iter().any(|s| s.len() < ExampleSet::PER_WORD + 1) {
        return Err(Error::PoolTooSmall(format!(
            "context instances need at least 4 {:?} sentences per word",
            opts.split
        )));
    }
    let (n_normal, n_perturbed) = opts.counts(pool);
    if let Some(r) = opts.ratio {
        if n_normal == 0 || n_perturbed == 0 {
            return Err(Error::PoolTooSmall(format!(
                "{} instances cannot honour ratio {r}",
                n_normal + n_perturbed
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(n_normal + n_perturbed);
    for (count, perturbed) in [(n_normal, false), (n_perturbed, true)] {
        for i in 0..count {
            let c = Member::from_slot(i % 2);
            let question = pick(&mut rng, sources[c.slot()], None).clone();
            let mut members = Vec::with_capacity(6);
            for m in Member::BOTH {
                let src = sources[m.slot()];
                let chosen: Vec<usize> = loop {
                    let idx = index::sample(&mut rng, src.len(), ExampleSet::PER_WORD).into_vec();
                    if idx.iter().all(|&j| src[j].sentence_id != question.sentence_id) {
                        break idx;
                    }
                };
                members.extend(chosen.into_iter().map(|j| src[j].clone()));
            }
            let mut set = ExampleSet::new(pair.id(), members)?;
            if perturbed {
                set = set.swapped(pair)?;
            }
            let mut order = [0, 1, 2, 3, 4, 5];
            order.shuffle(&mut rng);
            let answer = if perturbed { c.other() } else { c };
            out.push(ContextInstance {
                template: if perturbed { 13 } else { 11 } + c.slot() as u8,
                example_set: set,
                order,
                question,
                answer,
                perturbed,
            });
        }
    }
    out.sort_by(|x, y| (x.template, &x.question.sentence_id).cmp(&(y.template, &y.question.sentence_id)));
    Ok(out)
}

/// One line of an instance file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InstanceRecord {
    Entail {
        template: u8,
        pair_id: String,
        example_id: String,
        question_id: String,
        label: EntailLabel,
        perturbed: bool,
        example: TargetSentence,
        question: TargetSentence,
    },
    Context {
        template: u8,
        pair_id: String,
        set_ids: Vec<String>,
        question_id: String,
        label: Member,
        perturbed: bool,
        order: [usize; 6],
        example_set: ExampleSet,
        question: TargetSentence,
    },
}

impl From<&EntailmentInstance> for InstanceRecord {
    fn from(i: &EntailmentInstance) -> Self {
        InstanceRecord::Entail {
            template: i.template,
            pair_id: i.example.pair_id.clone(),
            example_id: i.example.sentence_id.clone(),
            question_id: i.question.sentence_id.clone(),
            label: i.label,
            perturbed: i.perturbed,
            example: i.example.clone(),
            question: i.question.clone(),
        }
    }
}

impl From<&ContextInstance> for InstanceRecord {
    fn from(i: &ContextInstance) -> Self {
        InstanceRecord::Context {
            template: i.template,
            pair_id: i.example_set.pair_id.clone(),
            set_ids: i.order.iter().map(|&k| i.example_set.examples()[k].sentence_id.clone()).collect(),
            question_id: i.question.sentence_id.clone(),
            label: i.answer,
            perturbed: i.perturbed,
            order: i.order,
            example_set: i.example_set.clone(),
            question: i.question.clone(),
        }
    }
}

/// Instances of one mode, as read back from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum InstanceBatch {
    Entailment(Vec<EntailmentInstance>),
    Context(Vec<ContextInstance>),
}

impl InstanceBatch {
    pub fn len(&self) -> usize {
        match self {
            InstanceBatch::Entailment(v) => v.len(),
            InstanceBatch::Context(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pair_ids(&self) -> HashSet<&str> {
        match self {
            InstanceBatch::Entailment(v) => v.iter().map(|i| i.example.pair_id.as_str()).collect(),
            InstanceBatch::Context(v) => v.iter().map(|i| i.example_set.pair_id.as_str()).collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            InstanceBatch::Entailment(v) => jsonl::write_records(path, v.iter().map(InstanceRecord::from)),
            InstanceBatch::Context(v) => jsonl::write_records(path, v.iter().map(InstanceRecord::from)),
        }
    }

    /// Reads an instance file; mixing entail and context records is an error.
    pub fn load(path: &Path) -> Result<Self> {
        let records: Vec<InstanceRecord> = jsonl::read_records(path)?;
        let mut entail = Vec::new();
        let mut context = Vec::new();
        for r in records {
            match r {
                InstanceRecord::Entail { example, question, perturbed, .. } => {
                    let mut inst = EntailmentInstance::new(example, question)?;
                    inst.perturbed = perturbed;
                    entail.push(inst);
                }
                InstanceRecord::Context { template, example_set, order, question, label, perturbed, .. } => {
                    context.push(ContextInstance { template, example_set, order, question, answer: label, perturbed })
                }
            }
        }
        match (entail.is_empty(), context.is_empty()) {
            (false, true) => Ok(InstanceBatch::Entailment(entail)),
            (true, false) => Ok(InstanceBatch::Context(context)),
            (true, true) => Ok(InstanceBatch::Entailment(Vec::new())),
            (false, false) => Err(Error::ModeMismatch { agent: "entail", input: "context" }),
        }
    }
}
