//! The two learner-like agents and their classifier backends.
//!
//! An entailment agent scores (example, question) pairs and answers a blank
//! by comparing, per candidate word, the entailment probability of the filled
//! question against the examples showing that word. A context agent reads the
//! six examples plus the masked question and picks a word directly.

mod backend;
pub mod encode;
mod light;
mod optim;
mod oracle;
mod transformer;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Member, NearSynonymPair, TargetSentence};
use crate::instances::{swap_target, ExampleSet, InstanceBatch};
use crate::{Error, Result};

pub use backend::{ClassifierBackend, LabeledInput, ModelInput};
pub use light::{LightBackend, LightModel, Vocabulary};
pub use optim::{scheduled_rate, Adam, OptimizerConfig};
pub use oracle::OracleBackend;
pub use transformer::{PretrainedEncoder, TransformerBackend};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    Entailment,
    Context,
}

impl AgentMode {
    pub fn name(self) -> &'static str {
        match self {
            AgentMode::Entailment => "entailment",
            AgentMode::Context => "context",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Transformer,
    Light,
    Oracle,
}

/// How an entailment agent combines the examples of one word at quiz time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
    /// Fraction of examples with P(entail) > 0.5.
    Vote,
}

impl Aggregation {
    pub fn apply(self, probs: &[f64]) -> f64 {
        match self {
            Aggregation::Mean => probs.iter().sum::<f64>() / probs.len() as f64,
            Aggregation::Max => probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Vote => probs.iter().filter(|&&p| p > 0.5).count() as f64 / probs.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LightConfig {
    pub embedding_dim: usize,
    pub init_scale: f64,
}

impl Default for LightConfig {
    fn default() -> Self {
        Self { embedding_dim: 16, init_scale: 0.1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub encoder_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub mode: AgentMode,
    pub max_sequence_length: usize,
    pub learning_rate: f64,
    pub warmup_ratio: f64,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub backend: BackendKind,
    pub aggregation: Aggregation,
    /// Share of the instances kept aside for the per-epoch accuracy.
    pub held_out_fraction: f64,
    pub light: LightConfig,
    pub transformer: TransformerConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            mode: AgentMode::Entailment,
            max_sequence_length: 256,
            learning_rate: 5e-5,
            warmup_ratio: 0.30,
            optimizer: OptimizerConfig::default(),
            epochs: 3,
            batch_size: 32,
            seed: 0,
            backend: BackendKind::Transformer,
            aggregation: Aggregation::Mean,
            held_out_fraction: 0.1,
            light: LightConfig::default(),
            transformer: TransformerConfig::default(),
        }
    }
}

impl AgentConfig {
    /// Settings for the light backend on desk-sized data.
    pub fn light_desk(mode: AgentMode) -> Self {
        Self { mode, backend: BackendKind::Light, learning_rate: 0.01, epochs: 8, ..Self::default() }
    }

    pub fn oracle(mode: AgentMode) -> Self {
        Self { mode, backend: BackendKind::Oracle, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.warmup_ratio > 0.0 && self.warmup_ratio < 1.0) {
            return Err(Error::Config(format!("warmup_ratio must be in (0, 1), got {}", self.warmup_ratio)));
        }
        if self.max_sequence_length < 16 {
            return Err(Error::Config(format!("max_sequence_length must be >= 16, got {}", self.max_sequence_length)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.held_out_fraction) {
            return Err(Error::Config(format!("held_out_fraction must be in [0, 1), got {}", self.held_out_fraction)));
        }
        if self.light.embedding_dim == 0 {
            return Err(Error::Config("light.embedding_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub held_out_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_size: usize,
    pub held_out_size: usize,
    pub steps: usize,
    /// Mean training loss before the first update.
    pub initial_loss: f64,
    /// Mean training loss after the last update.
    pub final_loss: f64,
    pub epochs: Vec<EpochReport>,
}

impl TrainingReport {
    pub fn final_held_out_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.held_out_accuracy)
    }
}

/// A two-way distribution; labels depend on the mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionDistribution {
    pub mode: AgentMode,
    pub probs: [f64; 2],
}

impl PredictionDistribution {
    pub fn entail(&self) -> f64 {
        self.probs[0]
    }

    pub fn not_entail(&self) -> f64 {
        self.probs[1]
    }

    pub fn word(&self, member: Member) -> f64 {
        self.probs[member.slot()]
    }

    pub fn labels(&self) -> [&'static str; 2] {
        match self.mode {
            AgentMode::Entailment => ["entail", "not_entail"],
            AgentMode::Context => ["w1", "w2"],
        }
    }
}

/// A trained agent for one word pair.
pub struct Agent {
    config: AgentConfig,
    pair_id: String,
    backend: Box<dyn ClassifierBackend>,
}

#[derive(Serialize, Deserialize)]
struct AgentMeta {
    pair_id: String,
}

fn new_backend(cfg: &AgentConfig) -> Result<Box<dyn ClassifierBackend>> {
    Ok(match cfg.backend {
        BackendKind::Oracle => Box::new(OracleBackend),
        BackendKind::Light => Box::new(LightBackend::new(cfg.mode)),
        BackendKind::Transformer => Box::new(TransformerBackend::new(cfg)?),
    })
}

/// Trains an agent on one pair's instances.
///
/// A seeded `held_out_fraction` of the instances is kept out of training and
/// scored after every epoch. Warmup covers `warmup_ratio` of all steps.
pub fn train_agent(instances: &InstanceBatch, cfg: &AgentConfig) -> Result<(Agent, TrainingReport)> {
    cfg.validate()?;
    let input_mode = match instances {
        InstanceBatch::Entailment(_) => AgentMode::Entailment,
        InstanceBatch::Context(_) => AgentMode::Context,
    };
    if input_mode != cfg.mode {
        return Err(Error::ModeMismatch { agent: cfg.mode.name(), input: input_mode.name() });
    }
    if instances.is_empty() {
        return Err(Error::Config("no training instances".into()));
    }
    let pair_ids = instances.pair_ids();
    if pair_ids.len() != 1 {
        return Err(Error::Config(format!("instances span {} word pairs; train one agent per pair", pair_ids.len())));
    }
    let pair_id = pair_ids.into_iter().next().unwrap_or_default().to_string();

    let labeled: Vec<LabeledInput<'_>> = match instances {
        InstanceBatch::Entailment(v) => v
            .iter()
            .map(|i| LabeledInput {
                input: ModelInput::Entailment { example: &i.example, question: &i.question },
                label: i.label.class(),
            })
            .collect(),
        InstanceBatch::Context(v) => v
            .iter()
            .map(|i| LabeledInput {
                input: ModelInput::Context { examples: i.ordered_examples().collect(), question: &i.question },
                label: i.answer.slot(),
            })
            .collect(),
    };
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_held = ((labeled.len() as f64) * cfg.held_out_fraction).floor() as usize;
    let held_out: Vec<LabeledInput<'_>> = order[..n_held].iter().map(|&i| labeled[i].clone()).collect();
    let train: Vec<LabeledInput<'_>> = order[n_held..].iter().map(|&i| labeled[i].clone()).collect();

    let mut backend = new_backend(cfg)?;
    let report = backend.train(&train, &held_out, cfg)?;
    Ok((Agent { config: cfg.clone(), pair_id, backend }, report))
}

/// Per-example entailment score inside a FITB answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub example_id: String,
    pub candidate: Member,
    pub entail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitbAnswer {
    pub chosen: Member,
    /// Aggregated score per candidate (entailment) or the word distribution (context).
    pub scores: [f64; 2],
    pub breakdown: Vec<PairScore>,
}

impl FitbAnswer {
    fn from_scores(scores: [f64; 2], breakdown: Vec<PairScore>) -> Self {
        // ties go to w1
        let chosen = if scores[1] > scores[0] { Member::Second } else { Member::First };
        Self { chosen, scores, breakdown }
    }
}

/// The question with its blank filled by `member`'s form.
pub fn fill_blank(question: &TargetSentence, member: Member, pair: &NearSynonymPair) -> Result<TargetSentence> {
    if question.filled_word == member {
        Ok(question.clone())
    } else {
        swap_target(question, pair)
    }
}

impl Agent {
    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn mode(&self) -> AgentMode {
        self.config.mode
    }

    pub fn pair_id(&self) -> &str {
        &self.pair_id
    }

    pub fn backend(&self) -> &dyn ClassifierBackend {
        self.backend.as_ref()
    }

    /// An untrained oracle agent; it needs no instances.
    pub fn oracle(mode: AgentMode, pair_id: impl Into<String>) -> Self {
        Self { config: AgentConfig::oracle(mode), pair_id: pair_id.into(), backend: Box::new(OracleBackend) }
    }

    pub fn predict(&self, batch: &[ModelInput<'_>]) -> Result<Vec<PredictionDistribution>> {
        if let Some(bad) = batch.iter().find(|i| i.mode() != self.mode()) {
            return Err(Error::ModeMismatch { agent: self.mode().name(), input: bad.mode().name() });
        }
        let probs = self.backend.predict(batch, &self.config)?;
        Ok(probs.into_iter().map(|probs| PredictionDistribution { mode: self.mode(), probs }).collect())
    }

    pub fn predict_entailment(&self, example: &TargetSentence, question: &TargetSentence) -> Result<PredictionDistribution> {
        let out = self.predict(&[ModelInput::Entailment { example, question }])?;
        Ok(out[0])
    }

    /// Entailment-mode FITB answers for several blank questions in one batch.
    pub fn answer_fitb_entailment_batch(
        &self,
        set: &ExampleSet,
        questions: &[&TargetSentence],
        pair: &NearSynonymPair,
    ) -> Result<Vec<FitbAnswer>> {
        if self.mode() != AgentMode::Entailment {
            return Err(Error::ModeMismatch { agent: self.mode().name(), input: "entailment" });
        }
        let groups: [Vec<&TargetSentence>; 2] = [
            set.displaying(Member::First).collect(),
            set.displaying(Member::Second).collect(),
        ];
        for m in Member::BOTH {
            if groups[m.slot()].is_empty() {
                return Err(Error::EmptySlot(pair.word(m).to_string()));
            }
        }
        let filled: Vec<[TargetSentence; 2]> = questions
            .iter()
            .map(|q| Ok([fill_blank(q, Member::First, pair)?, fill_blank(q, Member::Second, pair)?]))
            .collect::<Result<_>>()?;
        let mut batch = Vec::new();
        for f in &filled {
            for m in Member::BOTH {
                for e in &groups[m.slot()] {
                    batch.push(ModelInput::Entailment { example: e, question: &f[m.slot()] });
                }
            }
        }
        let probs = self.predict(&batch)?;
        let mut it = probs.into_iter();
        let mut answers = Vec::with_capacity(questions.len());
        for _ in questions {
            let mut scores = [0.0; 2];
            let mut breakdown = Vec::with_capacity(6);
            for m in Member::BOTH {
                let ps: Vec<f64> = groups[m.slot()]
                    .iter()
                    .map(|e| {
                        let p = it.next().expect("one prediction per pair").entail();
                        breakdown.push(PairScore { example_id: e.sentence_id.clone(), candidate: m, entail: p });
                        p
                    })
                    .collect();
                scores[m.slot()] = self.config.aggregation.apply(&ps);
            }
            answers.push(FitbAnswer::from_scores(scores, breakdown));
        }
        Ok(answers)
    }

    pub fn answer_fitb_entailment(&self, set: &ExampleSet, question: &TargetSentence, pair: &NearSynonymPair) -> Result<FitbAnswer> {
        Ok(self.answer_fitb_entailment_batch(set, &[question], pair)?.remove(0))
    }

    /// Context-mode answers; examples are shown in set order.
    pub fn answer_fitb_context_batch(&self, set: &ExampleSet, questions: &[&TargetSentence]) -> Result<Vec<FitbAnswer>> {
        if self.mode() != AgentMode::Context {
            return Err(Error::ModeMismatch { agent: self.mode().name(), input: "context" });
        }
        let examples: Vec<&TargetSentence> = set.examples().iter().collect();
        let batch: Vec<ModelInput<'_>> = questions
            .iter()
            .map(|q| ModelInput::Context { examples: examples.clone(), question: q })
            .collect();
        Ok(self
            .predict(&batch)?
            .into_iter()
            .map(|d| FitbAnswer::from_scores(d.probs, Vec::new()))
            .collect())
    }

    pub fn answer_fitb_context(&self, set: &ExampleSet, question: &TargetSentence) -> Result<FitbAnswer> {
        Ok(self.answer_fitb_context_batch(set, &[question])?.remove(0))
    }

    /// Dispatches on the agent's mode.
    pub fn answer_fitb_batch(&self, set: &ExampleSet, questions: &[&TargetSentence], pair: &NearSynonymPair) -> Result<Vec<FitbAnswer>> {
        match self.mode() {
            AgentMode::Entailment => self.answer_fitb_entailment_batch(set, questions, pair),
            AgentMode::Context => self.answer_fitb_context_batch(set, questions),
        }
    }

    /// Writes config echo, backend weights, vocabulary and the training report.
    pub fn save(&self, dir: &Path, report: Option<&TrainingReport>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)?)?;
        std::fs::write(dir.join("agent.json"), serde_json::to_string(&AgentMeta { pair_id: self.pair_id.clone() })?)?;
        if let Some(r) = report {
            std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(r)?)?;
        }
        self.backend.save(dir)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config: AgentConfig = serde_json::from_str(&std::fs::read_to_string(dir.join("config.json"))?)?;
        let meta: AgentMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("agent.json"))?)?;
        let backend: Box<dyn ClassifierBackend> = match config.backend {
            BackendKind::Oracle => Box::new(OracleBackend),
            BackendKind::Light => Box::new(LightBackend::load(dir)?),
            BackendKind::Transformer => Box::new(TransformerBackend::load(dir)?),
        };
        Ok(Self { config, pair_id: meta.pair_id, backend })
    }
}
