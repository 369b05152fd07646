use std::path::Path;

use super::encode::{encode_context_input, encode_entailment_input, EncodedSequence};
use super::{AgentConfig, AgentMode, BackendKind, TrainingReport};
use crate::corpus::TargetSentence;
use crate::Result;

/// One model query. Class 0 is `entail` / w1, class 1 is `not_entail` / w2.
#[derive(Clone, Debug)]
pub enum ModelInput<'a> {
    Entailment { example: &'a TargetSentence, question: &'a TargetSentence },
    /// `question` is masked at its target slot during encoding.
    Context { examples: Vec<&'a TargetSentence>, question: &'a TargetSentence },
}

impl ModelInput<'_> {
    pub fn mode(&self) -> AgentMode {
        match self {
            ModelInput::Entailment { .. } => AgentMode::Entailment,
            ModelInput::Context { .. } => AgentMode::Context,
        }
    }

    pub fn encode(&self, max_len: usize) -> Result<EncodedSequence> {
        match self {
            ModelInput::Entailment { example, question } => Ok(encode_entailment_input(example, question, max_len)),
            ModelInput::Context { examples, question } => encode_context_input(examples, question, max_len),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LabeledInput<'a> {
    pub input: ModelInput<'a>,
    pub label: usize,
}

/// A two-class classifier the agents run on.
///
/// Implementations return one probability pair per input; each pair sums to
/// one. `predict` must not depend on how inputs are batched.
pub trait ClassifierBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn train(&mut self, train: &[LabeledInput<'_>], held_out: &[LabeledInput<'_>], cfg: &AgentConfig)
        -> Result<TrainingReport>;

    fn predict(&self, batch: &[ModelInput<'_>], cfg: &AgentConfig) -> Result<Vec<[f64; 2]>>;

    /// Writes backend weights into the model directory.
    fn save(&self, dir: &Path) -> Result<()>;
}
