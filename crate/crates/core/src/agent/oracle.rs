//! Analytic backend that reads sentence metadata instead of tokens.

use std::path::Path;

use super::backend::{ClassifierBackend, LabeledInput, ModelInput};
use super::{AgentConfig, BackendKind, EpochReport, TrainingReport};
use crate::instances::{entail_label, EntailLabel};
use crate::Result;

#[derive(Clone, Copy, Debug, Default)]
pub struct OracleBackend;

impl OracleBackend {
    fn probs(input: &ModelInput<'_>) -> Result<[f64; 2]> {
        match input {
            ModelInput::Entailment { example, question } => Ok(match entail_label(example, question)? {
                EntailLabel::Entail => [1.0, 0.0],
                EntailLabel::NotEntail => [0.0, 1.0],
            }),
            // the word the matching-context examples display
            ModelInput::Context { examples, question } => {
                let mut votes = [0usize; 2];
                for e in examples.iter().filter(|e| e.context_owner == question.context_owner) {
                    votes[e.filled_word.slot()] += 1;
                }
                Ok(match votes[0].cmp(&votes[1]) {
                    std::cmp::Ordering::Greater => [1.0, 0.0],
                    std::cmp::Ordering::Less => [0.0, 1.0],
                    std::cmp::Ordering::Equal => [0.5, 0.5],
                })
            }
        }
    }
}

impl ClassifierBackend for OracleBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Oracle
    }

    fn train(&mut self, train: &[LabeledInput<'_>], held_out: &[LabeledInput<'_>], _: &AgentConfig) -> Result<TrainingReport> {
        let accuracy = if held_out.is_empty() {
            None
        } else {
            let mut hits = 0;
            for item in held_out {
                let p = Self::probs(&item.input)?;
                hits += usize::from(p[item.label] > 0.5);
            }
            Some(hits as f64 / held_out.len() as f64)
        };
        Ok(TrainingReport {
            train_size: train.len(),
            held_out_size: held_out.len(),
            steps: 0,
            initial_loss: 0.0,
            final_loss: 0.0,
            epochs: vec![EpochReport { epoch: 1, mean_loss: 0.0, held_out_accuracy: accuracy }],
        })
    }

    fn predict(&self, batch: &[ModelInput<'_>], _: &AgentConfig) -> Result<Vec<[f64; 2]>> {
        batch.iter().map(Self::probs).collect()
    }

    fn save(&self, _: &Path) -> Result<()> {
        Ok(())
    }
}
