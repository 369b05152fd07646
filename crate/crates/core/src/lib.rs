//! Learner-like agents for near-synonym lexical choice.
//!
//! The crate covers the whole offline pipeline: sentence pools per word pair,
//! entailment and context training instances (with perturbation), the two
//! agent flavours and their classifier backends, fill-in-the-blank quizzes,
//! the behavior check, and exhaustive example-sentence selection.

pub mod agent;
pub mod behavior;
pub mod corpus;
pub mod error;
pub mod instances;
pub mod jsonl;
pub mod quiz;
pub mod selector;
pub mod synthetic;

pub use error::{Error, Result};
