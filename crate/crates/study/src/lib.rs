//! Learner study service: pre-test, post-test with model-chosen examples,
//! readme tracking, questionnaires and improvement analytics.

pub mod analytics;
pub mod catalog;
pub mod error;
pub mod http;
pub mod service;
pub mod session;
pub mod store;

pub use analytics::{compute_improvement, group_report, ArmImprovement, GroupStats, StudyReport};
pub use catalog::{ExampleBank, QuestionSet, StudyExample, StudyQuestion};
pub use error::{Result, StudyError};
pub use service::StudyService;
pub use session::{Arm, Phase, SessionEvent, StudySession};
pub use store::SessionStore;
