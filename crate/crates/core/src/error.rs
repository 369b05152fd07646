use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid word pair: {0}")]
    InvalidPair(String),

    #[error("invalid sentence {id}: {reason}")]
    InvalidSentence { id: String, reason: String },

    #[error("insufficient candidates for '{word}': need {need} have {have}")]
    InsufficientCandidates { word: String, need: usize, have: usize },

    #[error("no inflection-matched form of '{form}' for '{target}'")]
    MissingInflection { form: String, target: String },

    #[error("pair mismatch: expected '{expected}', found '{found}'")]
    PairMismatch { expected: String, found: String },

    #[error("pool too small: {0}")]
    PoolTooSmall(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mode mismatch: agent is {agent}, input is {input}")]
    ModeMismatch { agent: &'static str, input: &'static str },

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("sequence too long: {0}")]
    SequenceTooLong(String),

    #[error("empty example slot for word {0}")]
    EmptySlot(String),

    #[error("empty quiz")]
    EmptyQuiz,

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("invalid statistics input: {0}")]
    StatsInput(String),

    #[error("invalid example set: {0}")]
    InvalidSet(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("{path}: line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed record: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
