use thiserror::Error;

pub type Result<T, E = StudyError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("participant {0} already has an active session")]
    Duplicate(String),
    #[error("readme cap reached for set {set_id}, word '{word}'")]
    CapReached { set_id: String, word: String },
    #[error("{0}")]
    Precondition(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("sessions without proficiency score: {}", .0.join(", "))]
    MissingProficiency(Vec<String>),
    #[error("incomplete session {0}")]
    Incomplete(String),
    #[error("malformed {path} line {line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
