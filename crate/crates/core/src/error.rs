use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step budget exhausted (step_count = {0})")]
    BudgetExhausted(usize),
    #[error("task not admissible: {0}")]
    InadmissibleTask(String),
    #[error("pose unreachable: {0}")]
    Unreachable(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("benchmark counts unsatisfiable: {0}")]
    Unsatisfiable(String),
    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
