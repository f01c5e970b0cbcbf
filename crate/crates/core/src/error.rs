use crate::model::TaskId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("task {0} is not assigned")]
    Unassigned(TaskId),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("user {0} has no pending tasks")]
    NoPendingTasks(usize),

    #[error("Jain index is undefined: {0}")]
    UndefinedJain(&'static str),

    #[error("exhaustive search needs {required:e} path combinations, budget is {budget}")]
    BudgetExceeded { required: f64, budget: u64 },

    #[error("simplex did not converge after {iterations} iterations ({phase})")]
    NonConvergence { iterations: usize, phase: &'static str },

    #[error("inconsistent batch: {0}")]
    MixedBatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
