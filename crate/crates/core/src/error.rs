use thiserror::Error;

/// Errors produced anywhere in the synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("tape already consumed by a backward pass")]
    TapeConsumed,

    #[error("schema error for variable `{variable}`: {message}")]
    Schema { variable: String, message: String },

    #[error("capacity exceeded: {len} items, capacity {capacity}")]
    Capacity { len: usize, capacity: usize },

    #[error("combinatorial blow-up: {bins} joint bins exceeds cap {cap}")]
    CombinatorialBlowup { bins: u128, cap: usize },

    #[error("bin structure mismatch: {0}")]
    Structural(String),

    #[error("integrity error at byte offset {offset}: {message}")]
    Integrity { offset: u64, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("non-finite {phase} loss at step {step}; training aborted")]
    NonFiniteLoss { step: u64, phase: &'static str },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn schema(variable: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            variable: variable.into(),
            message: message.into(),
        }
    }
}
