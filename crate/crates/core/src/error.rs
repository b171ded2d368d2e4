use thiserror::Error;

/// Errors produced by graph construction, model evaluation, explanation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("self-loop ({0}, {0}) cannot be stored; normalization adds self-loops")]
    SelfLoop(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported activation `{0}`")]
    UnsupportedActivation(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("graph is not undirected")]
    NotUndirected,

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("missing explanation for graph(s): {}", .0.join(", "))]
    MissingExplanation(Vec<String>),

    #[error("explanation for `{0}` has no attribute scores")]
    MissingAttributeScores(String),

    #[error("graph has {0} nodes; exhaustive search is limited to {max}", max = crate::oracle::MAX_ORACLE_NODES)]
    TooLarge(usize),

    #[error("invalid count: {0}")]
    InvalidCount(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
