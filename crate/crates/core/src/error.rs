use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("rule list is empty")]
    NoRules,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid label `{0}` (expected -1 or 1)")]
    InvalidLabel(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("partition depth {depth} in dimension {dims} exceeds the 2^20 cell cap")]
    DepthTooLarge { depth: usize, dims: usize },

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("sample of size {n} is too small (need at least {min})")]
    SampleTooSmall { n: usize, min: usize },

    #[error("malformed input at record {record}: {msg}")]
    Parse { record: usize, msg: String },

    #[error("no SVM in the grid converged")]
    NoConvergedModels,

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
