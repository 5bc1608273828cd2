use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty cloud")]
    EmptyCloud,
    #[error("out of grid bounds")]
    OutOfGrid,
    #[error("degenerate component")]
    DegenerateComponent,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("no candidates")]
    NoCandidates,
    #[error("unreachable")]
    Unreachable,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unlabeled model `{0}`")]
    UnlabeledModel(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error("episode exceeded its step budget of {0}")]
    StepBudgetExceeded(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Bincode(#[from] bincode::Error),
}
