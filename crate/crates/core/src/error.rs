use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("basis dimension exceeds cap of {cap} entries")]
    DimensionCap { cap: usize },

    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at coordinate {coord}")]
    NonFinite { coord: usize, value: f64 },

    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("no atoms")]
    NoAtoms,

    #[error("atom {atom}: non-positive weight {weight}")]
    NonPositiveWeight { atom: usize, weight: f64 },

    #[error("atom {atom}: feature evaluation failed: {msg}")]
    FeatureEval { atom: usize, msg: String },

    #[error("null direction has no nonzero entry")]
    ZeroDirection,

    #[error("node index {index} out of range for {atoms} atoms")]
    IndexOutOfRange { index: usize, atoms: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
