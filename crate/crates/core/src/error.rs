use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site index {index} out of range 1..={bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("R-matrix `{model}` has a pole at ({k1}, {k2}): |denominator| = {denominator:.3e}")]
    Pole {
        model: String,
        k1: f64,
        k2: f64,
        denominator: f64,
    },

    #[error("rapidity outside the model domain: {0}")]
    Domain(String),

    #[error("degenerate rapidities: {0}")]
    DegenerateRapidities(String),

    #[error("vertex order {order} exceeds the configured maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("sector {sector} exceeds the configured limit {limit}")]
    SectorTooLarge { sector: usize, limit: usize },

    #[error(
        "model `{model}` failed validation: {identity} residual {residual:.3e} >= {tolerance:.1e}"
    )]
    Validation {
        model: String,
        identity: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
