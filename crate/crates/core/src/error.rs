use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh topology: {0}")]
    MeshTopology(String),

    #[error("classification ambiguity on facet {facet}: {reason}")]
    ClassificationAmbiguity { facet: usize, reason: String },

    #[error("point ({x}, {y}) lies outside element {element}")]
    OutsideElement { element: usize, x: f64, y: f64 },

    #[error("facet {facet} has no second side")]
    NoSecondSide { facet: usize },

    #[error("logic error: {0}")]
    Logic(String),

    #[error("non-finite entry assembled on {location}")]
    NonFinite { location: String },

    #[error("singular system: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
