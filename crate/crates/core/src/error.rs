use thiserror::Error;

use crate::geometry::ValidationReport;

/// Errors raised by the beamforming library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or layout description is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(ValidationReport),

    /// The tile footprint does not fit in its panel along some axis.
    #[error("tile footprint {footprint:.6e} m exceeds panel side {side:.6e} m")]
    InfeasibleBox { footprint: f64, side: f64 },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    /// A user coincides with an array element; path-length derivatives blow up.
    #[error("user coincides with element {element} (path length {distance:e} m)")]
    Singular { element: usize, distance: f64 },

    #[error("coincident tile translations: spacing linearization undefined")]
    DegenerateLinearization,

    #[error("subproblem infeasible: {0}")]
    InfeasibleSubproblem(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by user input rather than by the computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidLayout(_) | Error::InfeasibleBox { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
