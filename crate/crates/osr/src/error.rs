//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by scoring, fitting, calibration and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (empty input, non-finite value,
    /// dimension mismatch, out-of-range label, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Distribution parameters outside their domain.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Fewer observations than an operation requires.
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// A zero-variance tail; the Weibull likelihood is unbounded there.
    #[error("degenerate tail: all {count} tail values equal {value}")]
    DegenerateTail { count: usize, value: f64 },

    /// The shape solve did not reach tolerance. `trace` holds the visited
    /// shape iterates for diagnosis.
    #[error(
        "shape solve did not converge after {iterations} iterations \
         (last shape {last_shape:.6e}, score {last_score:.3e}); trace: {trace:?}"
    )]
    NoConvergence {
        iterations: usize,
        last_shape: f64,
        last_score: f64,
        trace: Vec<f64>,
    },

    /// Per-class calibration failure; names the offending class.
    #[error("calibration failed for class {class}: {reason}")]
    Calibration { class: usize, reason: String },

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDiverged { epoch: usize, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv in {path}: {detail}")]
    Csv { path: String, detail: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &str, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: &str, detail: impl Into<String>) -> Self {
        Error::Csv {
            path: path.to_string(),
            detail: detail.into(),
        }
    }
}
