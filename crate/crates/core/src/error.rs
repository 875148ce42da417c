use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("vector is not unit norm (|norm - 1| = {deviation:.3e})")]
    NotUnitNorm { deviation: f64 },

    #[error("matrix is not unitary (max |M^H M - I| = {error:.3e})")]
    NotUnitary { error: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("unsupported size {rows}x{cols} (limit {limit}x{limit})")]
    UnsupportedSize {
        rows: usize,
        cols: usize,
        limit: usize,
    },

    #[error("svd did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("filter evaluated on its singular band edge (f = {f_hz} Hz)")]
    FilterSingularity { f_hz: f64 },

    #[error("too few samples: {got} given, {needed} needed")]
    TooFewSamples { got: usize, needed: usize },

    #[error(
        "unit-norm constraint capped on {fraction:.2}% of samples (limit {limit:.2}%) at dim {dim}"
    )]
    ConstraintViolation {
        dim: usize,
        fraction: f64,
        limit: f64,
    },

    #[error("invalid config `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unsupported for this class or size: {0}")]
    Unsupported(String),

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("trace file {path}: {message}")]
    TraceFormat { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
