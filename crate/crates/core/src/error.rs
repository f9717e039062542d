use thiserror::Error;

/// Errors raised by the estimators and their building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("orbit diverged at iterate {index}")]
    Divergence { index: usize },

    #[error("coverage violation: witness point {point} lies in no element")]
    CoverageViolation { point: usize },

    #[error("partition masses sum to {total}, expected 1")]
    Consistency { total: f64 },

    #[error("unsupported combination: {0}")]
    Capability(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },
}

impl EntropyError {
    pub fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = EntropyError> = std::result::Result<T, E>;
