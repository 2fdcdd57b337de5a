use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("{name} is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { name: String, asymmetry: f64 },

    #[error("{name} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { name: String, min_eigenvalue: f64 },

    #[error("{name} is not positive definite")]
    NotPositiveDefinite { name: String },

    #[error("singular matrix in {0}")]
    Singular(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("divergence detected: {0}")]
    Divergence(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::Divergence(_) | Error::NonFinite(_)
        )
    }
}
