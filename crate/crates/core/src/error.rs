use thiserror::Error;

/// Errors produced by the qgpart library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or matrix violates one of its invariants. The first field is
    /// the path of the offending field (e.g. `components[1].marginals[0].sigma`).
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} out of range for {n_labels} hypotheses")]
    LabelOutOfRange { label: usize, n_labels: usize },

    /// Tensor-grid quadrature is only offered up to three dimensions.
    #[error("quadrature supports d <= 3, got d = {0}; use Monte Carlo estimation")]
    DimensionTooLarge(usize),

    /// A decision rule broke completeness or unambiguity.
    #[error("invalid decision rule: {0}")]
    RuleViolation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
