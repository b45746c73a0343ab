use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("design is not conjugate linear: {0}")]
    NotConjugateLinear(String),
    #[error("code has no conjugate-linear relay form; channel simulation is unavailable")]
    MissingRelayForm,
    #[error("noise covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e})")]
    NonPsdCovariance {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },
    #[error("ML search space of {size} candidates exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },
    #[error("group signal sets are not separable into per-symbol sets (group {group})")]
    NotSeparable { group: usize },
    #[error("certificate refused: {0}")]
    CertificateRefused(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("malformed document: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
