use thiserror::Error;

/// Errors raised by the library. Every variant is a validation failure of
/// caller input except [`Error::Invariant`], which signals an internal
/// consistency violation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("invalid interval [{0}, {1}]: need finite A < B")]
    InvalidInterval(f64, f64),
    #[error("sigma_b must be finite and strictly positive, got {0}")]
    InvalidSigma(f64),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("layer index must be >= 1, got {0}")]
    InvalidLayer(usize),
    #[error("variance must be finite and strictly positive, got {0}")]
    InvalidVariance(f64),
    #[error("correlation {0} lies outside [-1, 1]")]
    InvalidCorrelation(f64),
    #[error("layer-1 pre-activations are affine; crossing experiments need a layer in [2, L+1]")]
    FirstLayerAffine,
    #[error("survival needs at least two hidden layers, topology has {0}")]
    NothingToPropagate(usize),
    #[error("cannot merge results: {0}")]
    ConfigMismatch(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("tolerance eps0 must be finite and strictly positive, got {0}")]
    InvalidTolerance(f64),
    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("minimal complexity must be positive")]
    InvalidComplexity,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("slack alpha must be >= 1, got {0}")]
    InvalidSlack(f64),
    #[error("inefficiency bound c must be >= 0, got {0}")]
    InvalidBound(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
