use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("absorbing state {state} reached at t = {time}: total propensity is zero")]
    AbsorbingState { state: String, time: f64 },
    #[error("all {replicas} replicas left the region in the same dephasing round")]
    AllReplicasExited { replicas: usize },
    #[error("no simulated time falls inside the sampling window")]
    EmptyWindow,
    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("quadratic form vᵀIv = {0} is negative")]
    NegativeQuadraticForm(f64),
    #[error("state {0} lies outside the truncation box")]
    BoxTooSmall(String),
    #[error("truncated generator is reducible ({classes} closed communicating classes)")]
    Reducible { classes: usize },
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable class name, used for CLI exit reporting and FFI codes.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidNetwork(_) => "InvalidNetwork",
            Error::InvalidState(_) => "InvalidState",
            Error::InvalidParams(_) => "InvalidParams",
            Error::UnknownModel(_) => "UnknownModel",
            Error::AbsorbingState { .. } => "AbsorbingState",
            Error::AllReplicasExited { .. } => "AllReplicasExited",
            Error::EmptyWindow => "EmptyWindow",
            Error::InsufficientSamples(_) => "InsufficientSamples",
            Error::NegativeQuadraticForm(_) => "NegativeQuadraticForm",
            Error::BoxTooSmall(_) => "BoxTooSmall",
            Error::Reducible { .. } => "Reducible",
            Error::SingularSystem(_) => "SingularSystem",
            Error::Schema { .. } => "SchemaError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// An engine error together with whatever had been accumulated before it.
#[derive(Debug, Clone)]
pub struct Interrupted<T> {
    pub error: Error,
    pub partial: T,
}

impl<T: std::fmt::Debug> std::fmt::Display for Interrupted<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (partial result retained)", self.error)
    }
}

impl<T: std::fmt::Debug> std::error::Error for Interrupted<T> {}

impl<T> From<Interrupted<T>> for Error {
    fn from(i: Interrupted<T>) -> Self {
        i.error
    }
}
