use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    /// The iterative solver ran out of iterations. The last iterate is kept
    /// so callers can inspect how far it got.
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        iterate: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("vertex enumeration needs {vertices} vertices, above the cap of {cap}; use a relaxation")]
    InfeasibleScale { vertices: u128, cap: usize },

    #[error("resample {id}: {source}")]
    Resample {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("every {what} failed: {detail}")]
    AllFailed { what: &'static str, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(#[from] crate::bench::ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Strips resample tags and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Resample { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
