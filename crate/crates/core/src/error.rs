use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NotFinite(String),

    #[error("{0} is not symmetric")]
    NotSymmetric(String),

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("worst-case error infinite: the triple is not l-impulse observable for this functional")]
    NotImpulseObservable,

    #[error(
        "functional #{index} is not l-detectable; detectability is necessary for a finite \
         infinite-horizon worst-case error"
    )]
    NotDetectable { index: usize },

    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),

    #[error("D^T S D is numerically singular although D is nonzero")]
    SingularGain,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotImpulseObservable | Error::NotDetectable { .. } => 3,
            Error::Decomposition(_)
            | Error::NoStabilizingSolution(_)
            | Error::SingularGain => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
