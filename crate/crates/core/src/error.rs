use thiserror::Error;

/// Errors produced by the detection library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The background estimate is not below the object estimate, so the
    /// midpoint threshold cannot separate the two intensity levels.
    #[error("degenerate contrast: background estimate {a_hat} is not below object estimate {b_hat}")]
    DegenerateContrast { a_hat: f64, b_hat: f64 },

    /// No all-background window of the requested side exists in the scene.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("bad PGM magic number {0:?}, expected P2 or P5")]
    BadMagic(String),

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("truncated PGM payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("PGM sample {value} exceeds maxval {maxval}")]
    SampleOutOfRange { value: u32, maxval: u32 },

    #[error("scene file: {0}")]
    Scene(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
