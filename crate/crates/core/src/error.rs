use thiserror::Error;

/// Errors raised while parsing IDX image/label files.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("wrong magic number: expected {expected:#010x}, found {found:#010x}")]
    WrongMagic { expected: u32, found: u32 },
    #[error("truncated file: need at least {needed} bytes, have {actual}")]
    Truncated { needed: u64, actual: u64 },
    #[error("length mismatch: header declares {declared} bytes, file has {actual}")]
    LengthMismatch { declared: u64, actual: u64 },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("image dimensions must be non-zero, got {rows}x{cols}")]
    EmptyDimensions { rows: u32, cols: u32 },
}

/// Errors raised while reading or writing a model bundle.
#[derive(Debug, Error)]
pub enum BundleError {
    #[error("not a model bundle (bad magic bytes)")]
    BadMagic,
    #[error("bundle format version {found} is not supported (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("bundle is truncated or corrupt: {0}")]
    Corrupt(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
