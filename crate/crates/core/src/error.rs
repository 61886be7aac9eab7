use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("row {row} has zero norm")]
    ZeroNorm { row: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated file: needed {needed} bytes for {section}, {available} available")]
    Truncated {
        section: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("header declares {declared} payload bytes but file holds {actual}")]
    SizeMismatch { declared: usize, actual: usize },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("unknown channel {0:?}")]
    UnknownChannel(String),

    #[error("item {0:?} is missing from the embedding bank")]
    MissingItem(String),

    #[error("no category label for {0:?}")]
    MissingCategory(String),

    #[error("image {0:?} has no trials")]
    NoTrials(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("backward called with a cache from a different forward pass")]
    StaleCache,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }
}
