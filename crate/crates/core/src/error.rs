use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's preconditions (bad shapes, bad modes,
    /// out-of-range parameters).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input values are unusable (non-finite entries, inconsistent content).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A binary file does not match its format; `offset` is the byte at which
    /// decoding failed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Tabular ingestion failure (covariate CSV), naming the offending cell.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// The regression design is numerically singular.
    #[error("singular design: {0}")]
    SingularDesign(String),

    /// The posterior carries no usable variation (e.g. every voxel constant).
    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    /// A cross-validation task failed; identifies the fold and rank.
    #[error("cross-validation failed at fold {fold}, rank {rank}: {source}")]
    CvTask {
        fold: usize,
        rank: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}
