use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("{rejected} of {total} rows rejected (limit 10%)")]
    TooManyRejects { rejected: usize, total: usize },

    #[error("slot {0} lies before the span start")]
    SlotBeforeSpan(String),

    #[error("series covers {weeks} ISO weeks, at least 3 are required")]
    SpanTooShort { weeks: usize },

    #[error("series and signature table cover different spans")]
    SpanMismatch,

    #[error("unsupported signature: {0}")]
    Unsupported(String),

    #[error("zero-norm vector has no cosine distance")]
    ZeroNorm,

    #[error("degenerate clustering: clusters {0} and {1} share a centroid")]
    DegenerateClustering(usize, usize),

    #[error("no knee: curve is collinear with its chord")]
    NoKnee,

    #[error("sample variance is zero")]
    ZeroVariance,

    #[error("sample too small: {0}")]
    InsufficientSample(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
