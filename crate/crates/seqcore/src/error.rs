use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite loss at point {index}: {value}")]
    NonFiniteLoss { index: usize, value: f64 },

    #[error("non-finite gradient at point {index}")]
    NonFiniteGradient { index: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("anchor risk is zero; every point is fit exactly")]
    DegenerateAnchor,

    #[error("budget {budget} cannot cover {layers} non-empty layers")]
    InfeasibleBudget { budget: usize, layers: usize },

    #[error("reference hypothesis has zero norm")]
    UndefinedReference,

    #[error("csv ingestion failed at row {row}: {message}")]
    Ingest { row: usize, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("host failed in segment {segment}: {source}")]
    Segment {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_segment(self, segment: usize) -> Error {
        Error::Segment {
            segment,
            source: Box::new(self),
        }
    }
}
