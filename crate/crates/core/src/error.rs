use std::path::PathBuf;

use crate::quarter::QuarterDate;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot parse quarter from {token:?}: expected <year>Q<1-4>")]
    ParseQuarter { token: String },

    #[error("{path}: missing column {column:?}")]
    Schema { path: PathBuf, column: String },

    #[error("series {series}: missing quarters {}", format_dates(.missing))]
    Gap {
        series: String,
        missing: Vec<QuarterDate>,
    },

    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },

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

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("domain error in {series} at {date}: {message}")]
    Domain {
        series: String,
        date: QuarterDate,
        message: String,
    },

    #[error("length error: {0}")]
    Length(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("matrix is not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("innovation covariance not invertible at period {period}")]
    InnovationSingular { period: usize },

    #[error("sweep {sweep}, block {block}: {source}")]
    Sweep {
        sweep: usize,
        block: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep {sweep}, block {block}: non-finite state ({detail})")]
    NonFinite {
        sweep: usize,
        block: &'static str,
        detail: String,
    },

    #[error("chain store is empty")]
    EmptyStore,

    #[error("too few draws: have {have}, need at least {need}")]
    TooFewDraws { have: usize, need: usize },

    #[error("explosive dynamics: companion spectral radius {radius:.6} >= 1")]
    Explosive { radius: f64 },

    #[error("oracle size cap exceeded: {0}")]
    OracleTooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_dates(dates: &[QuarterDate]) -> String {
    dates
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}
