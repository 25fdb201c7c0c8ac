use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = FarError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FarError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("duplicate quote for {date} at {days} days")]
    DuplicateQuote { date: NaiveDate, days: u32 },

    #[error("need at least 4 quotes to fit a cubic spline, got {0}")]
    InsufficientQuotes(usize),

    #[error("maturity {maturity} lies outside the quoted span [{lo}, {hi}]")]
    Extrapolation { maturity: f64, lo: f64, hi: f64 },

    #[error("no valid dates: {0}")]
    NoValidDates(String),

    #[error("panel is already centered")]
    AlreadyCentered,

    #[error("panel must be centered before fitting")]
    NotCentered,

    #[error("need more than {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("operator is not symmetric")]
    NotSymmetric,

    #[error("operator is not positive definite: eigenvalue {eigenvalue:e} (largest {largest:e})")]
    NotPositiveDefinite { eigenvalue: f64, largest: f64 },

    #[error("rank {k} out of range 1..={max}")]
    RankOutOfRange { k: usize, max: usize },

    #[error("zero vector has no Rayleigh quotient")]
    ZeroVector,

    #[error("covariance is singular with alpha = 0; use a regularization alpha > 0 ({0})")]
    DegenerateCovariance(String),

    #[error("rank {k} exceeds the {nonzero} numerically nonzero covariance eigenvalues")]
    SpectrumTooSmall { k: usize, nonzero: usize },

    #[error("Nelson-Siegel basis is collinear on this grid ({0})")]
    CollinearBasis(String),

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("method {method} failed at origin {date}: {source}")]
    FitFailed {
        method: String,
        date: NaiveDate,
        #[source]
        source: Box<FarError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FarError {
    /// Process exit code for the CLI. Every variant maps to its own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            FarError::InvalidGrid(_) => 10,
            FarError::GridMismatch { .. } => 11,
            FarError::InvalidCurve(_) => 12,
            FarError::Parse { .. } => 13,
            FarError::DuplicateQuote { .. } => 14,
            FarError::InsufficientQuotes(_) => 15,
            FarError::Extrapolation { .. } => 16,
            FarError::NoValidDates(_) => 17,
            FarError::AlreadyCentered => 18,
            FarError::NotCentered => 19,
            FarError::TooFewRows { .. } => 20,
            FarError::NotSymmetric => 21,
            FarError::NotPositiveDefinite { .. } => 22,
            FarError::RankOutOfRange { .. } => 23,
            FarError::ZeroVector => 24,
            FarError::DegenerateCovariance(_) => 25,
            FarError::SpectrumTooSmall { .. } => 26,
            FarError::CollinearBasis(_) => 27,
            FarError::NoConvergence(_) => 28,
            FarError::InvalidParameter(_) => 29,
            FarError::Empty(_) => 30,
            FarError::FitFailed { .. } => 31,
            FarError::Io(_) => 40,
            FarError::Csv(_) => 41,
            FarError::Json(_) => 42,
        }
    }
}
