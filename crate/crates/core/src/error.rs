use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor was handed values that break a type invariant.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{0}: no rows")]
    NoRows(PathBuf),

    #[error("missing series: {}", .0.join(", "))]
    MissingSeries(Vec<String>),

    #[error("non-positive level {value} for {country}/{variable} at {quarter}; cannot take log")]
    NonPositiveLevel {
        country: String,
        variable: String,
        quarter: String,
        value: f64,
    },

    #[error("gap in {country}/{variable} at {quarter}")]
    Gap {
        country: String,
        variable: String,
        quarter: String,
    },

    #[error("weights sum to {sum}, expected 1 (tolerance {tol:e})")]
    WeightSum { sum: f64, tol: f64 },

    #[error("isolated country {0}: all trade flows are zero")]
    IsolatedCountry(String),

    #[error("partner {partner} has weight {weight} in {country} but no {variable} series")]
    MissingPartnerVariable {
        country: String,
        partner: String,
        variable: String,
        weight: f64,
    },

    #[error("training window has {got} usable quarters, need at least {need}")]
    TrainingTooShort { got: usize, need: usize },

    #[error("zero residual variance in training fit for {0}")]
    ZeroVariance(String),

    #[error(
        "sign restrictions not met after {cap} redraws at sweep {sweep}; \
         loosen the identification prior or respecify the model"
    )]
    SignRestrictionCap { cap: usize, sweep: usize },

    #[error("non-finite {what} at draw {draw}")]
    NonFiniteDraw { what: String, draw: usize },

    #[error("non-finite simulated state at draw {draw}, replication {rep}, period {period}")]
    NonFiniteSimulation {
        draw: usize,
        rep: usize,
        period: usize,
    },

    #[error("covariance not positive definite at t = {0}")]
    NotPositiveDefinite(usize),

    #[error("contemporaneous matrix is singular (condition number {cond:e} >= {threshold:e})")]
    Singular { cond: f64, threshold: f64 },

    #[error("{got} draws available, need at least {need}")]
    TooFewDraws { got: usize, need: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
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
    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
