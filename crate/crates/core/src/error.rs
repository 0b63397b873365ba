use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: &'static str, row: usize },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("column `{column}` not found in {path}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("row {row}: cannot parse `{value}` in column `{column}` as a finite number")]
    BadCell { row: usize, column: String, value: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("zero variance in {0}; cannot standardize")]
    ZeroVariance(&'static str),

    #[error("design matrix is rank deficient (degree {degree}, {samples} samples)")]
    RankDeficient { degree: usize, samples: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("state became non-finite at step {step} (t = {t}); reduce the step size")]
    Divergence { step: usize, t: f64 },

    #[error("training loss increased by {increase:e} at step {step}; step size too large for the Hessian spectrum")]
    LossIncrease { step: usize, increase: f64 },

    #[error("trajectory is missing {0}")]
    Incomplete(&'static str),

    #[error("invalid control set: u_min = {u_min} > u_max = {u_max}")]
    InvalidControlSet { u_min: f64, u_max: f64 },

    #[error("epsilon = {epsilon} outside the expansion regime [0, {epsilon_max})")]
    EpsilonOutOfRange { epsilon: f64, epsilon_max: f64 },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: &'static str, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::Config { field, message: message.into() }
    }
}
