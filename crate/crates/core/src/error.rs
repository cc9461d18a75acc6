use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("low quantile {q_low} exceeds high quantile {q_high}")]
    InvertedQuantiles { q_low: f64, q_high: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("epsilon must be finite and > 0, got {0}")]
    InvalidEpsilon(f64),
    #[error("{name} must be finite and >= 0, got {value}")]
    InvalidDispersion { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("non-finite input: y = {y}, prediction = {prediction}")]
    NonFiniteInput { y: f64, prediction: f64 },
    #[error("invalid loss parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed delimited text: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: no usable rows ({rejected} rejected)")]
    NoUsableRows { path: PathBuf, rejected: usize },
    #[error("{name}: loaded {actual} rows, expected about {expected} (+/-2%)")]
    RowCount {
        name: String,
        actual: usize,
        expected: usize,
    },
    #[error("unknown dataset '{0}'")]
    UnknownDataset(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("registry: {0}")]
    Registry(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("feature count mismatch: model expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {truth} targets vs {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("r2 undefined: target has zero variance")]
    ConstantTarget,
    #[error("recall undefined: no target exceeds the mean")]
    NoPositives,
}
