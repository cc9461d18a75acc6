//! Adaptive segmented robust loss (ASRL) for gradient-boosted regression.
//!
//! The crate is organized bottom-up:
//!
//! - [`robust_stats`]: interpolated quantiles, variance, IQR and MAD of residuals.
//! - [`loss`]: squared, absolute, Huber and ASRL losses with derivatives, and the
//!   per-round ASRL state refresh.
//! - [`gbdt`]: a deterministic exact-greedy Newton boosting engine.
//! - [`data`]: CSV ingestion, seeded splits and the benchmark dataset registry.
//! - [`metrics`]: MSE, MAE, R², recall-at-mean and wall time.
//!
//! With the default `parallel` feature, split search and gradient evaluation
//! use rayon; results are bit-identical to the sequential path.

pub mod data;
pub mod dataset;
pub mod error;
pub mod gbdt;
pub mod loss;
pub mod metrics;
pub mod robust_stats;
pub mod synthetic;

pub use dataset::Dataset;
pub use error::{DataError, LossError, MetricError, StatsError, TrainError};
pub use gbdt::{
    build_tree, train, train_with_observer, ExecMode, GbdtModel, Node, RegressionTree, RoundEvent,
    TrainConfig,
};
pub use loss::{asrl_refresh, AsrlConfig, AsrlState, Curvature, LossFunction, Region};
