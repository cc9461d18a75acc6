//! Deterministic Newton-boosted regression trees over any [`LossFunction`].
//!
//! Each round computes residuals, refreshes the adaptive loss state when the
//! loss is ASRL, evaluates per-row gradients and hessians, fits one tree and
//! adds its shrunken output to the running prediction.

mod model;
mod tree;

use serde::{Deserialize, Serialize};

pub use model::{GbdtModel, MODEL_FORMAT_VERSION};
pub use tree::{Node, RegressionTree};

use crate::dataset::Dataset;
use crate::error::TrainError;
use crate::loss::{asrl_refresh, Curvature, LossFunction};
use crate::robust_stats::ResidualSample;
use tree::{grow_tree, SortedColumns};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How data-parallel work is scheduled. Results are identical either way;
/// without the `parallel` feature both variants run sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub h_floor: f64,
    pub seed: u64,
    #[serde(default)]
    pub exec: ExecMode,
    /// Second-order weight used for leaf values and split gains.
    #[serde(default)]
    pub curvature: Curvature,
    /// Divide gradients and hessians by [`LossFunction::scale`] so `lambda`
    /// and `min_child_weight` keep squared-loss units whatever the loss scale.
    #[serde(default = "default_true")]
    pub normalize_loss_scale: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 6,
            min_child_weight: 1.0,
            lambda: 1.0,
            h_floor: 1e-6,
            seed: 0,
            exec: ExecMode::default(),
            curvature: Curvature::default(),
            normalize_loss_scale: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            ));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive".into());
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad(format!(
                "min_child_weight must be finite and >= 0, got {}",
                self.min_child_weight
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            ));
        }
        if !(self.h_floor > 0.0 && self.h_floor.is_finite()) {
            return bad(format!(
                "h_floor must be finite and > 0, got {}",
                self.h_floor
            ));
        }
        Ok(())
    }
}

/// Snapshot handed to a training observer after each round.
#[derive(Debug)]
pub struct RoundEvent<'a> {
    pub round: usize,
    /// `y - F` before this round's tree was added.
    pub residuals: &'a [f64],
    /// Loss used for this round (refreshed state for ASRL).
    pub loss: &'a LossFunction,
    /// Training predictions after this round's tree was added.
    pub predictions: &'a [f64],
}

/// Fits one tree to per-row gradient statistics.
pub fn build_tree(
    gradients: &[f64],
    hessians: &[f64],
    data: &Dataset,
    config: &TrainConfig,
) -> Result<RegressionTree, TrainError> {
    let n = data.n_rows();
    if gradients.len() != n || hessians.len() != n {
        return Err(TrainError::InvalidConfig(format!(
            "expected {n} gradients and hessians, got {} and {}",
            gradients.len(),
            hessians.len()
        )));
    }
    if let Some(i) = hessians.iter().position(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(TrainError::InvalidConfig(format!(
            "hessian at row {i} must be finite and > 0, got {}",
            hessians[i]
        )));
    }
    if gradients.iter().any(|g| !g.is_finite()) {
        return Err(TrainError::InvalidConfig("non-finite gradient".into()));
    }
    let sorted = SortedColumns::new(data, config.exec);
    Ok(grow_tree(gradients, hessians, data, &sorted, config))
}

pub fn train(
    data: &Dataset,
    config: &TrainConfig,
    loss: &LossFunction,
) -> Result<GbdtModel, TrainError> {
    train_with_observer(data, config, loss, |_| {})
}

/// Like [`train`], calling `observer` once per boosting round.
pub fn train_with_observer<F>(
    data: &Dataset,
    config: &TrainConfig,
    loss: &LossFunction,
    mut observer: F,
) -> Result<GbdtModel, TrainError>
where
    F: FnMut(&RoundEvent<'_>),
{
    config.validate()?;
    loss.validate()?;

    let n = data.n_rows();
    let target = data.target();
    let base_score = target.iter().sum::<f64>() / n as f64;
    let mut predictions = vec![base_score; n];
    let mut residuals = vec![0.0; n];
    let mut gradients = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.n_rounds);
    let mut current = *loss;
    let sorted = if config.n_rounds > 0 {
        Some(SortedColumns::new(data, config.exec))
    } else {
        None
    };

    for round in 0..config.n_rounds {
        for ((r, y), f) in residuals.iter_mut().zip(target).zip(&predictions) {
            *r = y - f;
        }
        if let LossFunction::Asrl(state) = &current {
            let sample = ResidualSample::new(residuals.clone())?;
            current = LossFunction::Asrl(asrl_refresh(&state.config, &sample)?);
        }
        fill_gradients(&current, &residuals, config, &mut gradients, &mut hessians);

        let tree = grow_tree(
            &gradients,
            &hessians,
            data,
            sorted.as_ref().expect("columns sorted when rounds > 0"),
            config,
        );
        for (f, row) in predictions.iter_mut().zip(data.rows()) {
            *f += config.learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
        observer(&RoundEvent {
            round,
            residuals: &residuals,
            loss: &current,
            predictions: &predictions,
        });
    }

    Ok(GbdtModel::new(
        base_score,
        config.learning_rate,
        data.feature_names().to_vec(),
        trees,
        current,
        *config,
    ))
}

fn fill_gradients(
    loss: &LossFunction,
    residuals: &[f64],
    config: &TrainConfig,
    gradients: &mut [f64],
    hessians: &mut [f64],
) {
    let scale = if config.normalize_loss_scale {
        loss.scale()
    } else {
        1.0
    };
    let eval = |((g, h), r): ((&mut f64, &mut f64), &f64)| {
        let w = match config.curvature {
            Curvature::Exact => loss.curvature_at(*r).abs(),
            Curvature::Irls => loss.irls_weight_at(*r),
        };
        *g = loss.gradient_at(*r) / scale;
        *h = (w / scale).max(config.h_floor);
    };
    match config.exec {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => gradients
            .par_iter_mut()
            .zip(hessians.par_iter_mut())
            .zip(residuals.par_iter())
            .with_min_len(4096)
            .for_each(eval),
        _ => gradients
            .iter_mut()
            .zip(hessians.iter_mut())
            .zip(residuals)
            .for_each(eval),
    }
}
