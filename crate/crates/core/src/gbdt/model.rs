use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RegressionTree, TrainConfig};
use crate::dataset::Dataset;
use crate::error::TrainError;
use crate::loss::LossFunction;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// `prediction(x) = base_score + learning_rate * sum_k tree_k(x)`.
///
/// The sum is accumulated tree by tree, in training order, so predictions on
/// the training rows reproduce the incrementally maintained training scores
/// bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    format_version: u32,
    base_score: f64,
    learning_rate: f64,
    feature_names: Vec<String>,
    /// Loss that trained the model; for ASRL the state of the final round.
    loss: LossFunction,
    config: TrainConfig,
    trees: Vec<RegressionTree>,
}

impl GbdtModel {
    pub(crate) fn new(
        base_score: f64,
        learning_rate: f64,
        feature_names: Vec<String>,
        trees: Vec<RegressionTree>,
        loss: LossFunction,
        config: TrainConfig,
    ) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            base_score,
            learning_rate,
            feature_names,
            loss,
            config,
            trees,
        }
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn loss(&self) -> &LossFunction {
        &self.loss
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Caller guarantees `row.len() == n_features()`.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut f = self.base_score;
        for tree in &self.trees {
            f += self.learning_rate * tree.predict_row(row);
        }
        f
    }

    /// Predictions for a row-major matrix with `n_features` columns.
    pub fn predict_matrix(
        &self,
        features: &[f64],
        n_features: usize,
    ) -> Result<Vec<f64>, TrainError> {
        if n_features != self.n_features() || !features.len().is_multiple_of(n_features.max(1)) {
            return Err(TrainError::DimensionMismatch {
                expected: self.n_features(),
                actual: n_features,
            });
        }
        Ok(features
            .chunks_exact(n_features)
            .map(|row| self.predict_row(row))
            .collect())
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, TrainError> {
        self.predict_matrix(data.features(), data.n_features())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let model: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            ));
        }
        for (k, tree) in model.trees.iter().enumerate() {
            tree.validate().map_err(|e| format!("tree {k}: {e}"))?;
            if tree.max_feature().is_some_and(|f| f >= model.n_features()) {
                return Err(format!("tree {k}: feature index out of range"));
            }
        }
        model.loss.validate().map_err(|e| e.to_string())?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
