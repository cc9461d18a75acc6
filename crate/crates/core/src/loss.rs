//! Regression losses with value, first and second derivative with respect to
//! the prediction `F`, all written in terms of the residual `r = y - F`.
//!
//! The adaptive segmented loss splits `|r|` into three regions using two
//! quantile thresholds of the current absolute residuals:
//!
//! ```text
//!   |r| <= d1        alpha * r^2 / 2
//!   d1 < |r| <= d2   beta * |r|
//!   |r| > d2         gamma * ln(1 + |r|)
//! ```
//!
//! Ties go to the lower region. The pieces do not join continuously for
//! general weights; that is intentional and only gradients and hessians are
//! consumed by training.

use serde::{Deserialize, Serialize};

use crate::error::LossError;
use crate::robust_stats::{self, ResidualSample};

pub const DEFAULT_Q_LOW: f64 = 0.5;
pub const DEFAULT_Q_HIGH: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_HUBER_DELTA: f64 = 1.0;

/// `sign(0) = 0`, unlike `f64::signum`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsrlConfig {
    pub q_low: f64,
    pub q_high: f64,
    pub epsilon: f64,
}

impl AsrlConfig {
    pub fn new(q_low: f64, q_high: f64, epsilon: f64) -> Result<Self, LossError> {
        let config = Self {
            q_low,
            q_high,
            epsilon,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let in_unit = |q: f64| (0.0..=1.0).contains(&q);
        if !in_unit(self.q_low) || !in_unit(self.q_high) {
            return Err(LossError::InvalidParameter(format!(
                "quantiles must lie in [0, 1], got q_low = {}, q_high = {}",
                self.q_low, self.q_high
            )));
        }
        if self.q_low > self.q_high {
            return Err(LossError::InvalidParameter(format!(
                "q_low ({}) must not exceed q_high ({})",
                self.q_low, self.q_high
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(LossError::InvalidParameter(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

impl Default for AsrlConfig {
    fn default() -> Self {
        Self {
            q_low: DEFAULT_Q_LOW,
            q_high: DEFAULT_Q_HIGH,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Second-order weight fed to Newton boosting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    /// `|d2L/dF2|` floored at `h_floor`; zero-curvature pieces get the floor.
    Exact,
    /// Iteratively-reweighted-least-squares weight `psi(r) / r`, where
    /// `psi = -dL/dF`. A Newton leaf then becomes a weighted mean of residuals.
    #[default]
    Irls,
}

/// Which piece of the segmented loss a residual falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Quadratic,
    Linear,
    Logarithmic,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Quadratic => "quadratic",
            Region::Linear => "linear",
            Region::Logarithmic => "logarithmic",
        }
    }
}

/// Live thresholds and region weights of the adaptive loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsrlState {
    pub delta1: f64,
    pub delta2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub config: AsrlConfig,
}

impl AsrlState {
    /// Builds a state from explicit parameters, checking its invariants.
    pub fn from_parts(
        delta1: f64,
        delta2: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        config: AsrlConfig,
    ) -> Result<Self, LossError> {
        let state = Self {
            delta1,
            delta2,
            alpha,
            beta,
            gamma,
            config,
        };
        state.validate()?;
        Ok(state)
    }

    /// Placeholder used before the first refresh: zero thresholds, unit weights.
    pub fn initial(config: AsrlConfig) -> Self {
        Self {
            delta1: 0.0,
            delta2: 0.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            config,
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        self.config.validate()?;
        if !(self.delta1 >= 0.0 && self.delta1.is_finite() && self.delta2.is_finite()) {
            return Err(LossError::InvalidParameter(format!(
                "thresholds must be finite and >= 0, got delta1 = {}, delta2 = {}",
                self.delta1, self.delta2
            )));
        }
        if self.delta1 > self.delta2 {
            return Err(LossError::InvalidParameter(format!(
                "delta1 ({}) must not exceed delta2 ({})",
                self.delta1, self.delta2
            )));
        }
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(LossError::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {w}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn region(&self, residual: f64) -> Region {
        let a = residual.abs();
        if a <= self.delta1 {
            Region::Quadratic
        } else if a <= self.delta2 {
            Region::Linear
        } else {
            Region::Logarithmic
        }
    }
}

/// Recomputes thresholds and weights from the current residuals.
pub fn asrl_refresh(
    config: &AsrlConfig,
    residuals: &ResidualSample,
) -> Result<AsrlState, LossError> {
    config.validate()?;
    let (delta1, delta2) = robust_stats::thresholds(residuals, config.q_low, config.q_high)?;
    let summary = robust_stats::dispersion(residuals)?;
    let w = robust_stats::weights(&summary, config.epsilon)?;
    AsrlState::from_parts(delta1, delta2, w.alpha, w.beta, w.gamma, *config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossFunction {
    Squared,
    Absolute,
    Huber { delta: f64 },
    Asrl(AsrlState),
}

impl LossFunction {
    pub fn huber(delta: f64) -> Result<Self, LossError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(LossError::InvalidParameter(format!(
                "Huber delta must be finite and > 0, got {delta}"
            )));
        }
        Ok(Self::Huber { delta })
    }

    /// Adaptive loss in its pre-refresh state.
    pub fn asrl(config: AsrlConfig) -> Result<Self, LossError> {
        config.validate()?;
        Ok(Self::Asrl(AsrlState::initial(config)))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Squared => "squared",
            Self::Absolute => "absolute",
            Self::Huber { .. } => "huber",
            Self::Asrl(_) => "asrl",
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        match self {
            Self::Squared | Self::Absolute => Ok(()),
            Self::Huber { delta } => Self::huber(*delta).map(|_| ()),
            Self::Asrl(state) => state.validate(),
        }
    }

    pub fn value(&self, y: f64, prediction: f64) -> Result<f64, LossError> {
        Ok(self.value_at(checked_residual(y, prediction)?))
    }

    /// dL/dF.
    pub fn gradient(&self, y: f64, prediction: f64) -> Result<f64, LossError> {
        Ok(self.gradient_at(checked_residual(y, prediction)?))
    }

    /// |d2L/dF2|, floored at `h_floor`.
    pub fn hessian(&self, y: f64, prediction: f64, h_floor: f64) -> Result<f64, LossError> {
        if !(h_floor > 0.0 && h_floor.is_finite()) {
            return Err(LossError::InvalidParameter(format!(
                "h_floor must be finite and > 0, got {h_floor}"
            )));
        }
        Ok(self.hessian_at(checked_residual(y, prediction)?, h_floor))
    }

    /// Loss value for residual `r = y - F`.
    #[inline]
    pub fn value_at(&self, r: f64) -> f64 {
        let a = r.abs();
        match self {
            Self::Squared => 0.5 * r * r,
            Self::Absolute => a,
            Self::Huber { delta } => {
                if a <= *delta {
                    0.5 * r * r
                } else {
                    delta * (a - 0.5 * delta)
                }
            }
            Self::Asrl(s) => match s.region(r) {
                Region::Quadratic => s.alpha * r * r / 2.0,
                Region::Linear => s.beta * a,
                Region::Logarithmic => s.gamma * a.ln_1p(),
            },
        }
    }

    /// Derivative with respect to `F` for residual `r = y - F`.
    #[inline]
    pub fn gradient_at(&self, r: f64) -> f64 {
        match self {
            Self::Squared => -r,
            Self::Absolute => -sign(r),
            Self::Huber { delta } => {
                if r.abs() <= *delta {
                    -r
                } else {
                    -delta * sign(r)
                }
            }
            Self::Asrl(s) => match s.region(r) {
                Region::Quadratic => -s.alpha * r,
                Region::Linear => -s.beta * sign(r),
                Region::Logarithmic => -s.gamma * sign(r) / (1.0 + r.abs()),
            },
        }
    }

    /// Exact second derivative with respect to `F`, before any flooring.
    /// Negative in the logarithmic region, where the loss is concave.
    #[inline]
    pub fn curvature_at(&self, r: f64) -> f64 {
        match self {
            Self::Squared => 1.0,
            Self::Absolute => 0.0,
            Self::Huber { delta } => {
                if r.abs() <= *delta {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Asrl(s) => match s.region(r) {
                Region::Quadratic => s.alpha,
                Region::Linear => 0.0,
                Region::Logarithmic => {
                    let d = 1.0 + r.abs();
                    -s.gamma / (d * d)
                }
            },
        }
    }

    /// `max(|curvature|, h_floor)`.
    #[inline]
    pub fn hessian_at(&self, r: f64, h_floor: f64) -> f64 {
        self.curvature_at(r).abs().max(h_floor)
    }

    /// `psi(r) / r` with `psi = -dL/dF`; at `r = 0` the limit where it exists,
    /// else 0. Always finite for `r != 0` and never negative.
    #[inline]
    pub fn irls_weight_at(&self, r: f64) -> f64 {
        let a = r.abs();
        match self {
            Self::Squared => 1.0,
            Self::Absolute => {
                if a > 0.0 {
                    1.0 / a
                } else {
                    0.0
                }
            }
            Self::Huber { delta } => {
                if a <= *delta {
                    1.0
                } else {
                    delta / a
                }
            }
            Self::Asrl(s) => match s.region(r) {
                Region::Quadratic => s.alpha,
                // both regions start strictly above a threshold >= 0, so a > 0
                Region::Linear => s.beta / a,
                Region::Logarithmic => s.gamma / ((1.0 + a) * a),
            },
        }
    }

    /// Second-order weight under `mode`, floored at `h_floor`.
    #[inline]
    pub fn newton_weight_at(&self, r: f64, h_floor: f64, mode: Curvature) -> f64 {
        match mode {
            Curvature::Exact => self.hessian_at(r, h_floor),
            Curvature::Irls => self.irls_weight_at(r).max(h_floor),
        }
    }

    /// Overall multiplier of the loss relative to squared loss in its
    /// quadratic piece: `alpha` for ASRL, 1 otherwise.
    pub fn scale(&self) -> f64 {
        match self {
            Self::Asrl(s) => s.alpha,
            _ => 1.0,
        }
    }
}

fn checked_residual(y: f64, prediction: f64) -> Result<f64, LossError> {
    if y.is_finite() && prediction.is_finite() {
        Ok(y - prediction)
    } else {
        Err(LossError::NonFiniteInput { y, prediction })
    }
}
