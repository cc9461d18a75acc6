//! Order statistics and dispersion measures over model residuals.
//!
//! Everything here works on exact, fully sorted copies of the input; there is
//! no streaming or sketching. Quantiles use the linear-interpolation rule on
//! the 0-based position `q * (n - 1)`, with the last order statistic returned
//! when the position lands on (or past) the final element.

use crate::error::StatsError;

/// Residuals `y - F` for the current model, validated finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    values: Vec<f64>,
}

impl ResidualSample {
    pub fn new(values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite {
                index,
                value: values[index],
            });
        }
        Ok(Self { values })
    }

    /// Builds `y_i - F_i` for every row.
    pub fn from_targets(targets: &[f64], predictions: &[f64]) -> Result<Self, StatsError> {
        if targets.len() != predictions.len() {
            return Err(StatsError::LengthMismatch {
                left: targets.len(),
                right: predictions.len(),
            });
        }
        Self::new(
            targets
                .iter()
                .zip(predictions)
                .map(|(y, f)| y - f)
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn abs_values(&self) -> Vec<f64> {
        self.values.iter().map(|r| r.abs()).collect()
    }
}

/// Variance of residuals, IQR of absolute residuals and MAD of signed residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSummary {
    pub variance: f64,
    pub iqr: f64,
    pub mad: f64,
}

/// Region weights `(alpha, beta, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn check_probability(q: f64) -> Result<(), StatsError> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(StatsError::ProbabilityOutOfRange(q))
    }
}

/// Interpolated order statistic of an already sorted, nonempty slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let position = q * (n - 1) as f64;
    let floor = position.floor();
    let frac = position - floor;
    let lower = floor as usize;
    if lower + 1 < n {
        (1.0 - frac) * sorted[lower] + frac * sorted[lower + 1]
    } else {
        sorted[n - 1]
    }
}

fn sorted_copy(sample: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if let Some(index) = sample.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite {
            index,
            value: sample[index],
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Linearly interpolated `q`-quantile of `sample`. The input is left untouched.
pub fn quantile_interp(sample: &[f64], q: f64) -> Result<f64, StatsError> {
    check_probability(q)?;
    let sorted = sorted_copy(sample)?;
    Ok(quantile_sorted(&sorted, q))
}

/// Quantile thresholds `(delta1, delta2)` of the absolute residuals.
pub fn thresholds(
    residuals: &ResidualSample,
    q_low: f64,
    q_high: f64,
) -> Result<(f64, f64), StatsError> {
    check_probability(q_low)?;
    check_probability(q_high)?;
    if q_low > q_high {
        return Err(StatsError::InvertedQuantiles { q_low, q_high });
    }
    let sorted = sorted_copy(&residuals.abs_values())?;
    let delta1 = quantile_sorted(&sorted, q_low);
    let delta2 = quantile_sorted(&sorted, q_high);
    // Interpolation is monotone in q, but keep the ordering exact under rounding.
    Ok((delta1, delta2.max(delta1)))
}

/// Median absolute deviation around the interpolated median.
pub fn mad(sample: &[f64]) -> Result<f64, StatsError> {
    let center = quantile_interp(sample, 0.5)?;
    let deviations: Vec<f64> = sample.iter().map(|x| (x - center).abs()).collect();
    quantile_interp(&deviations, 0.5)
}

/// Population variance (divisor `n`).
pub fn population_variance(sample: &[f64]) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    Ok(sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

pub fn dispersion(residuals: &ResidualSample) -> Result<DispersionSummary, StatsError> {
    let variance = population_variance(residuals.values())?;
    let abs_sorted = sorted_copy(&residuals.abs_values())?;
    let iqr = (quantile_sorted(&abs_sorted, 0.75) - quantile_sorted(&abs_sorted, 0.25)).max(0.0);
    let mad = mad(residuals.values())?;
    Ok(DispersionSummary { variance, iqr, mad })
}

/// `alpha = 1/(variance + eps)`, `beta = 1/(iqr + eps)`, `gamma = 1/(mad + eps)`.
pub fn weights(summary: &DispersionSummary, epsilon: f64) -> Result<RegionWeights, StatsError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(StatsError::InvalidEpsilon(epsilon));
    }
    for (name, value) in [
        ("variance", summary.variance),
        ("iqr", summary.iqr),
        ("mad", summary.mad),
    ] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(StatsError::InvalidDispersion { name, value });
        }
    }
    Ok(RegionWeights {
        alpha: 1.0 / (summary.variance + epsilon),
        beta: 1.0 / (summary.iqr + epsilon),
        gamma: 1.0 / (summary.mad + epsilon),
    })
}
