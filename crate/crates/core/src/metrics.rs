//! Test-set evaluation: MSE, MAE, R², recall-at-mean and wall time.
//!
//! Recall here is a regression adaptation: truth and prediction are both
//! binarized at the mean of the evaluation targets (strictly greater is
//! positive), and recall is the share of true positives the model also
//! places above that mean.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub mae: f64,
    pub r2: f64,
    pub recall: f64,
    pub train_seconds: f64,
}

impl EvalReport {
    pub fn evaluate(
        truth: &[f64],
        predicted: &[f64],
        train_seconds: f64,
    ) -> Result<Self, MetricError> {
        Ok(Self {
            mse: mse(truth, predicted)?,
            mae: mae(truth, predicted)?,
            r2: r2(truth, predicted)?,
            recall: recall_at_mean(truth, predicted)?,
            train_seconds,
        })
    }
}

fn check(truth: &[f64], predicted: &[f64]) -> Result<(), MetricError> {
    if truth.len() != predicted.len() {
        return Err(MetricError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn mse(truth: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(truth, predicted)?;
    let sum: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(sum / truth.len() as f64)
}

pub fn mae(truth: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(truth, predicted)?;
    let sum: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p).abs())
        .sum();
    Ok(sum / truth.len() as f64)
}

/// `1 - SS_res / SS_tot`; negative when worse than predicting the mean.
pub fn r2(truth: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(truth, predicted)?;
    let y_bar = mean(truth);
    let ss_tot: f64 = truth.iter().map(|y| (y - y_bar) * (y - y_bar)).sum();
    if truth.len() < 2 || ss_tot == 0.0 {
        return Err(MetricError::ConstantTarget);
    }
    let ss_res: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn recall_at_mean(truth: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(truth, predicted)?;
    let threshold = mean(truth);
    let (positives, hits) = truth
        .iter()
        .zip(predicted)
        .filter(|(y, _)| **y > threshold)
        .fold((0usize, 0usize), |(n, hit), (_, p)| {
            (n + 1, hit + usize::from(*p > threshold))
        });
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    Ok(hits as f64 / positives as f64)
}

/// Runs `f` and returns its result with the elapsed monotonic wall time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert_relative_eq!(mse(&[1.0, 2.0, 3.0], &[2.0; 3]).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 0.0], &[3.0, -1.0]).unwrap(), 2.0);
        assert_relative_eq!(mae(&[1.0, 2.0, 3.0], &[2.0; 3]).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn r2_examples() {
        let y = [0.0, 1.0, 2.0];
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert_eq!(r2(&y, &[1.0; 3]).unwrap(), 0.0);
        assert_eq!(r2(&y, &[0.0; 3]).unwrap(), -1.5);
        assert_eq!(r2(&[2.0; 3], &[2.0; 3]), Err(MetricError::ConstantTarget));
        assert_eq!(r2(&[2.0], &[2.0]), Err(MetricError::ConstantTarget));
    }

    #[test]
    fn recall_examples() {
        let y = [0.0, 10.0, 20.0, 30.0];
        assert_eq!(recall_at_mean(&y, &y).unwrap(), 1.0);
        assert_eq!(recall_at_mean(&y, &[-1.0; 4]).unwrap(), 0.0);
        assert_eq!(recall_at_mean(&y, &[0.0, 16.0, 14.0, 31.0]).unwrap(), 0.5);
        assert_eq!(
            recall_at_mean(&[1.0; 3], &[1.0; 3]),
            Err(MetricError::NoPositives)
        );
        // a prediction exactly at the mean is negative
        assert_eq!(recall_at_mean(&[0.0, 2.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn input_errors() {
        assert_eq!(mse(&[], &[]), Err(MetricError::Empty));
        assert!(matches!(
            mae(&[1.0], &[1.0, 2.0]),
            Err(MetricError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn timing_bands() {
        let ((), noop) = timed(|| ());
        assert!((0.0..0.1).contains(&noop));
        let ((), slept) = timed(|| std::thread::sleep(std::time::Duration::from_millis(100)));
        assert!((0.1..=0.5).contains(&slept), "{slept}");
    }

    fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1e3f64..1e3, n),
                proptest::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn mae_bounded_by_rmse((y, p) in paired()) {
            let bound = mse(&y, &p).unwrap().sqrt();
            prop_assert!(mae(&y, &p).unwrap() <= bound * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn recall_invariant_under_increasing_affine_maps(
            (y, p) in paired(),
            scale in 0.01f64..100.0,
            shift in -1e3f64..1e3,
        ) {
            prop_assume!(recall_at_mean(&y, &p).is_ok());
            // Keep clear of ties at the threshold, where rounding could flip a comparison.
            let t = mean(&y);
            prop_assume!(y.iter().chain(&p).all(|v| (v - t).abs() > 1e-6));
            let map = |v: &Vec<f64>| v.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
            prop_assert_eq!(recall_at_mean(&y, &p).unwrap(), recall_at_mean(&map(&y), &map(&p)).unwrap());
        }

        #[test]
        fn metrics_are_permutation_invariant((y, p) in paired(), rot in 0usize..40) {
            let k = rot % y.len();
            let mut yr = y.clone();
            let mut pr = p.clone();
            yr.rotate_left(k);
            pr.rotate_left(k);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs());
            prop_assert!(close(mse(&y, &p).unwrap(), mse(&yr, &pr).unwrap()));
            prop_assert!(close(mae(&y, &p).unwrap(), mae(&yr, &pr).unwrap()));
            if let (Ok(a), Ok(b)) = (r2(&y, &p), r2(&yr, &pr)) {
                prop_assert!(close(a, b));
            }
        }

        #[test]
        fn perfect_r2_iff_exact((y, p) in paired()) {
            if let Ok(score) = r2(&y, &y) {
                prop_assert_eq!(score, 1.0);
            }
            let differs = y.iter().zip(&p).any(|(a, b)| (a - b).abs() > 1e-6);
            if let (true, Ok(score)) = (differs, r2(&y, &p)) {
                prop_assert!(score < 1.0);
            }
        }
    }
}
