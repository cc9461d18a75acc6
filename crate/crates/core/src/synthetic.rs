//! Seeded synthetic regression problems for tests, benches and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;

/// `y = slope * x0 + N(0, noise_sd)` with `x ~ U(0, 1)^d`; only the first
/// feature is informative.
pub fn linear(n: usize, n_features: usize, slope: f64, noise_sd: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).expect("noise_sd must be finite and >= 0");
    let mut features = Vec::with_capacity(n * n_features);
    let mut target = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..n_features).map(|_| rng.gen::<f64>()).collect();
        target.push(slope * row[0] + noise.sample(&mut rng));
        features.extend(row);
    }
    let names = (0..n_features).map(|j| format!("x{j}")).collect();
    Dataset::new(features, target, names).expect("synthetic data is finite")
}

/// Adds `shift` to a seeded random `fraction` of the targets; returns the
/// corrupted dataset and the corrupted row indices.
pub fn corrupt_targets(
    data: &Dataset,
    fraction: f64,
    shift: f64,
    seed: u64,
) -> (Dataset, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.n_rows();
    let k = (fraction * n as f64).round() as usize;
    let mut rows = rand::seq::index::sample(&mut rng, n, k.min(n)).into_vec();
    rows.sort_unstable();
    let mut target = data.target().to_vec();
    for &i in &rows {
        target[i] += shift;
    }
    let corrupted = Dataset::new(
        data.features().to_vec(),
        target,
        data.feature_names().to_vec(),
    )
    .expect("shifted targets stay finite");
    (corrupted, rows)
}
