//! Shared helpers for the integration suites: finite-difference gradient
//! checks, scalar-enumeration loss oracles, reference clustering baselines,
//! and metric oracles. Everything here is independent of the library's
//! computation paths it is used to check.

pub mod cluster;
pub mod fd;
pub mod metric_oracles;
pub mod oracles;

use scdc_core::rng::Stream;

/// Uniform random buffer from a test stream.
pub fn uniform(rng: &mut Stream, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    use rand::Rng;
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Random row-stochastic matrix (entries bounded away from 0).
pub fn random_prob_rows(rng: &mut Stream, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let raw = uniform(rng, cols, 0.05, 1.0);
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect()
}

pub fn flatten(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}
