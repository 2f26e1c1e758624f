//! Fixtures shared by the benchmarks.

use mlbpf::{generate_covariance, ObservationCovariance};

/// Covariance and a matching observation vector of dimension `p`.
pub fn observation_fixture(p: usize) -> (ObservationCovariance, Vec<f64>) {
    let cov = generate_covariance(p, 11).expect("covariance");
    let y = (0..p).map(|k| (k as f64 * 0.31).sin()).collect();
    (cov, y)
}
