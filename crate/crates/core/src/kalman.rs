//! Exact filter for the scalar random walk observed as `y = x 1_p + V`.

use std::io::Write;

use crate::ar1::Ar1Signal;
use crate::bigdata::ObservationCovariance;
use crate::error::{Result, SmcError};
use crate::harness::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: f64,
    pub variance: f64,
}

pub fn kalman_predict(state: KalmanState, sigma: f64) -> KalmanState {
    KalmanState {
        mean: state.mean,
        variance: state.variance + sigma * sigma,
    }
}

/// Conditions on one observation vector with `H = 1_p`.
///
/// With `u = Sigma^{-1} 1` and `J = 1^T u` the gain reduces to
/// `v u^T / (1 + v J)`, so one solve against the factor suffices.
pub fn kalman_update(state: KalmanState, y: &[f64], cov: &ObservationCovariance) -> Result<KalmanState> {
    if y.len() != cov.dim() {
        return Err(SmcError::Config(format!(
            "observation of length {} against a {}-dimensional covariance",
            y.len(),
            cov.dim()
        )));
    }
    let u = cov.cholesky().solve(&vec![1.0; cov.dim()]);
    let j: f64 = u.iter().sum();
    let innov: f64 = u.iter().zip(y).map(|(u, y)| u * (y - state.mean)).sum();
    let v = state.variance;
    let denom = 1.0 + v * j;
    Ok(KalmanState {
        mean: state.mean + v * innov / denom,
        variance: v / denom,
    })
}

/// Post-update moments at every observation. The first prediction starts
/// from `(init_mean, 0)`, which yields the prior `N(init_mean, sigma^2)`.
pub fn kalman_filter(
    observations: &[Vec<f64>],
    signal: &Ar1Signal,
    cov: &ObservationCovariance,
) -> Result<Vec<KalmanState>> {
    let mut state = KalmanState {
        mean: signal.init_mean,
        variance: 0.0,
    };
    let mut out = Vec::with_capacity(observations.len());
    for y in observations {
        state = kalman_update(kalman_predict(state, signal.sigma), y, cov)?;
        out.push(state);
    }
    Ok(out)
}

/// CSV `step,mean,variance`.
pub fn write_kalman_csv<W: Write>(states: &[KalmanState], w: W) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "mean", "variance"])?;
    for (n, s) in states.iter().enumerate() {
        out.write_record([n.to_string(), fmt_f64(s.mean), fmt_f64(s.variance)])?;
    }
    out.flush()
}
