//! High-dimensional Gaussian observations with a dense random covariance.
//!
//! Observations are `y_n = x_n 1_p + V_n`, `V_n ~ N(0, Sigma)`. The exact
//! likelihood needs a triangular solve against the Cholesky factor of
//! `Sigma` (`O(p^2)` per particle); the cheap level treats the coordinates
//! as independent (`O(p)`), rescaled by a least-squares factor fitted on the
//! current upper-level particles.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ar1::{simulate, Ar1Signal, SyntheticTrajectory};
use crate::ensemble::SignedEnsemble;
use crate::error::{ModelError, Result, SmcError};
use crate::linalg::CholeskyFactor;
use crate::model::{par_fill, HmmModel, LevelLogLikelihoods};
use crate::rng::{Phase, StreamRng, Substreams};

const MAX_FACTOR_RETRIES: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationCovariance {
    p: usize,
    full: Vec<f64>,
    diag: Vec<f64>,
    inv_diag: Vec<f64>,
    chol: CholeskyFactor,
    log_det_diag: f64,
}

impl ObservationCovariance {
    pub fn from_matrix(p: usize, full: Vec<f64>) -> Result<Self> {
        if p == 0 || full.len() != p * p {
            return Err(SmcError::Config(format!("covariance must be {p}x{p}")));
        }
        let diag: Vec<f64> = (0..p).map(|i| full[i * p + i]).collect();
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(SmcError::Config("covariance diagonal must be positive".into()));
        }
        let chol = CholeskyFactor::new(p, &full)?;
        let log_det_diag = diag.iter().map(|d| d.ln()).sum();
        let inv_diag = diag.iter().map(|d| 1.0 / d).collect();
        Ok(ObservationCovariance {
            p,
            full,
            diag,
            inv_diag,
            chol,
            log_det_diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Row-major full matrix.
    pub fn full(&self) -> &[f64] {
        &self.full
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.full[i * self.p + j]
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn cholesky(&self) -> &CholeskyFactor {
        &self.chol
    }

    /// `-(1/2) log det Sigma - (p/2) log 2 pi`.
    pub fn log_normalizer_full(&self) -> f64 {
        -0.5 * self.chol.log_det() - 0.5 * self.p as f64 * (2.0 * PI).ln()
    }

    /// Same constant for the diagonal approximation.
    pub fn log_normalizer_diag(&self) -> f64 {
        -0.5 * self.log_det_diag - 0.5 * self.p as f64 * (2.0 * PI).ln()
    }

    /// Draw of `V ~ N(0, Sigma)`.
    pub fn sample_noise(&self, rng: &mut StreamRng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.p).map(|_| StandardNormal.sample(rng)).collect();
        self.chol.mul_lower(&z)
    }

    /// Binary layout: little-endian `u64` dimension, then `p*p` little-endian
    /// `f64` entries in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.p as u64).to_le_bytes())?;
        for v in &self.full {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| SmcError::Config(format!("covariance file: {e}"));
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(io)?;
        let p = u64::from_le_bytes(word) as usize;
        let mut full = Vec::with_capacity(p * p);
        for _ in 0..p * p {
            r.read_exact(&mut word).map_err(io)?;
            full.push(f64::from_le_bytes(word));
        }
        Self::from_matrix(p, full)
    }
}

/// `Sigma_ij = B_ij exp(-2|i-j|)` with `B = A A^T`, `A_ij ~ U[0,1)`.
///
/// If the factorization fails the seed is incremented and the matrix drawn
/// again, at most ten times.
pub fn generate_covariance(p: usize, seed: u64) -> Result<ObservationCovariance> {
    if p == 0 {
        return Err(SmcError::Config("observation dimension must be positive".into()));
    }
    let mut last = None;
    for attempt in 0..=MAX_FACTOR_RETRIES {
        let s = seed.wrapping_add(attempt);
        let mut rng = Substreams::new(s).stream(0, Phase::Covariance, 0, 0);
        let a: Vec<f64> = (0..p * p).map(|_| rng.random::<f64>()).collect();
        let mut full = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..=i {
                let b: f64 = a[i * p..(i + 1) * p]
                    .iter()
                    .zip(&a[j * p..(j + 1) * p])
                    .map(|(x, y)| x * y)
                    .sum();
                let v = b * (-2.0 * (i - j) as f64).exp();
                full[i * p + j] = v;
                full[j * p + i] = v;
            }
        }
        match ObservationCovariance::from_matrix(p, full) {
            Ok(c) => return Ok(c),
            Err(e) => {
                log::warn!("covariance draw with seed {s} failed to factor ({e}); retrying");
                last = Some(e);
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Exact Gaussian log-likelihood kernel `-(1/2) r^T Sigma^{-1} r`,
/// `r = y - x 1_p`, without normalizing constant.
pub fn loglik_full(x: f64, y: &[f64], cov: &ObservationCovariance) -> f64 {
    let mut r: Vec<f64> = y.iter().map(|v| v - x).collect();
    -0.5 * cov.chol.quad_form_in_place(&mut r)
}

/// Independent-coordinate kernel `-(1/2) sum_k r_k^2 / Sigma_kk`.
pub fn loglik_diag(x: f64, y: &[f64], cov: &ObservationCovariance) -> f64 {
    // four partial sums so the loop vectorises
    let mut acc = [0.0f64; 4];
    let yc = y.chunks_exact(4);
    let wc = cov.inv_diag.chunks_exact(4);
    let (yt, wt) = (yc.remainder(), wc.remainder());
    for (yv, wv) in yc.zip(wc) {
        for k in 0..4 {
            let r = yv[k] - x;
            acc[k] += r * r * wv[k];
        }
    }
    let tail: f64 = yt.iter().zip(wt).map(|(v, w)| (v - x) * (v - x) * w).sum();
    -0.5 * ((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail)
}

/// Multiplicative correction `C = argmin_c sum (c g0 - g1)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingCorrection {
    pub c: f64,
    /// Set when there was nothing to fit and `c` defaulted to 1.
    pub fallback: bool,
}

/// Least-squares scale from likelihood values (not logs).
pub fn fit_scaling(g0: &[f64], g1: &[f64]) -> ScalingCorrection {
    let den: f64 = g0.iter().map(|a| a * a).sum();
    if !(den > 0.0) {
        log::warn!("scaling correction has no information; using C = 1");
        return ScalingCorrection { c: 1.0, fallback: true };
    }
    let num: f64 = g0.iter().zip(g1).map(|(a, b)| a * b).sum();
    ScalingCorrection {
        c: num / den,
        fallback: false,
    }
}

/// [`fit_scaling`] from log-likelihoods; returns `log C`.
pub fn fit_log_scaling(log_g0: &[f64], log_g1: &[f64]) -> (f64, bool) {
    let s0 = log_g0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s1 = log_g1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if s0 == f64::NEG_INFINITY || !s0.is_finite() || !s1.is_finite() {
        if log_g0.is_empty() {
            log::debug!("no upper-level particles; scaling correction defaults to C = 1");
        } else {
            log::warn!("scaling correction has no information; using C = 1");
        }
        return (0.0, true);
    }
    let g0: Vec<f64> = log_g0.iter().map(|l| (l - s0).exp()).collect();
    let g1: Vec<f64> = log_g1.iter().map(|l| (l - s1).exp()).collect();
    let fit = fit_scaling(&g0, &g1);
    (fit.c.ln() + s1 - s0, fit.fallback)
}

/// Scalar random-walk signal observed through `p` correlated coordinates.
///
/// One level: exact likelihood only (classical filter). Two levels: level 0
/// is the rescaled diagonal approximation, level 1 the exact likelihood.
#[derive(Debug, Clone)]
pub struct BigDataModel {
    signal: Ar1Signal,
    cov: Arc<ObservationCovariance>,
    observations: Arc<Vec<Vec<f64>>>,
    levels: usize,
}

impl BigDataModel {
    pub fn new(
        signal: Ar1Signal,
        cov: Arc<ObservationCovariance>,
        observations: Arc<Vec<Vec<f64>>>,
        levels: usize,
    ) -> Result<Self> {
        if !(1..=2).contains(&levels) {
            return Err(SmcError::Config(format!(
                "big-data model supports 1 or 2 levels, got {levels}"
            )));
        }
        if let Some(y) = observations.iter().find(|y| y.len() != cov.dim()) {
            return Err(SmcError::Config(format!(
                "observation of length {} does not match covariance dimension {}",
                y.len(),
                cov.dim()
            )));
        }
        Ok(BigDataModel {
            signal,
            cov,
            observations,
            levels,
        })
    }

    pub fn with_levels(&self, levels: usize) -> Result<Self> {
        Self::new(self.signal, self.cov.clone(), self.observations.clone(), levels)
    }

    pub fn signal(&self) -> &Ar1Signal {
        &self.signal
    }

    pub fn covariance(&self) -> &Arc<ObservationCovariance> {
        &self.cov
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    fn full(&self, step: usize, x: f64) -> f64 {
        loglik_full(x, &self.observations[step], &self.cov) + self.cov.log_normalizer_full()
    }

    fn diag(&self, step: usize, x: f64) -> f64 {
        loglik_diag(x, &self.observations[step], &self.cov) + self.cov.log_normalizer_diag()
    }
}

/// Synthetic observations `y = x 1_p + V` for a trajectory of `signal`.
pub fn simulate_observations(
    signal: &Ar1Signal,
    cov: &ObservationCovariance,
    n_steps: usize,
    seed: u64,
) -> SyntheticTrajectory {
    simulate(
        signal,
        n_steps,
        |x, rng| cov.sample_noise(rng).into_iter().map(|v| x + v).collect(),
        seed,
    )
}

/// Two-level model on a fresh covariance and trajectory derived from `seed`.
pub fn build_bigdata_model(
    p: usize,
    sigma: f64,
    n_steps: usize,
    seed: u64,
) -> Result<(BigDataModel, SyntheticTrajectory)> {
    let root = Substreams::new(seed);
    let cov = generate_covariance(p, root.child(0).seed())?;
    let signal = Ar1Signal::new(0.0, sigma)?;
    let traj = simulate_observations(&signal, &cov, n_steps, root.child(1).seed());
    let model = BigDataModel::new(signal, Arc::new(cov), Arc::new(traj.observations.clone()), 2)?;
    Ok((model, traj))
}

impl HmmModel for BigDataModel {
    type State = f64;

    fn num_levels(&self) -> usize {
        self.levels
    }

    fn num_observations(&self) -> Option<usize> {
        Some(self.observations.len())
    }

    fn sample_prior(&self, rng: &mut StreamRng) -> f64 {
        self.signal.prior(rng)
    }

    fn sample_transition(&self, x: &f64, rng: &mut StreamRng) -> Result<f64, ModelError> {
        Ok(self.signal.step(*x, rng))
    }

    /// Uncorrected level log-likelihoods (the scale factor is applied per
    /// step in [`HmmModel::level_log_likelihoods`]).
    fn log_likelihood(&self, step: usize, level: usize, x: &f64) -> f64 {
        if level + 1 == self.levels {
            self.full(step, *x)
        } else {
            self.diag(step, *x)
        }
    }

    fn level_log_likelihoods(&self, step: usize, e: &SignedEnsemble<f64>) -> Result<LevelLogLikelihoods, ModelError> {
        if self.levels == 1 {
            return Ok(LevelLogLikelihoods::evaluate(e.schedule(), e.states(), |_, x| {
                self.full(step, *x)
            }));
        }
        let n = e.len();
        let lo = e.schedule().range(0);
        let hi = e.schedule().range(1);
        let states = e.states();

        // exact level first: its particles calibrate the cheap level
        let mut full_hi = vec![0.0; hi.len()];
        let mut diag_hi = vec![0.0; hi.len()];
        par_fill(&mut full_hi, &states[hi.clone()], |x| self.full(step, *x));
        par_fill(&mut diag_hi, &states[hi.clone()], |x| self.diag(step, *x));
        let (log_c, _) = fit_log_scaling(&diag_hi, &full_hi);

        let mut upper = vec![0.0; n];
        let mut lower = vec![f64::NEG_INFINITY; n];
        par_fill(&mut upper[lo.clone()], &states[lo], |x| self.diag(step, *x) + log_c);
        for (k, i) in hi.enumerate() {
            upper[i] = full_hi[k];
            lower[i] = diag_hi[k] + log_c;
        }
        Ok(LevelLogLikelihoods { upper, lower })
    }
}
