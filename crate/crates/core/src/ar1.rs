//! Gaussian random-walk AR(1) signal and synthetic trajectories.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SmcError};
use crate::rng::{Phase, StreamRng, Substreams};

/// `X_0 ~ N(init_mean, sigma^2)`, `X_n | X_{n-1} = x ~ N(x, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Signal {
    pub init_mean: f64,
    pub sigma: f64,
}

impl Ar1Signal {
    /// `sigma = 0` is accepted as the degenerate (deterministic) kernel.
    pub fn new(init_mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) || !init_mean.is_finite() {
            return Err(SmcError::Config(format!(
                "invalid AR(1) parameters ({init_mean}, {sigma})"
            )));
        }
        Ok(Ar1Signal { init_mean, sigma })
    }

    pub fn prior(&self, rng: &mut StreamRng) -> f64 {
        ar1_prior(self.init_mean, self.sigma, rng)
    }

    pub fn step(&self, x: f64, rng: &mut StreamRng) -> f64 {
        ar1_step(x, self.sigma, rng)
    }
}

pub fn ar1_prior(init_mean: f64, sigma: f64, rng: &mut StreamRng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    init_mean + sigma * z
}

pub fn ar1_step(x: f64, sigma: f64, rng: &mut StreamRng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    x + sigma * z
}

/// Realised signal path with one observation vector per step.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrajectory {
    pub states: Vec<f64>,
    pub observations: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SyntheticTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// CSV with header `step,state,obs_1..obs_m`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let m = self.observations.first().map_or(0, Vec::len);
        let mut header = vec!["step".to_string(), "state".to_string()];
        header.extend((1..=m).map(|k| format!("obs_{k}")));
        out.write_record(&header)?;
        for (n, (x, y)) in self.states.iter().zip(&self.observations).enumerate() {
            let mut row = vec![n.to_string(), crate::harness::fmt_f64(*x)];
            row.extend(y.iter().map(|v| crate::harness::fmt_f64(*v)));
            out.write_record(&row)?;
        }
        out.flush()
    }
}

/// Simulates `n_steps` states and observations. `observe` draws `y_n` from
/// the exact observation model given `x_n`.
pub fn simulate<F>(signal: &Ar1Signal, n_steps: usize, mut observe: F, seed: u64) -> SyntheticTrajectory
where
    F: FnMut(f64, &mut StreamRng) -> Vec<f64>,
{
    let mut rng = Substreams::new(seed).stream(0, Phase::Data, 0, 0);
    let mut states = Vec::with_capacity(n_steps);
    let mut observations = Vec::with_capacity(n_steps);
    let mut x = f64::NAN;
    for n in 0..n_steps {
        x = if n == 0 {
            signal.prior(&mut rng)
        } else {
            signal.step(x, &mut rng)
        };
        states.push(x);
        observations.push(observe(x, &mut rng));
    }
    SyntheticTrajectory {
        states,
        observations,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> StreamRng {
        Substreams::new(seed).stream(0, Phase::Data, 0, 0)
    }

    #[test]
    fn zero_sigma_is_deterministic() {
        let mut r = rng(1);
        assert_eq!(ar1_prior(3.5, 0.0, &mut r), 3.5);
        assert_eq!(ar1_step(-1.25, 0.0, &mut r), -1.25);
    }

    #[test]
    fn prior_mean_concentrates() {
        let mut r = rng(2);
        let n = 100_000;
        let m: f64 = (0..n).map(|_| ar1_prior(0.0, 0.1, &mut r)).sum::<f64>() / n as f64;
        // 3 sigma / sqrt(n) < 0.001
        assert!(m.abs() < 0.002, "{m}");
    }

    #[test]
    fn step_variance_and_two_step_composition() {
        let mut r = rng(3);
        let n = 100_000;
        let sigma = 0.3;
        let one: Vec<f64> = (0..n).map(|_| ar1_step(1.0, sigma, &mut r) - 1.0).collect();
        let v1 = one.iter().map(|d| d * d).sum::<f64>() / n as f64;
        assert!((v1 / (sigma * sigma) - 1.0).abs() < 0.05, "{v1}");
        let two: Vec<f64> = (0..n)
            .map(|_| {
                let x1 = ar1_step(0.0, sigma, &mut r);
                ar1_step(x1, sigma, &mut r)
            })
            .collect();
        let v2 = two.iter().map(|d| d * d).sum::<f64>() / n as f64;
        assert!((v2 / (2.0 * sigma * sigma) - 1.0).abs() < 0.05, "{v2}");
    }

    #[test]
    fn simulate_is_reproducible() {
        let s = Ar1Signal::new(1.0, 0.02).unwrap();
        let obs = |x: f64, r: &mut StreamRng| vec![x + ar1_step(0.0, 0.1, r)];
        assert!(simulate(&s, 0, obs, 5).is_empty());
        let a = simulate(&s, 50, obs, 5);
        let b = simulate(&s, 50, obs, 5);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        assert_ne!(a, simulate(&s, 50, obs, 6));
    }

    #[test]
    fn csv_layout() {
        let t = SyntheticTrajectory {
            states: vec![0.5],
            observations: vec![vec![1.0, 2.0]],
            seed: 0,
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,state,obs_1,obs_2\n0,"));
    }
}
