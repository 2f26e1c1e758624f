//! Classical bootstrap particle filter.
//!
//! Kept separate from the multilevel engine: plain nonnegative weights, no
//! signs, no levels. It consumes the same substreams, so a one-level
//! multilevel run and this filter can be compared particle by particle.

use rand::Rng;

use crate::error::{Result, SmcError};
use crate::model::{HmmModel, ParticleState};
use crate::rng::{Phase, Substreams, BLOCK};

pub struct BootstrapFilter<'m, M: HmmModel> {
    model: &'m M,
    streams: Substreams,
    particles: Vec<M::State>,
    step: usize,
    started: bool,
}

impl<'m, M: HmmModel> BootstrapFilter<'m, M> {
    pub fn new(model: &'m M, n: usize, seed: u64) -> Self {
        let streams = Substreams::new(seed);
        let mut particles = Vec::with_capacity(n);
        for b in 0..n.div_ceil(BLOCK) {
            let mut rng = streams.stream(0, Phase::Init, 0, b);
            for _ in b * BLOCK..n.min((b + 1) * BLOCK) {
                particles.push(model.sample_prior(&mut rng));
            }
        }
        BootstrapFilter {
            model,
            streams,
            particles,
            step: 0,
            started: false,
        }
    }

    pub fn particles(&self) -> &[M::State] {
        &self.particles
    }

    fn propagate(&mut self) -> Result<()> {
        let n = self.particles.len();
        let mut next = Vec::with_capacity(n);
        for b in 0..n.div_ceil(BLOCK) {
            let mut rng = self.streams.stream(self.step, Phase::Mutate, 0, b);
            for i in b * BLOCK..n.min((b + 1) * BLOCK) {
                let x = self
                    .model
                    .sample_transition(&self.particles[i], &mut rng)
                    .map_err(|source| SmcError::Transition { index: i, source })?;
                next.push(x);
            }
        }
        self.particles = next;
        self.step += 1;
        Ok(())
    }

    /// Advances to the next observation (propagating unless this is the
    /// first step), weights with the top-level likelihood and resamples.
    /// Returns the filter mean of the resampled particles.
    pub fn step(&mut self) -> Result<Vec<f64>> {
        if self.started {
            self.propagate()?;
        }
        self.started = true;
        let top = self.model.num_levels() - 1;
        let n = self.particles.len();

        let logs: Vec<f64> = self
            .particles
            .iter()
            .map(|x| self.model.log_likelihood(self.step, top, x))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max.is_nan() || max == f64::INFINITY {
            return Err(SmcError::Likelihood {
                index: 0,
                level: top,
                value: max,
            });
        }
        let mut cdf = Vec::with_capacity(n);
        let mut total = 0.0;
        for l in &logs {
            total += (l - max).exp() / n as f64;
            cdf.push(total);
        }
        if !(total > 0.0) {
            return Err(SmcError::DegenerateEnsemble);
        }

        let mut chosen = Vec::with_capacity(n);
        for b in 0..n.div_ceil(BLOCK) {
            let mut rng = self.streams.stream(self.step, Phase::Resample, 0, b);
            for _ in b * BLOCK..n.min((b + 1) * BLOCK) {
                let u = rng.random::<f64>() * total;
                let mut lo = 0;
                let mut hi = n - 1;
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if cdf[mid] > u {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                chosen.push(self.particles[lo].clone());
            }
        }
        self.particles = chosen;

        let dim = self.particles[0].coords().len();
        let mut m = vec![0.0; dim];
        for x in &self.particles {
            for (a, c) in m.iter_mut().zip(x.coords()) {
                *a += c;
            }
        }
        Ok(m.into_iter().map(|a| a / n as f64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar1::{ar1_prior, ar1_step};
    use crate::filter::{init, mutate, resample, reweight};
    use crate::model::ClosureModel;
    use crate::schedule::LevelSchedule;

    fn model() -> ClosureModel<f64> {
        ClosureModel::new(|r| ar1_prior(0.0, 0.5, r), |x, r| ar1_step(*x, 0.5, r))
            .level(|n, x| (-0.5 * (x - (n as f64).sin()).powi(2)).exp())
    }

    #[test]
    fn matches_single_level_engine_exactly() {
        let m = model();
        let n = 700;
        let streams = Substreams::new(17);
        let mut bpf = BootstrapFilter::new(&m, n, 17);
        let mut e = init(&m, LevelSchedule::single(n).unwrap(), &streams).unwrap();
        assert_eq!(bpf.particles(), e.states());
        for step in 0..6 {
            if step > 0 {
                e = mutate(e, &m, &streams).unwrap();
            }
            let r = resample(reweight(e, &m, step).unwrap(), &streams).unwrap();
            let mean = bpf.step().unwrap();
            assert_eq!(bpf.particles(), r.states());
            assert_eq!(mean, crate::filter::mean(&r).unwrap());
            e = r;
        }
    }

    #[test]
    fn degenerate_weights_error() {
        let m = ClosureModel::new(|_| 0.0f64, |x, _| *x).level(|_, _| 0.0);
        let mut bpf = BootstrapFilter::new(&m, 10, 1);
        assert!(matches!(bpf.step(), Err(SmcError::DegenerateEnsemble)));
    }
}
