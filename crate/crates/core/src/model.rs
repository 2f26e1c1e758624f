//! Hidden Markov model interface consumed by the filters.

use std::hash::Hash;

use rayon::prelude::*;

use crate::ensemble::SignedEnsemble;
use crate::error::ModelError;
use crate::rng::StreamRng;
use crate::schedule::LevelSchedule;

/// A particle state. Equality for weight aggregation is decided on [`key`],
/// which for floating-point states is the exact bit pattern.
///
/// [`key`]: ParticleState::key
pub trait ParticleState: Clone + Send + Sync {
    type Key: Hash + Eq + Copy + Send;

    fn key(&self) -> Self::Key;

    /// Coordinates used for mean estimates.
    fn coords(&self) -> &[f64];
}

impl ParticleState for f64 {
    type Key = u64;

    fn key(&self) -> u64 {
        self.to_bits()
    }

    fn coords(&self) -> &[f64] {
        std::slice::from_ref(self)
    }
}

impl<const D: usize> ParticleState for [f64; D] {
    type Key = [u64; D];

    fn key(&self) -> [u64; D] {
        self.map(f64::to_bits)
    }

    fn coords(&self) -> &[f64] {
        self
    }
}

/// Signal kernel plus an ordered family of level likelihoods `g^0..g^L`.
///
/// The top level is the exact (highest-fidelity) likelihood. Implementations
/// must be callable concurrently; all randomness arrives through the
/// generator argument.
pub trait HmmModel: Sync {
    type State: ParticleState;

    /// `L + 1`.
    fn num_levels(&self) -> usize;

    fn sample_prior(&self, rng: &mut StreamRng) -> Self::State;

    fn sample_transition(&self, x: &Self::State, rng: &mut StreamRng) -> Result<Self::State, ModelError>;

    /// Length of the observation record, when the model holds one.
    fn num_observations(&self) -> Option<usize> {
        None
    }

    /// `log g^level_step(x)`. `-inf` encodes a zero likelihood.
    fn log_likelihood(&self, step: usize, level: usize, x: &Self::State) -> f64;

    /// Per-particle `(log g^l, log g^(l-1))` for the level each particle
    /// belongs to. Models whose lower levels are calibrated against the
    /// current upper-level particles override this.
    fn level_log_likelihoods(
        &self,
        step: usize,
        ensemble: &SignedEnsemble<Self::State>,
    ) -> Result<LevelLogLikelihoods, ModelError> {
        Ok(LevelLogLikelihoods::evaluate(
            ensemble.schedule(),
            ensemble.states(),
            |level, x| self.log_likelihood(step, level, x),
        ))
    }
}

/// Log-likelihood pairs feeding the telescoped weights.
///
/// `upper[i]` is `log g^l(x_i)` and `lower[i]` is `log g^(l-1)(x_i)` for the
/// level `l` of particle `i`; on level 0 `lower` is `-inf` (`g^-1 = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelLogLikelihoods {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl LevelLogLikelihoods {
    pub fn evaluate<S, F>(schedule: &LevelSchedule, states: &[S], log_lik: F) -> Self
    where
        S: Sync,
        F: Fn(usize, &S) -> f64 + Sync,
    {
        let mut upper = vec![0.0; states.len()];
        let mut lower = vec![f64::NEG_INFINITY; states.len()];
        for level in 0..schedule.num_levels() {
            let r = schedule.range(level);
            par_fill(&mut upper[r.clone()], &states[r.clone()], |x| log_lik(level, x));
            if level > 0 {
                par_fill(&mut lower[r.clone()], &states[r], |x| log_lik(level - 1, x));
            }
        }
        LevelLogLikelihoods { upper, lower }
    }
}

/// `out[i] = f(&xs[i])`, evaluated in parallel chunks.
pub fn par_fill<S, T, F>(out: &mut [T], xs: &[S], f: F)
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync,
{
    debug_assert_eq!(out.len(), xs.len());
    out.par_chunks_mut(256).zip(xs.par_chunks(256)).for_each(|(o, x)| {
        for (o, x) in o.iter_mut().zip(x) {
            *o = f(x);
        }
    });
}

type Sampler<S> = Box<dyn Fn(&mut StreamRng) -> S + Send + Sync>;
type Kernel<S> = Box<dyn Fn(&S, &mut StreamRng) -> S + Send + Sync>;
type Likelihood<S> = Box<dyn Fn(usize, &S) -> f64 + Send + Sync>;

/// Model assembled from closures. Level likelihoods return plain values
/// (not logs) and receive `(step, state)`.
pub struct ClosureModel<S> {
    prior: Sampler<S>,
    transition: Kernel<S>,
    levels: Vec<Likelihood<S>>,
}

impl<S: ParticleState> ClosureModel<S> {
    pub fn new(
        prior: impl Fn(&mut StreamRng) -> S + Send + Sync + 'static,
        transition: impl Fn(&S, &mut StreamRng) -> S + Send + Sync + 'static,
    ) -> Self {
        ClosureModel {
            prior: Box::new(prior),
            transition: Box::new(transition),
            levels: Vec::new(),
        }
    }

    /// Appends the next level's likelihood.
    pub fn level(mut self, g: impl Fn(usize, &S) -> f64 + Send + Sync + 'static) -> Self {
        self.levels.push(Box::new(g));
        self
    }
}

impl<S: ParticleState> HmmModel for ClosureModel<S> {
    type State = S;

    fn num_levels(&self) -> usize {
        self.levels.len()
    }

    fn sample_prior(&self, rng: &mut StreamRng) -> S {
        (self.prior)(rng)
    }

    fn sample_transition(&self, x: &S, rng: &mut StreamRng) -> Result<S, ModelError> {
        Ok((self.transition)(x, rng))
    }

    fn log_likelihood(&self, step: usize, level: usize, x: &S) -> f64 {
        (self.levels[level])(step, x).ln()
    }
}
