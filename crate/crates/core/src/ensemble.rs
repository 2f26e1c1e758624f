use crate::error::{Result, SmcError};
use crate::model::ParticleState;
use crate::schedule::LevelSchedule;

/// Diagnostics recorded by the resampling step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleDiagnostics {
    /// Share of resampled particles carrying sign -1.
    pub negative_fraction: f64,
    /// `sum_i w_hat_i / S(N)`, in `[-1, 1]`.
    pub normalizer: f64,
    /// `sum_i w_tilde_i / sum_i |w_tilde_i|`: the conditional mean of
    /// `normalizer` given the weighted ensemble.
    pub expected_normalizer: f64,
    /// Set when either normalizer falls below `EPS_NORM` in magnitude.
    pub degenerate_normalizer: bool,
}

/// Particles with signed weights, partitioned into levels.
///
/// Between operations an ensemble is either *signed* (weights are the signs
/// `w_i` in `{-1, 0, +1}`) or *weighted* (telescoped real weights present,
/// between reweighting and resampling).
#[derive(Debug, Clone)]
pub struct SignedEnsemble<S> {
    pub(crate) states: Vec<S>,
    pub(crate) signs: Vec<i8>,
    pub(crate) raw_weights: Option<Vec<f64>>,
    /// Log of the common factor divided out of `raw_weights`.
    pub(crate) log_shift: f64,
    pub(crate) schedule: LevelSchedule,
    pub(crate) step: usize,
    pub(crate) diagnostics: Option<ResampleDiagnostics>,
}

impl<S: ParticleState> SignedEnsemble<S> {
    /// Builds a signed ensemble directly, e.g. to start from a constructed state.
    pub fn from_parts(states: Vec<S>, signs: Vec<i8>, schedule: LevelSchedule, step: usize) -> Result<Self> {
        if states.len() != schedule.total_size() || signs.len() != states.len() {
            return Err(SmcError::Config(format!(
                "ensemble of {} states / {} signs does not match schedule size {}",
                states.len(),
                signs.len(),
                schedule.total_size()
            )));
        }
        if signs.iter().any(|s| !(-1..=1).contains(s)) {
            return Err(SmcError::Config("signs must be -1, 0 or +1".into()));
        }
        Ok(SignedEnsemble {
            states,
            signs,
            raw_weights: None,
            log_shift: 0.0,
            schedule,
            step,
            diagnostics: None,
        })
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Telescoped weights divided by `exp(log_shift())`, a factor common to
    /// all particles that keeps them representable.
    pub fn raw_weights(&self) -> Option<&[f64]> {
        self.raw_weights.as_deref()
    }

    pub fn log_shift(&self) -> f64 {
        self.log_shift
    }

    /// Telescoped weights on their absolute scale. May under- or overflow
    /// when the likelihoods are extreme.
    pub fn telescoped_weights(&self) -> Option<Vec<f64>> {
        let scale = self.log_shift.exp();
        self.raw_weights.as_ref().map(|w| w.iter().map(|w| w * scale).collect())
    }

    pub fn schedule(&self) -> &LevelSchedule {
        &self.schedule
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Diagnostics of the most recent resampling, cleared by mutation.
    pub fn diagnostics(&self) -> Option<&ResampleDiagnostics> {
        self.diagnostics.as_ref()
    }

    /// Signed atoms of one level: `(x_i, w_i / N_l)` in the signed phase,
    /// `(x_i, w_tilde_i)` in the weighted phase.
    pub fn level_view(&self, level: usize) -> Result<SignedMeasureView<S>> {
        if level >= self.schedule.num_levels() {
            return Err(SmcError::LevelOutOfRange {
                level,
                levels: self.schedule.num_levels(),
            });
        }
        let r = self.schedule.range(level);
        let n = r.len() as f64;
        let atoms = match &self.raw_weights {
            Some(w) => r.map(|i| (self.states[i].clone(), w[i])).collect(),
            None => r
                .map(|i| (self.states[i].clone(), f64::from(self.signs[i]) / n))
                .collect(),
        };
        Ok(SignedMeasureView { level, atoms })
    }
}

/// Finite signed measure `sum_k a_k delta_{x_k}` restricted to one level.
#[derive(Debug, Clone)]
pub struct SignedMeasureView<S> {
    pub level: usize,
    pub atoms: Vec<(S, f64)>,
}

impl<S> SignedMeasureView<S> {
    pub fn integrate(&self, f: impl Fn(&S) -> f64) -> f64 {
        self.atoms.iter().map(|(x, a)| a * f(x)).sum()
    }

    /// Integral against the total variation measure.
    pub fn integrate_abs(&self, f: impl Fn(&S) -> f64) -> f64 {
        self.atoms.iter().map(|(x, a)| a.abs() * f(x)).sum()
    }
}
