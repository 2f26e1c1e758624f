//! Signed-ensemble engine for the multilevel filter.
//!
//! One filter step takes a signed ensemble through [`reweight`] (telescoped
//! likelihood differences per level), [`resample`] (iid draws from the total
//! variation of the weighted ensemble, signs from the aggregated weight of the
//! drawn state) and [`mutate`] (signal kernel, signs carried). With a single
//! level every step is the classical bootstrap filter.

use rustc_hash::FxHashMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::{ResampleDiagnostics, SignedEnsemble};
use crate::error::{Result, SmcError};
use crate::model::{HmmModel, ParticleState};
use crate::rng::{Phase, StreamRng, Substreams, BLOCK};
use crate::schedule::LevelSchedule;

/// Threshold on `|normalizer|` below which an estimate is flagged.
pub const EPS_NORM: f64 = 1e-6;

/// Per-step output of [`run_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterEstimate {
    pub step: usize,
    /// Post-resampling filter mean.
    pub filter_mean: Vec<f64>,
    /// Prediction mean from the signed ensemble before reweighting.
    pub prediction_mean: Vec<f64>,
    /// Self-normalised mean of the telescoped weights before resampling;
    /// `None` when those weights sum to exactly zero.
    pub weighted_mean: Option<Vec<f64>>,
    pub normalizer: f64,
    pub expected_normalizer: f64,
    pub negative_fraction: f64,
    pub degenerate_normalizer: bool,
    /// Seconds spent on this step.
    pub wall_clock: f64,
}

fn check_levels<M: HmmModel>(model: &M, schedule: &LevelSchedule) -> Result<()> {
    if model.num_levels() != schedule.num_levels() {
        return Err(SmcError::Config(format!(
            "schedule has {} levels but the model has {}",
            schedule.num_levels(),
            model.num_levels()
        )));
    }
    Ok(())
}

/// Runs `f(rng, offset_in_level)` for every block of every level and
/// concatenates the per-block outputs in index order.
fn per_block<T, F>(schedule: &LevelSchedule, streams: &Substreams, step: usize, phase: Phase, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng, usize, usize, usize) -> Result<Vec<T>> + Sync,
{
    let mut out = Vec::with_capacity(schedule.total_size());
    for level in 0..schedule.num_levels() {
        let n = schedule.level_size(level);
        let blocks: Vec<Vec<T>> = (0..n.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut rng = streams.stream(step, phase, level, b);
                let start = b * BLOCK;
                f(&mut rng, level, start, (n - start).min(BLOCK))
            })
            .collect::<Result<_>>()?;
        out.extend(blocks.into_iter().flatten());
    }
    Ok(out)
}

/// Draws `S(N)` iid particles from the prior, all with sign +1.
pub fn init<M: HmmModel>(model: &M, schedule: LevelSchedule, streams: &Substreams) -> Result<SignedEnsemble<M::State>> {
    check_levels(model, &schedule)?;
    let states = per_block(&schedule, streams, 0, Phase::Init, |rng, _, _, len| {
        Ok((0..len).map(|_| model.sample_prior(rng)).collect())
    })?;
    let signs = vec![1; states.len()];
    Ok(SignedEnsemble {
        states,
        signs,
        raw_weights: None,
        log_shift: 0.0,
        schedule,
        step: 0,
        diagnostics: None,
    })
}

/// Attaches telescoped weights `(g^l - g^(l-1))(x_i) w_i / N_l` computed at
/// observation `obs_step`.
///
/// All log-likelihoods of the step share one shift (their maximum) so that
/// levels stay on a common scale.
pub fn reweight<M: HmmModel>(
    mut e: SignedEnsemble<M::State>,
    model: &M,
    obs_step: usize,
) -> Result<SignedEnsemble<M::State>> {
    if e.raw_weights.is_some() {
        return Err(SmcError::Phase("reweight on an already weighted ensemble"));
    }
    check_levels(model, &e.schedule)?;
    let table = model.level_log_likelihoods(obs_step, &e)?;
    let schedule = &e.schedule;
    if table.upper.len() != e.len() || table.lower.len() != e.len() {
        return Err(SmcError::Config(
            "likelihood table size does not match the ensemble".into(),
        ));
    }

    let mut shift = f64::NEG_INFINITY;
    for level in 0..schedule.num_levels() {
        for i in schedule.range(level) {
            let pairs = [(table.upper[i], level), (table.lower[i], level.wrapping_sub(1))];
            for (v, lv) in pairs {
                if v.is_nan() || v == f64::INFINITY {
                    return Err(SmcError::Likelihood {
                        index: i,
                        level: lv,
                        value: v,
                    });
                }
                shift = shift.max(v);
            }
        }
    }
    if shift == f64::NEG_INFINITY {
        return Err(SmcError::DegenerateEnsemble);
    }

    let mut weights = vec![0.0; e.len()];
    for level in 0..schedule.num_levels() {
        let r = schedule.range(level);
        let n = r.len() as f64;
        for i in r {
            let lower = table.lower[i];
            let mut diff = (table.upper[i] - shift).exp();
            if lower != f64::NEG_INFINITY {
                diff -= (lower - shift).exp();
            }
            weights[i] = diff * f64::from(e.signs[i]) / n;
        }
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(SmcError::DegenerateEnsemble);
    }
    e.raw_weights = Some(weights);
    e.log_shift = shift;
    Ok(e)
}

/// Selection law of one resampling step: probabilities proportional to
/// `|w_tilde_j|`, and for each source particle the sign of the summed weight
/// of all particles sharing its state.
#[derive(Debug, Clone)]
pub struct ResamplingTable {
    abs_weights: Vec<f64>,
    cumulative: Vec<f64>,
    signs: Vec<i8>,
    total: f64,
}

fn sgn(x: f64) -> i8 {
    (x > 0.0) as i8 - (x < 0.0) as i8
}

impl ResamplingTable {
    pub fn new<S: ParticleState>(states: &[S], weights: &[f64]) -> Result<Self> {
        assert_eq!(states.len(), weights.len());
        let abs_weights: Vec<f64> = weights.iter().map(|w| w.abs()).collect();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut total = 0.0;
        for a in &abs_weights {
            total += a;
            cumulative.push(total);
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(SmcError::DegenerateEnsemble);
        }

        let mixed = weights.iter().any(|&w| w > 0.0) && weights.iter().any(|&w| w < 0.0);
        let signs = if mixed {
            let mut by_state: FxHashMap<S::Key, f64> =
                FxHashMap::with_capacity_and_hasher(states.len(), Default::default());
            for (x, &w) in states.iter().zip(weights) {
                *by_state.entry(x.key()).or_insert(0.0) += w;
            }
            states.iter().map(|x| sgn(by_state[&x.key()])).collect()
        } else {
            // Without opposite signs every drawn state's aggregate has the
            // sign of its own (necessarily nonzero) weight.
            weights.iter().map(|&w| sgn(w)).collect()
        };
        Ok(ResamplingTable {
            abs_weights,
            cumulative,
            signs,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// Probability of drawing source particle `j`.
    pub fn probability(&self, j: usize) -> f64 {
        self.abs_weights[j] / self.total
    }

    /// Sign given to a draw of source particle `j`.
    pub fn sign(&self, j: usize) -> i8 {
        self.signs[j]
    }

    pub fn total_variation(&self) -> f64 {
        self.total
    }

    pub fn draw(&self, rng: &mut StreamRng) -> usize {
        let u = rng.random::<f64>() * self.total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Multinomial resampling from the total variation of the weighted ensemble.
pub fn resample<S: ParticleState>(e: SignedEnsemble<S>, streams: &Substreams) -> Result<SignedEnsemble<S>> {
    let weights = e
        .raw_weights
        .as_ref()
        .ok_or(SmcError::Phase("resample needs a weighted ensemble"))?;
    let table = ResamplingTable::new(&e.states, weights)?;
    let picks = per_block(&e.schedule, streams, e.step, Phase::Resample, |rng, _, _, len| {
        Ok((0..len).map(|_| table.draw(rng)).collect())
    })?;

    let states: Vec<S> = picks.iter().map(|&j| e.states[j].clone()).collect();
    let signs: Vec<i8> = picks.iter().map(|&j| table.sign(j)).collect();

    let n = signs.len() as f64;
    let net: i64 = signs.iter().map(|&s| i64::from(s)).sum();
    let negatives = signs.iter().filter(|&&s| s < 0).count();
    let expected_normalizer = weights.iter().sum::<f64>() / table.total_variation();
    let normalizer = net as f64 / n;
    let diagnostics = ResampleDiagnostics {
        negative_fraction: negatives as f64 / n,
        normalizer,
        expected_normalizer,
        degenerate_normalizer: normalizer.abs() < EPS_NORM || expected_normalizer.abs() < EPS_NORM,
    };

    Ok(SignedEnsemble {
        states,
        signs,
        raw_weights: None,
        log_shift: 0.0,
        schedule: e.schedule,
        step: e.step,
        diagnostics: Some(diagnostics),
    })
}

/// Moves every particle through the signal kernel; signs are carried over.
pub fn mutate<M: HmmModel>(
    e: SignedEnsemble<M::State>,
    model: &M,
    streams: &Substreams,
) -> Result<SignedEnsemble<M::State>> {
    if e.raw_weights.is_some() {
        return Err(SmcError::Phase("mutate needs a resampled ensemble"));
    }
    let states = per_block(&e.schedule, streams, e.step, Phase::Mutate, |rng, level, start, len| {
        let base = e.schedule.offset(level) + start;
        (base..base + len)
            .map(|i| {
                model
                    .sample_transition(&e.states[i], rng)
                    .map_err(|source| SmcError::Transition { index: i, source })
            })
            .collect()
    })?;
    Ok(SignedEnsemble {
        states,
        signs: e.signs,
        raw_weights: None,
        log_shift: 0.0,
        schedule: e.schedule,
        step: e.step + 1,
        diagnostics: None,
    })
}

/// `sum_i w_i f(x_i) / sum_i w_i` over the signs of the ensemble.
///
/// On a resampled ensemble this is the filter estimate, on a mutated (or
/// freshly initialised) one the prediction estimate.
pub fn estimate<S>(e: &SignedEnsemble<S>, f: impl Fn(&S) -> f64) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0i64;
    for (x, &s) in e.states.iter().zip(&e.signs) {
        if s != 0 {
            num += f64::from(s) * f(x);
            den += i64::from(s);
        }
    }
    if den == 0 {
        return Err(SmcError::EstimateDegenerate);
    }
    Ok(num / den as f64)
}

/// Coordinate-wise signed mean.
pub fn mean<S: ParticleState>(e: &SignedEnsemble<S>) -> Result<Vec<f64>> {
    let dim = e.states.first().map_or(0, |x| x.coords().len());
    let mut acc = vec![0.0; dim];
    let mut den = 0i64;
    for (x, &s) in e.states.iter().zip(&e.signs) {
        if s != 0 {
            let s64 = f64::from(s);
            for (a, c) in acc.iter_mut().zip(x.coords()) {
                *a += s64 * c;
            }
            den += i64::from(s);
        }
    }
    if den == 0 {
        return Err(SmcError::EstimateDegenerate);
    }
    Ok(acc.into_iter().map(|a| a / den as f64).collect())
}

/// Self-normalised estimate under the telescoped weights, before resampling.
pub fn weighted_estimate<S>(e: &SignedEnsemble<S>, f: impl Fn(&S) -> f64) -> Result<f64> {
    let w = e
        .raw_weights
        .as_ref()
        .ok_or(SmcError::Phase("weighted estimate needs a weighted ensemble"))?;
    let den: f64 = w.iter().sum();
    if den == 0.0 {
        return Err(SmcError::EstimateDegenerate);
    }
    Ok(e.states.iter().zip(w).map(|(x, w)| w * f(x)).sum::<f64>() / den)
}

fn weighted_mean<S: ParticleState>(e: &SignedEnsemble<S>) -> Option<Vec<f64>> {
    let w = e.raw_weights.as_ref()?;
    let den: f64 = w.iter().sum();
    if den == 0.0 {
        return None;
    }
    let dim = e.states.first().map_or(0, |x| x.coords().len());
    let mut acc = vec![0.0; dim];
    for (x, w) in e.states.iter().zip(w) {
        for (a, c) in acc.iter_mut().zip(x.coords()) {
            *a += w * c;
        }
    }
    Some(acc.into_iter().map(|a| a / den).collect())
}

/// Level-specific unnormalised signed measure `(1/N_l) sum_{i in P_l} w_i f(x_i)`
/// of a signed ensemble, or its total variation when `absolute` is set.
pub fn level_measure<S: ParticleState>(
    e: &SignedEnsemble<S>,
    level: usize,
    f: impl Fn(&S) -> f64,
    absolute: bool,
) -> Result<f64> {
    if e.raw_weights.is_some() {
        return Err(SmcError::Phase("level measures are defined on signed ensembles"));
    }
    let view = e.level_view(level)?;
    Ok(if absolute {
        view.integrate_abs(f)
    } else {
        view.integrate(f)
    })
}

fn filter_step<M: HmmModel>(
    e: SignedEnsemble<M::State>,
    model: &M,
    streams: &Substreams,
    n: usize,
) -> Result<(SignedEnsemble<M::State>, FilterEstimate)> {
    let prediction_mean = mean(&e)?;
    let weighted = reweight(e, model, n)?;
    let weighted_mean = weighted_mean(&weighted);
    let resampled = resample(weighted, streams)?;
    let filter_mean = mean(&resampled)?;
    let d = *resampled.diagnostics().expect("resample records diagnostics");
    let est = FilterEstimate {
        step: n,
        filter_mean,
        prediction_mean,
        weighted_mean,
        normalizer: d.normalizer,
        expected_normalizer: d.expected_normalizer,
        negative_fraction: d.negative_fraction,
        degenerate_normalizer: d.degenerate_normalizer,
        wall_clock: 0.0,
    };
    Ok((resampled, est))
}

/// Runs `n_steps` filter iterations from the prior, one observation per step.
///
/// With one level this is the classical bootstrap particle filter.
pub fn run_filter<M: HmmModel>(
    model: &M,
    schedule: LevelSchedule,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<FilterEstimate>> {
    if let Some(k) = model.num_observations() {
        if k < n_steps {
            return Err(SmcError::Config(format!(
                "{n_steps} steps requested but only {k} observations"
            )));
        }
    }
    let streams = Substreams::new(seed);
    let mut out = Vec::with_capacity(n_steps);
    if n_steps == 0 {
        return Ok(out);
    }
    let mut clock = Instant::now();
    let mut e = init(model, schedule, &streams).map_err(|err| err.at_step(0))?;
    for n in 0..n_steps {
        let (resampled, mut est) = filter_step(e, model, &streams, n).map_err(|err| err.at_step(n))?;
        e = if n + 1 < n_steps {
            mutate(resampled, model, &streams).map_err(|err| err.at_step(n))?
        } else {
            resampled
        };
        est.wall_clock = clock.elapsed().as_secs_f64();
        clock = Instant::now();
        out.push(est);
    }
    Ok(out)
}
