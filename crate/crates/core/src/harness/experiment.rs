use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::ar1::{Ar1Signal, SyntheticTrajectory};
use crate::beam::{simulate_beam_observations, BeamModel, BeamSolver, BeamSpec};
use crate::bigdata::{generate_covariance, simulate_observations, BigDataModel, ObservationCovariance};
use crate::ensemble::SignedEnsemble;
use crate::error::{ModelError, Result, SmcError};
use crate::filter::{run_filter, FilterEstimate};
use crate::kalman::kalman_filter;
use crate::model::{HmmModel, LevelLogLikelihoods};
use crate::rng::{StreamRng, Substreams};
use crate::schedule::LevelSchedule;

use super::config::{ExperimentConfig, ExperimentKind, Reference};
use super::report::{aggregate, write_runs_csv, write_summary_csv, Summary};

/// Either experiment's model behind one type.
#[derive(Debug, Clone)]
pub enum ExperimentModel {
    BigData(BigDataModel),
    Beam(BeamModel),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            ExperimentModel::BigData($m) => $e,
            ExperimentModel::Beam($m) => $e,
        }
    };
}

impl HmmModel for ExperimentModel {
    type State = f64;

    fn num_levels(&self) -> usize {
        dispatch!(self, m => m.num_levels())
    }

    fn num_observations(&self) -> Option<usize> {
        dispatch!(self, m => m.num_observations())
    }

    fn sample_prior(&self, rng: &mut StreamRng) -> f64 {
        dispatch!(self, m => m.sample_prior(rng))
    }

    fn sample_transition(&self, x: &f64, rng: &mut StreamRng) -> Result<f64, ModelError> {
        dispatch!(self, m => m.sample_transition(x, rng))
    }

    fn log_likelihood(&self, step: usize, level: usize, x: &f64) -> f64 {
        dispatch!(self, m => m.log_likelihood(step, level, x))
    }

    fn level_log_likelihoods(&self, step: usize, e: &SignedEnsemble<f64>) -> Result<LevelLogLikelihoods, ModelError> {
        dispatch!(self, m => m.level_log_likelihoods(step, e))
    }
}

#[derive(Debug, Clone)]
enum Setting {
    BigData(Arc<ObservationCovariance>),
    Beam(Arc<BeamSpec>),
}

/// One fixed observation record and its reference filter means. Every
/// algorithm in a comparison runs on the same sequences.
#[derive(Debug, Clone)]
pub struct PreparedSequence {
    pub index: usize,
    pub trajectory: SyntheticTrajectory,
    pub reference: Vec<f64>,
    observations: Arc<Vec<Vec<f64>>>,
    signal: Ar1Signal,
    setting: Setting,
    thetas: (usize, usize),
}

impl PreparedSequence {
    /// Model for a schedule with `levels` levels (1: exact only).
    pub fn model(&self, levels: usize) -> Result<ExperimentModel> {
        match &self.setting {
            Setting::BigData(cov) => Ok(ExperimentModel::BigData(BigDataModel::new(
                self.signal,
                cov.clone(),
                self.observations.clone(),
                levels,
            )?)),
            Setting::Beam(spec) => {
                let thetas: &[usize] = match levels {
                    1 => &[self.thetas.1],
                    _ => &[self.thetas.0, self.thetas.1],
                };
                Ok(ExperimentModel::Beam(BeamModel::new(
                    spec.clone(),
                    thetas,
                    self.signal,
                    self.observations.clone(),
                )?))
            }
        }
    }
}

fn data_streams(config: &ExperimentConfig, index: usize) -> Substreams {
    Substreams::new(config.data_seed).child(index as u64)
}

/// Synthetic data and reference means for every sequence of `config`.
/// Reference computation is not part of any timed region.
pub fn prepare_sequences(config: &ExperimentConfig) -> Result<Vec<PreparedSequence>> {
    config.validate()?;
    let signal = Ar1Signal::new(config.init_mean, config.sigma)?;
    let setting = match config.experiment {
        ExperimentKind::BigData => Setting::BigData(Arc::new(generate_covariance(config.p, config.cov_seed)?)),
        ExperimentKind::Beam => Setting::Beam(Arc::new(config.beam_spec()?)),
    };
    (0..config.n_sequences)
        .map(|index| {
            let streams = data_streams(config, index);
            let trajectory = match &setting {
                Setting::BigData(cov) => simulate_observations(&signal, cov, config.n_steps, streams.child(0).seed()),
                Setting::Beam(spec) => {
                    let fine = BeamSolver::new(spec.clone(), config.theta1)?;
                    simulate_beam_observations(&fine, &signal, config.n_steps, streams.child(0).seed())
                }
            };
            let observations = Arc::new(trajectory.observations.clone());
            let reference = match (&setting, config.reference) {
                (Setting::BigData(cov), _) => kalman_filter(&observations, &signal, cov)?
                    .into_iter()
                    .map(|s| s.mean)
                    .collect(),
                (Setting::Beam(spec), Reference::Bpf { n, theta }) => {
                    let model = BeamModel::new(spec.clone(), &[theta], signal, observations.clone())?;
                    run_filter(
                        &model,
                        LevelSchedule::single(n)?,
                        config.n_steps,
                        streams.child(1).seed(),
                    )?
                    .into_iter()
                    .map(|e| e.filter_mean[0])
                    .collect()
                }
                (Setting::Beam(_), Reference::Kalman) => {
                    return Err(SmcError::Config(
                        "the beam experiment needs a reference particle filter".into(),
                    ))
                }
            };
            Ok(PreparedSequence {
                index,
                trajectory,
                reference,
                observations,
                signal,
                setting: setting.clone(),
                thetas: (config.theta0, config.theta1),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub sequence: usize,
    pub repeat: usize,
    pub estimates: Vec<FilterEstimate>,
    pub reference: Vec<f64>,
    /// Mean over steps of the squared filter-mean error; NaN on failure.
    pub mse: f64,
    pub rmse: f64,
    /// Filter time in seconds, excluding data and reference generation.
    pub wall_clock: f64,
    pub negative_fraction_trace: Vec<f64>,
    pub failed: Option<RunFailure>,
}

impl RunResult {
    pub fn succeeded(&self) -> bool {
        self.failed.is_none()
    }

    pub fn mean_negative_fraction(&self) -> f64 {
        let t = &self.negative_fraction_trace;
        t.iter().sum::<f64>() / t.len().max(1) as f64
    }

    pub(crate) fn from_estimates(
        sequence: usize,
        repeat: usize,
        estimates: Vec<FilterEstimate>,
        reference: Vec<f64>,
    ) -> RunResult {
        let n = estimates.len().max(1) as f64;
        let mse = estimates
            .iter()
            .zip(&reference)
            .map(|(e, r)| (e.filter_mean[0] - r).powi(2))
            .sum::<f64>()
            / n;
        RunResult {
            sequence,
            repeat,
            wall_clock: estimates.iter().map(|e| e.wall_clock).sum(),
            negative_fraction_trace: estimates.iter().map(|e| e.negative_fraction).collect(),
            estimates,
            reference,
            mse,
            rmse: mse.sqrt(),
            failed: None,
        }
    }
}

/// One filter run with level sizes `sizes` on `seq`.
pub fn run_once(config: &ExperimentConfig, seq: &PreparedSequence, sizes: &[usize], repeat: usize) -> RunResult {
    let seed = Substreams::new(config.seed)
        .child(seq.index as u64)
        .child(repeat as u64)
        .seed();
    let outcome = LevelSchedule::from_sizes(sizes.to_vec()).and_then(|schedule| {
        let model = seq.model(schedule.num_levels())?;
        run_filter(&model, schedule, config.n_steps, seed)
    });
    match outcome {
        Ok(estimates) => RunResult::from_estimates(seq.index, repeat, estimates, seq.reference.clone()),
        Err(e) => {
            log::warn!("sequence {} repeat {repeat} failed: {e}", seq.index);
            RunResult {
                sequence: seq.index,
                repeat,
                estimates: Vec::new(),
                reference: seq.reference.clone(),
                mse: f64::NAN,
                rmse: f64::NAN,
                wall_clock: 0.0,
                negative_fraction_trace: Vec::new(),
                failed: Some(RunFailure {
                    step: e.step(),
                    message: e.to_string(),
                }),
            }
        }
    }
}

/// `n_repeats` runs of `config.sizes` on every prepared sequence, in
/// sequence-major order. Repeats run one at a time so wall-clock figures
/// are not contaminated by each other.
pub fn run_on_sequences(config: &ExperimentConfig, seqs: &[PreparedSequence]) -> Vec<RunResult> {
    seqs.iter()
        .flat_map(|seq| (0..config.n_repeats).map(move |r| run_once(config, seq, &config.sizes, r)))
        .collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let seqs = prepare_sequences(config)?;
    Ok(run_on_sequences(config, &seqs))
}

/// Writes `runs.csv`, `summary.csv` and `resolved.cfg` into `dir`.
pub fn write_outputs(config: &ExperimentConfig, results: &[RunResult], dir: &Path) -> Result<Summary> {
    let io = |e: std::io::Error| SmcError::Config(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let summary = aggregate(results)?;
    fs::write(dir.join("resolved.cfg"), config.to_config_string()).map_err(io)?;
    write_runs_csv(
        results,
        config.n_repeats,
        config.timing,
        fs::File::create(dir.join("runs.csv")).map_err(io)?,
    )
    .map_err(io)?;
    let label = sizes_label(&config.sizes);
    write_summary_csv(
        &[(label, summary.clone())],
        config.timing,
        fs::File::create(dir.join("summary.csv")).map_err(io)?,
    )
    .map_err(io)?;
    Ok(summary)
}

pub(crate) fn sizes_label(sizes: &[usize]) -> String {
    sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(":")
}

/// Aggregates for each allocation in `grid`, all on the same sequences.
/// Allocations whose runs all fail are reported with an error.
pub fn sweep(
    config: &ExperimentConfig,
    seqs: &[PreparedSequence],
    grid: &[Vec<usize>],
) -> Vec<(Vec<usize>, Result<Summary>, Vec<RunResult>)> {
    grid.iter()
        .map(|sizes| {
            let cfg = config.with_sizes(sizes.clone());
            let runs = run_on_sequences(&cfg, seqs);
            (sizes.clone(), aggregate(&runs), runs)
        })
        .collect()
}
