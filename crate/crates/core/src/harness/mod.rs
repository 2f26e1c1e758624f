//! Experiment runner: configuration, repeated runs against a reference
//! filter, time matching and CSV output.

mod config;
mod experiment;
mod report;
mod timing;

pub use config::{ExperimentConfig, ExperimentKind, LoadKind, Reference};
pub use experiment::{
    prepare_sequences, run_experiment, run_on_sequences, run_once, sweep, write_outputs, ExperimentModel,
    PreparedSequence, RunFailure, RunResult,
};
pub use report::{aggregate, quantile, read_runs_csv, write_runs_csv, write_summary_csv, Summary};
pub use timing::{probe_time, time_match, time_match_seconds, MatchMode, MatchResult, MAX_MATCH_ITERATIONS};

/// Float format used in every CSV: 17 significant digits, round-trips
/// exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
