use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Result, SmcError};
use crate::filter::FilterEstimate;

use super::experiment::{RunFailure, RunResult};
use super::fmt_f64;

/// Batch statistics over the successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub failures: usize,
    pub mean_mse: f64,
    pub median_mse: f64,
    pub q1_mse: f64,
    pub q3_mse: f64,
    pub mean_rmse: f64,
    pub mean_negative_fraction: f64,
    pub mean_wall_clock: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn aggregate(results: &[RunResult]) -> Result<Summary> {
    let ok: Vec<&RunResult> = results.iter().filter(|r| r.succeeded()).collect();
    if ok.is_empty() {
        return Err(SmcError::Config(format!("all {} runs failed", results.len())));
    }
    let n = ok.len() as f64;
    let mut mse: Vec<f64> = ok.iter().map(|r| r.mse).collect();
    mse.sort_by(f64::total_cmp);
    Ok(Summary {
        runs: results.len(),
        failures: results.len() - ok.len(),
        mean_mse: mse.iter().sum::<f64>() / n,
        median_mse: quantile(&mse, 0.5),
        q1_mse: quantile(&mse, 0.25),
        q3_mse: quantile(&mse, 0.75),
        mean_rmse: ok.iter().map(|r| r.rmse).sum::<f64>() / n,
        mean_negative_fraction: ok.iter().map(|r| r.mean_negative_fraction()).sum::<f64>() / n,
        mean_wall_clock: ok.iter().map(|r| r.wall_clock).sum::<f64>() / n,
    })
}

/// `repeat,step,estimate,reference,sq_err,neg_frac,wall_clock`, one row per
/// step. `repeat` is the global run index `sequence * n_repeats + repeat`.
/// A failed run contributes one row at its failing step with NaN values.
pub fn write_runs_csv<W: Write>(results: &[RunResult], n_repeats: usize, timing: bool, w: W) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "repeat",
        "step",
        "estimate",
        "reference",
        "sq_err",
        "neg_frac",
        "wall_clock",
    ])?;
    for r in results {
        let run = (r.sequence * n_repeats + r.repeat).to_string();
        if let Some(f) = &r.failed {
            let nan = fmt_f64(f64::NAN);
            let step = f.step.unwrap_or(0).to_string();
            out.write_record([run.as_str(), &step, &nan, &nan, &nan, &nan, &fmt_f64(0.0)])?;
            continue;
        }
        for (e, reference) in r.estimates.iter().zip(&r.reference) {
            let est = e.filter_mean[0];
            let clock = if timing { e.wall_clock } else { 0.0 };
            out.write_record([
                run.clone(),
                e.step.to_string(),
                fmt_f64(est),
                fmt_f64(*reference),
                fmt_f64((est - reference).powi(2)),
                fmt_f64(e.negative_fraction),
                fmt_f64(clock),
            ])?;
        }
    }
    out.flush()
}

pub fn write_summary_csv<W: Write>(rows: &[(String, Summary)], timing: bool, w: W) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "label",
        "runs",
        "failures",
        "mean_mse",
        "median_mse",
        "q1_mse",
        "q3_mse",
        "mean_rmse",
        "mean_neg_frac",
        "mean_wall_clock",
    ])?;
    for (label, s) in rows {
        out.write_record([
            label.clone(),
            s.runs.to_string(),
            s.failures.to_string(),
            fmt_f64(s.mean_mse),
            fmt_f64(s.median_mse),
            fmt_f64(s.q1_mse),
            fmt_f64(s.q3_mse),
            fmt_f64(s.mean_rmse),
            fmt_f64(s.mean_negative_fraction),
            fmt_f64(if timing { s.mean_wall_clock } else { 0.0 }),
        ])?;
    }
    out.flush()
}

/// Estimates, reference values and the failing step (if any) of one run.
type ParsedRun = (Vec<FilterEstimate>, Vec<f64>, Option<usize>);

/// Rebuilds per-run results from a `runs.csv`. Only the columns stored in
/// the file are populated; the rest of each [`FilterEstimate`] is NaN.
pub fn read_runs_csv<R: Read>(r: R) -> Result<Vec<RunResult>> {
    let bad = |m: String| SmcError::Config(format!("runs.csv: {m}"));
    let mut rdr = csv::Reader::from_reader(r);
    let mut runs: BTreeMap<usize, ParsedRun> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != 7 {
            return Err(bad(format!("expected 7 columns, got {}", row.len())));
        }
        let num = |i: usize| -> Result<f64> { row[i].parse().map_err(|_| bad(format!("bad number `{}`", &row[i]))) };
        let int = |i: usize| -> Result<usize> { row[i].parse().map_err(|_| bad(format!("bad integer `{}`", &row[i]))) };
        let (repeat, step) = (int(0)?, int(1)?);
        let entry = runs.entry(repeat).or_default();
        let estimate = num(2)?;
        if estimate.is_nan() {
            entry.2 = Some(step);
            continue;
        }
        entry.0.push(FilterEstimate {
            step,
            filter_mean: vec![estimate],
            prediction_mean: vec![f64::NAN],
            weighted_mean: None,
            normalizer: f64::NAN,
            expected_normalizer: f64::NAN,
            negative_fraction: num(5)?,
            degenerate_normalizer: false,
            wall_clock: num(6)?,
        });
        entry.1.push(num(3)?);
    }
    Ok(runs
        .into_iter()
        .map(|(repeat, (estimates, reference, failed))| match failed {
            None => RunResult::from_estimates(0, repeat, estimates, reference),
            Some(step) => RunResult {
                sequence: 0,
                repeat,
                estimates: Vec::new(),
                reference,
                mse: f64::NAN,
                rmse: f64::NAN,
                wall_clock: 0.0,
                negative_fraction_trace: Vec::new(),
                failed: Some(RunFailure {
                    step: Some(step),
                    message: "failed".into(),
                }),
            },
        })
        .collect())
}
