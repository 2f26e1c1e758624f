use crate::error::{Result, SmcError};

use super::config::ExperimentConfig;
use super::experiment::{run_once, PreparedSequence};

pub const MAX_MATCH_ITERATIONS: usize = 20;
const PROBES: usize = 3;

/// Which sizes a time match is allowed to change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// Scale every level by the same factor (fixed ratios).
    ScaleAll,
    /// Scale the coarsest level only; upper levels stay fixed.
    ScaleBase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub sizes: Vec<usize>,
    pub wall_clock: f64,
    pub target: f64,
    pub iterations: usize,
    /// Whether `wall_clock` ended within tolerance of `target`.
    pub converged: bool,
}

/// Median filter time over three runs of `sizes` on `seq`.
pub fn probe_time(config: &ExperimentConfig, seq: &PreparedSequence, sizes: &[usize]) -> Result<f64> {
    let mut t = Vec::with_capacity(PROBES);
    for k in 0..PROBES {
        let r = run_once(config, seq, sizes, k);
        if let Some(f) = r.failed {
            return Err(SmcError::Config(format!(
                "timing probe for {sizes:?} failed: {}",
                f.message
            )));
        }
        t.push(r.wall_clock);
    }
    t.sort_by(f64::total_cmp);
    Ok(t[PROBES / 2])
}

fn scaled(base: &[usize], mode: MatchMode, factor: f64) -> Vec<usize> {
    let grow = |n: usize| {
        if n == 0 {
            0
        } else {
            ((n as f64 * factor).round() as usize).max(1)
        }
    };
    match mode {
        MatchMode::ScaleAll => base.iter().map(|&n| grow(n)).collect(),
        MatchMode::ScaleBase => {
            let mut s = base.to_vec();
            s[0] = grow(s[0]);
            s
        }
    }
}

/// Scales `config.sizes` until the probe time is within `tolerance_pct`
/// percent of `target` seconds: doubling or halving to bracket, then
/// bisection on the log scale. Stops after [`MAX_MATCH_ITERATIONS`] probes
/// with the closest allocation seen, flagged as not converged.
pub fn time_match_seconds(
    config: &ExperimentConfig,
    seq: &PreparedSequence,
    target: f64,
    mode: MatchMode,
    tolerance_pct: f64,
) -> Result<MatchResult> {
    let base = config.sizes.clone();
    let tol = tolerance_pct / 100.0;
    let mut best: Option<(f64, Vec<usize>, f64)> = None;
    let (mut lo, mut hi): (Option<f64>, Option<f64>) = (None, None);
    let mut factor = 1.0;
    let mut last_sizes: Option<Vec<usize>> = None;
    let mut iterations = 0;
    for it in 1..=MAX_MATCH_ITERATIONS {
        let sizes = scaled(&base, mode, factor);
        if last_sizes.as_ref() == Some(&sizes) {
            // the integer grid cannot get any closer
            break;
        }
        let t = probe_time(config, seq, &sizes)?;
        iterations = it;
        let gap = (t - target).abs() / target;
        log::debug!("time match probe {it}: sizes {sizes:?} took {t:.4}s (target {target:.4}s)");
        if best.as_ref().is_none_or(|b| gap < b.0) {
            best = Some((gap, sizes.clone(), t));
        }
        if gap <= tol {
            return Ok(MatchResult {
                sizes,
                wall_clock: t,
                target,
                iterations: it,
                converged: true,
            });
        }
        if t < target {
            lo = Some(factor);
        } else {
            hi = Some(factor);
        }
        factor = match (lo, hi) {
            (Some(l), Some(h)) => (l * h).sqrt(),
            (Some(l), None) => l * 2.0,
            (None, Some(h)) => h / 2.0,
            (None, None) => unreachable!(),
        };
        last_sizes = Some(sizes);
    }
    let (_, sizes, t) = best.expect("at least one probe");
    log::warn!("time match for {base:?} stopped at {sizes:?} ({t:.4}s vs target {target:.4}s)");
    Ok(MatchResult {
        sizes,
        wall_clock: t,
        target,
        iterations,
        converged: false,
    })
}

/// Matches `config.sizes` (scaled by `mode`) to the time of `target_sizes`
/// on the first prepared sequence.
pub fn time_match(
    config: &ExperimentConfig,
    seqs: &[PreparedSequence],
    target_sizes: &[usize],
    mode: MatchMode,
    tolerance_pct: f64,
) -> Result<MatchResult> {
    let seq = seqs
        .first()
        .ok_or_else(|| SmcError::Config("time matching needs a prepared sequence".into()))?;
    let target = probe_time(config, seq, target_sizes)?;
    time_match_seconds(config, seq, target, mode, tolerance_pct)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_modes() {
        assert_eq!(scaled(&[100, 10], MatchMode::ScaleAll, 2.5), vec![250, 25]);
        assert_eq!(scaled(&[100, 10], MatchMode::ScaleBase, 0.5), vec![50, 10]);
        assert_eq!(scaled(&[100, 0], MatchMode::ScaleAll, 3.0), vec![300, 0]);
        assert_eq!(scaled(&[3], MatchMode::ScaleAll, 0.01), vec![1]);
    }
}
