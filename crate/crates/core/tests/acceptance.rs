//! Acceptance gate. Prints one PASS/FAIL line per criterion.
//!
//! Exits with status 0 unless `MLBPF_ACCEPTANCE_STRICT=1` is set, in which
//! case any failing criterion fails the process.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use mlbpf::harness::{
    prepare_sequences, probe_time, sweep, time_match_seconds, ExperimentConfig, MatchMode, PreparedSequence, Summary,
};
use mlbpf::{
    init, kalman_filter, mutate, resample, reweight, run_filter, simulate_observations, solve_beam, Ar1Signal,
    BeamSpec, BigDataModel, BootstrapFilter, ClosureModel, LevelSchedule, LoadProfile, ObservationCovariance,
    ResamplingTable, SignedEnsemble, Substreams,
};

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn linear_gaussian(n_steps: usize, data_seed: u64) -> BigDataModel {
    let signal = Ar1Signal::new(0.0, 0.5).unwrap();
    let cov = ObservationCovariance::from_matrix(1, vec![0.25]).unwrap();
    let traj = simulate_observations(&signal, &cov, n_steps, data_seed);
    BigDataModel::new(signal, Arc::new(cov), Arc::new(traj.observations), 1).unwrap()
}

fn kalman_means(model: &BigDataModel) -> Vec<f64> {
    kalman_filter(model.observations(), model.signal(), model.covariance())
        .unwrap()
        .into_iter()
        .map(|s| s.mean)
        .collect()
}

fn bpf_reduction() -> Outcome {
    let model = linear_gaussian(20, 5);
    let (n, seed) = (100, 11);
    let streams = Substreams::new(seed);
    let mut bpf = BootstrapFilter::new(&model, n, seed);
    let mut e = init(&model, LevelSchedule::single(n).unwrap(), &streams).unwrap();
    let mut identical = bpf.particles() == e.states();
    for step in 0..20 {
        if step > 0 {
            e = mutate(e, &model, &streams).unwrap();
        }
        let r = resample(reweight(e, &model, step).unwrap(), &streams).unwrap();
        bpf.step().unwrap();
        identical &= bpf.particles() == r.states() && r.signs().iter().all(|&s| s == 1);
        e = r;
    }
    Outcome {
        name: "bpf_reduction",
        pass: identical,
        detail: format!("N={n}, 20 steps, states and signs bit-identical: {identical}"),
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn kalman_consistency() -> Outcome {
    let sizes = [250usize, 1000, 4000];
    let seeds = 100;
    let models: Vec<_> = (0..seeds).map(|s| linear_gaussian(50, 10_000 + s)).collect();
    let refs: Vec<_> = models.iter().map(kalman_means).collect();
    let mut mses = Vec::new();
    for &n in &sizes {
        let mut total = 0.0;
        for (s, (m, r)) in models.iter().zip(&refs).enumerate() {
            let est = run_filter(m, LevelSchedule::single(n).unwrap(), 50, s as u64).unwrap();
            total += est
                .iter()
                .zip(r)
                .map(|(e, k)| (e.filter_mean[0] - k).powi(2))
                .sum::<f64>()
                / 50.0;
        }
        mses.push(total / seeds as f64);
    }
    let lx: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = mses.iter().map(|m| m.ln()).collect();
    let b = slope(&lx, &ly);
    Outcome {
        name: "kalman_consistency",
        pass: (b + 1.0).abs() <= 0.3,
        detail: format!(
            "MSE [{}] at N {sizes:?}; log-log slope {b:.3} (target -1 +/- 0.3)",
            sci(&mses)
        ),
    }
}

fn clt_scaling() -> Outcome {
    let model = linear_gaussian(11, 42);
    let var_at = |n: usize| {
        let v: Vec<f64> = (0..400u64)
            .map(|s| run_filter(&model, LevelSchedule::single(n).unwrap(), 11, 500 + s).unwrap()[10].filter_mean[0])
            .collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (a, b) = (var_at(500), var_at(2000));
    let ratio = a / b;
    Outcome {
        name: "clt_scaling",
        pass: (3.0..=5.5).contains(&ratio),
        detail: format!("Var(500) {a:.3e}, Var(2000) {b:.3e}, ratio {ratio:.3} (target [3, 5.5])"),
    }
}

/// Exact expectation of the resampled signed average of `phi` by summing
/// over all `n^n` draw sequences.
fn enumerate_expectation(table: &ResamplingTable, states: &[f64], phi: impl Fn(f64) -> f64) -> f64 {
    let n = states.len();
    let mut total = 0.0;
    for code in 0..n.pow(n as u32) {
        let (mut c, mut prob, mut stat) = (code, 1.0, 0.0);
        for _ in 0..n {
            let j = c % n;
            c /= n;
            prob *= table.probability(j);
            stat += f64::from(table.sign(j)) * phi(states[j]);
        }
        total += prob * stat / n as f64;
    }
    total
}

fn sgn(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

fn resampling_unbiasedness() -> Outcome {
    let values = [0.7, -0.3, 1.2, -2.0, 0.0, 0.05];
    let phis: [fn(f64) -> f64; 3] = [|_| 1.0, |x| 2.5 * x - 1.0, |x| (x > 0.5) as u8 as f64];
    let (mut worst_same, mut worst_agg, mut same, mut mixed) = (0.0f64, 0.0f64, 0, 0);
    for placement in 0..8u32 {
        let states: Vec<f64> = (0..3).map(|k| f64::from((placement >> k) & 1)).collect();
        for a in values {
            for b in values {
                for c in values {
                    let w = [a, b, c];
                    let Ok(table) = ResamplingTable::new(&states, &w) else {
                        continue;
                    };
                    let tv: f64 = w.iter().map(|v| v.abs()).sum();
                    let mut agg: HashMap<u64, f64> = HashMap::new();
                    for (x, v) in states.iter().zip(&w) {
                        *agg.entry(x.to_bits()).or_default() += v;
                    }
                    let coherent = states
                        .iter()
                        .zip(&w)
                        .all(|(x, v)| *v == 0.0 || agg[&x.to_bits()] * v > 0.0);
                    for phi in phis {
                        let got = enumerate_expectation(&table, &states, phi);
                        if coherent {
                            let want = states.iter().zip(&w).map(|(x, v)| v * phi(*x)).sum::<f64>() / tv;
                            worst_same = worst_same.max((got - want).abs());
                        } else {
                            let want = states
                                .iter()
                                .zip(&w)
                                .map(|(x, v)| v.abs() * sgn(agg[&x.to_bits()]) * phi(*x))
                                .sum::<f64>()
                                / tv;
                            worst_agg = worst_agg.max((got - want).abs());
                        }
                    }
                    if coherent {
                        same += 1;
                    } else {
                        mixed += 1;
                    }
                }
            }
        }
    }
    Outcome {
        name: "resampling_unbiasedness",
        pass: worst_same <= 1e-12 && worst_agg <= 1e-12,
        detail: format!(
            "S=3 on {{0,1}}: {same} sign-coherent configs max err {worst_same:.1e}; \
             {mixed} mixed configs vs aggregated-sign law max err {worst_agg:.1e} (tol 1e-12)"
        ),
    }
}

struct BigDataSweep {
    bpf: Summary,
    points: Vec<(Vec<usize>, Summary)>,
}

fn bigdata_config() -> ExperimentConfig {
    ExperimentConfig {
        p: 100,
        n_steps: 50,
        n_repeats: 20,
        sizes: vec![250],
        ..Default::default()
    }
}

fn bigdata_sweep(cfg: &ExperimentConfig, seqs: &[PreparedSequence]) -> BigDataSweep {
    let target = probe_time(cfg, &seqs[0], &[250]).unwrap();
    let bpf = summary_of(cfg, seqs, vec![250]);
    let mut points = Vec::new();
    for n1 in [0usize, 10, 25, 50, 100, 150, 200, 240] {
        let base = cfg.with_sizes(vec![1000, n1]);
        let m = time_match_seconds(&base, &seqs[0], target, MatchMode::ScaleBase, 5.0).unwrap();
        points.push((m.sizes.clone(), summary_of(cfg, seqs, m.sizes)));
    }
    BigDataSweep { bpf, points }
}

fn summary_of(cfg: &ExperimentConfig, seqs: &[PreparedSequence], sizes: Vec<usize>) -> Summary {
    let (_, s, _) = sweep(cfg, seqs, &[sizes]).pop().unwrap();
    s.unwrap()
}

fn label(sizes: &[usize]) -> String {
    sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(":")
}

fn bigdata_speedup(sw: &BigDataSweep) -> (Outcome, usize) {
    let best = (1..sw.points.len())
        .min_by(|&a, &b| sw.points[a].1.mean_mse.total_cmp(&sw.points[b].1.mean_mse))
        .unwrap();
    let ratio = sw.points[best].1.mean_mse / sw.bpf.mean_mse;
    let rmse: Vec<f64> = sw.points.iter().map(|(_, s)| s.mean_rmse).collect();
    let last = rmse.len() - 1;
    let interior_min = rmse[1..last].iter().copied().fold(f64::INFINITY, f64::min);
    let u_shape = rmse[0] > interior_min && rmse[last] > interior_min;
    let curve: Vec<String> = sw
        .points
        .iter()
        .map(|(s, m)| format!("{}={:.3e}", label(s), m.mean_rmse))
        .collect();
    let outcome = Outcome {
        name: "bigdata_speedup",
        pass: ratio <= 0.7 && u_shape,
        detail: format!(
            "BPF(250) MSE {:.3e}; best {} MSE {:.3e}, ratio {ratio:.3} (target <= 0.7); \
             U-shape {u_shape} (RMSE {})",
            sw.bpf.mean_mse,
            label(&sw.points[best].0),
            sw.points[best].1.mean_mse,
            curve.join(" ")
        ),
    };
    (outcome, best)
}

fn degenerate_allocation(cfg: &ExperimentConfig, seqs: &[PreparedSequence]) -> Outcome {
    let mse = |sizes: Vec<usize>| summary_of(cfg, seqs, sizes).mean_mse;
    let (d1, d8) = (mse(vec![10_100, 0]), mse(vec![80_800, 0]));
    let (p1, p8) = (mse(vec![10_000, 100]), mse(vec![80_000, 800]));
    let drop_d = 1.0 - d8 / d1;
    let drop_p = 1.0 - p8 / p1;
    Outcome {
        name: "degenerate_allocation",
        pass: drop_d <= 0.2 && drop_p >= 0.6,
        detail: format!(
            "N1=0: {d1:.3e} -> {d8:.3e} (drop {:.1}%, max 20%); \
             10000:100: {p1:.3e} -> {p8:.3e} (drop {:.1}%, min 60%)",
            100.0 * drop_d,
            100.0 * drop_p
        ),
    }
}

fn beam_solver_order() -> Outcome {
    let (l, q) = (4.0, 1.0);
    let spec = BeamSpec::standard()
        .with_load(LoadProfile::Uniform { intensity: q })
        .unwrap();
    let err = |theta: usize| {
        let sol = solve_beam(&spec, 0.0, theta).unwrap();
        sol.deflections
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let x = sol.node(k, l);
                (w - q * x * x * (l - x).powi(2) / 24.0).abs()
            })
            .fold(0.0, f64::max)
    };
    let errs: Vec<f64> = [50, 100, 200, 400].iter().map(|&t| err(t)).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    Outcome {
        name: "beam_solver_order",
        pass: ratios.iter().all(|r| (3.4..=4.6).contains(r)),
        detail: format!("max errors [{}]; ratios {ratios:.3?} (target [3.4, 4.6])", sci(&errs)),
    }
}

fn beam_experiment() -> Outcome {
    let cfg = ExperimentConfig {
        sizes: vec![500],
        ..ExperimentConfig::beam()
    };
    let seqs = prepare_sequences(&cfg).unwrap();
    let target = probe_time(&cfg, &seqs[0], &[500]).unwrap();
    let bpf = summary_of(&cfg, &seqs, vec![500]);
    let mut best: Option<(Vec<usize>, Summary)> = None;
    for n1 in [25usize, 50, 100] {
        let m = time_match_seconds(
            &cfg.with_sizes(vec![1000, n1]),
            &seqs[0],
            target,
            MatchMode::ScaleBase,
            5.0,
        )
        .unwrap();
        let s = summary_of(&cfg, &seqs, m.sizes.clone());
        if best.as_ref().is_none_or(|(_, b)| s.mean_rmse < b.mean_rmse) {
            best = Some((m.sizes, s));
        }
    }
    let (sizes, s) = best.unwrap();
    let ratio = s.mean_rmse / bpf.mean_rmse;
    Outcome {
        name: "beam_experiment",
        pass: ratio <= 0.75,
        detail: format!(
            "theta {}/{}: BPF(500) RMSE {:.3e}; MLBPF {} RMSE {:.3e}; ratio {ratio:.3} (target <= 0.75)",
            cfg.theta0,
            cfg.theta1,
            bpf.mean_rmse,
            label(&sizes),
            s.mean_rmse
        ),
    }
}

fn adversarial_flag() -> bool {
    // g1 = g0 / 2 on distinct states with alternating signs: the signed
    // total cancels exactly while the total variation does not
    let model = ClosureModel::new(|_| 0.0f64, |x, _| *x)
        .level(|_, _| 1.0)
        .level(|_, _| 0.5);
    let schedule = LevelSchedule::new(&[1, 1], 8).unwrap();
    let states: Vec<f64> = (0..16).map(f64::from).collect();
    let signs: Vec<i8> = (0..16).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let e = SignedEnsemble::from_parts(states, signs, schedule, 0).unwrap();
    let r = resample(reweight(e, &model, 0).unwrap(), &Substreams::new(3)).unwrap();
    r.diagnostics().unwrap().degenerate_normalizer
}

fn diagnostics(sw: &BigDataSweep, best: usize, seqs_ok: bool) -> Outcome {
    let frac = sw.points[best].1.mean_negative_fraction;
    let flag = adversarial_flag();
    Outcome {
        name: "diagnostics",
        pass: seqs_ok && frac > 0.0 && frac < 0.5 && flag,
        detail: format!(
            "per-step negative fraction recorded: {seqs_ok}; mean fraction at {} = {frac:.3} (target (0, 0.5)); \
             adversarial warning fired: {flag}",
            label(&sw.points[best].0)
        ),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn main() {
    let mut results: Vec<(Outcome, f64)> = Vec::new();
    let mut report = |o: Outcome, secs: f64| {
        println!(
            "{} {:<24} [{secs:.1}s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
        results.push((o, secs));
    };

    let (o, t) = timed(bpf_reduction);
    report(o, t);
    let (o, t) = timed(kalman_consistency);
    report(o, t);
    let (o, t) = timed(clt_scaling);
    report(o, t);
    let (o, t) = timed(resampling_unbiasedness);
    report(o, t);

    let cfg = bigdata_config();
    let ((sw, seqs), t) = timed(|| {
        let seqs = prepare_sequences(&cfg).unwrap();
        (bigdata_sweep(&cfg, &seqs), seqs)
    });
    let (o, best) = bigdata_speedup(&sw);
    report(o, t);
    let (o, t) = timed(|| degenerate_allocation(&cfg, &seqs));
    report(o, t);
    let (o, t) = timed(beam_solver_order);
    report(o, t);
    let (o, t) = timed(beam_experiment);
    report(o, t);

    let traces_ok = {
        let run = mlbpf::harness::run_once(&cfg, &seqs[0], &sw.points[best].0, 0);
        run.negative_fraction_trace.len() == cfg.n_steps
    };
    let (o, t) = timed(|| diagnostics(&sw, best, traces_ok));
    report(o, t);

    let passed = results.iter().filter(|(o, _)| o.pass).count();
    println!("{passed}/{} criteria passed", results.len());
    let strict = std::env::var("MLBPF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
