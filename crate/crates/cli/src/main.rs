use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mlbpf::harness::{
    aggregate, prepare_sequences, probe_time, read_runs_csv, run_on_sequences, sweep, time_match, time_match_seconds,
    write_outputs, write_summary_csv, ExperimentConfig, MatchMode, Summary,
};
use mlbpf::{BeamSolver, BeamSpec};

#[derive(Parser)]
#[command(name = "mlbpf", version, about = "Multilevel particle filter experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Root seed for the filter runs.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Scale all levels together.
    All,
    /// Scale only the coarsest level.
    Base,
}

impl From<Mode> for MatchMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::All => MatchMode::ScaleAll,
            Mode::Base => MatchMode::ScaleBase,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write runs.csv, summary.csv, resolved.cfg.
    Run(Common),
    /// Run a grid of level allocations or coarse mesh sizes on shared data.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Allocations such as `6000:0,4000:20,2000:60`.
        #[arg(long, conflicts_with = "theta0")]
        grid: Option<String>,
        /// Coarse mesh sizes for the beam experiment, e.g. `30,60,115`.
        #[arg(long)]
        theta0: Option<String>,
        /// Time-match every grid point to this allocation first.
        #[arg(long, value_name = "SIZES")]
        match_to: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        tolerance: f64,
    },
    /// Find the allocation whose run time matches a target allocation.
    Match {
        #[command(flatten)]
        common: Common,
        /// Target allocation, e.g. `250`.
        #[arg(long)]
        target: String,
        #[arg(long, value_enum, default_value_t = Mode::Base)]
        mode: Mode,
        /// Tolerance in percent of the target time.
        #[arg(long, default_value_t = 5.0)]
        tolerance: f64,
    },
    /// Print the beam deflection `(l, W)` for one load position.
    SolveBeam {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theta: usize,
        #[arg(long)]
        position: f64,
    },
    /// Summarise one or more runs.csv files.
    Report {
        files: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(':')
        .map(|v| v.trim().parse().with_context(|| format!("bad size `{v}` in `{s}`")))
        .collect()
}

fn load_config(c: &Common, experiment_default: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None if experiment_default == Some("beam") => ExperimentConfig::beam(),
        None => ExperimentConfig::default(),
    };
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("override `{kv}` is not KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(label: &str, s: &Summary) {
    println!(
        "{label}: runs {} failed {} mean_mse {:.4e} median_mse {:.4e} mean_rmse {:.4e} neg_frac {:.3} time {:.3}s",
        s.runs, s.failures, s.mean_mse, s.median_mse, s.mean_rmse, s.mean_negative_fraction, s.mean_wall_clock
    );
}

fn run(c: &Common) -> Result<()> {
    let cfg = load_config(c, None)?;
    let seqs = prepare_sequences(&cfg)?;
    let results = run_on_sequences(&cfg, &seqs);
    let summary = write_outputs(&cfg, &results, &cfg.output_dir)?;
    print_summary(
        &cfg.sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(":"),
        &summary,
    );
    Ok(())
}

fn sweep_cmd(
    c: &Common,
    grid: Option<&str>,
    theta0: Option<&str>,
    match_to: Option<&str>,
    tolerance: f64,
) -> Result<()> {
    let cfg = load_config(c, None)?;
    let seqs = prepare_sequences(&cfg)?;
    let target = match match_to {
        Some(t) => Some(probe_time(&cfg, &seqs[0], &parse_sizes(t)?)?),
        None => None,
    };

    // (label, directory prefix, config) per grid point
    let mut points: Vec<(String, String, ExperimentConfig)> = Vec::new();
    match (grid, theta0) {
        (Some(g), _) => {
            for item in g.split(',') {
                let sizes = parse_sizes(item)?;
                points.push((item.trim().to_string(), String::new(), cfg.with_sizes(sizes)));
            }
        }
        (None, Some(t)) => {
            for item in t.split(',') {
                let mut p = cfg.clone();
                p.theta0 = item.trim().parse().with_context(|| format!("bad theta0 `{item}`"))?;
                p.validate()?;
                points.push((format!("theta0={}", p.theta0), format!("theta0_{}_", p.theta0), p));
            }
        }
        (None, None) => bail!("sweep needs --grid or --theta0"),
    }

    let mut rows = Vec::new();
    for (label, prefix, mut p) in points {
        let seqs = if p.theta0 == cfg.theta0 {
            seqs.clone()
        } else {
            prepare_sequences(&p)?
        };
        if let Some(t) = target {
            let m = time_match_seconds(&p, &seqs[0], t, MatchMode::ScaleBase, tolerance)?;
            log::info!(
                "{label}: matched to {:?} ({} probes, converged {})",
                m.sizes,
                m.iterations,
                m.converged
            );
            p.sizes = m.sizes;
        }
        let label = if target.is_some() {
            format!("{label}->{}", join_sizes(&p.sizes))
        } else {
            label
        };
        let out = sweep(&p, &seqs, std::slice::from_ref(&p.sizes));
        let (_, summary, runs) = out.into_iter().next().expect("one grid point");
        let sizes: Vec<String> = p.sizes.iter().map(usize::to_string).collect();
        let dir = cfg.output_dir.join(format!("{prefix}n{}", sizes.join("_")));
        match summary {
            Ok(s) => {
                write_outputs(&p, &runs, &dir)?;
                print_summary(&label, &s);
                rows.push((label, s));
            }
            Err(e) => println!("{label}: {e}"),
        }
    }
    fs::create_dir_all(&cfg.output_dir)?;
    write_summary_csv(&rows, cfg.timing, fs::File::create(cfg.output_dir.join("sweep.csv"))?)?;
    Ok(())
}

fn join_sizes(s: &[usize]) -> String {
    s.iter().map(usize::to_string).collect::<Vec<_>>().join(":")
}

fn match_cmd(c: &Common, target: &str, mode: Mode, tolerance: f64) -> Result<()> {
    let cfg = load_config(c, None)?;
    let seqs = prepare_sequences(&cfg)?;
    let m = time_match(&cfg, &seqs, &parse_sizes(target)?, mode.into(), tolerance)?;
    println!("sizes,wall_clock,target,iterations,converged");
    println!(
        "{},{:.6},{:.6},{},{}",
        join_sizes(&m.sizes),
        m.wall_clock,
        m.target,
        m.iterations,
        m.converged
    );
    Ok(())
}

fn solve_beam_cmd(c: &Common, theta: usize, position: f64) -> Result<()> {
    let spec: BeamSpec = load_config(c, Some("beam"))?.beam_spec()?;
    let length = spec.length;
    let sol = BeamSolver::new(Arc::new(spec), theta)?.solve(position);
    let mut w: Box<dyn Write> = match &c.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(w, "l,W")?;
    for (k, v) in sol.deflections.iter().enumerate() {
        writeln!(
            w,
            "{},{}",
            mlbpf::harness::fmt_f64(sol.node(k, length)),
            mlbpf::harness::fmt_f64(*v)
        )?;
    }
    Ok(())
}

fn report(files: &[PathBuf], out: Option<&Path>) -> Result<()> {
    if files.is_empty() {
        bail!("report needs at least one runs.csv");
    }
    let mut rows = Vec::new();
    for f in files {
        let runs = read_runs_csv(fs::File::open(f).with_context(|| f.display().to_string())?)?;
        rows.push((f.display().to_string(), aggregate(&runs)?));
    }
    match out {
        Some(p) => write_summary_csv(&rows, true, fs::File::create(p)?)?,
        None => write_summary_csv(&rows, true, std::io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Run(c) => run(c),
        Command::Sweep {
            common,
            grid,
            theta0,
            match_to,
            tolerance,
        } => sweep_cmd(
            common,
            grid.as_deref(),
            theta0.as_deref(),
            match_to.as_deref(),
            *tolerance,
        ),
        Command::Match {
            common,
            target,
            mode,
            tolerance,
        } => match_cmd(common, target, *mode, *tolerance),
        Command::SolveBeam {
            common,
            theta,
            position,
        } => solve_beam_cmd(common, *theta, *position),
        Command::Report { files, out } => report(files, out.as_deref()),
    }
}
