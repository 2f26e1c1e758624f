//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::beam::{BeamSpec, LoadProfile};
use crate::error::{Result, SmcError};
use crate::schedule::LevelSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    BigData,
    Beam,
}

impl FromStr for ExperimentKind {
    type Err = SmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bigdata" => Ok(ExperimentKind::BigData),
            "beam" => Ok(ExperimentKind::Beam),
            _ => Err(SmcError::Config(format!("unknown experiment `{s}`"))),
        }
    }
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BigData => "bigdata",
            ExperimentKind::Beam => "beam",
        }
    }
}

/// Source of the "true" filter mean that errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Kalman,
    /// Classical filter with `n` particles on mesh `theta` (beam only).
    Bpf {
        n: usize,
        theta: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    Gaussian,
    Hat,
    Uniform,
}

/// Everything needed to reproduce one batch of runs.
///
/// `sizes` lists the per-level sample sizes, coarsest first; a single entry
/// is a classical filter on the exact likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub sizes: Vec<usize>,
    pub n_steps: usize,
    pub n_repeats: usize,
    pub n_sequences: usize,
    pub seed: u64,
    pub data_seed: u64,
    pub sigma: f64,
    pub init_mean: f64,
    pub p: usize,
    pub cov_seed: u64,
    pub theta0: usize,
    pub theta1: usize,
    pub beam_length: f64,
    pub stiffness: f64,
    pub load: LoadKind,
    pub load_width: f64,
    pub sensors: Vec<f64>,
    pub noise_var: f64,
    pub reference: Reference,
    pub output_dir: PathBuf,
    /// Record wall-clock times in `runs.csv`; off for byte-stable output.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::BigData,
            sizes: vec![250],
            n_steps: 50,
            n_repeats: 20,
            n_sequences: 1,
            seed: 1,
            data_seed: 1000,
            sigma: 0.1,
            init_mean: 0.0,
            p: 100,
            cov_seed: 7,
            theta0: 60,
            theta1: 500,
            beam_length: 4.0,
            stiffness: 1.0,
            load: LoadKind::Gaussian,
            load_width: 0.2,
            sensors: vec![1.0, 1.75],
            noise_var: 0.0002,
            reference: Reference::Kalman,
            output_dir: PathBuf::from("out"),
            timing: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| SmcError::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults for the beam experiment (mean-1 start, `sigma = 0.02`,
    /// reference filter with 20000 particles on the fine mesh).
    pub fn beam() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Beam,
            sigma: 0.02,
            init_mean: 1.0,
            reference: Reference::Bpf { n: 20000, theta: 500 },
            n_sequences: 10,
            n_repeats: 5,
            ..Default::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SmcError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        // the experiment kind picks the defaults, so it goes first
        let mut cfg = match pairs.iter().find(|(k, _)| k == "experiment") {
            Some((_, v)) if v == "beam" => Self::beam(),
            _ => Self::default(),
        };
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SmcError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one override. Call [`validate`](Self::validate) afterwards.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = parse(key, value)?,
            "sizes" => self.sizes = parse_list(key, value)?,
            "n_steps" => self.n_steps = parse(key, value)?,
            "n_repeats" => self.n_repeats = parse(key, value)?,
            "n_sequences" => self.n_sequences = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "data_seed" => self.data_seed = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "init_mean" => self.init_mean = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "cov_seed" => self.cov_seed = parse(key, value)?,
            "theta0" => self.theta0 = parse(key, value)?,
            "theta1" => self.theta1 = parse(key, value)?,
            "beam_length" => self.beam_length = parse(key, value)?,
            "stiffness" => self.stiffness = parse(key, value)?,
            "load" => {
                self.load = match value {
                    "gaussian" => LoadKind::Gaussian,
                    "hat" => LoadKind::Hat,
                    "uniform" => LoadKind::Uniform,
                    _ => return Err(SmcError::Config(format!("unknown load `{value}`"))),
                }
            }
            "load_width" => self.load_width = parse(key, value)?,
            "sensors" => self.sensors = parse_list(key, value)?,
            "noise_var" => self.noise_var = parse(key, value)?,
            "reference" => {
                self.reference = match value {
                    "kalman" => Reference::Kalman,
                    "bpf" => match self.reference {
                        Reference::Bpf { .. } => self.reference,
                        Reference::Kalman => Reference::Bpf {
                            n: 20000,
                            theta: self.theta1,
                        },
                    },
                    _ => return Err(SmcError::Config(format!("unknown reference `{value}`"))),
                }
            }
            "reference_n" | "reference_theta" => {
                let (mut n, mut theta) = match self.reference {
                    Reference::Bpf { n, theta } => (n, theta),
                    Reference::Kalman => (20000, self.theta1),
                };
                if key == "reference_n" {
                    n = parse(key, value)?;
                } else {
                    theta = parse(key, value)?;
                }
                self.reference = Reference::Bpf { n, theta };
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "timing" => self.timing = parse(key, value)?,
            _ => return Err(SmcError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SmcError::Config(m));
        if self.n_repeats == 0 || self.n_sequences == 0 {
            return bad("n_repeats and n_sequences must be at least 1".into());
        }
        self.schedule()?;
        if !(1..=2).contains(&self.sizes.len()) {
            return bad(format!("experiments use one or two levels, got sizes {:?}", self.sizes));
        }
        if !(self.sigma >= 0.0) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        match (self.experiment, self.reference) {
            (ExperimentKind::BigData, Reference::Bpf { .. }) => {
                return bad("the big-data experiment uses the exact Kalman reference".into())
            }
            (ExperimentKind::Beam, Reference::Kalman) => {
                return bad("the beam experiment needs a reference particle filter".into())
            }
            (ExperimentKind::Beam, Reference::Bpf { n, .. }) => {
                // particles on the finest mesh; coarse levels are not
                // compared against the reference directly
                let top = self.sizes.last().copied().unwrap_or(0);
                if n < 10 * top {
                    return bad(format!(
                        "reference size {n} is below 10x the compared fine-level size {top}"
                    ));
                }
                if self.theta0 > self.theta1 {
                    return bad(format!("theta0 {} exceeds theta1 {}", self.theta0, self.theta1));
                }
                self.beam_spec()?;
            }
            _ => {}
        }
        if self.experiment == ExperimentKind::BigData && self.p == 0 {
            return bad("p must be positive".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<LevelSchedule> {
        LevelSchedule::from_sizes(self.sizes.clone())
    }

    pub fn beam_spec(&self) -> Result<BeamSpec> {
        let load = match self.load {
            LoadKind::Gaussian => LoadProfile::Gaussian {
                width: self.load_width,
                force: 1.0,
            },
            LoadKind::Hat => LoadProfile::Hat {
                half_width: self.load_width,
                force: 1.0,
            },
            LoadKind::Uniform => LoadProfile::Uniform { intensity: 1.0 },
        };
        let m = self.sensors.len();
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            cov[i * m + i] = self.noise_var;
        }
        BeamSpec::new(self.beam_length, self.stiffness, load, self.sensors.clone(), cov)
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("experiment", self.experiment.name().into());
        kv("sizes", join(&self.sizes));
        kv("n_steps", self.n_steps.to_string());
        kv("n_repeats", self.n_repeats.to_string());
        kv("n_sequences", self.n_sequences.to_string());
        kv("seed", self.seed.to_string());
        kv("data_seed", self.data_seed.to_string());
        kv("sigma", self.sigma.to_string());
        kv("init_mean", self.init_mean.to_string());
        kv("p", self.p.to_string());
        kv("cov_seed", self.cov_seed.to_string());
        kv("theta0", self.theta0.to_string());
        kv("theta1", self.theta1.to_string());
        kv("beam_length", self.beam_length.to_string());
        kv("stiffness", self.stiffness.to_string());
        kv(
            "load",
            match self.load {
                LoadKind::Gaussian => "gaussian",
                LoadKind::Hat => "hat",
                LoadKind::Uniform => "uniform",
            }
            .into(),
        );
        kv("load_width", self.load_width.to_string());
        kv("sensors", join(&self.sensors));
        kv("noise_var", self.noise_var.to_string());
        match self.reference {
            Reference::Kalman => kv("reference", "kalman".into()),
            Reference::Bpf { n, theta } => {
                kv("reference", "bpf".into());
                kv("reference_n", n.to_string());
                kv("reference_theta", theta.to_string());
            }
        }
        kv("output_dir", self.output_dir.display().to_string());
        kv("timing", self.timing.to_string());
        s
    }

    /// Same experiment with a different level allocation.
    pub fn with_sizes(&self, sizes: Vec<usize>) -> Self {
        ExperimentConfig { sizes, ..self.clone() }
    }
}
