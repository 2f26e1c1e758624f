//! Clamped-clamped Euler-Bernoulli beam under a moving load.
//!
//! `EI W'''' = F_x` on `[0, L]` with `W = W' = 0` at both ends, discretised
//! with the 5-point stencil on `theta` uniform intervals. The slope
//! condition is imposed through mirrored ghost nodes, which keeps the system
//! symmetric pentadiagonal; it is factored once per mesh and reused for
//! every load position.

use std::cell::RefCell;
use std::sync::Arc;

use crate::ar1::{simulate, Ar1Signal, SyntheticTrajectory};
use crate::banded::{PentadiagonalLdl, SymmetricPentadiagonal};
use crate::ensemble::SignedEnsemble;
use crate::error::{ModelError, Result, SmcError};
use crate::linalg::CholeskyFactor;
use crate::model::{par_fill, HmmModel, LevelLogLikelihoods};
use crate::rng::{StreamRng, Substreams};

pub const MIN_MESH: usize = 5;

/// Load density `F_x(l)` as a function of the load position `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadProfile {
    /// Normal bump with standard deviation `width`, total `force` before
    /// truncation to the beam.
    Gaussian { width: f64, force: f64 },
    /// Triangle of half-width `half_width` and total `force`.
    Hat { half_width: f64, force: f64 },
    /// Constant `intensity` along the whole beam, independent of `x`.
    Uniform { intensity: f64 },
}

impl Default for LoadProfile {
    fn default() -> Self {
        LoadProfile::Gaussian { width: 0.2, force: 1.0 }
    }
}

impl LoadProfile {
    pub fn density(&self, x: f64, l: f64) -> f64 {
        match *self {
            LoadProfile::Gaussian { width, force } => {
                let z = (l - x) / width;
                force * (-0.5 * z * z).exp() / (width * (2.0 * std::f64::consts::PI).sqrt())
            }
            LoadProfile::Hat { half_width, force } => {
                let t = 1.0 - (l - x).abs() / half_width;
                if t > 0.0 {
                    force * t / half_width
                } else {
                    0.0
                }
            }
            LoadProfile::Uniform { intensity } => intensity,
        }
    }

    /// Interval outside which the density is (numerically) zero.
    fn support(&self, x: f64) -> (f64, f64) {
        match *self {
            LoadProfile::Gaussian { width, .. } => (x - 10.0 * width, x + 10.0 * width),
            LoadProfile::Hat { half_width, .. } => (x - half_width, x + half_width),
            LoadProfile::Uniform { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LoadProfile::Gaussian { width, force } => width > 0.0 && force.is_finite(),
            LoadProfile::Hat { half_width, force } => half_width > 0.0 && force.is_finite(),
            LoadProfile::Uniform { intensity } => intensity.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SmcError::Config(format!("invalid load profile {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSpec {
    pub length: f64,
    pub stiffness: f64,
    pub load: LoadProfile,
    pub sensors: Vec<f64>,
    noise_cov: Vec<f64>,
    noise_chol: CholeskyFactor,
}

impl BeamSpec {
    /// `noise_cov` is the row-major `m x m` sensor noise covariance.
    pub fn new(length: f64, stiffness: f64, load: LoadProfile, sensors: Vec<f64>, noise_cov: Vec<f64>) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) || !(stiffness > 0.0 && stiffness.is_finite()) {
            return Err(SmcError::Config(format!(
                "beam length {length} and stiffness {stiffness} must be positive"
            )));
        }
        load.validate()?;
        let m = sensors.len();
        if m == 0 || sensors.iter().any(|s| !(0.0..=length).contains(s)) {
            return Err(SmcError::Config(format!(
                "sensors {sensors:?} must lie in [0, {length}]"
            )));
        }
        if noise_cov.len() != m * m {
            return Err(SmcError::Config(format!("noise covariance must be {m}x{m}")));
        }
        for i in 0..m {
            for j in 0..i {
                if noise_cov[i * m + j] != noise_cov[j * m + i] {
                    return Err(SmcError::Config("noise covariance must be symmetric".into()));
                }
            }
        }
        let noise_chol =
            CholeskyFactor::new(m, &noise_cov).map_err(|e| SmcError::Config(format!("noise covariance: {e}")))?;
        Ok(BeamSpec {
            length,
            stiffness,
            load,
            sensors,
            noise_cov,
            noise_chol,
        })
    }

    /// Length 4, `EI = 1`, sensors at 1 and 1.75, noise `0.0002 I_2`,
    /// Gaussian load of width 0.2.
    pub fn standard() -> Self {
        Self::new(
            4.0,
            1.0,
            LoadProfile::default(),
            vec![1.0, 1.75],
            vec![0.0002, 0.0, 0.0, 0.0002],
        )
        .expect("standard beam is valid")
    }

    pub fn with_load(mut self, load: LoadProfile) -> Result<Self> {
        load.validate()?;
        self.load = load;
        Ok(self)
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn noise_cov(&self) -> &[f64] {
        &self.noise_cov
    }

    pub fn noise_factor(&self) -> &CholeskyFactor {
        &self.noise_chol
    }

    /// Gaussian kernel `-(1/2) r^T Sigma^{-1} r` with `r = y - h`.
    pub fn sensor_kernel(&self, h: &[f64], y: &[f64]) -> f64 {
        let mut r: Vec<f64> = y.iter().zip(h).map(|(y, h)| y - h).collect();
        -0.5 * self.noise_chol.quad_form_in_place(&mut r)
    }
}

/// Deflection on the `theta + 1` mesh nodes (ends included) and at the
/// sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSolution {
    pub mesh_size: usize,
    pub deflections: Vec<f64>,
    pub sensor_values: Vec<f64>,
}

impl MeshSolution {
    pub fn node(&self, k: usize, length: f64) -> f64 {
        k as f64 * length / self.mesh_size as f64
    }
}

thread_local! {
    static SCRATCH: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

/// Factored stencil for one mesh size.
#[derive(Debug, Clone)]
pub struct BeamSolver {
    spec: Arc<BeamSpec>,
    theta: usize,
    h: f64,
    ldl: PentadiagonalLdl,
}

impl BeamSolver {
    pub fn new(spec: Arc<BeamSpec>, theta: usize) -> Result<Self> {
        if theta < MIN_MESH {
            return Err(SmcError::Config(format!("mesh size {theta} below minimum {MIN_MESH}")));
        }
        let n = theta - 1;
        let mut diag = vec![6.0; n];
        diag[0] = 7.0;
        diag[n - 1] = 7.0;
        let system = SymmetricPentadiagonal {
            diag,
            off1: vec![-4.0; n - 1],
            off2: vec![1.0; n - 2],
        };
        // clamped stencil is SPD, so this cannot fail for theta >= MIN_MESH
        let ldl = system.factor().expect("clamped stencil is positive definite");
        Ok(BeamSolver {
            h: spec.length / theta as f64,
            spec,
            theta,
            ldl,
        })
    }

    pub fn mesh_size(&self) -> usize {
        self.theta
    }

    pub fn spec(&self) -> &Arc<BeamSpec> {
        &self.spec
    }

    /// Interior deflections `W_1..W_{theta-1}` for an arbitrary density.
    fn solve_interior(&self, density: impl Fn(f64) -> f64, support: (f64, f64), w: &mut Vec<f64>) {
        let n = self.theta - 1;
        w.clear();
        w.resize(n, 0.0);
        let scale = self.h.powi(4) / self.spec.stiffness;
        let lo = (support.0 / self.h).ceil().max(1.0) as usize;
        let hi = (support.1 / self.h).floor().min(n as f64) as usize;
        for k in lo..=hi {
            w[k - 1] = scale * density(k as f64 * self.h);
        }
        self.ldl.solve_in_place(w);
    }

    fn interpolate(&self, interior: &[f64], l: f64) -> f64 {
        let at = |k: usize| {
            if k == 0 || k == self.theta {
                0.0
            } else {
                interior[k - 1]
            }
        };
        let s = (l / self.h).clamp(0.0, self.theta as f64);
        let k = (s.floor() as usize).min(self.theta - 1);
        let t = s - k as f64;
        (1.0 - t) * at(k) + t * at(k + 1)
    }

    /// Solution for the density `F(l)` (not tied to the spec's load).
    pub fn solve_with(&self, density: impl Fn(f64) -> f64) -> MeshSolution {
        let mut w = Vec::new();
        self.solve_interior(density, (f64::NEG_INFINITY, f64::INFINITY), &mut w);
        self.package(&w)
    }

    pub fn solve(&self, x: f64) -> MeshSolution {
        let load = self.spec.load;
        let mut w = Vec::new();
        self.solve_interior(|l| load.density(x, l), load.support(x), &mut w);
        self.package(&w)
    }

    fn package(&self, interior: &[f64]) -> MeshSolution {
        let mut deflections = Vec::with_capacity(self.theta + 1);
        deflections.push(0.0);
        deflections.extend_from_slice(interior);
        deflections.push(0.0);
        MeshSolution {
            mesh_size: self.theta,
            sensor_values: self
                .spec
                .sensors
                .iter()
                .map(|&l| self.interpolate(interior, l))
                .collect(),
            deflections,
        }
    }

    /// Sensor deflections `h^theta(x)` using a per-thread scratch buffer.
    pub fn sensor_values(&self, x: f64) -> Vec<f64> {
        let load = self.spec.load;
        SCRATCH.with(|buf| {
            let mut w = buf.borrow_mut();
            self.solve_interior(|l| load.density(x, l), load.support(x), &mut w);
            self.spec.sensors.iter().map(|&l| self.interpolate(&w, l)).collect()
        })
    }
}

pub fn solve_beam(spec: &BeamSpec, load_position: f64, mesh_size: usize) -> Result<MeshSolution> {
    Ok(BeamSolver::new(Arc::new(spec.clone()), mesh_size)?.solve(load_position))
}

/// Gaussian log-likelihood of sensor readings `y`, constants dropped.
pub fn sensor_loglik(spec: &BeamSpec, load_position: f64, mesh_size: usize, y: &[f64]) -> Result<f64> {
    if y.len() != spec.num_sensors() {
        return Err(SmcError::Config(format!(
            "expected {} sensor readings, got {}",
            spec.num_sensors(),
            y.len()
        )));
    }
    let sol = solve_beam(spec, load_position, mesh_size)?;
    Ok(spec.sensor_kernel(&sol.sensor_values, y))
}

/// Per-sensor affine correction `fine - coarse ~ alpha + beta x`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionCorrection {
    pub intercepts: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Fewer than two distinct positions: slopes are zero and intercepts
    /// are mean differences.
    pub fallback: bool,
}

impl RegressionCorrection {
    pub fn zero(m: usize) -> Self {
        RegressionCorrection {
            intercepts: vec![0.0; m],
            slopes: vec![0.0; m],
            fallback: false,
        }
    }

    pub fn apply(&self, x: f64, coarse: &mut [f64]) {
        for ((h, a), b) in coarse.iter_mut().zip(&self.intercepts).zip(&self.slopes) {
            *h += a + b * x;
        }
    }
}

pub fn fit_regression(positions: &[f64], coarse: &[Vec<f64>], fine: &[Vec<f64>]) -> RegressionCorrection {
    assert_eq!(positions.len(), coarse.len());
    assert_eq!(positions.len(), fine.len());
    let m = coarse.first().map_or(0, Vec::len);
    let n = positions.len();
    if n == 0 {
        return RegressionCorrection {
            fallback: true,
            ..RegressionCorrection::zero(m)
        };
    }
    let x_bar = positions.iter().sum::<f64>() / n as f64;
    let sxx: f64 = positions.iter().map(|x| (x - x_bar).powi(2)).sum();
    let mut out = RegressionCorrection::zero(m);
    out.fallback = !(sxx > 0.0);
    for s in 0..m {
        let d = |i: usize| fine[i][s] - coarse[i][s];
        let d_bar = (0..n).map(d).sum::<f64>() / n as f64;
        if out.fallback {
            out.intercepts[s] = d_bar;
            continue;
        }
        let sxd: f64 = (0..n).map(|i| (positions[i] - x_bar) * (d(i) - d_bar)).sum();
        let beta = sxd / sxx;
        out.slopes[s] = beta;
        out.intercepts[s] = d_bar - beta * x_bar;
    }
    if out.fallback {
        log::warn!("regression correction fitted on fewer than two distinct positions");
    }
    out
}

/// Random-walk load position observed through noisy sensor deflections.
///
/// One mesh gives a classical filter; two meshes `theta0 <= theta1` give the
/// two-level model whose coarse level carries the regression correction.
#[derive(Debug, Clone)]
pub struct BeamModel {
    signal: Ar1Signal,
    solvers: Vec<BeamSolver>,
    observations: Arc<Vec<Vec<f64>>>,
}

impl BeamModel {
    pub fn new(
        spec: Arc<BeamSpec>,
        thetas: &[usize],
        signal: Ar1Signal,
        observations: Arc<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if !(1..=2).contains(&thetas.len()) {
            return Err(SmcError::Config(format!(
                "beam model supports 1 or 2 levels, got {}",
                thetas.len()
            )));
        }
        if thetas.windows(2).any(|w| w[0] > w[1]) {
            return Err(SmcError::Config(format!(
                "mesh sizes {thetas:?} must be non-decreasing"
            )));
        }
        if let Some(y) = observations.iter().find(|y| y.len() != spec.num_sensors()) {
            return Err(SmcError::Config(format!(
                "observation of length {} for {} sensors",
                y.len(),
                spec.num_sensors()
            )));
        }
        let solvers = thetas
            .iter()
            .map(|&t| BeamSolver::new(spec.clone(), t))
            .collect::<Result<Vec<_>>>()?;
        Ok(BeamModel {
            signal,
            solvers,
            observations,
        })
    }

    pub fn spec(&self) -> &Arc<BeamSpec> {
        self.solvers[0].spec()
    }

    pub fn mesh_sizes(&self) -> Vec<usize> {
        self.solvers.iter().map(BeamSolver::mesh_size).collect()
    }

    pub fn signal(&self) -> &Ar1Signal {
        &self.signal
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    fn kernel(&self, step: usize, h: &[f64]) -> f64 {
        self.spec().sensor_kernel(h, &self.observations[step])
    }
}

/// Sensor readings `h^theta(x_n) + V_n` along a simulated load path.
pub fn simulate_beam_observations(
    solver: &BeamSolver,
    signal: &Ar1Signal,
    n_steps: usize,
    seed: u64,
) -> SyntheticTrajectory {
    let chol = solver.spec().noise_factor().clone();
    simulate(
        signal,
        n_steps,
        |x, rng| {
            let z: Vec<f64> = (0..chol.dim())
                .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng))
                .collect();
            let noise = chol.mul_lower(&z);
            solver
                .sensor_values(x)
                .into_iter()
                .zip(noise)
                .map(|(h, v)| h + v)
                .collect()
        },
        seed,
    )
}

/// Two-level model and a trajectory observed at the fine mesh.
pub fn build_beam_model(
    spec: &BeamSpec,
    theta0: usize,
    theta1: usize,
    sigma_signal: f64,
    n_steps: usize,
    seed: u64,
) -> Result<(BeamModel, SyntheticTrajectory)> {
    let spec = Arc::new(spec.clone());
    let signal = Ar1Signal::new(1.0, sigma_signal)?;
    let fine = BeamSolver::new(spec.clone(), theta1)?;
    let traj = simulate_beam_observations(&fine, &signal, n_steps, Substreams::new(seed).child(1).seed());
    let model = BeamModel::new(spec, &[theta0, theta1], signal, Arc::new(traj.observations.clone()))?;
    Ok((model, traj))
}

impl HmmModel for BeamModel {
    type State = f64;

    fn num_levels(&self) -> usize {
        self.solvers.len()
    }

    fn num_observations(&self) -> Option<usize> {
        Some(self.observations.len())
    }

    fn sample_prior(&self, rng: &mut StreamRng) -> f64 {
        self.signal.prior(rng)
    }

    fn sample_transition(&self, x: &f64, rng: &mut StreamRng) -> Result<f64, ModelError> {
        Ok(self.signal.step(*x, rng))
    }

    /// Uncorrected mesh likelihood of `level`.
    fn log_likelihood(&self, step: usize, level: usize, x: &f64) -> f64 {
        self.kernel(step, &self.solvers[level].sensor_values(*x))
    }

    fn level_log_likelihoods(&self, step: usize, e: &SignedEnsemble<f64>) -> Result<LevelLogLikelihoods, ModelError> {
        if self.solvers.len() == 1 {
            return Ok(LevelLogLikelihoods::evaluate(e.schedule(), e.states(), |l, x| {
                self.log_likelihood(step, l, x)
            }));
        }
        let (coarse, fine) = (&self.solvers[0], &self.solvers[1]);
        let lo = e.schedule().range(0);
        let hi = e.schedule().range(1);
        let states = e.states();

        let mut fine_h = vec![Vec::new(); hi.len()];
        let mut coarse_hi = vec![Vec::new(); hi.len()];
        par_fill(&mut fine_h, &states[hi.clone()], |x| fine.sensor_values(*x));
        par_fill(&mut coarse_hi, &states[hi.clone()], |x| coarse.sensor_values(*x));
        let corr = fit_regression(&states[hi.clone()], &coarse_hi, &fine_h);

        let n = e.len();
        let mut upper = vec![0.0; n];
        let mut lower = vec![f64::NEG_INFINITY; n];
        par_fill(&mut upper[lo.clone()], &states[lo], |x| {
            let mut h = coarse.sensor_values(*x);
            corr.apply(*x, &mut h);
            self.kernel(step, &h)
        });
        for (k, i) in hi.enumerate() {
            upper[i] = self.kernel(step, &fine_h[k]);
            let mut h = std::mem::take(&mut coarse_hi[k]);
            corr.apply(states[i], &mut h);
            lower[i] = self.kernel(step, &h);
        }
        Ok(LevelLogLikelihoods { upper, lower })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_spec() -> BeamSpec {
        BeamSpec::standard()
            .with_load(LoadProfile::Uniform { intensity: 1.0 })
            .unwrap()
    }

    fn analytic(l: f64) -> f64 {
        l * l * (4.0 - l).powi(2) / 24.0
    }

    fn max_error(theta: usize) -> f64 {
        let sol = solve_beam(&uniform_spec(), 0.0, theta).unwrap();
        sol.deflections
            .iter()
            .enumerate()
            .map(|(k, w)| (w - analytic(sol.node(k, 4.0))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_load_gives_zero_deflection() {
        let spec = BeamSpec::standard()
            .with_load(LoadProfile::Uniform { intensity: 0.0 })
            .unwrap();
        let sol = solve_beam(&spec, 2.0, 40).unwrap();
        assert!(sol.deflections.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn uniform_load_midpoint() {
        let sol = solve_beam(&uniform_spec(), 0.0, 200).unwrap();
        assert_eq!(sol.deflections.len(), 201);
        assert_eq!(sol.deflections[0], 0.0);
        assert_eq!(sol.deflections[200], 0.0);
        assert!((sol.deflections[100] - 16.0 / 24.0).abs() < 1e-3);
    }

    #[test]
    fn second_order_convergence() {
        let errs: Vec<f64> = [50, 100, 200, 400].iter().map(|&t| max_error(t)).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn linear_in_load() {
        let spec = BeamSpec::standard();
        let heavy = spec
            .clone()
            .with_load(LoadProfile::Gaussian { width: 0.2, force: 3.0 })
            .unwrap();
        let a = solve_beam(&spec, 1.3, 80).unwrap();
        let b = solve_beam(&heavy, 1.3, 80).unwrap();
        for (x, y) in a.deflections.iter().zip(&b.deflections) {
            assert!((3.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn superposition() {
        let spec = Arc::new(BeamSpec::standard());
        let solver = BeamSolver::new(spec.clone(), 120).unwrap();
        let f1 = |l: f64| spec.load.density(0.8, l);
        let f2 = |l: f64| spec.load.density(2.9, l);
        let a = solver.solve_with(f1);
        let b = solver.solve_with(f2);
        let c = solver.solve_with(|l| f1(l) + f2(l));
        for k in 0..=120 {
            assert!((a.deflections[k] + b.deflections[k] - c.deflections[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_load_symmetric_sensors() {
        let spec = BeamSpec::new(
            4.0,
            1.0,
            LoadProfile::default(),
            vec![1.0, 3.0],
            vec![0.0002, 0.0, 0.0, 0.0002],
        )
        .unwrap();
        let sol = solve_beam(&spec, 2.0, 200).unwrap();
        assert!((sol.sensor_values[0] - sol.sensor_values[1]).abs() < 1e-10);
    }

    #[test]
    fn windowed_load_matches_full_evaluation() {
        let spec = Arc::new(BeamSpec::standard());
        let solver = BeamSolver::new(spec.clone(), 300).unwrap();
        let full = solver.solve_with(|l| spec.load.density(1.1, l));
        let fast = solver.sensor_values(1.1);
        for (a, b) in full.sensor_values.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mesh_convergence_constant_is_stable() {
        let spec = BeamSpec::standard();
        let c: Vec<f64> = [50usize, 100, 200]
            .iter()
            .map(|&t| {
                let a = solve_beam(&spec, 1.2, t).unwrap().sensor_values;
                let b = solve_beam(&spec, 1.2, 2 * t).unwrap().sensor_values;
                let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                d * (t * t) as f64
            })
            .collect();
        for w in c.windows(2) {
            assert!(w[0] / w[1] > 0.5 && w[0] / w[1] < 2.0, "{c:?}");
        }
    }

    #[test]
    fn sensor_loglik_hand_values() {
        let spec = BeamSpec::new(4.0, 1.0, LoadProfile::default(), vec![1.0], vec![0.0002]).unwrap();
        let h = solve_beam(&spec, 1.5, 60).unwrap().sensor_values;
        assert_eq!(sensor_loglik(&spec, 1.5, 60, &h).unwrap(), 0.0);
        let y = [h[0] + 0.02];
        assert!((sensor_loglik(&spec, 1.5, 60, &y).unwrap() + 1.0).abs() < 1e-9);
        assert!(sensor_loglik(&spec, 1.5, 60, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn regression_examples() {
        let c = vec![vec![0.5], vec![0.1], vec![0.3]];
        let r = fit_regression(&[1.0, 2.0, 3.0], &c, &c);
        assert_eq!(r.intercepts, vec![0.0]);
        assert_eq!(r.slopes, vec![0.0]);

        let zero = vec![vec![0.0]; 3];
        let fine = vec![vec![0.1], vec![0.2], vec![0.3]];
        let r = fit_regression(&[1.0, 2.0, 3.0], &zero, &fine);
        assert!(r.intercepts[0].abs() < 1e-15);
        assert!((r.slopes[0] - 0.1).abs() < 1e-15);

        let xs = [0.3, 1.1, 2.5, 0.9];
        let coarse: Vec<Vec<f64>> = xs.iter().map(|x| vec![x * x, -x]).collect();
        let fine: Vec<Vec<f64>> = xs
            .iter()
            .zip(&coarse)
            .map(|(x, c)| vec![c[0] + 0.2 - 0.7 * x, c[1] - 1.5 + 2.0 * x])
            .collect();
        let r = fit_regression(&xs, &coarse, &fine);
        assert!((r.intercepts[0] - 0.2).abs() < 1e-12 && (r.slopes[0] + 0.7).abs() < 1e-12);
        assert!((r.intercepts[1] + 1.5).abs() < 1e-12 && (r.slopes[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn regression_fallback() {
        let r = fit_regression(&[1.0, 1.0], &[vec![0.0], vec![0.0]], &[vec![0.2], vec![0.4]]);
        assert!(r.fallback);
        assert_eq!(r.slopes, vec![0.0]);
        assert!((r.intercepts[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn coincident_meshes_have_no_increment() {
        let spec = Arc::new(BeamSpec::standard());
        let signal = Ar1Signal::new(1.0, 0.02).unwrap();
        let obs = Arc::new(vec![vec![0.01, 0.02]]);
        let model = BeamModel::new(spec, &[80, 80], signal, obs).unwrap();
        let schedule = crate::schedule::LevelSchedule::from_sizes(vec![5, 7]).unwrap();
        let streams = Substreams::new(3);
        let e = crate::filter::init(&model, schedule, &streams).unwrap();
        let ll = model.level_log_likelihoods(0, &e).unwrap();
        for i in e.schedule().range(1) {
            assert_eq!(ll.upper[i], ll.lower[i]);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(BeamSpec::new(4.0, 1.0, LoadProfile::default(), vec![5.0], vec![1.0]).is_err());
        assert!(BeamSpec::new(4.0, 0.0, LoadProfile::default(), vec![1.0], vec![1.0]).is_err());
        assert!(BeamSpec::new(
            4.0,
            1.0,
            LoadProfile::default(),
            vec![1.0, 2.0],
            vec![1.0, 0.5, 0.4, 1.0]
        )
        .is_err());
        assert!(solve_beam(&BeamSpec::standard(), 1.0, 4).is_err());
    }
}
