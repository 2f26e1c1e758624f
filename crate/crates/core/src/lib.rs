//! Multilevel particle filtering for hidden Markov models whose
//! likelihood comes in several fidelity tiers.
//!
//! The sample is split into levels. Level `l` particles carry the
//! likelihood increment `g^l - g^(l-1)`, so the filter can spend most
//! particles on a cheap approximation and a few on the exact likelihood.
//! Increments can be negative; the ensemble is a signed measure and every
//! particle carries a sign.
//!
//! ```
//! use mlbpf::{run_filter, ClosureModel, LevelSchedule};
//!
//! let model = ClosureModel::new(|_| 0.0f64, |x, _| *x)
//!     .level(|_, x| (-(x - 0.5f64).powi(2)).exp() * 0.9)
//!     .level(|_, x| (-(x - 0.5f64).powi(2)).exp());
//! let schedule = LevelSchedule::new(&[4, 1], 50).unwrap();
//! let est = run_filter(&model, schedule, 3, 7).unwrap();
//! assert_eq!(est.len(), 3);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ar1;
pub mod banded;
pub mod beam;
pub mod bigdata;
pub mod bpf;
pub mod ensemble;
pub mod error;
pub mod filter;
pub mod harness;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod schedule;

pub use ar1::{ar1_prior, ar1_step, simulate, Ar1Signal, SyntheticTrajectory};
pub use beam::{
    build_beam_model, fit_regression, sensor_loglik, simulate_beam_observations, solve_beam, BeamModel, BeamSolver,
    BeamSpec, LoadProfile, MeshSolution, RegressionCorrection,
};
pub use bigdata::{
    build_bigdata_model, fit_log_scaling, fit_scaling, generate_covariance, loglik_diag, loglik_full,
    simulate_observations, BigDataModel, ObservationCovariance, ScalingCorrection,
};
pub use bpf::BootstrapFilter;
pub use ensemble::{ResampleDiagnostics, SignedEnsemble, SignedMeasureView};
pub use error::{ModelError, Result, SmcError};
pub use filter::{
    estimate, init, level_measure, mean, mutate, resample, reweight, run_filter, weighted_estimate, FilterEstimate,
    ResamplingTable, EPS_NORM,
};
pub use kalman::{kalman_filter, kalman_predict, kalman_update, KalmanState};
pub use model::{ClosureModel, HmmModel, LevelLogLikelihoods, ParticleState};
pub use rng::{Phase, StreamRng, Substreams, BLOCK};
pub use schedule::LevelSchedule;
