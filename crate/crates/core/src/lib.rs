//! Uncertainty propagation for multiscale models with time-scale separation.
//!
//! A macro model and a micro model exchange state once per macro step. On top of
//! that coupling the crate provides plain Monte Carlo, semi-intrusive Monte Carlo
//! with interpolated micro outputs, a Gaussian-process metamodel of the micro
//! model, and intrusive / coupled polynomial chaos.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod field;
pub mod gp;
pub mod mc;
pub mod models;
pub mod pc;
pub mod rbf;
pub mod sampling;
pub mod scalar;
pub mod simc;
pub mod stats;
pub mod timing;

pub use coupling::{
    run_coupled, run_coupled_with, run_coupled_with_injected_micro, CoupledRun, MacroModel, MicroModel,
    MultiscaleModel, Retention, RunOptions, TimeScales, Trajectory,
};
pub use error::{Error, Result};
pub use field::{Field, Grid};
pub use gp::{fit_gp, gp_predict, run_metamodel_up, GPConfig, GPModel, Hyperparameters};
pub use pc::{build_basis, coupled_pc_run, galerkin_multiply, galerkin_run, moments_from_pc, PCBasis, PCExpansion};
pub use sampling::{draw_samples, InputDistribution, SampleSet, UniformInput};
pub use scalar::Scalar;
pub use simc::{run_simc, Decision, ErrorBoundReport, SamplingPlan, Selection, SimcResult};
pub use mc::{run_mc, UpOptions, UpResult};
pub use stats::{bootstrap_ci, estimate_moments, estimate_moments_with_ci, mean_relative_error, BootstrapConfig, Estimator, Interval, MomentEstimate};
pub use timing::TimingBreakdown;

pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type Grid64 = Grid<f64>;
pub type TimeScales64 = TimeScales<f64>;
pub type MomentEstimate64 = MomentEstimate<f64>;
