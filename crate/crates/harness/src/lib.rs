//! Configuration-driven runner for the uncertainty propagation methods of `musc-up-core`.
//!
//! `run` executes one experiment and writes `moments.csv`, `report.json` and
//! `timing.json`; `compare` tabulates several runs against a stored reference;
//! `plot` turns a report into CSV series and SVG charts.

pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;

pub use compare::{compare_reports, ComparisonRow};
pub use config::{ExperimentConfig, Method, ModelKind, Precision, Settings};
pub use error::HarnessError;
pub use output::{MomentTable, Report};
pub use plot::{emit_plot_data, PlotKind};
pub use run::{run_experiment, RunStatus};
