//! Polynomial chaos on uniform inputs: Legendre bases, Galerkin products and solvers.

pub mod basis;
pub mod expansion;
pub mod galerkin;
pub mod legendre;

pub use basis::{build_basis, PCBasis, TripleEntry};
pub use expansion::{galerkin_multiply, moments_from_pc, PCExpansion};
pub use galerkin::{coupled_pc_run, galerkin_run, galerkin_run_1d, galerkin_run_gs, GalerkinModel, PcRun};
