//! Benchmark multiscale models.

pub mod gray_scott;
pub mod reaction_diffusion;

pub use gray_scott::{gs_diffusion_step, gs_init, gs_reaction_micro, GSConfig, GSParams, GrayScott};
pub use reaction_diffusion::{
    analytic_solution_1d, diffusion_step_1d, init_1d, reaction_micro_1d, ModelConfig1D, Params1D,
    ReactionDiffusion1D,
};
