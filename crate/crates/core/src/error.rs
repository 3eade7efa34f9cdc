use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time scales: {0}")]
    TimeScales(String),

    #[error("invalid field: {0}")]
    Field(String),

    #[error("non-finite value at macro step {step} (parameters {params:?})")]
    NonFinite { step: usize, params: Vec<f64> },

    #[error("non-finite reaction result at grid point {point} (component {component})")]
    NonFiniteReaction { point: usize, component: usize },

    #[error("explicit diffusion unstable: CFL number {cfl:.6} exceeds {limit}")]
    Cfl { cfl: f64, limit: f64 },

    #[error("explicit reaction step too large: |rate * dt| = {value:.6} exceeds {limit}")]
    ReactionStep { value: f64, limit: f64 },

    #[error("{what}: expected {expected}, given {given}")]
    LengthMismatch { what: &'static str, expected: usize, given: usize },

    #[error("invalid input distribution: {0}")]
    Distribution(String),

    #[error("{what} needs at least {needed} samples, given {given}")]
    TooFewSamples { what: &'static str, needed: usize, given: usize },

    #[error("invalid sampling plan: {0}")]
    Plan(String),

    #[error("interpolation centers {first} and {second} coincide")]
    DuplicateCenters { first: usize, second: usize },

    #[error("singular linear system (zero pivot in column {column})")]
    Singular { column: usize },

    #[error("leave-one-out fold {fold} failed: {source}")]
    LooFold { fold: usize, source: Box<Error> },

    #[error("kernel matrix not positive definite (nugget escalated to {nugget:e})")]
    NotPositiveDefinite { nugget: f64 },

    #[error("invalid GP configuration: {0}")]
    GpConfig(String),

    #[error("polynomial chaos basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("Galerkin coefficients blew up at macro step {step} (norm {norm:e})")]
    BlowUp { step: usize, norm: f64 },

    #[error("invalid model configuration: {0}")]
    Model(String),

    #[error("sample {index} (parameters {params:?}) failed: {source}")]
    Sample { index: usize, params: Vec<f64>, source: Box<Error> },
}

impl Error {
    pub(crate) fn in_sample(self, index: usize, params: &[f64]) -> Self {
        Error::Sample { index, params: params.to_vec(), source: Box::new(self) }
    }
}
