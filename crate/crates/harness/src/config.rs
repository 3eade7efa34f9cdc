//! Experiment configuration: a single JSON document, validated as a whole.

use std::fmt;
use std::path::{Path, PathBuf};

use musc_up_core::models::gray_scott::{self, GSConfig};
use musc_up_core::models::reaction_diffusion::{self, mean_reaction, ModelConfig1D};
use musc_up_core::simc::Selection;
use musc_up_core::stats::MIN_RESAMPLES;
use musc_up_core::{BootstrapConfig, GPConfig, InputDistribution, SamplingPlan, TimeScales};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Case1,
    Case2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mc,
    Simc,
    Gp,
    CoupledPc,
    Galerkin,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Simc => "simc",
            Method::Gp => "gp",
            Method::CoupledPc => "coupled-pc",
            Method::Galerkin => "galerkin",
        }
    }

    fn is_sampling(self) -> bool {
        matches!(self, Method::Mc | Method::Simc | Method::Gp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    /// Relative half-width of every uniform input.
    pub rho: Option<f64>,
    pub means: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSpec {
    pub n_micro: Option<usize>,
    pub dt_macro: Option<f64>,
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dx: Option<f64>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimcSpec {
    pub n_mu: Option<usize>,
    pub selection: Option<Selection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GpSpec {
    pub n_meta: Option<usize>,
    pub nugget: Option<f64>,
    pub multistarts: Option<usize>,
    pub max_evals: Option<usize>,
    pub standardize: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PcSpec {
    pub order: Option<usize>,
    pub quadrature: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub resamples: Option<usize>,
    pub level: Option<f64>,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// The document as written by the user. Every section is optional except `model` and `method`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub method: Method,
    #[serde(default)]
    pub precision: Precision,
    pub seed: Option<u64>,
    /// Number of Monte Carlo samples `N`.
    pub samples: Option<usize>,
    #[serde(default)]
    pub distribution: DistributionSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub simc: SimcSpec,
    #[serde(default)]
    pub gp: GpSpec,
    #[serde(default)]
    pub pc: PcSpec,
    #[serde(default)]
    pub bootstrap: BootstrapSpec,
    pub output: Option<PathBuf>,
    /// Report (or its directory) of a stored reference run.
    pub reference: Option<PathBuf>,
}

/// Grid of a resolved configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum GridSettings {
    Line { dx: f64 },
    Plane { nx: usize, ny: usize },
}

/// Configuration with every default filled in; echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub model: ModelKind,
    pub method: Method,
    pub precision: Precision,
    pub seed: u64,
    pub samples: usize,
    pub rho: f64,
    pub means: Vec<f64>,
    pub n_micro: usize,
    pub dt_macro: f64,
    pub t_end: f64,
    pub grid: GridSettings,
    pub n_mu: usize,
    pub selection: Selection,
    pub gp: GPConfig,
    pub pc_order: usize,
    pub pc_quadrature: usize,
    pub bootstrap: BootstrapConfig,
    pub output: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses a JSON document; unknown keys anywhere in the tree are violations.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        match Self::parse(text)? {
            (cfg, unknown) if unknown.is_empty() => Ok(cfg),
            (_, unknown) => Err(HarnessError::Config(unknown)),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&read(path)?)
    }

    /// Reads, applies a seed override and resolves a configuration file, listing
    /// unknown keys together with every other violation.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Settings, HarnessError> {
        let (mut cfg, mut bad) = Self::parse(&read(path)?)?;
        if seed.is_some() {
            cfg.seed = seed;
        }
        match cfg.resolve() {
            Ok(s) if bad.is_empty() => Ok(s),
            Ok(_) => Err(HarnessError::Config(bad)),
            Err(HarnessError::Config(more)) => {
                bad.extend(more);
                Err(HarnessError::Config(bad))
            }
            Err(e) => Err(e),
        }
    }

    fn parse(text: &str) -> Result<(Self, Vec<String>), HarnessError> {
        let mut unknown = Vec::new();
        let de = &mut serde_json::Deserializer::from_str(text);
        let parsed: Result<Self, _> = serde_ignored::deserialize(de, |path| unknown.push(format!("unknown key `{path}`")));
        match parsed {
            Ok(cfg) => Ok((cfg, unknown)),
            Err(e) => {
                unknown.push(e.to_string());
                Err(HarnessError::Config(unknown))
            }
        }
    }

    /// Fills defaults and checks every constraint, reporting all violations together.
    pub fn resolve(&self) -> Result<Settings, HarnessError> {
        let mut bad = Vec::new();
        let case1 = self.model == ModelKind::Case1;
        let n_micro = self.time.n_micro.unwrap_or(if case1 { 100 } else { gray_scott::N_MICRO });
        if n_micro == 0 {
            bad.push("time.n_micro must be at least 1".to_string());
        }

        let grid = if case1 {
            if self.grid.nx.is_some() || self.grid.ny.is_some() {
                bad.push("grid.nx / grid.ny apply to case2 only".into());
            }
            let dx = self.grid.dx.unwrap_or(reaction_diffusion::DEFAULT_DX);
            if !(dx > 0.0 && dx <= 1.0 / 3.0) {
                bad.push(format!("grid.dx must lie in (0, 1/3], got {dx}"));
            }
            GridSettings::Line { dx }
        } else {
            if self.grid.dx.is_some() {
                bad.push("grid.dx applies to case1 only; use grid.nx / grid.ny".into());
            }
            let (nx, ny) = (self.grid.nx.unwrap_or(64), self.grid.ny.unwrap_or(64));
            if nx < 2 || ny < 2 {
                bad.push(format!("grid must be at least 2x2, got {nx}x{ny}"));
            }
            GridSettings::Plane { nx, ny }
        };

        let rho = self.distribution.rho.unwrap_or(if case1 {
            reaction_diffusion::RELATIVE_UNCERTAINTY
        } else {
            gray_scott::RELATIVE_UNCERTAINTY
        });
        if !(0.0..1.0).contains(&rho) {
            bad.push(format!("distribution.rho must lie in [0, 1), got {rho}"));
        }
        let means = match (&self.distribution.means, grid) {
            (Some(m), _) => m.clone(),
            (None, GridSettings::Line { dx }) => {
                vec![reaction_diffusion::MEAN_DIFFUSION, mean_reaction(n_micro, dx)]
            }
            (None, GridSettings::Plane { .. }) => vec![gray_scott::MEAN_FEED, gray_scott::MEAN_KILL],
        };
        if means.len() != 2 {
            bad.push(format!("distribution.means needs 2 entries, got {}", means.len()));
        } else if !means.iter().all(|m| m.is_finite() && *m > 0.0) {
            bad.push(format!("distribution.means must be positive, got {means:?}"));
        }

        let (dt_macro, t_end) = if case1 {
            let k = means.get(1).copied().unwrap_or(1.0);
            let steps = reaction_diffusion::DEFAULT_MACRO_STEPS as f64;
            let dt = self.time.dt_macro.unwrap_or(1.0 / (steps * k));
            (dt, self.time.t_end.unwrap_or(steps * dt))
        } else {
            (self.time.dt_macro.unwrap_or(1.5), self.time.t_end.unwrap_or(150.0))
        };
        if !(dt_macro > 0.0 && dt_macro.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
            bad.push(format!("time.dt_macro and time.t_end must be positive, got {dt_macro} and {t_end}"));
        } else if n_micro > 0 {
            match TimeScales::from_macro(dt_macro, n_micro, t_end) {
                Err(e) => bad.push(format!("time: {e}")),
                Ok(scales) if bad.is_empty() => match grid {
                    GridSettings::Line { dx } => {
                        if let Err(e) = ModelConfig1D::new(dx, scales, means[0] * (1.0 + rho)) {
                            bad.push(format!("time/grid: {e}"));
                        }
                    }
                    GridSettings::Plane { nx, ny } => {
                        if let Err(e) = GSConfig::new(nx, ny, dt_macro, t_end, n_micro) {
                            bad.push(format!("time/grid: {e}"));
                        }
                    }
                },
                Ok(_) => {}
            }
        }

        let samples = self.samples.unwrap_or(if case1 { 2000 } else { 500 });
        if self.method.is_sampling() && samples < 2 {
            bad.push(format!("samples must be at least 2, got {samples}"));
        }
        let n_mu = self.simc.n_mu.unwrap_or(50);
        if self.method == Method::Simc {
            let plan = SamplingPlan { n: samples, n_mu, selection: Selection::default() };
            if let Err(e) = plan.validate(means.len()) {
                bad.push(format!("simc: {e}"));
            }
        }

        let gp = GPConfig {
            n_meta: self.gp.n_meta.unwrap_or(25),
            nugget: self.gp.nugget.unwrap_or(1e-8),
            multistarts: self.gp.multistarts.unwrap_or(5),
            max_evals: self.gp.max_evals.unwrap_or(200),
            standardize: self.gp.standardize.unwrap_or(true),
            seed: 0,
            fixed: None,
        };
        if self.method == Method::Gp {
            if let Err(e) = gp.validate() {
                bad.push(format!("gp: {e}"));
            }
        }

        let pc_order = self.pc.order.unwrap_or(if case1 { 4 } else { 5 });
        let pc_quadrature = self.pc.quadrature.unwrap_or(pc_order + 2);
        if pc_order == 0 {
            bad.push("pc.order must be at least 1".into());
        }
        if pc_quadrature < pc_order + 1 {
            bad.push(format!("pc.quadrature must be at least order + 1 = {}, got {pc_quadrature}", pc_order + 1));
        }

        let bootstrap = BootstrapConfig {
            resamples: self.bootstrap.resamples.unwrap_or(1000),
            level: self.bootstrap.level.unwrap_or(0.95),
            seed: 0,
        };
        if bootstrap.resamples < MIN_RESAMPLES {
            bad.push(format!("bootstrap.resamples must be at least {MIN_RESAMPLES}, got {}", bootstrap.resamples));
        }
        if !(bootstrap.level > 0.0 && bootstrap.level < 1.0) {
            bad.push(format!("bootstrap.level must lie in (0, 1), got {}", bootstrap.level));
        }

        if !bad.is_empty() {
            return Err(HarnessError::Config(bad));
        }
        Ok(Settings {
            model: self.model,
            method: self.method,
            precision: self.precision,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            samples,
            rho,
            means,
            n_micro,
            dt_macro,
            t_end,
            grid,
            n_mu,
            selection: self.simc.selection.unwrap_or_default(),
            gp,
            pc_order,
            pc_quadrature,
            bootstrap,
            output: self.output.clone(),
            reference: self.reference.clone(),
        })
    }
}

impl Settings {
    pub fn distribution(&self) -> Result<InputDistribution, HarnessError> {
        Ok(InputDistribution::uniform_relative(&self.means, self.rho)?)
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig { seed: self.seed, ..self.bootstrap }
    }

    pub fn gp(&self) -> GPConfig {
        GPConfig { seed: self.seed, ..self.gp.clone() }
    }

    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan { n: self.samples, n_mu: self.n_mu, selection: self.selection }
    }
}
