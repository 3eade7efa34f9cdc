//! Dispatch of one configured experiment and the files it leaves behind.

use std::path::{Path, PathBuf};
use std::time::Instant;

use musc_up_core::models::{GSConfig, GrayScott, ReactionDiffusion1D};
use musc_up_core::pc::GalerkinModel;
use musc_up_core::{
    build_basis, coupled_pc_run, galerkin_run, mean_relative_error, run_metamodel_up, run_mc, run_simc, Decision,
    Field, Grid, InputDistribution, MomentEstimate, Retention, Scalar, TimeScales, TimingBreakdown, UpOptions,
};

use crate::config::{GridSettings, Method, Precision, Settings};
use crate::error::HarnessError;
use crate::output::{
    locate_run, write_bounds, write_json, BoundSummary, GridInfo, MomentTable, Report, TimingFile, BOUNDS_FILE,
    MOMENTS_FILE, REPORT_FILE, TIMING_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    /// The SIMC interpolation test rejected; the fallback estimate was written.
    Rejected,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::Rejected => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub report: Report,
    pub moments: MomentTable,
    pub dir: PathBuf,
}

struct Computed {
    table: MomentTable,
    timing: TimingBreakdown,
    decision: Option<Decision>,
    bounds: Option<BoundSummary>,
    grid: GridInfo,
    components: usize,
    n_samples: usize,
}

/// Mean relative std error of `est` against `reference` over points above the floor.
pub fn std_error(est: &MomentTable, reference: &MomentTable) -> Result<f64, HarnessError> {
    est.check_layout(reference).map_err(HarnessError::Mismatch)?;
    let field = |v: Vec<f64>| Field::new(Grid::Line { n: v.len(), dx: 1.0 }, 1, v);
    Ok(mean_relative_error(&field(est.std())?, &field(reference.std())?)?)
}

/// Runs the configured method and writes `moments.csv`, `report.json` and `timing.json`
/// (plus `bounds.csv` for SIMC) into `out`.
pub fn run_experiment(s: &Settings, out: &Path) -> Result<RunSummary, HarnessError> {
    let reference = match &s.reference {
        Some(path) => {
            let (report, moments) = locate_run(path);
            let table = MomentTable::read(&moments)?;
            let stored = if report.is_file() { Some(Report::read(&report)?) } else { None };
            Some((table, stored))
        }
        None => None,
    };
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;

    let wall = Instant::now();
    let c = match s.precision {
        Precision::F64 => compute::<f64>(s, out)?,
        Precision::F32 => compute::<f32>(s, out)?,
    };
    let wall = wall.elapsed().as_secs_f64();

    let (error, speedup) = match &reference {
        Some((table, stored)) => {
            (Some(std_error(&c.table, table)?), stored.as_ref().map(|r| c.timing.speedup_over(&r.timing)))
        }
        None => (None, None),
    };
    let report = Report {
        method: s.method,
        decision: c.decision.map(|d| match d {
            Decision::Accept => "accept".to_string(),
            Decision::Reject => "reject".to_string(),
        }),
        mean_rel_std_error: error,
        timing: c.timing,
        seed: s.seed,
        config: s.clone(),
        model: s.model,
        grid: c.grid,
        components: c.components,
        t_end: s.t_end,
        n_samples: c.n_samples,
        speedup,
        bounds: c.bounds,
        reference: s.reference.clone(),
    };
    c.table.write(&out.join(MOMENTS_FILE))?;
    report.write(&out.join(REPORT_FILE))?;
    let timing = TimingFile { breakdown: c.timing, wall_seconds: wall, threads: rayon::current_num_threads() };
    write_json(&out.join(TIMING_FILE), &timing)?;

    let status = if c.decision == Some(Decision::Reject) { RunStatus::Rejected } else { RunStatus::Success };
    Ok(RunSummary { status, report, moments: c.table, dir: out.to_path_buf() })
}

fn compute<T: Scalar>(s: &Settings, out: &Path) -> Result<Computed, HarnessError> {
    let dist = s.distribution()?;
    match s.grid {
        GridSettings::Line { dx } => {
            let scales = TimeScales::from_macro(T::lit(s.dt_macro), s.n_micro, T::lit(s.t_end))?;
            dispatch(&ReactionDiffusion1D::new(T::lit(dx))?, &dist, &scales, s, out)
        }
        GridSettings::Plane { nx, ny } => {
            let cfg = GSConfig::new(nx, ny, T::lit(s.dt_macro), T::lit(s.t_end), s.n_micro)?;
            dispatch(&GrayScott::new(cfg), &dist, &cfg.scales, s, out)
        }
    }
}

fn dispatch<T, M>(
    model: &M,
    dist: &InputDistribution,
    scales: &TimeScales<T>,
    s: &Settings,
    out: &Path,
) -> Result<Computed, HarnessError>
where
    T: Scalar,
    M: GalerkinModel<T>,
{
    let opts = UpOptions { retain: Retention::Final, bootstrap: s.bootstrap() };
    let finish = |m: &MomentEstimate<T>, timing, decision, bounds| Computed {
        table: MomentTable::from_estimate(m),
        timing,
        decision,
        bounds,
        grid: GridInfo::of(m.mean.grid()),
        components: m.mean.components(),
        n_samples: m.n_samples,
    };
    Ok(match s.method {
        Method::Mc => {
            let r = run_mc(model, dist, scales, s.samples, s.seed, &opts)?;
            finish(r.final_moments(), r.timing, None, None)
        }
        Method::Simc => {
            let r = run_simc(model, dist, scales, &s.plan(), s.seed, &opts)?;
            write_bounds(&r.report, &out.join(BOUNDS_FILE))?;
            let mut c = finish(r.estimate.final_moments(), r.estimate.timing, Some(r.report.decision), Some(BoundSummary::of(&r.report)));
            c.n_samples = s.samples;
            c
        }
        Method::Gp => {
            let r = run_metamodel_up(model, dist, scales, s.samples, s.seed, &s.gp(), &opts)?;
            log::info!("GP hyperparameters {:?}, nugget {:e}", r.model.hyperparameters(), r.model.nugget());
            finish(r.estimate.final_moments(), r.estimate.timing, None, None)
        }
        Method::Galerkin | Method::CoupledPc => {
            let basis = build_basis(dist.dim(), s.pc_order, s.pc_quadrature)?;
            let r = if s.method == Method::Galerkin {
                galerkin_run(model, dist, scales, &basis, Retention::Final)?
            } else {
                coupled_pc_run(model, dist, scales, &basis, Retention::Final)?
            };
            finish(r.final_moments(), r.timing, None, None)
        }
    })
}
