//! Intrusive Galerkin solvers and the coupled intrusive / non-intrusive scheme.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::basis::PCBasis;
use super::expansion::{galerkin_multiply, input_coefficients, inputs_at, moments_from_pc, PCExpansion};
use crate::coupling::{MacroModel, MultiscaleModel, Retention, TimeScales};
use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::models::{GSConfig, GSParams, GrayScott, ModelConfig1D, ReactionDiffusion1D};
use crate::sampling::InputDistribution;
use crate::scalar::{CompensatedSum, Scalar};
use crate::stats::{MomentEstimate, DEFAULT_LEVEL};
use crate::timing::{Clock, TimingBreakdown};

const BLOW_UP_NORM: f64 = 1e6;

/// A multiscale model whose single-scale solvers can act on expansion coefficients.
pub trait GalerkinModel<T: Scalar>: MultiscaleModel<T> {
    /// Micro increment in coefficient space.
    fn galerkin_micro(
        &self,
        state: &PCExpansion<T>,
        dist: &InputDistribution,
        basis: &PCBasis,
        scales: &TimeScales<T>,
    ) -> Result<PCExpansion<T>>;

    /// Macro step in coefficient space, given the micro increment.
    fn galerkin_macro(
        &self,
        state: &PCExpansion<T>,
        micro: &PCExpansion<T>,
        dist: &InputDistribution,
        basis: &PCBasis,
        dt_macro: T,
    ) -> Result<PCExpansion<T>>;
}

fn periodic_second_difference<T: Scalar>(f: &Field<T>) -> Result<Field<T>> {
    let Grid::Line { n, .. } = *f.grid() else {
        return Err(Error::Model("1D diffusion needs a line grid".into()));
    };
    let two = T::lit(2.0);
    let mut out = Field::zeros(*f.grid(), f.components());
    for c in 0..f.components() {
        let u = f.component(c);
        let o = out.component_mut(c);
        for i in 0..n {
            o[i] = u[(i + n - 1) % n] + u[(i + 1) % n] - two * u[i];
        }
    }
    Ok(out)
}

impl<T: Scalar> GalerkinModel<T> for ReactionDiffusion1D<T> {
    fn galerkin_micro(
        &self,
        state: &PCExpansion<T>,
        dist: &InputDistribution,
        basis: &PCBasis,
        scales: &TimeScales<T>,
    ) -> Result<PCExpansion<T>> {
        let k_max = dist.dims[1].upper().abs().max(dist.dims[1].lower().abs());
        let step = k_max * scales.dt_micro().as_f64();
        if !(step < 1.0) {
            return Err(Error::ReactionStep { value: step, limit: 1.0 });
        }
        let k = PCExpansion::uniform(&input_coefficients::<T>(dist, basis, 1), state.layout());
        let dt = scales.dt_micro();
        let mut u = state.clone();
        for _ in 0..scales.n_micro() {
            let ku = galerkin_multiply(&k, &u, basis)?;
            u = u.map2(&ku, |a, b| a + dt * b);
        }
        Ok(u.map2(state, |a, b| a - b))
    }

    fn galerkin_macro(
        &self,
        state: &PCExpansion<T>,
        micro: &PCExpansion<T>,
        dist: &InputDistribution,
        basis: &PCBasis,
        dt_macro: T,
    ) -> Result<PCExpansion<T>> {
        let Grid::Line { dx, .. } = *state.layout().grid() else {
            return Err(Error::Model("1D diffusion needs a line grid".into()));
        };
        let r = dt_macro / (dx * dx);
        let cfl = dist.dims[0].upper() * r.as_f64();
        if cfl > 0.5 {
            return Err(Error::Cfl { cfl, limit: 0.5 });
        }
        let w = state.map2(micro, |a, b| a + b);
        let lap = PCExpansion { coeffs: w.coeffs.iter().map(periodic_second_difference).collect::<Result<_>>()? };
        let d = PCExpansion::uniform(&input_coefficients::<T>(dist, basis, 0), state.layout());
        let flux = galerkin_multiply(&d, &lap, basis)?;
        Ok(w.map2(&flux, |a, b| a + r * b))
    }
}

impl<T: Scalar> GalerkinModel<T> for GrayScott<T> {
    fn galerkin_micro(
        &self,
        state: &PCExpansion<T>,
        dist: &InputDistribution,
        basis: &PCBasis,
        scales: &TimeScales<T>,
    ) -> Result<PCExpansion<T>> {
        let cfg = self.config();
        if scales.dt_micro() > cfg.reaction_dt_max {
            return Err(Error::ReactionStep { value: scales.dt_micro().as_f64(), limit: cfg.reaction_dt_max.as_f64() });
        }
        let mut u = state.component(0);
        let mut v = state.component(1);
        let layout = u.layout().clone();
        let feed = PCExpansion::uniform(&input_coefficients::<T>(dist, basis, 0), &layout);
        let kill = PCExpansion::uniform(&input_coefficients::<T>(dist, basis, 1), &layout);
        let removal = feed.map2(&kill, |a, b| a + b);
        let dt = scales.dt_micro();
        for _ in 0..scales.n_micro() {
            let uvv = galerkin_multiply(&galerkin_multiply(&u, &v, basis)?, &v, basis)?;
            let mut one_minus_u = u.scaled(-T::one());
            for x in one_minus_u.coeffs[0].values_mut() {
                *x += T::one();
            }
            let fed = galerkin_multiply(&feed, &one_minus_u, basis)?;
            let removed = galerkin_multiply(&removal, &v, basis)?;
            let du = fed.map2(&uvv, |a, b| a - b);
            let dv = uvv.map2(&removed, |a, b| a - b);
            u = u.map2(&du, |a, b| a + dt * b);
            v = v.map2(&dv, |a, b| a + dt * b);
        }
        let reacted = PCExpansion::stack(&[u, v]);
        Ok(reacted.map2(state, |a, b| a - b))
    }

    fn galerkin_macro(
        &self,
        state: &PCExpansion<T>,
        micro: &PCExpansion<T>,
        _dist: &InputDistribution,
        _basis: &PCBasis,
        dt_macro: T,
    ) -> Result<PCExpansion<T>> {
        let cfg = self.config();
        let p = GSParams { du: cfg.du, dv: cfg.dv, ..GSParams::benchmark_mean() };
        let w = state.map2(micro, |a, b| a + b);
        let coeffs = w.coeffs.iter().map(|f| crate::models::gs_diffusion_step(f, &p, dt_macro)).collect::<Result<_>>()?;
        Ok(PCExpansion { coeffs })
    }
}

/// Expansion history of a polynomial-chaos run.
#[derive(Debug, Clone)]
pub struct PcRun<T> {
    pub times: Vec<T>,
    pub expansions: Vec<PCExpansion<T>>,
    pub moments: Vec<MomentEstimate<T>>,
    pub timing: TimingBreakdown,
}

impl<T: Scalar> PcRun<T> {
    pub fn final_expansion(&self) -> &PCExpansion<T> {
        self.expansions.last().expect("at least one retained time")
    }

    pub fn final_moments(&self) -> &MomentEstimate<T> {
        self.moments.last().expect("at least one retained time")
    }
}

fn estimate_from<T: Scalar>(e: &PCExpansion<T>) -> MomentEstimate<T> {
    let (mean, std) = moments_from_pc(e);
    MomentEstimate { mean, std, ci_mean: None, ci_std: None, confidence_level: DEFAULT_LEVEL, n_samples: 0 }
}

fn check_dims(dist: &InputDistribution, basis: &PCBasis) -> Result<()> {
    if dist.dim() != basis.dim {
        return Err(Error::BasisMismatch(format!("{} inputs but a {}-dimensional basis", dist.dim(), basis.dim)));
    }
    if basis.order == 0 {
        return Err(Error::BasisMismatch("order must be at least 1".into()));
    }
    Ok(())
}

fn drive<T, F>(initial: PCExpansion<T>, scales: &TimeScales<T>, retain: Retention, clock: &mut Clock, mut step: F) -> Result<PcRun<T>>
where
    T: Scalar,
    F: FnMut(&PCExpansion<T>, &mut Clock) -> Result<PCExpansion<T>>,
{
    let steps = scales.macro_steps();
    let mut times = Vec::new();
    let mut expansions = Vec::new();
    if retain == Retention::All {
        times.push(T::zero());
        expansions.push(initial.clone());
    }
    let mut state = initial;
    for s in 0..steps {
        state = step(&state, clock)?;
        let norm = state.max_abs();
        if !(norm <= BLOW_UP_NORM) {
            return Err(Error::BlowUp { step: s + 1, norm });
        }
        if retain == Retention::All || s + 1 == steps {
            times.push(scales.time_at(s + 1));
            expansions.push(state.clone());
        }
    }
    let moments = clock.overhead(|| expansions.iter().map(estimate_from).collect());
    Ok(PcRun { times, expansions, moments, timing: clock.breakdown() })
}

/// Fully intrusive run: both scales act on expansion coefficients.
pub fn galerkin_run<T, M>(
    model: &M,
    dist: &InputDistribution,
    scales: &TimeScales<T>,
    basis: &PCBasis,
    retain: Retention,
) -> Result<PcRun<T>>
where
    T: Scalar,
    M: GalerkinModel<T>,
{
    check_dims(dist, basis)?;
    let mut clock = Clock::default();
    let initial = PCExpansion::deterministic(model.initial_state(), basis);
    drive(initial, scales, retain, &mut clock, |state, clock| {
        let t0 = Instant::now();
        let micro = model.galerkin_micro(state, dist, basis, scales)?;
        clock.micro += t0.elapsed();
        let t1 = Instant::now();
        let next = model.galerkin_macro(state, &micro, dist, basis, scales.dt_macro())?;
        clock.macro_ += t1.elapsed();
        Ok(next)
    })
}

pub fn galerkin_run_1d<T: Scalar>(cfg: &ModelConfig1D<T>, dist: &InputDistribution, basis: &PCBasis) -> Result<PcRun<T>> {
    galerkin_run(&ReactionDiffusion1D::new(cfg.dx)?, dist, &cfg.scales, basis, Retention::All)
}

pub fn galerkin_run_gs<T: Scalar>(cfg: &GSConfig<T>, dist: &InputDistribution, basis: &PCBasis) -> Result<PcRun<T>> {
    galerkin_run(&GrayScott::new(*cfg), dist, &cfg.scales, basis, Retention::Final)
}

/// Intrusive micro scale, non-intrusive macro scale: each macro step runs the
/// deterministic macro model at every quadrature node and projects back.
pub fn coupled_pc_run<T, M>(
    model: &M,
    dist: &InputDistribution,
    scales: &TimeScales<T>,
    basis: &PCBasis,
    retain: Retention,
) -> Result<PcRun<T>>
where
    T: Scalar,
    M: GalerkinModel<T>,
{
    check_dims(dist, basis)?;
    let mut clock = Clock::default();
    let initial = PCExpansion::deterministic(model.initial_state(), basis);
    let node_inputs: Vec<Vec<T>> = basis.nodes.iter().map(|z| inputs_at(dist, z)).collect();
    drive(initial, scales, retain, &mut clock, |state, clock| {
        let t0 = Instant::now();
        let micro = model.galerkin_micro(state, dist, basis, scales)?;
        clock.micro += t0.elapsed();

        let runs: Vec<(Field<T>, Duration, Duration)> = basis
            .psi
            .par_iter()
            .zip(&node_inputs)
            .map(|(psi, xi)| {
                let t = Instant::now();
                let u = state.evaluate(psi);
                let du = micro.evaluate(psi);
                let t_eval = t.elapsed();
                let t1 = Instant::now();
                let next = MacroModel::advance(model, &u, &du, xi, scales.dt_macro())?;
                Ok((next, t1.elapsed(), t_eval))
            })
            .collect::<Result<_>>()?;

        let t2 = Instant::now();
        let layout = state.layout();
        let m = layout.len();
        let mut coeffs = Vec::with_capacity(basis.len());
        for i in 0..basis.len() {
            let mut acc = vec![CompensatedSum::<T>::new(); m];
            for ((next, _, _), (psi, &w)) in runs.iter().zip(basis.psi.iter().zip(&basis.weights)) {
                let c = T::lit(w * psi[i]);
                for (a, &v) in acc.iter_mut().zip(next.values()) {
                    a.add(c * v);
                }
            }
            coeffs.push(Field::from_parts(*layout.grid(), layout.components(), acc.iter().map(|a| a.value()).collect()));
        }
        for (_, t_macro, t_eval) in &runs {
            clock.macro_ += *t_macro;
            clock.overhead += *t_eval;
        }
        clock.overhead += t2.elapsed();
        Ok(PCExpansion { coeffs })
    })
}
