//! 1D periodic reaction-diffusion benchmark: slow diffusion on the macro scale,
//! fast linear reaction `k u` on the micro scale.

use std::f64::consts::PI;

use crate::coupling::{MacroModel, MicroModel, MultiscaleModel, TimeScales};
use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::scalar::Scalar;

/// Mean diffusion coefficient of the benchmark.
pub const MEAN_DIFFUSION: f64 = 0.405;
/// Relative half-width of both uniform inputs.
pub const RELATIVE_UNCERTAINTY: f64 = 0.1;
pub const DEFAULT_DX: f64 = 1e-2;
pub const DEFAULT_MACRO_STEPS: usize = 20;

const CFL_LIMIT: f64 = 0.5;

/// Mean reaction rate, chosen so the micro model is `n_micro` times faster than diffusion
/// on the grid scale.
pub fn mean_reaction(n_micro: usize, dx: f64) -> f64 {
    n_micro as f64 * MEAN_DIFFUSION / (dx * dx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params1D<T> {
    pub d: T,
    pub k: T,
}

impl<T: Scalar> Params1D<T> {
    /// Reads `(d, k)` from the uncertain input vector.
    pub fn from_inputs(xi: &[T]) -> Result<Self> {
        if xi.len() != 2 {
            return Err(Error::LengthMismatch { what: "case-1 inputs", expected: 2, given: xi.len() });
        }
        let p = Self { d: xi[0], k: xi[1] };
        if !(p.d > T::zero()) || !p.k.is_finite() {
            return Err(Error::Model(format!("need d > 0 and finite k, got d={}, k={}", p.d, p.k)));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig1D<T> {
    pub dx: T,
    pub scales: TimeScales<T>,
}

impl<T: Scalar> ModelConfig1D<T> {
    /// Validates the diffusion CFL number for the largest diffusivity in use.
    pub fn new(dx: T, scales: TimeScales<T>, d_max: T) -> Result<Self> {
        let cfl = (d_max * scales.dt_macro() / (dx * dx)).as_f64();
        if cfl > CFL_LIMIT {
            return Err(Error::Cfl { cfl, limit: CFL_LIMIT });
        }
        Ok(Self { dx, scales })
    }

    /// Benchmark defaults: `dx = 0.01`, 20 macro steps with `E[k] * t_end = 1`.
    pub fn benchmark(n_micro: usize) -> Result<Self> {
        let k_mean = mean_reaction(n_micro, DEFAULT_DX);
        let dt_macro = 1.0 / (DEFAULT_MACRO_STEPS as f64 * k_mean);
        let scales = TimeScales::from_macro(
            T::lit(dt_macro),
            n_micro,
            T::lit(dt_macro * DEFAULT_MACRO_STEPS as f64),
        )?;
        Self::new(T::lit(DEFAULT_DX), scales, T::lit(MEAN_DIFFUSION * (1.0 + RELATIVE_UNCERTAINTY)))
    }

    pub fn grid(&self) -> Result<Grid<T>> {
        Grid::periodic_unit(self.dx, T::one())
    }
}

/// `u(x, 0) = sin(pi (4x - 1/2)) + 1`.
pub fn initial_value_1d<T: Scalar>(x: T) -> T {
    let pi = T::lit(PI);
    (pi * (T::lit(4.0) * x - T::lit(0.5))).sin() + T::one()
}

pub fn init_1d<T: Scalar>(grid: Grid<T>) -> Field<T> {
    Field::from_fn(grid, 1, |_, x, _| initial_value_1d(x))
}

/// Explicit centred diffusion step with periodic wraparound, applied per component.
pub fn diffusion_step_1d<T: Scalar>(state: &Field<T>, d: T, dt: T) -> Result<Field<T>> {
    let Grid::Line { n, dx } = *state.grid() else {
        return Err(Error::Model("1D diffusion needs a line grid".into()));
    };
    let r = d * dt / (dx * dx);
    if r.as_f64() > CFL_LIMIT || !r.is_finite() {
        return Err(Error::Cfl { cfl: r.as_f64(), limit: CFL_LIMIT });
    }
    let two = T::lit(2.0);
    let mut out = Field::zeros(*state.grid(), state.components());
    for c in 0..state.components() {
        let u = state.component(c);
        let o = out.component_mut(c);
        for i in 0..n {
            let left = u[(i + n - 1) % n];
            let right = u[(i + 1) % n];
            o[i] = u[i] + r * (left + right - two * u[i]);
        }
    }
    Ok(out)
}

/// `n_micro` explicit Euler substeps of `du/dt = k u`.
pub fn reaction_micro_1d<T: Scalar>(state: &Field<T>, k: T, dt_micro: T, n_micro: usize) -> Result<Field<T>> {
    let step = k * dt_micro;
    if !(step.abs() < T::one()) {
        return Err(Error::ReactionStep { value: step.abs().as_f64(), limit: 1.0 });
    }
    let factor = T::one() + step;
    let mut out = state.clone();
    for _ in 0..n_micro {
        for v in out.values_mut() {
            *v *= factor;
        }
    }
    Ok(out)
}

/// Continuum solution for the benchmark initial condition:
/// `e^{kt} + e^{(k - 16 pi^2 d) t} sin(4 pi x - pi/2)`.
pub fn analytic_solution_1d(x: f64, t: f64, p: Params1D<f64>) -> f64 {
    let decay = 16.0 * PI * PI * p.d;
    (p.k * t).exp() + ((p.k - decay) * t).exp() * (4.0 * PI * x - 0.5 * PI).sin()
}

/// Case-1 multiscale model. Inputs are `[d, k]`.
///
/// The micro output is the reaction increment `R(u) - u`; the macro model diffuses
/// the reacted state `u + increment`.
#[derive(Debug, Clone)]
pub struct ReactionDiffusion1D<T> {
    grid: Grid<T>,
}

impl<T: Scalar> ReactionDiffusion1D<T> {
    pub fn new(dx: T) -> Result<Self> {
        Ok(Self { grid: Grid::periodic_unit(dx, T::one())? })
    }

    pub fn grid(&self) -> Grid<T> {
        self.grid
    }
}

impl<T: Scalar> MicroModel<T> for ReactionDiffusion1D<T> {
    fn advance(&self, state: &Field<T>, params: &[T], dt_micro: T, n_micro: usize) -> Result<Field<T>> {
        let p = Params1D::from_inputs(params)?;
        let reacted = reaction_micro_1d(state, p.k, dt_micro, n_micro)?;
        let values = reacted.values().iter().zip(state.values()).map(|(&r, &u)| r - u).collect();
        Ok(Field::from_parts(*state.grid(), state.components(), values))
    }
}

impl<T: Scalar> MacroModel<T> for ReactionDiffusion1D<T> {
    fn advance(&self, state: &Field<T>, micro: &Field<T>, params: &[T], dt_macro: T) -> Result<Field<T>> {
        let p = Params1D::from_inputs(params)?;
        diffusion_step_1d(&state.plus(micro)?, p.d, dt_macro)
    }
}

impl<T: Scalar> MultiscaleModel<T> for ReactionDiffusion1D<T> {
    fn initial_state(&self) -> Field<T> {
        init_1d(self.grid)
    }

    fn input_dim(&self) -> usize {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::run_coupled;

    fn grid() -> Grid<f64> {
        Grid::periodic_unit(0.01, 1.0).unwrap()
    }

    #[test]
    fn initial_condition_values() {
        assert!((initial_value_1d(0.125f64) - 1.0).abs() < 1e-15);
        assert!(initial_value_1d(0.0f64).abs() < 1e-15);
        let u = init_1d(grid());
        let (min_i, min) = u.values().iter().enumerate().fold((0, f64::MAX), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
        let (max_i, max) = u.values().iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        assert!(min.abs() < 1e-14 && (max - 2.0).abs() < 1e-14);
        assert_eq!((min_i, max_i), (0, 25));
    }

    #[test]
    fn uniform_field_is_unchanged_by_diffusion() {
        let u = Field::from_fn(grid(), 1, |_, _, _| 3.5);
        let out = diffusion_step_1d(&u, 0.4, 1e-5).unwrap();
        assert_eq!(out, u);
    }

    #[test]
    fn diffusion_scales_a_fourier_mode_by_its_symbol() {
        let g = grid();
        let (d, dt, dx) = (0.405, 1e-5, 0.01);
        for j in [1usize, 2, 7, 20] {
            let u = Field::from_fn(g, 1, |_, x, _| (2.0 * PI * j as f64 * x).cos());
            let out = diffusion_step_1d(&u, d, dt).unwrap();
            let s = (PI * j as f64 * dx).sin();
            let symbol = 1.0 - 4.0 * d * dt / (dx * dx) * s * s;
            for (o, i) in out.values().iter().zip(u.values()) {
                assert!((o - symbol * i).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn diffusion_rejects_cfl_violation() {
        let u = init_1d(grid());
        let err = diffusion_step_1d(&u, 0.405, 2e-4).unwrap_err();
        assert!(matches!(err, Error::Cfl { cfl, .. } if (cfl - 0.81).abs() < 1e-12));
    }

    #[test]
    fn reaction_examples() {
        let u = Field::from_fn(grid(), 1, |_, _, _| 1.0);
        assert_eq!(reaction_micro_1d(&u, 0.0, 0.1, 5).unwrap(), u);
        let two = reaction_micro_1d(&u, 1.0, 0.1, 2).unwrap();
        assert!((two.values()[0] - 1.21).abs() < 1e-15);
        let hundred = reaction_micro_1d(&u, 0.0405, 1.0, 100).unwrap();
        let oracle = 1.0405f64.powi(100);
        assert!((hundred.values()[3] - oracle).abs() / oracle < 1e-13);
        assert!(reaction_micro_1d(&u, 20.0, 0.1, 1).is_err());
    }

    #[test]
    fn analytic_solution_limits() {
        let p = Params1D { d: 0.4, k: 3.0 };
        for x in [0.0, 0.1, 0.37, 0.9] {
            assert!((analytic_solution_1d(x, 0.0, p) - initial_value_1d(x)).abs() < 1e-14);
        }
        let p0 = Params1D { d: 0.0, k: 2.0 };
        assert!((analytic_solution_1d(0.125, 0.7, p0) - (1.4f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn benchmark_config_matches_scale_separation() {
        let cfg = ModelConfig1D::<f64>::benchmark(100).unwrap();
        assert_eq!(cfg.scales.n_micro(), 100);
        assert_eq!(cfg.scales.macro_steps(), 20);
        let k = mean_reaction(100, 0.01);
        assert!((k - 405_000.0).abs() < 1e-6);
        assert!((k * cfg.scales.t_end() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_micro_output_gives_pure_diffusion() {
        let model = ReactionDiffusion1D::new(0.01).unwrap();
        let cfg = ModelConfig1D::<f64>::benchmark(100).unwrap();
        let init = model.initial_state();
        let zeros = vec![Field::zeros(model.grid(), 1); cfg.scales.macro_steps()];
        let xi = [0.405, 405_000.0];
        let run = crate::coupling::run_coupled_with_injected_micro(&model, &zeros, &xi, &cfg.scales, &init, Default::default())
            .unwrap();
        let mut u = init.clone();
        for _ in 0..cfg.scales.macro_steps() {
            u = diffusion_step_1d(&u, 0.405, cfg.scales.dt_macro()).unwrap();
        }
        assert_eq!(run.trajectory.final_state(), &u);
    }

    #[test]
    fn coupled_error_is_first_order_in_dt() {
        let model = ReactionDiffusion1D::<f64>::new(0.01).unwrap();
        let p = Params1D { d: 0.405, k: 405_000.0 };
        let t_end = 2.0 / p.k;
        let mut errors = Vec::new();
        for steps in [10usize, 20, 40] {
            let scales = TimeScales::from_macro(t_end / steps as f64, 100, t_end).unwrap();
            let traj = run_coupled(&model, &model, &[p.d, p.k], &scales, &model.initial_state()).unwrap();
            let u = traj.final_state();
            let exact: Vec<f64> = (0..u.len()).map(|i| analytic_solution_1d(i as f64 * 0.01, t_end, p)).collect();
            let scale = exact.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            let err = u.values().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            errors.push(err / scale);
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.8..2.2).contains(&ratio), "refinement ratio {ratio} ({errors:?})");
        }
    }
}
