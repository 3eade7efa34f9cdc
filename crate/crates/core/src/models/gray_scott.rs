//! 2D Gray-Scott benchmark on `[0, 2.5]^2` with zero-flux boundaries.
//!
//! State fields carry two components, `u` then `v`. The micro model integrates the
//! pointwise reaction terms, the macro model applies diffusion.

use std::f64::consts::PI;

use crate::coupling::{MacroModel, MicroModel, MultiscaleModel, TimeScales};
use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::scalar::Scalar;

pub const DOMAIN_SIDE: f64 = 2.5;
pub const MEAN_FEED: f64 = 0.0385;
pub const MEAN_KILL: f64 = 0.052;
pub const DIFFUSION_U: f64 = 2e-5;
pub const DIFFUSION_V: f64 = 1e-5;
pub const RELATIVE_UNCERTAINTY: f64 = 0.01;
pub const N_MICRO: usize = 3;

const CFL_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GSParams<T> {
    pub feed: T,
    pub kill: T,
    pub du: T,
    pub dv: T,
}

impl<T: Scalar> GSParams<T> {
    pub fn new(feed: T, kill: T, du: T, dv: T) -> Result<Self> {
        let ok = |x: T| x > T::zero() && x.is_finite();
        if !(ok(feed) && ok(kill) && ok(du) && ok(dv)) {
            return Err(Error::Model(format!("Gray-Scott parameters must be positive: F={feed}, k={kill}, Du={du}, Dv={dv}")));
        }
        Ok(Self { feed, kill, du, dv })
    }

    pub fn benchmark_mean() -> Self {
        Self { feed: T::lit(MEAN_FEED), kill: T::lit(MEAN_KILL), du: T::lit(DIFFUSION_U), dv: T::lit(DIFFUSION_V) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GSConfig<T> {
    pub grid: Grid<T>,
    pub scales: TimeScales<T>,
    pub du: T,
    pub dv: T,
    /// Upper bound on the reaction substep length.
    pub reaction_dt_max: T,
}

impl<T: Scalar> GSConfig<T> {
    pub fn new(nx: usize, ny: usize, dt_macro: T, t_end: T, n_micro: usize) -> Result<Self> {
        let grid = Grid::square(T::lit(DOMAIN_SIDE), nx, ny)?;
        let scales = TimeScales::from_macro(dt_macro, n_micro, t_end)?;
        let cfg = Self {
            grid,
            scales,
            du: T::lit(DIFFUSION_U),
            dv: T::lit(DIFFUSION_V),
            reaction_dt_max: T::lit(1.0),
        };
        cfg.check_cfl()?;
        if scales.dt_micro() > cfg.reaction_dt_max {
            return Err(Error::ReactionStep { value: scales.dt_micro().as_f64(), limit: cfg.reaction_dt_max.as_f64() });
        }
        Ok(cfg)
    }

    /// Reduced-cost configuration: 64x64 grid, `dt_macro = 1.5`, 100 macro steps.
    pub fn desk() -> Result<Self> {
        Self::new(64, 64, T::lit(1.5), T::lit(150.0), N_MICRO)
    }

    fn check_cfl(&self) -> Result<()> {
        let cfl = cfl_number(&self.grid, self.du.max(self.dv), self.scales.dt_macro());
        if cfl > CFL_LIMIT {
            return Err(Error::Cfl { cfl, limit: CFL_LIMIT });
        }
        Ok(())
    }
}

fn cfl_number<T: Scalar>(grid: &Grid<T>, d: T, dt: T) -> f64 {
    match *grid {
        Grid::Plane { dx, dy, .. } => (d * dt * (T::one() / (dx * dx) + T::one() / (dy * dy))).as_f64(),
        Grid::Line { dx, .. } => (d * dt / (dx * dx)).as_f64(),
    }
}

/// Initial `(u, v)` at a point.
pub fn gs_initial_value<T: Scalar>(x: T, y: T) -> (T, T) {
    let (lo, hi) = (T::lit(0.75), T::lit(1.75));
    if x >= lo && x <= hi && y >= lo && y <= hi {
        let four_pi = T::lit(4.0 * PI);
        let sx = (four_pi * x).sin();
        let sy = (four_pi * y).sin();
        let v = T::lit(0.25) * sx * sx * sy * sy;
        (T::one() - T::lit(2.0) * v, v)
    } else {
        (T::zero(), T::zero())
    }
}

pub fn gs_init<T: Scalar>(grid: Grid<T>) -> Field<T> {
    Field::from_fn(grid, 2, |c, x, y| {
        let (u, v) = gs_initial_value(x, y);
        if c == 0 {
            u
        } else {
            v
        }
    })
}

/// Explicit 5-point Laplacian step for both species with zero-flux boundaries
/// (ghost cells mirror the boundary cell across the face).
pub fn gs_diffusion_step<T: Scalar>(state: &Field<T>, p: &GSParams<T>, dt: T) -> Result<Field<T>> {
    let Grid::Plane { nx, ny, dx, dy } = *state.grid() else {
        return Err(Error::Model("Gray-Scott diffusion needs a plane grid".into()));
    };
    if state.components() != 2 {
        return Err(Error::LengthMismatch { what: "Gray-Scott components", expected: 2, given: state.components() });
    }
    let cfl = cfl_number(state.grid(), p.du.max(p.dv), dt);
    if cfl > CFL_LIMIT || !cfl.is_finite() {
        return Err(Error::Cfl { cfl, limit: CFL_LIMIT });
    }
    let mut out = Field::zeros(*state.grid(), 2);
    let two = T::lit(2.0);
    for (c, diff) in [p.du, p.dv].into_iter().enumerate() {
        let rx = diff * dt / (dx * dx);
        let ry = diff * dt / (dy * dy);
        let u = state.component(c);
        let o = out.component_mut(c);
        for j in 0..ny {
            let row = j * nx;
            let south = if j == 0 { row } else { row - nx };
            let north = if j + 1 == ny { row } else { row + nx };
            for i in 0..nx {
                let here = u[row + i];
                let west = u[row + i.saturating_sub(1)];
                let east = u[row + (i + 1).min(nx - 1)];
                let s = u[south + i];
                let n = u[north + i];
                o[row + i] = here + (rx * (west + east - two * here) + ry * (s + n - two * here));
            }
        }
    }
    Ok(out)
}

/// `n_micro` explicit Euler substeps of the pointwise reaction terms.
pub fn gs_reaction_micro<T: Scalar>(
    state: &Field<T>,
    p: &GSParams<T>,
    dt_micro: T,
    n_micro: usize,
    dt_max: T,
) -> Result<Field<T>> {
    if dt_micro > dt_max {
        return Err(Error::ReactionStep { value: dt_micro.as_f64(), limit: dt_max.as_f64() });
    }
    let n = state.grid().points();
    let mut out = state.clone();
    let (u_part, v_part) = out.values_mut().split_at_mut(n);
    let removal = p.feed + p.kill;
    for (point, (u, v)) in u_part.iter_mut().zip(v_part.iter_mut()).enumerate() {
        let (mut a, mut b) = (*u, *v);
        for _ in 0..n_micro {
            let uvv = a * b * b;
            let da = p.feed * (T::one() - a) - uvv;
            let db = uvv - removal * b;
            a += dt_micro * da;
            b += dt_micro * db;
        }
        if !a.is_finite() {
            return Err(Error::NonFiniteReaction { point, component: 0 });
        }
        if !b.is_finite() {
            return Err(Error::NonFiniteReaction { point, component: 1 });
        }
        *u = a;
        *v = b;
    }
    Ok(out)
}

/// Case-2 multiscale model. Inputs are `[F, k]`; `Du`, `Dv` are fixed.
#[derive(Debug, Clone)]
pub struct GrayScott<T> {
    cfg: GSConfig<T>,
}

impl<T: Scalar> GrayScott<T> {
    pub fn new(cfg: GSConfig<T>) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &GSConfig<T> {
        &self.cfg
    }

    pub fn params(&self, xi: &[T]) -> Result<GSParams<T>> {
        if xi.len() != 2 {
            return Err(Error::LengthMismatch { what: "case-2 inputs", expected: 2, given: xi.len() });
        }
        GSParams::new(xi[0], xi[1], self.cfg.du, self.cfg.dv)
    }
}

impl<T: Scalar> MicroModel<T> for GrayScott<T> {
    fn advance(&self, state: &Field<T>, params: &[T], dt_micro: T, n_micro: usize) -> Result<Field<T>> {
        let p = self.params(params)?;
        let reacted = gs_reaction_micro(state, &p, dt_micro, n_micro, self.cfg.reaction_dt_max)?;
        let values = reacted.values().iter().zip(state.values()).map(|(&r, &u)| r - u).collect();
        Ok(Field::from_parts(*state.grid(), 2, values))
    }
}

impl<T: Scalar> MacroModel<T> for GrayScott<T> {
    fn advance(&self, state: &Field<T>, micro: &Field<T>, params: &[T], dt_macro: T) -> Result<Field<T>> {
        let p = self.params(params)?;
        gs_diffusion_step(&state.plus(micro)?, &p, dt_macro)
    }
}

impl<T: Scalar> MultiscaleModel<T> for GrayScott<T> {
    fn initial_state(&self) -> Field<T> {
        gs_init(self.cfg.grid)
    }

    fn input_dim(&self) -> usize {
        2
    }
}

/// Transposes a square two-component field (`x <-> y`).
pub fn transpose<T: Scalar>(f: &Field<T>) -> Field<T> {
    let Grid::Plane { nx, ny, .. } = *f.grid() else {
        return f.clone();
    };
    assert_eq!(nx, ny, "transpose needs a square grid");
    let mut out = f.clone();
    for c in 0..f.components() {
        let src = f.component(c);
        let dst = out.component_mut(c);
        for j in 0..ny {
            for i in 0..nx {
                dst[i * nx + j] = src[j * nx + i];
            }
        }
    }
    out
}
