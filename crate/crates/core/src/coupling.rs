//! Macro/micro execution contract and the coupled time loop.
//!
//! At every macro step the micro model receives the current macro state and
//! returns its output; the macro model then advances the state using that
//! output. The micro model always performs exactly `n_micro` substeps of
//! length `dt_micro`, with `dt_macro == n_micro * dt_micro`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Scalar;

const SCALE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScales<T> {
    dt_macro: T,
    dt_micro: T,
    n_micro: usize,
    t_end: T,
}

impl<T: Scalar> TimeScales<T> {
    pub fn new(dt_macro: T, dt_micro: T, n_micro: usize, t_end: T) -> Result<Self> {
        let bad = |msg: String| Err(Error::TimeScales(msg));
        if n_micro == 0 {
            return bad("n_micro must be positive".into());
        }
        if !(dt_macro > T::zero()) || !(dt_micro > T::zero()) {
            return bad(format!("time steps must be positive (dt_macro={dt_macro}, dt_micro={dt_micro})"));
        }
        if !t_end.is_finite() || t_end < dt_macro {
            return bad(format!("t_end={t_end} must be at least dt_macro={dt_macro}"));
        }
        let implied = T::from_usize_lossy(n_micro) * dt_micro;
        if ((implied - dt_macro).abs() / dt_macro).as_f64() > SCALE_RTOL {
            return bad(format!("dt_macro={dt_macro} differs from n_micro*dt_micro={implied}"));
        }
        Ok(Self { dt_macro, dt_micro, n_micro, t_end })
    }

    /// Derives `dt_micro = dt_macro / n_micro`.
    pub fn from_macro(dt_macro: T, n_micro: usize, t_end: T) -> Result<Self> {
        if n_micro == 0 {
            return Err(Error::TimeScales("n_micro must be positive".into()));
        }
        Self::new(dt_macro, dt_macro / T::from_usize_lossy(n_micro), n_micro, t_end)
    }

    pub fn dt_macro(&self) -> T {
        self.dt_macro
    }

    pub fn dt_micro(&self) -> T {
        self.dt_micro
    }

    pub fn n_micro(&self) -> usize {
        self.n_micro
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    /// Number of macro steps: the largest `s` with `s * dt_macro <= t_end`.
    pub fn macro_steps(&self) -> usize {
        let ratio = (self.t_end / self.dt_macro).as_f64();
        (ratio * (1.0 + 1e-9)).floor() as usize
    }

    pub fn time_at(&self, step: usize) -> T {
        T::from_usize_lossy(step) * self.dt_macro
    }
}

/// Stored history of a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Field<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> &Field<T> {
        self.states.last().expect("trajectory holds at least one state")
    }
}

/// Micro model map `(state, params, dt_micro, n_micro) -> output`. Must be pure.
pub trait MicroModel<T: Scalar>: Sync {
    fn advance(&self, state: &Field<T>, params: &[T], dt_micro: T, n_micro: usize) -> Result<Field<T>>;
}

/// Macro model map `(state, micro output, params, dt_macro) -> next state`. Must be pure.
pub trait MacroModel<T: Scalar>: Sync {
    fn advance(&self, state: &Field<T>, micro: &Field<T>, params: &[T], dt_macro: T) -> Result<Field<T>>;
}

/// A macro/micro pair together with its initial state.
pub trait MultiscaleModel<T: Scalar>: MacroModel<T> + MicroModel<T> {
    fn initial_state(&self) -> Field<T>;

    /// Number of uncertain inputs the model reads from its parameter vector.
    fn input_dim(&self) -> usize;
}

impl<T, F> MicroModel<T> for F
where
    T: Scalar,
    F: Fn(&Field<T>, &[T], T, usize) -> Result<Field<T>> + Sync,
{
    fn advance(&self, state: &Field<T>, params: &[T], dt_micro: T, n_micro: usize) -> Result<Field<T>> {
        self(state, params, dt_micro, n_micro)
    }
}

impl<T, F> MacroModel<T> for F
where
    T: Scalar,
    F: Fn(&Field<T>, &Field<T>, &[T], T) -> Result<Field<T>> + Sync,
{
    fn advance(&self, state: &Field<T>, micro: &Field<T>, params: &[T], dt_macro: T) -> Result<Field<T>> {
        self(state, micro, params, dt_macro)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retention {
    #[default]
    All,
    Final,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub retain: Retention,
    /// Keep the micro output of every macro step.
    pub record_micro: bool,
}

#[derive(Debug, Clone)]
pub struct CoupledRun<T> {
    pub trajectory: Trajectory<T>,
    pub micro_outputs: Vec<Field<T>>,
    pub micro_time: Duration,
    pub macro_time: Duration,
}

/// Runs the coupled loop with an arbitrary provider of micro outputs.
///
/// `micro(step, state)` is called once per macro step, before the macro update.
pub fn run_with_micro_source<T, M, S>(
    macro_model: &M,
    params: &[T],
    scales: &TimeScales<T>,
    initial: &Field<T>,
    opts: RunOptions,
    mut micro: S,
) -> Result<CoupledRun<T>>
where
    T: Scalar,
    M: MacroModel<T> + ?Sized,
    S: FnMut(usize, &Field<T>) -> Result<Field<T>>,
{
    if !initial.is_finite() {
        return Err(Error::NonFinite { step: 0, params: to_f64(params) });
    }
    let steps = scales.macro_steps();
    let mut times = Vec::with_capacity(if opts.retain == Retention::All { steps + 1 } else { 1 });
    let mut states = Vec::with_capacity(times.capacity());
    if opts.retain == Retention::All {
        times.push(T::zero());
        states.push(initial.clone());
    }
    let mut micro_outputs = Vec::with_capacity(if opts.record_micro { steps } else { 0 });
    let mut micro_time = Duration::ZERO;
    let mut macro_time = Duration::ZERO;

    let mut state = initial.clone();
    for step in 0..steps {
        let t0 = Instant::now();
        let out = micro(step, &state)?;
        micro_time += t0.elapsed();
        if !out.same_layout(&state) {
            return Err(Error::LengthMismatch { what: "micro output", expected: state.len(), given: out.len() });
        }
        if !out.is_finite() {
            return Err(Error::NonFinite { step: step + 1, params: to_f64(params) });
        }

        let t1 = Instant::now();
        let next = macro_model.advance(&state, &out, params, scales.dt_macro())?;
        macro_time += t1.elapsed();
        if !next.is_finite() {
            return Err(Error::NonFinite { step: step + 1, params: to_f64(params) });
        }
        if opts.record_micro {
            micro_outputs.push(out);
        }
        if opts.retain == Retention::All {
            times.push(scales.time_at(step + 1));
            states.push(next.clone());
        }
        state = next;
    }
    if opts.retain == Retention::Final {
        times.push(scales.time_at(steps));
        states.push(state);
    }
    Ok(CoupledRun { trajectory: Trajectory { times, states }, micro_outputs, micro_time, macro_time })
}

/// Runs the coupled model, calling the micro model once per macro step.
pub fn run_coupled_with<T, Ma, Mi>(
    macro_model: &Ma,
    micro_model: &Mi,
    params: &[T],
    scales: &TimeScales<T>,
    initial: &Field<T>,
    opts: RunOptions,
) -> Result<CoupledRun<T>>
where
    T: Scalar,
    Ma: MacroModel<T> + ?Sized,
    Mi: MicroModel<T> + ?Sized,
{
    run_with_micro_source(macro_model, params, scales, initial, opts, |_, state| {
        micro_model.advance(state, params, scales.dt_micro(), scales.n_micro())
    })
}

pub fn run_coupled<T, Ma, Mi>(
    macro_model: &Ma,
    micro_model: &Mi,
    params: &[T],
    scales: &TimeScales<T>,
    initial: &Field<T>,
) -> Result<Trajectory<T>>
where
    T: Scalar,
    Ma: MacroModel<T> + ?Sized,
    Mi: MicroModel<T> + ?Sized,
{
    run_coupled_with(macro_model, micro_model, params, scales, initial, RunOptions::default())
        .map(|r| r.trajectory)
}

/// Same loop as [`run_coupled`], with the micro call replaced by a lookup.
pub fn run_coupled_with_injected_micro<T, Ma>(
    macro_model: &Ma,
    micro_results: &[Field<T>],
    params: &[T],
    scales: &TimeScales<T>,
    initial: &Field<T>,
    opts: RunOptions,
) -> Result<CoupledRun<T>>
where
    T: Scalar,
    Ma: MacroModel<T> + ?Sized,
{
    let steps = scales.macro_steps();
    if micro_results.len() != steps {
        return Err(Error::LengthMismatch {
            what: "injected micro results",
            expected: steps,
            given: micro_results.len(),
        });
    }
    run_with_micro_source(macro_model, params, scales, initial, opts, |step, _| Ok(micro_results[step].clone()))
}

pub(crate) fn to_f64<T: Scalar>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.as_f64()).collect()
}
