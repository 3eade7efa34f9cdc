//! Black-box Monte Carlo: one full coupled run per input draw.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{run_coupled_with, to_f64, MultiscaleModel, Retention, RunOptions, TimeScales};
use crate::error::Result;
use crate::field::Field;
use crate::sampling::{draw_samples, InputDistribution, SampleSet};
use crate::scalar::Scalar;
use crate::stats::{estimate_moments, estimate_moments_with_ci, BootstrapConfig, MomentEstimate};
use crate::timing::{Clock, TimingBreakdown};

/// Options shared by every sampling-based method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpOptions {
    /// Which macro times get moment estimates.
    pub retain: Retention,
    /// Bootstrap settings for the intervals at the final time.
    pub bootstrap: BootstrapConfig,
}

impl Default for UpOptions {
    fn default() -> Self {
        Self { retain: Retention::All, bootstrap: BootstrapConfig::default() }
    }
}

impl UpOptions {
    /// Bootstrap seed follows the sampling seed unless set explicitly.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.bootstrap.seed = seed;
        self
    }
}

/// Moments at the retained macro times; the last entry carries bootstrap intervals.
#[derive(Debug, Clone)]
pub struct UpResult<T> {
    pub times: Vec<T>,
    pub moments: Vec<MomentEstimate<T>>,
    pub timing: TimingBreakdown,
    pub samples: SampleSet<T>,
}

impl<T: Scalar> UpResult<T> {
    pub fn final_moments(&self) -> &MomentEstimate<T> {
        self.moments.last().expect("at least one retained time")
    }
}

/// Moments for each retained time, with intervals only on the last.
///
/// `states[s][k]` is the state of sample `s` at retained time `k`.
pub fn moments_over_time<T: Scalar>(
    states: &[Vec<Field<T>>],
    bootstrap: &BootstrapConfig,
) -> Result<Vec<MomentEstimate<T>>> {
    let times = states.first().map_or(0, |s| s.len());
    (0..times)
        .map(|k| {
            let at: Vec<&Field<T>> = states.iter().map(|s| &s[k]).collect();
            if k + 1 == times {
                estimate_moments_with_ci(&at, bootstrap)
            } else {
                estimate_moments(&at)
            }
        })
        .collect()
}

/// Runs `n` independent coupled simulations and estimates pointwise moments.
pub fn run_mc<T, M>(
    model: &M,
    dist: &InputDistribution,
    scales: &TimeScales<T>,
    n: usize,
    seed: u64,
    opts: &UpOptions,
) -> Result<UpResult<T>>
where
    T: Scalar,
    M: MultiscaleModel<T>,
{
    let samples = draw_samples::<T>(dist, n, seed);
    let initial = model.initial_state();
    let run_opts = RunOptions { retain: opts.retain, record_micro: false };
    let runs: Vec<_> = samples
        .inputs
        .par_iter()
        .enumerate()
        .map(|(j, xi)| {
            let t = Instant::now();
            let run = run_coupled_with(model, model, xi, scales, &initial, run_opts)
                .map_err(|e| e.in_sample(j, &to_f64(xi)))?;
            let mut clock = Clock::default();
            clock.close_sample(t.elapsed(), run.micro_time, run.macro_time);
            Ok((run.trajectory, clock))
        })
        .collect::<Result<_>>()?;

    let mut clock = Clock::default();
    let mut times = Vec::new();
    let mut states = Vec::with_capacity(n);
    for (traj, c) in runs {
        clock.merge(&c);
        times = traj.times;
        states.push(traj.states);
    }
    let moments = clock.overhead(|| moments_over_time(&states, &opts.bootstrap))?;
    Ok(UpResult { times, moments, timing: clock.breakdown(), samples })
}
