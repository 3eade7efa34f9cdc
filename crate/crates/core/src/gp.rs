//! Gaussian-process metamodel of the micro model.
//!
//! One squared-exponential kernel with per-dimension lengthscales is shared by
//! every output component and every macro step. Hyperparameters maximise the
//! log marginal likelihood summed over all outputs, which only needs the
//! `N_meta x N_meta` matrix `S = sum_o y_o y_o^T`.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{run_coupled_with, run_with_micro_source, to_f64, MultiscaleModel, Retention, RunOptions, TimeScales};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mc::{moments_over_time, UpOptions, UpResult};
use crate::sampling::{draw_samples, InputDistribution};
use crate::scalar::Scalar;
use crate::simc::{select_subsample, Selection};
use crate::timing::Clock;

const MAX_NUGGET: f64 = 1e-4;
const LOG_LENGTH_RANGE: (f64, f64) = (-4.6, 4.6);
const LOG_SIGNAL_RANGE: (f64, f64) = (-9.2, 9.2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GPConfig {
    pub n_meta: usize,
    pub nugget: f64,
    pub multistarts: usize,
    pub max_evals: usize,
    /// Centre each output at its training mean and scale each output set to unit variance.
    pub standardize: bool,
    pub seed: u64,
    /// Skips the likelihood search when set.
    pub fixed: Option<Hyperparameters>,
}

impl Default for GPConfig {
    fn default() -> Self {
        Self { n_meta: 25, nugget: 1e-8, multistarts: 5, max_evals: 200, standardize: true, seed: 0, fixed: None }
    }
}

impl GPConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_meta < 4 {
            bad.push(format!("n_meta={} must be at least 4", self.n_meta));
        }
        if !(self.nugget > 0.0 && self.nugget <= MAX_NUGGET) {
            bad.push(format!("nugget={} must lie in (0, {MAX_NUGGET}]", self.nugget));
        }
        if self.multistarts == 0 || self.max_evals == 0 {
            bad.push("multistarts and max_evals must be positive".into());
        }
        if let Some(h) = &self.fixed {
            if h.lengthscales.iter().any(|&l| !(l > 0.0)) || !(h.signal_variance >= 0.0) {
                bad.push("fixed lengthscales must be positive and signal variance non-negative".into());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::GpConfig(bad.join("; ")))
        }
    }
}

fn sq_exp(a: &[f64], b: &[f64], h: &Hyperparameters) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(&h.lengthscales).map(|((&x, &y), &l)| ((x - y) / l).powi(2)).sum();
    h.signal_variance * (-0.5 * r2).exp()
}

fn kernel_matrix(x: &[Vec<f64>], h: &Hyperparameters, nugget: f64) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x.len(), |i, j| sq_exp(&x[i], &x[j], h) + if i == j { nugget } else { 0.0 })
}

fn factor(x: &[Vec<f64>], h: &Hyperparameters, nugget: f64) -> Option<Cholesky<f64, Dyn>> {
    let k = kernel_matrix(x, h, nugget);
    if !k.iter().all(|v| v.is_finite()) {
        return None;
    }
    Cholesky::new(k)
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum()
}

/// `-1/2 tr(K^-1 S) - M/2 log|K|`, dropping the constant.
fn pooled_lml(x: &[Vec<f64>], s: &DMatrix<f64>, outputs: f64, h: &Hyperparameters, nugget: f64) -> f64 {
    let Some(chol) = factor(x, h, nugget) else {
        return f64::NEG_INFINITY;
    };
    let trace = chol.solve(s).trace();
    let v = -0.5 * trace - 0.5 * outputs * log_det(&chol);
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

fn to_hyper(theta: &[f64]) -> Hyperparameters {
    let d = theta.len() - 1;
    Hyperparameters { lengthscales: theta[..d].iter().map(|t| t.exp()).collect(), signal_variance: theta[d].exp() }
}

fn clamp_theta(theta: &mut [f64]) {
    let d = theta.len() - 1;
    for t in &mut theta[..d] {
        *t = t.clamp(LOG_LENGTH_RANGE.0, LOG_LENGTH_RANGE.1);
    }
    theta[d] = theta[d].clamp(LOG_SIGNAL_RANGE.0, LOG_SIGNAL_RANGE.1);
}

/// Result of the hyperparameter search: best point plus the objective at every start.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub best: Hyperparameters,
    pub best_lml: f64,
    pub start_lml: Vec<f64>,
}

/// Coordinate search in log space from several deterministic starts.
pub fn optimize_hyperparameters(x: &[Vec<f64>], s: &DMatrix<f64>, outputs: f64, cfg: &GPConfig) -> SearchTrace {
    let dim = x.first().map_or(0, |p| p.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut start_lml = Vec::with_capacity(cfg.multistarts);
    for start in 0..cfg.multistarts {
        let mut theta: Vec<f64> = if start == 0 {
            vec![0.0; dim + 1]
        } else {
            (0..=dim).map(|_| rng.random_range(-2.3..2.3)).collect()
        };
        clamp_theta(&mut theta);
        let mut f = pooled_lml(x, s, outputs, &to_hyper(&theta), cfg.nugget);
        start_lml.push(f);
        let mut evals = 1;
        let mut h = 1.0;
        while h > 1e-3 && evals < cfg.max_evals {
            let mut improved = false;
            for c in 0..=dim {
                for dir in [1.0, -1.0] {
                    if evals >= cfg.max_evals {
                        break;
                    }
                    let mut trial = theta.clone();
                    trial[c] += dir * h;
                    clamp_theta(&mut trial);
                    if trial == theta {
                        continue;
                    }
                    let ft = pooled_lml(x, s, outputs, &to_hyper(&trial), cfg.nugget);
                    evals += 1;
                    if ft > f {
                        theta = trial;
                        f = ft;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, theta));
        }
    }
    let (best_lml, theta) = best.expect("at least one start");
    SearchTrace { best: to_hyper(&theta), best_lml, start_lml }
}

/// Fitted GP over one or more sets of outputs observed at the same inputs.
#[derive(Debug, Clone)]
pub struct GPModel<T> {
    inputs: Vec<Vec<f64>>,
    hyper: Hyperparameters,
    nugget: f64,
    chol: Cholesky<f64, Dyn>,
    prior_mean: Vec<Field<T>>,
    scale: Vec<T>,
    /// `centred[set][i]` = training output minus prior mean.
    centred: Vec<Vec<Field<T>>>,
    lml: Option<SearchTrace>,
}

/// Serializable form of a fitted model; the factorization is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPArtifact<T> {
    pub inputs: Vec<Vec<f64>>,
    pub hyperparameters: Hyperparameters,
    pub nugget: f64,
    pub prior_mean: Vec<Field<T>>,
    pub scale: Vec<T>,
    pub centred: Vec<Vec<Field<T>>>,
}

impl<T: Scalar> GPModel<T> {
    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn sets(&self) -> usize {
        self.centred.len()
    }

    pub fn search(&self) -> Option<&SearchTrace> {
        self.lml.as_ref()
    }

    pub fn to_artifact(&self) -> GPArtifact<T> {
        GPArtifact {
            inputs: self.inputs.clone(),
            hyperparameters: self.hyper.clone(),
            nugget: self.nugget,
            prior_mean: self.prior_mean.clone(),
            scale: self.scale.clone(),
            centred: self.centred.clone(),
        }
    }

    pub fn from_artifact(a: GPArtifact<T>) -> Result<Self> {
        let chol = factor(&a.inputs, &a.hyperparameters, a.nugget)
            .ok_or(Error::NotPositiveDefinite { nugget: a.nugget })?;
        Ok(Self {
            inputs: a.inputs,
            hyper: a.hyperparameters,
            nugget: a.nugget,
            chol,
            prior_mean: a.prior_mean,
            scale: a.scale,
            centred: a.centred,
            lml: None,
        })
    }

    fn cross(&self, xi: &[T]) -> DVector<f64> {
        let z: Vec<f64> = xi.iter().map(|v| v.as_f64()).collect();
        DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|x| sq_exp(x, &z, &self.hyper)))
    }

    /// Weights `c` with posterior mean `prior + sum_i c_i (y_i - prior)`, for any output set.
    pub fn mean_weights(&self, xi: &[T]) -> Vec<T> {
        self.chol.solve(&self.cross(xi)).iter().map(|&v| T::lit(v)).collect()
    }

    /// Posterior variance in units of the standardized targets.
    pub fn unit_variance(&self, xi: &[T]) -> f64 {
        let v = self.chol.l_dirty().solve_lower_triangular(&self.cross(xi)).expect("positive Cholesky diagonal");
        let vv = v.norm_squared();
        let var = self.hyper.signal_variance + self.nugget - vv;
        if var < -1e-12 {
            log::warn!("GP predictive variance {var:e} clamped to 0");
        }
        var.max(0.0)
    }

    pub fn mean_with_weights(&self, set: usize, weights: &[T]) -> Field<T> {
        let prior = &self.prior_mean[set];
        let mut acc = prior.values().to_vec();
        for (&c, f) in weights.iter().zip(&self.centred[set]) {
            for (a, &y) in acc.iter_mut().zip(f.values()) {
                *a += c * y;
            }
        }
        Field::from_parts(*prior.grid(), prior.components(), acc)
    }

    /// Posterior mean and pointwise predictive variance for output set `set`.
    pub fn predict_set(&self, set: usize, xi: &[T]) -> (Field<T>, Field<T>) {
        let mean = self.mean_with_weights(set, &self.mean_weights(xi));
        let s = self.scale[set];
        let var = T::lit(self.unit_variance(xi)) * s * s;
        let variance = Field::from_parts(*mean.grid(), mean.components(), vec![var; mean.len()]);
        (mean, variance)
    }
}

/// Posterior mean and variance of the first output set.
pub fn gp_predict<T: Scalar>(model: &GPModel<T>, xi: &[T]) -> (Field<T>, Field<T>) {
    model.predict_set(0, xi)
}

/// Fits a GP to one set of outputs.
pub fn fit_gp<T: Scalar, F: AsRef<Field<T>>>(inputs: &[Vec<T>], outputs: &[F], cfg: &GPConfig) -> Result<GPModel<T>> {
    let set: Vec<Field<T>> = outputs.iter().map(|f| f.as_ref().clone()).collect();
    fit_gp_sets(inputs, &[set], cfg)
}

/// Fits one GP to several output sets sharing inputs, kernel and hyperparameters.
pub fn fit_gp_sets<T: Scalar>(inputs: &[Vec<T>], sets: &[Vec<Field<T>>], cfg: &GPConfig) -> Result<GPModel<T>> {
    cfg.validate()?;
    let n = inputs.len();
    if n == 0 || sets.is_empty() {
        return Err(Error::TooFewSamples { what: "GP training", needed: 1, given: n });
    }
    for i in 0..n {
        for j in i + 1..n {
            if inputs[i] == inputs[j] {
                return Err(Error::DuplicateCenters { first: i, second: j });
            }
        }
    }
    let first = &sets[0][0];
    for set in sets {
        if set.len() != n {
            return Err(Error::LengthMismatch { what: "GP training outputs", expected: n, given: set.len() });
        }
        for f in set {
            if !f.same_layout(first) {
                return Err(Error::LengthMismatch { what: "GP output field", expected: first.len(), given: f.len() });
            }
        }
    }
    let x: Vec<Vec<f64>> = inputs.iter().map(|p| p.iter().map(|v| v.as_f64()).collect()).collect();

    let mut prior_mean = Vec::with_capacity(sets.len());
    let mut scale = Vec::with_capacity(sets.len());
    let mut centred = Vec::with_capacity(sets.len());
    let mut s = DMatrix::<f64>::zeros(n, n);
    for set in sets {
        let prior = if cfg.standardize {
            crate::stats::sample_mean(set)?
        } else {
            Field::zeros(*first.grid(), first.components())
        };
        let c: Vec<Field<T>> = set
            .iter()
            .map(|f| {
                let v = f.values().iter().zip(prior.values()).map(|(&y, &m)| y - m).collect();
                Field::from_parts(*f.grid(), f.components(), v)
            })
            .collect();
        let mut sc = 1.0;
        if cfg.standardize {
            let ss: f64 = c.iter().flat_map(|f| f.values()).map(|v| v.as_f64().powi(2)).sum();
            let rms = (ss / (n * first.len()) as f64).sqrt();
            if rms > 0.0 {
                sc = rms;
            }
        }
        let rows: Vec<Vec<f64>> = c.iter().map(|f| f.values().iter().map(|v| v.as_f64() / sc).collect()).collect();
        for i in 0..n {
            for j in i..n {
                let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                s[(i, j)] += d;
                if i != j {
                    s[(j, i)] += d;
                }
            }
        }
        prior_mean.push(prior);
        scale.push(T::lit(sc));
        centred.push(c);
    }

    let outputs = (sets.len() * first.len()) as f64;
    let dim = x[0].len();
    let constant = s.iter().all(|&v| v == 0.0);
    let (hyper, trace) = match (&cfg.fixed, constant) {
        (Some(h), _) => {
            if h.lengthscales.len() != dim {
                return Err(Error::GpConfig(format!("{} lengthscales for {dim} inputs", h.lengthscales.len())));
            }
            (h.clone(), None)
        }
        (None, true) => (Hyperparameters { lengthscales: vec![1.0; dim], signal_variance: 0.0 }, None),
        (None, false) => {
            let t = optimize_hyperparameters(&x, &s, outputs, cfg);
            (t.best.clone(), Some(t))
        }
    };

    let mut nugget = cfg.nugget;
    let chol = loop {
        if let Some(c) = factor(&x, &hyper, nugget) {
            break c;
        }
        if nugget * 10.0 > MAX_NUGGET * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite { nugget });
        }
        nugget *= 10.0;
    };
    Ok(GPModel { inputs: x, hyper, nugget, chol, prior_mean, scale, centred, lml: trace })
}

/// Training inputs on `[-1, 1]^dim`: a tensor grid when `n` is a perfect power, else maximin.
pub fn training_design(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 0 {
        return vec![Vec::new()];
    }
    let q = (n as f64).powf(1.0 / dim as f64).round() as usize;
    if q >= 2 && q.pow(dim as u32) == n {
        let nodes: Vec<f64> = (0..q).map(|i| -1.0 + 2.0 * i as f64 / (q - 1) as f64).collect();
        return (0..n)
            .map(|mut k| {
                (0..dim)
                    .map(|_| {
                        let v = nodes[k % q];
                        k /= q;
                        v
                    })
                    .collect()
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<Vec<f64>> = (0..50 * n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    let idx = select_subsample(&pool, n, Selection::Maximin).expect("pool larger than design");
    idx.into_iter().map(|i| pool[i].clone()).collect()
}

fn design_inputs<T: Scalar>(dist: &InputDistribution, unit: &[f64]) -> Vec<T> {
    let active = dist.active_dims();
    let mut xi: Vec<T> = dist.means();
    for (&d, &z) in active.iter().zip(unit) {
        xi[d] = dist.dims[d].from_unit(T::lit(z));
    }
    xi
}

#[derive(Debug, Clone)]
pub struct MetamodelResult<T> {
    pub estimate: UpResult<T>,
    pub model: GPModel<T>,
}

/// Trains a per-step GP of the micro output on `cfg.n_meta` coupled runs, then runs
/// `n`-sample Monte Carlo with the GP mean in place of the micro model.
pub fn run_metamodel_up<T, M>(
    model: &M,
    dist: &InputDistribution,
    scales: &TimeScales<T>,
    n: usize,
    seed: u64,
    cfg: &GPConfig,
    opts: &UpOptions,
) -> Result<MetamodelResult<T>>
where
    T: Scalar,
    M: MultiscaleModel<T>,
{
    cfg.validate()?;
    let mut clock = Clock::default();
    let active = dist.active_dims();
    let design = clock.overhead(|| training_design(active.len(), cfg.n_meta, cfg.seed));
    let initial = model.initial_state();
    let train_opts = RunOptions { retain: Retention::Final, record_micro: true };
    let runs: Vec<_> = design
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let xi = design_inputs::<T>(dist, z);
            let t = Instant::now();
            let run = run_coupled_with(model, model, &xi, scales, &initial, train_opts).map_err(|e| e.in_sample(i, &to_f64(&xi)))?;
            let mut c = Clock::default();
            c.close_sample(t.elapsed(), run.micro_time, run.macro_time);
            Ok((run.micro_outputs, c))
        })
        .collect::<Result<_>>()?;
    let steps = scales.macro_steps();
    let mut per_step: Vec<Vec<Field<T>>> = (0..steps).map(|_| Vec::with_capacity(design.len())).collect();
    for (outs, c) in runs {
        clock.merge(&c);
        for (s, f) in outs.into_iter().enumerate() {
            per_step[s].push(f);
        }
    }
    let train_inputs: Vec<Vec<T>> = design.iter().map(|z| z.iter().map(|&v| T::lit(v)).collect()).collect();
    let gp = clock.overhead(|| fit_gp_sets(&train_inputs, &per_step, cfg))?;
    drop(per_step);

    let samples = draw_samples::<T>(dist, n, seed);
    let run_opts = RunOptions { retain: opts.retain, record_micro: false };
    let results: Vec<_> = samples
        .inputs
        .par_iter()
        .enumerate()
        .map(|(j, xi)| {
            let t = Instant::now();
            let weights = gp.mean_weights(&dist.unit_coords(xi));
            let run = run_with_micro_source(model, xi, scales, &initial, run_opts, |step, _| {
                Ok(gp.mean_with_weights(step, &weights))
            })
            .map_err(|e| e.in_sample(j, &to_f64(xi)))?;
            // Surrogate lookups replace micro calls and count as overhead.
            let mut c = Clock::default();
            c.close_sample(t.elapsed(), std::time::Duration::ZERO, run.macro_time);
            Ok((run.trajectory, c))
        })
        .collect::<Result<_>>()?;
    let mut times = Vec::new();
    let mut states = Vec::with_capacity(n);
    for (traj, c) in results {
        clock.merge(&c);
        times = traj.times;
        states.push(traj.states);
    }
    let moments = clock.overhead(|| moments_over_time(&states, &opts.bootstrap))?;
    Ok(MetamodelResult { estimate: UpResult { times, moments, timing: clock.breakdown(), samples }, model: gp })
}
