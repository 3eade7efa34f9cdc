//! Semi-intrusive Monte Carlo.
//!
//! The micro model runs only for a subset of `N_mu` input draws. For the other
//! draws its output is interpolated over input space, step by step, and fed to the
//! macro model. A leave-one-out test estimates the error this introduces and
//! decides whether the interpolated estimate can be trusted.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{to_f64, MacroModel, MicroModel, MultiscaleModel, Retention, TimeScales};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mc::{UpOptions, UpResult};
use crate::rbf::{combine_columns, loo_coefficients, RbfSystem};
use crate::sampling::{draw_samples, InputDistribution};
use crate::scalar::{CompensatedSum, Scalar};
use crate::stats::{estimate_moments, estimate_moments_with_ci, BootstrapConfig, Interval, MomentEstimate};
use crate::timing::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    #[default]
    Maximin,
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n: usize,
    pub n_mu: usize,
    #[serde(default)]
    pub selection: Selection,
}

impl SamplingPlan {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.n_mu < 2 || self.n_mu > self.n {
            return Err(Error::Plan(format!("need 2 <= N_mu <= N, got N_mu={}, N={}", self.n_mu, self.n)));
        }
        if self.n_mu < input_dim + 2 {
            return Err(Error::Plan(format!("N_mu={} below input dimension + 2 = {}", self.n_mu, input_dim + 2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

/// Leave-one-out estimates of the interpolation error against the subset MC uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundReport<T> {
    /// Sample mean of `|u - u~|`.
    pub eps_mean_bound: Field<T>,
    /// Sample standard deviation of `|u - u~|`.
    pub eps_std_bound: Field<T>,
    pub ci_mean_bound: Interval<T>,
    pub ci_std_bound: Interval<T>,
    /// Bootstrap half-widths of the `N_mu`-sample mean and std estimates.
    pub mc_ci_halfwidth_mean: Field<T>,
    pub mc_ci_halfwidth_std: Field<T>,
    pub decision: Decision,
}

impl<T: Scalar> ErrorBoundReport<T> {
    /// Spatial means `(mean bound upper, std bound upper, MC mean half-width, MC std half-width)`.
    pub fn summary(&self) -> [f64; 4] {
        let m = |f: &Field<T>| f.values().iter().map(|v| v.as_f64()).sum::<f64>() / f.len() as f64;
        [m(&self.ci_mean_bound.upper), m(&self.ci_std_bound.upper), m(&self.mc_ci_halfwidth_mean), m(&self.mc_ci_halfwidth_std)]
    }
}

fn spatial_mean<T: Scalar>(f: &Field<T>) -> T {
    let mut s = CompensatedSum::new();
    f.values().iter().for_each(|&v| s.add(v));
    s.value() / T::from_usize_lossy(f.len())
}

/// Accept iff both bound upper endpoints are strictly below the MC half-widths, in spatial mean.
pub fn interpolation_test<T: Scalar>(report: &ErrorBoundReport<T>) -> Decision {
    let mean_ok = spatial_mean(&report.ci_mean_bound.upper) < spatial_mean(&report.mc_ci_halfwidth_mean);
    let std_ok = spatial_mean(&report.ci_std_bound.upper) < spatial_mean(&report.mc_ci_halfwidth_std);
    if mean_ok && std_ok {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Builds the error-bound report from the subset outputs `u` and their leave-one-out reruns `u_tilde`.
pub fn error_bounds<T: Scalar>(u: &[Field<T>], u_tilde: &[Field<T>], cfg: &BootstrapConfig) -> Result<ErrorBoundReport<T>> {
    let mc = estimate_moments_with_ci(u, cfg)?;
    bounds_against(u, u_tilde, mc.ci_mean.as_ref().expect("intervals requested"), mc.ci_std.as_ref().expect("intervals requested"), cfg)
}

fn bounds_against<T: Scalar>(
    u: &[Field<T>],
    u_tilde: &[Field<T>],
    mc_mean: &Interval<T>,
    mc_std: &Interval<T>,
    cfg: &BootstrapConfig,
) -> Result<ErrorBoundReport<T>> {
    if u.len() != u_tilde.len() {
        return Err(Error::LengthMismatch { what: "leave-one-out outputs", expected: u.len(), given: u_tilde.len() });
    }
    let mut diffs = Vec::with_capacity(u.len());
    for (a, b) in u.iter().zip(u_tilde) {
        if !a.same_layout(b) {
            return Err(Error::LengthMismatch { what: "leave-one-out field", expected: a.len(), given: b.len() });
        }
        let v = a.values().iter().zip(b.values()).map(|(&x, &y)| (x - y).abs()).collect();
        diffs.push(Field::from_parts(*a.grid(), a.components(), v));
    }
    let bounds = estimate_moments_with_ci(&diffs, cfg)?;
    let mut report = ErrorBoundReport {
        eps_mean_bound: bounds.mean,
        eps_std_bound: bounds.std,
        ci_mean_bound: bounds.ci_mean.expect("intervals requested"),
        ci_std_bound: bounds.ci_std.expect("intervals requested"),
        mc_ci_halfwidth_mean: mc_mean.half_width(),
        mc_ci_halfwidth_std: mc_std.half_width(),
        decision: Decision::Reject,
    };
    report.decision = interpolation_test(&report);
    Ok(report)
}

fn dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Chooses `n_mu` of the given points; indices are returned in ascending order.
///
/// Maximin starts from point 0 and repeatedly adds the point farthest from the chosen set.
pub fn select_subsample<T: Scalar>(points: &[Vec<T>], n_mu: usize, selection: Selection) -> Result<Vec<usize>> {
    let n = points.len();
    if n_mu > n {
        return Err(Error::Plan(format!("cannot select N_mu={n_mu} of N={n} samples")));
    }
    if n_mu == 0 {
        return Ok(Vec::new());
    }
    let mut chosen = match selection {
        Selection::First => (0..n_mu).collect(),
        Selection::Maximin => {
            let mut chosen = vec![0];
            let mut taken = vec![false; n];
            taken[0] = true;
            let mut nearest: Vec<T> = points.iter().map(|p| dist2(p, &points[0])).collect();
            while chosen.len() < n_mu {
                let mut best = None;
                for j in 0..n {
                    if !taken[j] && best.is_none_or(|b: usize| nearest[j] > nearest[b]) {
                        best = Some(j);
                    }
                }
                let b = best.expect("untaken point remains");
                taken[b] = true;
                chosen.push(b);
                for j in 0..n {
                    nearest[j] = nearest[j].min(dist2(&points[j], &points[b]));
                }
            }
            chosen
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Debug, Clone)]
pub struct SimcResult<T> {
    /// The estimate to use: interpolated if the test accepts, the subset MC otherwise.
    pub estimate: UpResult<T>,
    /// Final-time moments from the full interpolated sample set, whatever the decision.
    pub interpolated: MomentEstimate<T>,
    /// Final-time moments from the `N_mu` exact runs alone.
    pub subset_mc: MomentEstimate<T>,
    pub report: ErrorBoundReport<T>,
    pub subset: Vec<usize>,
    pub fallback: bool,
}

/// First occurrence of each distinct point, as positions into `points`.
fn distinct<T: Scalar>(points: &[&Vec<T>]) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !keep.iter().any(|&k| points[k] == *p) {
            keep.push(i);
        }
    }
    keep
}

struct Timed<T> {
    state: Field<T>,
    micro: Duration,
    macro_: Duration,
    other: Duration,
}

/// Semi-intrusive Monte Carlo with a leave-one-out interpolation test at the final time.
pub fn run_simc<T, M>(
    model: &M,
    dist: &InputDistribution,
    scales: &TimeScales<T>,
    plan: &SamplingPlan,
    seed: u64,
    opts: &UpOptions,
) -> Result<SimcResult<T>>
where
    T: Scalar,
    M: MultiscaleModel<T>,
{
    plan.validate(dist.dim())?;
    let mut clock = Clock::default();
    let samples = draw_samples::<T>(dist, plan.n, seed);
    let coords: Vec<Vec<T>> = samples.inputs.iter().map(|xi| dist.unit_coords(xi)).collect();

    let (subset, rest, centers, interp_weights, loo_weights) = clock.overhead(|| -> Result<_> {
        let subset = select_subsample(&coords, plan.n_mu, plan.selection)?;
        let rest: Vec<usize> = (0..plan.n).filter(|j| subset.binary_search(j).is_err()).collect();

        let sub_coords: Vec<&Vec<T>> = subset.iter().map(|&i| &coords[i]).collect();
        let centers = distinct(&sub_coords);
        let inputs: Vec<Vec<T>> = centers.iter().map(|&c| sub_coords[c].clone()).collect();
        let system = RbfSystem::new(&inputs)?;
        let interp_coeffs: Vec<Vec<T>> = rest.par_iter().map(|&j| system.coefficients(&coords[j])).collect();
        let interp_weights = DMatrix::from_fn(centers.len(), rest.len(), |c, r| interp_coeffs[r][c].as_f64());

        // Each fold drops one subset member; duplicates of it stay available as centers.
        let loo_coeffs = if centers.len() == sub_coords.len() {
            loo_coefficients(&inputs)?.into_iter().enumerate().map(|(i, c)| (without(&centers, i), c)).collect()
        } else {
            (0..sub_coords.len())
                .into_par_iter()
                .map(|i| {
                    let others: Vec<&Vec<T>> = sub_coords.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, p)| *p).collect();
                    let keep: Vec<usize> = distinct(&others).into_iter().map(|k| if k >= i { k + 1 } else { k }).collect();
                    let pts: Vec<Vec<T>> = keep.iter().map(|&k| sub_coords[k].clone()).collect();
                    let sys = RbfSystem::new(&pts).map_err(|e| Error::LooFold { fold: i, source: Box::new(e) })?;
                    Ok((keep, sys.coefficients(sub_coords[i])))
                })
                .collect::<Result<Vec<_>>>()?
        };
        // Fold `k` is column `k`, with weights on the subset members it keeps.
        let mut loo_weights = DMatrix::zeros(subset.len(), subset.len());
        for (k, (keep, c)) in loo_coeffs.iter().enumerate() {
            for (&q, &w) in keep.iter().zip(c) {
                loo_weights[(q, k)] = w.as_f64();
            }
        }
        Ok((subset, rest, centers, interp_weights, loo_weights))
    })?;

    let initial = model.initial_state();
    let mut exact: Vec<Field<T>> = vec![initial.clone(); subset.len()];
    let mut interp: Vec<Field<T>> = vec![initial.clone(); rest.len()];
    let mut loo: Vec<Field<T>> = vec![initial.clone(); subset.len()];
    let retain_all = opts.retain == Retention::All;
    let steps = scales.macro_steps();
    let mut times = Vec::new();
    let mut combined_moments = Vec::new();
    let mut subset_moments = Vec::new();


    if retain_all {
        clock.overhead(|| -> Result<()> {
            let all = in_draw_order(&subset, plan.n, &exact, &interp);
            times.push(T::zero());
            combined_moments.push(estimate_moments(&all)?);
            subset_moments.push(estimate_moments(&exact)?);
            Ok(())
        })?;
    }

    for step in 0..steps {
        let sample_err = |k: usize, e: Error| {
            let j = subset[k];
            e.in_sample(j, &to_f64(&samples.inputs[j]))
        };
        // Exact coupled step on the subset.
        let stepped: Vec<(Timed<T>, Field<T>)> = exact
            .par_iter()
            .enumerate()
            .map(|(k, state)| {
                let xi = &samples.inputs[subset[k]];
                let t0 = Instant::now();
                let micro = MicroModel::advance(model, state, xi, scales.dt_micro(), scales.n_micro()).map_err(|e| sample_err(k, e))?;
                let micro_t = t0.elapsed();
                let t1 = Instant::now();
                let next = MacroModel::advance(model, state, &micro, xi, scales.dt_macro()).map_err(|e| sample_err(k, e))?;
                let macro_t = t1.elapsed();
                check_finite(&micro, &next, step, xi)?;
                Ok((Timed { state: next, micro: micro_t, macro_: macro_t, other: Duration::ZERO }, micro))
            })
            .collect::<Result<_>>()?;
        let mut micro_out = Vec::with_capacity(stepped.len());
        for (k, (t, m)) in stepped.into_iter().enumerate() {
            clock.micro += t.micro;
            clock.macro_ += t.macro_;
            exact[k] = t.state;
            micro_out.push(m);
        }
        let center_out: Vec<&Field<T>> = centers.iter().map(|&c| &micro_out[c]).collect();
        let (interp_micro, spent) = combine_columns(&interp_weights, &center_out);
        clock.overhead += spent;

        // Interpolated micro outputs drive the remaining samples.
        let advanced: Vec<Timed<T>> = interp
            .par_iter()
            .zip(&interp_micro)
            .enumerate()
            .map(|(r, (state, micro))| {
                let j = rest[r];
                let xi = &samples.inputs[j];
                let t1 = Instant::now();
                let next = MacroModel::advance(model, state, micro, xi, scales.dt_macro()).map_err(|e| e.in_sample(j, &to_f64(xi)))?;
                let macro_t = t1.elapsed();
                check_finite(micro, &next, step, xi).map_err(|e| e.in_sample(j, &to_f64(xi)))?;
                Ok(Timed { state: next, micro: Duration::ZERO, macro_: macro_t, other: Duration::ZERO })
            })
            .collect::<Result<_>>()?;
        for (k, t) in advanced.into_iter().enumerate() {
            clock.macro_ += t.macro_;
            clock.overhead += t.other;
            interp[k] = t.state;
        }

        // Leave-one-out reruns belong to the test, so their cost is overhead.
        let subset_out: Vec<&Field<T>> = micro_out.iter().collect();
        let (loo_micro, spent) = combine_columns(&loo_weights, &subset_out);
        clock.overhead += spent;
        let reran: Vec<Timed<T>> = loo
            .par_iter()
            .zip(&loo_micro)
            .enumerate()
            .map(|(k, (state, micro))| {
                let xi = &samples.inputs[subset[k]];
                let t0 = Instant::now();
                let next = MacroModel::advance(model, state, micro, xi, scales.dt_macro()).map_err(|e| sample_err(k, e))?;
                check_finite(micro, &next, step, xi).map_err(|e| sample_err(k, e))?;
                Ok(Timed { state: next, micro: Duration::ZERO, macro_: Duration::ZERO, other: t0.elapsed() })
            })
            .collect::<Result<_>>()?;
        for (k, t) in reran.into_iter().enumerate() {
            clock.overhead += t.other;
            loo[k] = t.state;
        }

        if retain_all && step + 1 < steps {
            clock.overhead(|| -> Result<()> {
                let all = in_draw_order(&subset, plan.n, &exact, &interp);
                times.push(scales.time_at(step + 1));
                combined_moments.push(estimate_moments(&all)?);
                subset_moments.push(estimate_moments(&exact)?);
                Ok(())
            })?;
        }
    }

    let (report, interpolated, subset_mc) = clock.overhead(|| -> Result<_> {
        let subset_mc = estimate_moments_with_ci(&exact, &opts.bootstrap)?;
        let (ci_mean, ci_std) = (subset_mc.ci_mean.as_ref(), subset_mc.ci_std.as_ref());
        let report = bounds_against(&exact, &loo, ci_mean.expect("intervals requested"), ci_std.expect("intervals requested"), &opts.bootstrap)?;
        let all = in_draw_order(&subset, plan.n, &exact, &interp);
        let interpolated = estimate_moments_with_ci(&all, &opts.bootstrap)?;
        Ok((report, interpolated, subset_mc))
    })?;
    times.push(scales.time_at(steps));
    combined_moments.push(interpolated.clone());
    subset_moments.push(subset_mc.clone());

    let fallback = report.decision == Decision::Reject;
    let moments = if fallback { subset_moments } else { combined_moments };
    let estimate = UpResult { times, moments, timing: clock.breakdown(), samples };
    Ok(SimcResult { estimate, interpolated, subset_mc, report, subset, fallback })
}

/// Samples in their original draw order, so the estimator matches plain MC when nothing is interpolated.
fn in_draw_order<'a, T>(subset: &[usize], n: usize, exact: &'a [Field<T>], interp: &'a [Field<T>]) -> Vec<&'a Field<T>> {
    let (mut a, mut b) = (exact.iter(), interp.iter());
    (0..n)
        .map(|j| if subset.binary_search(&j).is_ok() { a.next() } else { b.next() })
        .map(|f| f.expect("partition covers all samples"))
        .collect()
}

fn without(centers: &[usize], i: usize) -> Vec<usize> {
    centers.iter().copied().filter(|&c| c != i).collect()
}

fn check_finite<T: Scalar>(micro: &Field<T>, next: &Field<T>, step: usize, xi: &[T]) -> Result<()> {
    if micro.is_finite() && next.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step: step + 1, params: to_f64(xi) })
    }
}
