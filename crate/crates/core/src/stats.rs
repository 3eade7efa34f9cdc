//! Pointwise moment estimation and percentile bootstrap intervals.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::{CompensatedSum, Scalar};

pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_RESAMPLES: usize = 1000;
pub const MIN_RESAMPLES: usize = 100;

impl<T> AsRef<Field<T>> for Field<T> {
    fn as_ref(&self) -> &Field<T> {
        self
    }
}

/// Pointwise confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval<T> {
    pub lower: Field<T>,
    pub upper: Field<T>,
}

impl<T: Scalar> Interval<T> {
    pub fn half_width(&self) -> Field<T> {
        let half = T::lit(0.5);
        let values = self.lower.values().iter().zip(self.upper.values()).map(|(&l, &u)| half * (u - l)).collect();
        Field::from_parts(*self.lower.grid(), self.lower.components(), values)
    }

    pub fn contains(&self, f: &Field<T>) -> bool {
        f.values()
            .iter()
            .zip(self.lower.values().iter().zip(self.upper.values()))
            .all(|(&v, (&l, &u))| l <= v && v <= u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Mean,
    Std,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: DEFAULT_RESAMPLES, level: DEFAULT_LEVEL, seed: 0 }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples < MIN_RESAMPLES {
            return Err(Error::TooFewSamples { what: "bootstrap", needed: MIN_RESAMPLES, given: self.resamples });
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Distribution(format!("confidence level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

/// Mean and standard deviation fields with optional bootstrap intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate<T> {
    pub mean: Field<T>,
    pub std: Field<T>,
    pub ci_mean: Option<Interval<T>>,
    pub ci_std: Option<Interval<T>>,
    pub confidence_level: f64,
    pub n_samples: usize,
}

fn check_layout<T: Scalar, F: AsRef<Field<T>>>(outputs: &[F]) -> Result<()> {
    let first = outputs[0].as_ref();
    for f in outputs {
        let f = f.as_ref();
        if !f.same_layout(first) {
            return Err(Error::LengthMismatch { what: "sample field", expected: first.len(), given: f.len() });
        }
    }
    Ok(())
}

/// Pointwise sample mean, accumulated in sample order relative to the first sample.
pub fn sample_mean<T: Scalar, F: AsRef<Field<T>>>(outputs: &[F]) -> Result<Field<T>> {
    if outputs.is_empty() {
        return Err(Error::TooFewSamples { what: "mean", needed: 1, given: 0 });
    }
    check_layout(outputs)?;
    let base = outputs[0].as_ref();
    let m = base.len();
    let mut acc = vec![CompensatedSum::<T>::new(); m];
    for f in &outputs[1..] {
        for ((a, &x), &x0) in acc.iter_mut().zip(f.as_ref().values()).zip(base.values()) {
            a.add(x - x0);
        }
    }
    let n = T::from_usize_lossy(outputs.len());
    let values = acc.iter().zip(base.values()).map(|(a, &x0)| x0 + a.value() / n).collect();
    Ok(Field::from_parts(*base.grid(), base.components(), values))
}

/// Pointwise unbiased (divisor `N - 1`) standard deviation around `mean`.
pub fn sample_std<T: Scalar, F: AsRef<Field<T>>>(outputs: &[F], mean: &Field<T>) -> Result<Field<T>> {
    if outputs.len() < 2 {
        return Err(Error::TooFewSamples { what: "standard deviation", needed: 2, given: outputs.len() });
    }
    check_layout(outputs)?;
    let mut acc = vec![CompensatedSum::<T>::new(); mean.len()];
    for f in outputs {
        for ((a, &x), &mu) in acc.iter_mut().zip(f.as_ref().values()).zip(mean.values()) {
            let d = x - mu;
            a.add(d * d);
        }
    }
    let denom = T::from_usize_lossy(outputs.len() - 1);
    let values = acc.iter().map(|a| (a.value() / denom).max(T::zero()).sqrt()).collect();
    Ok(Field::from_parts(*mean.grid(), mean.components(), values))
}

/// Sample mean and standard deviation without intervals.
pub fn estimate_moments<T: Scalar, F: AsRef<Field<T>>>(outputs: &[F]) -> Result<MomentEstimate<T>> {
    if outputs.len() < 2 {
        return Err(Error::TooFewSamples { what: "standard deviation", needed: 2, given: outputs.len() });
    }
    let mean = sample_mean(outputs)?;
    let std = sample_std(outputs, &mean)?;
    Ok(MomentEstimate { mean, std, ci_mean: None, ci_std: None, confidence_level: DEFAULT_LEVEL, n_samples: outputs.len() })
}

/// Moments plus percentile-bootstrap intervals on both estimators.
pub fn estimate_moments_with_ci<T: Scalar, F: AsRef<Field<T>>>(
    outputs: &[F],
    cfg: &BootstrapConfig,
) -> Result<MomentEstimate<T>> {
    let mut est = estimate_moments(outputs)?;
    let (ci_mean, ci_std) = bootstrap_moments(outputs, cfg, Some((&est.mean, &est.std)))?;
    est.ci_mean = Some(ci_mean);
    est.ci_std = Some(ci_std);
    est.confidence_level = cfg.level;
    Ok(est)
}

/// Percentile bootstrap interval for one estimator.
pub fn bootstrap_ci<T: Scalar, F: AsRef<Field<T>>>(
    outputs: &[F],
    estimator: Estimator,
    cfg: &BootstrapConfig,
) -> Result<Interval<T>> {
    let (m, s) = bootstrap_moments(outputs, cfg, None)?;
    Ok(match estimator {
        Estimator::Mean => m,
        Estimator::Std => s,
    })
}

/// Bootstrap intervals for the mean and the standard deviation from one set of resamples.
///
/// When point estimates are supplied, each interval is widened to contain them.
pub fn bootstrap_moments<T: Scalar, F: AsRef<Field<T>>>(
    outputs: &[F],
    cfg: &BootstrapConfig,
    point: Option<(&Field<T>, &Field<T>)>,
) -> Result<(Interval<T>, Interval<T>)> {
    cfg.validate()?;
    let n = outputs.len();
    if n < 2 {
        return Err(Error::TooFewSamples { what: "bootstrap", needed: 2, given: n });
    }
    let mean = sample_mean(outputs)?;
    let layout = outputs[0].as_ref();
    let m = layout.len();

    // Centred data keeps the one-pass variance well conditioned.
    let centred: Vec<Vec<T>> = outputs
        .iter()
        .map(|f| f.as_ref().values().iter().zip(mean.values()).map(|(&x, &mu)| x - mu).collect())
        .collect();

    // Resample multiplicities as a dense (resample x sample) matrix.
    let b_count = cfg.resamples;
    let rows: Vec<Vec<u32>> = (0..b_count)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            counts
        })
        .collect();
    let weights = DMatrix::from_fn(b_count, n, |b, i| f64::from(rows[b][i]));
    drop(rows);

    // Resampled sums are matrix products over fixed-width point blocks, so the
    // result does not depend on how blocks are spread over threads.
    const BLOCK: usize = 256;
    let nf = n as f64;
    let nm1 = (n - 1) as f64;
    let alpha = 1.0 - cfg.level;
    let tiles: Vec<[Vec<T>; 4]> = (0..m.div_ceil(BLOCK))
        .into_par_iter()
        .map(|tile| {
            let p0 = tile * BLOCK;
            let pw = BLOCK.min(m - p0);
            let c = DMatrix::from_fn(n, pw, |i, p| centred[i][p0 + p].as_f64());
            let s1 = &weights * &c;
            let s2 = &weights * c.component_mul(&c);
            let mut out: [Vec<T>; 4] = Default::default();
            let mut means = vec![T::zero(); b_count];
            let mut stds = vec![T::zero(); b_count];
            for p in 0..pw {
                let mu = mean.values()[p0 + p];
                for (b, (&a1, &a2)) in s1.column(p).iter().zip(s2.column(p).iter()).enumerate() {
                    let shift = a1 / nf;
                    means[b] = mu + T::lit(shift);
                    stds[b] = T::lit(((a2 - a1 * shift) / nm1).max(0.0).sqrt());
                }
                for (k, (column, est)) in [(&mut means, point.map(|e| e.0)), (&mut stds, point.map(|e| e.1))].into_iter().enumerate() {
                    column.sort_by(|a, b| a.partial_cmp(b).expect("finite bootstrap statistic"));
                    let mut lo = quantile_sorted(column, alpha / 2.0);
                    let mut hi = quantile_sorted(column, 1.0 - alpha / 2.0);
                    if let Some(e) = est {
                        lo = lo.min(e.values()[p0 + p]);
                        hi = hi.max(e.values()[p0 + p]);
                    }
                    out[2 * k].push(lo);
                    out[2 * k + 1].push(hi);
                }
            }
            out
        })
        .collect();

    let gather = |k: usize| -> Field<T> {
        let v = tiles.iter().flat_map(|t| t[k].iter().copied()).collect();
        Field::from_parts(*layout.grid(), layout.components(), v)
    };
    Ok((Interval { lower: gather(0), upper: gather(1) }, Interval { lower: gather(2), upper: gather(3) }))
}

/// Mean of `|estimate - reference| / |reference|` over all values.
///
/// Points where the reference magnitude is at most `1e-12` times its maximum are
/// skipped, since a relative error is meaningless there.
pub fn mean_relative_error<T: Scalar>(estimate: &Field<T>, reference: &Field<T>) -> Result<f64> {
    if !estimate.same_layout(reference) {
        return Err(Error::LengthMismatch { what: "relative error field", expected: reference.len(), given: estimate.len() });
    }
    let floor = reference.max_abs().as_f64() * 1e-12;
    let mut sum = CompensatedSum::new();
    let mut count = 0usize;
    for (&e, &r) in estimate.values().iter().zip(reference.values()) {
        let r = r.as_f64();
        if r.abs() > floor {
            sum.add(((e.as_f64() - r) / r).abs());
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::TooFewSamples { what: "relative error points", needed: 1, given: 0 });
    }
    Ok(sum.value() / count as f64)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use rand::Rng;

    fn scalar_fields(xs: &[f64]) -> Vec<Field<f64>> {
        let g = Grid::periodic_unit(1.0 / 3.0, 1.0).unwrap();
        xs.iter().map(|&x| Field::from_fn(g, 1, |_, _, _| x)).collect()
    }

    #[test]
    fn equal_outputs_have_zero_std() {
        let f = scalar_fields(&[0.1 + 0.2; 17]);
        let est = estimate_moments(&f).unwrap();
        assert!(est.std.values().iter().all(|&s| s == 0.0));
        assert!(est.mean.values().iter().all(|&m| m == 0.1 + 0.2));
    }

    #[test]
    fn two_point_formula() {
        let est = estimate_moments(&scalar_fields(&[1.0, 3.0])).unwrap();
        assert_eq!(est.mean.values()[0], 2.0);
        assert!((est.std.values()[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_sample_std_is_an_error() {
        let f = scalar_fields(&[1.0]);
        assert_eq!(sample_mean(&f).unwrap().values()[0], 1.0);
        assert!(matches!(estimate_moments(&f), Err(Error::TooFewSamples { needed: 2, given: 1, .. })));
    }

    #[test]
    fn constant_data_gives_zero_width_intervals() {
        let f = scalar_fields(&[4.25; 30]);
        let cfg = BootstrapConfig { resamples: 200, level: 0.95, seed: 3 };
        for est in [Estimator::Mean, Estimator::Std] {
            let ci = bootstrap_ci(&f, est, &cfg).unwrap();
            assert_eq!(ci.lower, ci.upper);
        }
    }

    #[test]
    fn intervals_contain_point_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..40).map(|_| rng.random::<f64>().powi(6)).collect();
        let est = estimate_moments_with_ci(&scalar_fields(&xs), &BootstrapConfig { resamples: 300, level: 0.9, seed: 1 }).unwrap();
        assert!(est.ci_mean.as_ref().unwrap().contains(&est.mean));
        assert!(est.ci_std.as_ref().unwrap().contains(&est.std));
    }

    #[test]
    fn rejects_too_few_resamples() {
        let f = scalar_fields(&[1.0, 2.0, 3.0]);
        let cfg = BootstrapConfig { resamples: 50, ..Default::default() };
        assert!(bootstrap_ci(&f, Estimator::Mean, &cfg).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert_eq!(quantile_sorted(&xs, 0.125), 1.5);
        assert_eq!(quantile_sorted(&xs, 1.0), 5.0);
    }
}
