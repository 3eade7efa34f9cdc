//! Uncertain input distributions and counter-based sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform input on `[mean (1 - rel_half_width), mean (1 + rel_half_width)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformInput {
    pub mean: f64,
    pub rel_half_width: f64,
}

impl UniformInput {
    pub fn new(mean: f64, rel_half_width: f64) -> Result<Self> {
        let u = Self { mean, rel_half_width };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !(0.0..1.0).contains(&self.rel_half_width) {
            return Err(Error::Distribution(format!(
                "need finite mean and half-width in [0, 1), got mean={}, rho={}",
                self.mean, self.rel_half_width
            )));
        }
        Ok(())
    }

    pub fn half_width(&self) -> f64 {
        (self.mean * self.rel_half_width).abs()
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width()
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width()
    }

    pub fn is_degenerate(&self) -> bool {
        self.half_width() == 0.0
    }

    /// Maps `z` in `[-1, 1]` onto the support.
    pub fn from_unit<T: Scalar>(&self, z: T) -> T {
        T::lit(self.mean) + T::lit(self.half_width()) * z
    }

    /// Maps a point of the support to `[-1, 1]`; degenerate inputs map to 0.
    pub fn to_unit<T: Scalar>(&self, x: T) -> T {
        if self.is_degenerate() {
            T::zero()
        } else {
            (x - T::lit(self.mean)) / T::lit(self.half_width())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pub dims: Vec<UniformInput>,
}

impl InputDistribution {
    pub fn new(dims: Vec<UniformInput>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Distribution("at least one input dimension is required".into()));
        }
        for d in &dims {
            d.validate()?;
        }
        Ok(Self { dims })
    }

    pub fn uniform_relative(means: &[f64], rho: f64) -> Result<Self> {
        Self::new(means.iter().map(|&m| UniformInput { mean: m, rel_half_width: rho }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn means<T: Scalar>(&self) -> Vec<T> {
        self.dims.iter().map(|d| T::lit(d.mean)).collect()
    }

    /// Indices of dimensions with non-zero width.
    pub fn active_dims(&self) -> Vec<usize> {
        (0..self.dims.len()).filter(|&i| !self.dims[i].is_degenerate()).collect()
    }

    /// Coordinates of `xi` on `[-1, 1]` restricted to the active dimensions.
    pub fn unit_coords<T: Scalar>(&self, xi: &[T]) -> Vec<T> {
        self.active_dims().into_iter().map(|i| self.dims[i].to_unit(xi[i])).collect()
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        xi.len() == self.dims.len()
            && xi.iter().zip(&self.dims).all(|(&x, d)| x >= d.lower() && x <= d.upper())
    }
}

/// `n` draws in input space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    pub inputs: Vec<Vec<T>>,
    pub seed: u64,
}

impl<T: Scalar> SampleSet<T> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Draw `j` of a seeded stream; depends only on `(dist, seed, j)`.
pub fn draw_one<T: Scalar>(dist: &InputDistribution, seed: u64, j: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    dist.dims
        .iter()
        .map(|d| {
            let u: f64 = rng.random();
            T::lit(d.lower() + (d.upper() - d.lower()) * u).max(T::lit(d.lower())).min(T::lit(d.upper()))
        })
        .collect()
}

/// `n` i.i.d. draws. Any prefix equals the draws for a smaller `n` with the same seed.
pub fn draw_samples<T: Scalar>(dist: &InputDistribution, n: usize, seed: u64) -> SampleSet<T> {
    SampleSet { inputs: (0..n).map(|j| draw_one(dist, seed, j)).collect(), seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_and_bounded() {
        let dist = InputDistribution::uniform_relative(&[0.0385], 0.01).unwrap();
        assert!(draw_samples::<f64>(&dist, 0, 1).is_empty());
        let s = draw_samples::<f64>(&dist, 500, 9);
        for x in &s.inputs {
            assert!(x[0] >= 0.038115 - 1e-15 && x[0] <= 0.038885 + 1e-15, "{x:?}");
        }
    }

    #[test]
    fn rejects_bad_width() {
        assert!(UniformInput::new(1.0, 1.0).is_err());
        assert!(UniformInput::new(1.0, -0.1).is_err());
        assert!(UniformInput::new(f64::NAN, 0.1).is_err());
        assert!(UniformInput::new(1.0, 0.0).unwrap().is_degenerate());
    }

    #[test]
    fn degenerate_draws_are_the_mean() {
        let dist = InputDistribution::uniform_relative(&[0.4, 7.0], 0.0).unwrap();
        let s = draw_samples::<f64>(&dist, 10, 3);
        assert!(s.inputs.iter().all(|x| x == &vec![0.4, 7.0]));
        assert!(dist.active_dims().is_empty());
    }

    proptest! {
        #[test]
        fn prefix_stable_and_deterministic(seed in any::<u64>(), n in 1usize..40, m in 0usize..40) {
            let dist = InputDistribution::uniform_relative(&[0.405, 40500.0], 0.1).unwrap();
            let m = m.min(n);
            let a = draw_samples::<f64>(&dist, n, seed);
            let b = draw_samples::<f64>(&dist, m, seed);
            prop_assert_eq!(&a.inputs[..m], &b.inputs[..]);
            prop_assert_eq!(&a, &draw_samples::<f64>(&dist, n, seed));
            for x in &a.inputs {
                prop_assert!(dist.contains(x));
            }
        }
    }
}
