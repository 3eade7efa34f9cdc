//! Cubic radial basis interpolation with a linear polynomial tail.
//!
//! The interpolant is `s(x) = sum_i w_i |x - x_i|^3 + a_0 + a^T x`. Predictions are
//! evaluated in dual form: the factored kernel system gives a coefficient per
//! center, and the prediction is the matching combination of stored outputs. The
//! system depends only on the centers, so one factorization serves every output
//! component and every set of outputs observed at the same centers. The system is
//! assembled and factored in `f64` whatever the field scalar.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;
use std::marker::PhantomData;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Scalar;

#[inline]
fn cubic(a: &[f64], b: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    r2 * r2.sqrt()
}

/// Factored interpolation system for a fixed set of centers.
#[derive(Debug, Clone)]
pub struct RbfSystem<T> {
    lo: Vec<f64>,
    span: Vec<f64>,
    centers: Vec<Vec<f64>>,
    lu: LU<f64, Dyn, Dyn>,
    scalar: PhantomData<T>,
}

impl<T: Scalar> RbfSystem<T> {
    pub fn new(inputs: &[Vec<T>]) -> Result<Self> {
        let n = inputs.len();
        let dim = inputs.first().map_or(0, |x| x.len());
        if n < dim + 1 {
            return Err(Error::TooFewSamples { what: "cubic interpolation", needed: dim + 1, given: n });
        }
        for x in inputs {
            if x.len() != dim {
                return Err(Error::LengthMismatch { what: "interpolation input", expected: dim, given: x.len() });
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if inputs[i] == inputs[j] {
                    return Err(Error::DuplicateCenters { first: i, second: j });
                }
            }
        }
        let x: Vec<Vec<f64>> = inputs.iter().map(|p| p.iter().map(|v| v.as_f64()).collect()).collect();
        let mut lo = vec![0.0; dim];
        let mut span = vec![1.0; dim];
        for d in 0..dim {
            let (mut a, mut b) = (x[0][d], x[0][d]);
            for p in &x {
                a = a.min(p[d]);
                b = b.max(p[d]);
            }
            lo[d] = a;
            if b > a {
                span[d] = b - a;
            }
        }
        let centers: Vec<Vec<f64>> =
            x.iter().map(|p| p.iter().zip(lo.iter().zip(&span)).map(|(&v, (&l, &s))| (v - l) / s).collect()).collect();

        let size = n + 1 + dim;
        let mut a = DMatrix::zeros(size, size);
        for i in 0..n {
            for j in i + 1..n {
                let phi = cubic(&centers[i], &centers[j]);
                a[(i, j)] = phi;
                a[(j, i)] = phi;
            }
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
            for d in 0..dim {
                a[(i, n + 1 + d)] = centers[i][d];
                a[(n + 1 + d, i)] = centers[i][d];
            }
        }
        let tiny = a.amax() * f64::EPSILON * size as f64;
        let lu = a.lu();
        if let Some(column) = lu.u().diagonal().iter().position(|u| !(u.abs() > tiny)) {
            return Err(Error::Singular { column });
        }
        Ok(Self { lo, span, centers, lu, scalar: PhantomData })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Weights `c` with `s(xi) = sum_i c_i y_i` for any outputs `y` at the centers.
    pub fn coefficients(&self, xi: &[T]) -> Vec<T> {
        let n = self.centers.len();
        let z: Vec<f64> = xi.iter().zip(self.lo.iter().zip(&self.span)).map(|(&v, (&l, &s))| (v.as_f64() - l) / s).collect();
        let mut rhs = Vec::with_capacity(n + 1 + z.len());
        rhs.extend(self.centers.iter().map(|c| cubic(c, &z)));
        rhs.push(1.0);
        rhs.extend_from_slice(&z);
        let c = self.lu.solve(&DVector::from_vec(rhs)).expect("factorization checked for singular pivots");
        c.iter().take(n).map(|&v| T::lit(v)).collect()
    }
}

/// `sum_i c_i y_i`, accumulated in center order.
pub fn combine<'a, T: Scalar + 'a>(coeffs: &[T], outputs: impl IntoIterator<Item = &'a Field<T>>) -> Field<T> {
    let mut outputs = outputs.into_iter();
    let first = outputs.next().expect("at least one output");
    let c0 = coeffs[0];
    let mut acc: Vec<T> = first.values().iter().map(|&y| c0 * y).collect();
    for (&c, f) in coeffs[1..].iter().zip(outputs) {
        for (a, &y) in acc.iter_mut().zip(f.values()) {
            *a += c * y;
        }
    }
    Field::from_parts(*first.grid(), first.components(), acc)
}

/// `combine` for many targets at once: column `j` of `weights` holds the
/// coefficients of target `j` over `outputs`.
///
/// Targets are processed in fixed-width blocks, so results do not depend on the
/// thread count. The duration is the compute time summed over blocks.
pub fn combine_columns<T: Scalar>(weights: &DMatrix<f64>, outputs: &[&Field<T>]) -> (Vec<Field<T>>, Duration) {
    const BLOCK: usize = 64;
    assert_eq!(weights.nrows(), outputs.len(), "one weight row per output");
    let t0 = Instant::now();
    let first = outputs[0];
    let y = DMatrix::from_fn(first.len(), outputs.len(), |p, i| outputs[i].values()[p].as_f64());
    let stacking = t0.elapsed();
    let blocks: Vec<(Vec<Field<T>>, Duration)> = (0..weights.ncols())
        .step_by(BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j0| {
            let t0 = Instant::now();
            let z = &y * weights.columns(j0, BLOCK.min(weights.ncols() - j0));
            let fields = z
                .column_iter()
                .map(|col| Field::from_parts(*first.grid(), first.components(), col.iter().map(|&v| T::lit(v)).collect()))
                .collect();
            (fields, t0.elapsed())
        })
        .collect();
    let mut spent = stacking;
    let mut out = Vec::with_capacity(weights.ncols());
    for (fields, d) in blocks {
        out.extend(fields);
        spent += d;
    }
    (out, spent)
}

/// Interpolant through `(inputs[i], outputs[i])`, shared across output components.
#[derive(Debug, Clone)]
pub struct Interpolator<T> {
    system: RbfSystem<T>,
    outputs: Vec<Field<T>>,
}

impl<T: Scalar> Interpolator<T> {
    pub fn system(&self) -> &RbfSystem<T> {
        &self.system
    }

    pub fn predict(&self, xi: &[T]) -> Field<T> {
        combine(&self.system.coefficients(xi), &self.outputs)
    }
}

pub fn fit_interpolator<T: Scalar, F: AsRef<Field<T>>>(inputs: &[Vec<T>], outputs: &[F]) -> Result<Interpolator<T>> {
    if inputs.len() != outputs.len() {
        return Err(Error::LengthMismatch { what: "interpolation outputs", expected: inputs.len(), given: outputs.len() });
    }
    let system = RbfSystem::new(inputs)?;
    let first = outputs[0].as_ref();
    for f in outputs {
        if !f.as_ref().same_layout(first) {
            return Err(Error::LengthMismatch { what: "interpolation output field", expected: first.len(), given: f.as_ref().len() });
        }
    }
    Ok(Interpolator { system, outputs: outputs.iter().map(|f| f.as_ref().clone()).collect() })
}

/// Coefficients of every leave-one-out fold at its held-out input.
///
/// Entry `i` weights the outputs of all centers except `i`, in their original order.
pub fn loo_coefficients<T: Scalar>(inputs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    (0..inputs.len())
        .into_par_iter()
        .map(|i| {
            let rest: Vec<Vec<T>> = inputs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x.clone()).collect();
            let sys = RbfSystem::new(&rest).map_err(|e| Error::LooFold { fold: i, source: Box::new(e) })?;
            Ok(sys.coefficients(&inputs[i]))
        })
        .collect()
}

/// Prediction at `inputs[i]` from the interpolant fitted on all other pairs, for each `i`.
pub fn loo_predictions<T: Scalar, F: AsRef<Field<T>> + Sync>(inputs: &[Vec<T>], outputs: &[F]) -> Result<Vec<Field<T>>> {
    if inputs.len() != outputs.len() {
        return Err(Error::LengthMismatch { what: "interpolation outputs", expected: inputs.len(), given: outputs.len() });
    }
    let coeffs = loo_coefficients(inputs)?;
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| combine(c, outputs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, f)| f.as_ref())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    fn scalar(v: f64) -> Field<f64> {
        Field::from_fn(Grid::periodic_unit(1.0 / 3.0, 1.0).unwrap(), 1, |_, _, _| v)
    }

    #[test]
    fn duplicate_centers_are_named() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y: Vec<_> = (0..4).map(|i| scalar(i as f64)).collect();
        assert_eq!(fit_interpolator(&x, &y).unwrap_err(), Error::DuplicateCenters { first: 1, second: 3 });
    }

    #[test]
    fn collinear_centers_are_singular() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        let y: Vec<_> = (0..3).map(|i| scalar(i as f64)).collect();
        assert!(matches!(fit_interpolator(&x, &y), Err(Error::Singular { .. })));
    }

    #[test]
    fn single_center_without_inputs_is_constant() {
        let it = fit_interpolator(&[vec![]], &[scalar(2.5)]).unwrap();
        assert_eq!(it.predict(&[]).values()[0], 2.5);
    }
}
