//! Coefficient fields of a polynomial-chaos expansion and their Galerkin algebra.

use std::fmt::Write;

use super::basis::PCBasis;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Scalar;
use crate::sampling::InputDistribution;

/// One coefficient field per basis function; coefficient 0 is the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PCExpansion<T> {
    pub coeffs: Vec<Field<T>>,
}

impl<T: Scalar> PCExpansion<T> {
    /// A deterministic field: only coefficient 0 is set.
    pub fn deterministic(field: Field<T>, basis: &PCBasis) -> Self {
        let zero = Field::zeros(*field.grid(), field.components());
        let mut coeffs = vec![zero; basis.len()];
        coeffs[0] = field;
        Self { coeffs }
    }

    /// Expansion constant in space with the given scalar coefficients.
    pub fn uniform(values: &[T], layout: &Field<T>) -> Self {
        let coeffs = values
            .iter()
            .map(|&c| Field::from_parts(*layout.grid(), layout.components(), vec![c; layout.len()]))
            .collect();
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn layout(&self) -> &Field<T> {
        &self.coeffs[0]
    }

    /// Realisation at `z` in `[-1, 1]^dim`, given the basis values there.
    pub fn evaluate(&self, psi: &[f64]) -> Field<T> {
        let first = &self.coeffs[0];
        let mut acc = vec![T::zero(); first.len()];
        for (f, &w) in self.coeffs.iter().zip(psi) {
            let w = T::lit(w);
            for (a, &c) in acc.iter_mut().zip(f.values()) {
                *a += w * c;
            }
        }
        Field::from_parts(*first.grid(), first.components(), acc)
    }

    pub fn map2(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| {
                let v = a.values().iter().zip(b.values()).map(|(&x, &y)| f(x, y)).collect();
                Field::from_parts(*a.grid(), a.components(), v)
            })
            .collect();
        Self { coeffs }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { coeffs: self.coeffs.iter().map(|f| f.map(|v| v * s)).collect() }
    }

    /// Largest coefficient magnitude; infinite if any entry is not finite.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for f in &self.coeffs {
            for v in f.values() {
                let a = v.as_f64().abs();
                if !a.is_finite() {
                    return f64::INFINITY;
                }
                m = m.max(a);
            }
        }
        m
    }

    /// Component `c` of every coefficient field as a single-component expansion.
    pub fn component(&self, c: usize) -> Self {
        Self { coeffs: self.coeffs.iter().map(|f| Field::from_parts(*f.grid(), 1, f.component(c).to_vec())).collect() }
    }

    /// Joins single-component expansions into one multi-component expansion.
    pub fn stack(parts: &[Self]) -> Self {
        let p = parts[0].len();
        let coeffs = (0..p)
            .map(|i| {
                let grid = *parts[0].coeffs[i].grid();
                let values = parts.iter().flat_map(|e| e.coeffs[i].values().iter().copied()).collect();
                Field::from_parts(grid, parts.len(), values)
            })
            .collect();
        Self { coeffs }
    }

    /// Coefficient-by-point matrix: one row per basis function.
    pub fn to_csv(&self) -> String {
        let m = self.coeffs[0].len();
        let mut s = String::from("index");
        for p in 0..m {
            let _ = write!(s, ",p{p}");
        }
        s.push('\n');
        for (i, f) in self.coeffs.iter().enumerate() {
            let _ = write!(s, "{i}");
            for v in f.values() {
                let _ = write!(s, ",{:e}", v.as_f64());
            }
            s.push('\n');
        }
        s
    }
}

fn check_basis<T: Scalar>(e: &PCExpansion<T>, basis: &PCBasis) -> Result<()> {
    if e.len() != basis.len() {
        return Err(Error::BasisMismatch(format!("expansion has {} coefficients, basis has {}", e.len(), basis.len())));
    }
    Ok(())
}

/// Truncated Galerkin product `c_l = sum_ij a_i b_j C[i][j][l]`.
pub fn galerkin_multiply<T: Scalar>(a: &PCExpansion<T>, b: &PCExpansion<T>, basis: &PCBasis) -> Result<PCExpansion<T>> {
    check_basis(a, basis)?;
    check_basis(b, basis)?;
    let layout = a.layout();
    if !b.layout().same_layout(layout) {
        return Err(Error::BasisMismatch("expansions live on different grids".into()));
    }
    let nonzero = |e: &PCExpansion<T>| -> Vec<bool> { e.coeffs.iter().map(|f| f.values().iter().any(|&v| v != T::zero())).collect() };
    let (za, zb) = (nonzero(a), nonzero(b));
    let m = layout.len();
    let mut out = vec![vec![T::zero(); m]; basis.len()];
    for e in &basis.sparse {
        if !za[e.i] || !zb[e.j] {
            continue;
        }
        let c = T::lit(e.value);
        let (x, y) = (a.coeffs[e.i].values(), b.coeffs[e.j].values());
        for ((o, &u), &v) in out[e.l].iter_mut().zip(x).zip(y) {
            *o += c * u * v;
        }
    }
    Ok(PCExpansion { coeffs: out.into_iter().map(|v| Field::from_parts(*layout.grid(), layout.components(), v)).collect() })
}

/// Pointwise mean (coefficient 0) and standard deviation (root sum of squares of the rest).
pub fn moments_from_pc<T: Scalar>(e: &PCExpansion<T>) -> (Field<T>, Field<T>) {
    let mean = e.coeffs[0].clone();
    let mut var = vec![T::zero(); mean.len()];
    for f in &e.coeffs[1..] {
        for (s, &c) in var.iter_mut().zip(f.values()) {
            *s += c * c;
        }
    }
    let std = Field::from_parts(*mean.grid(), mean.components(), var.into_iter().map(|v| v.sqrt()).collect());
    (mean, std)
}

/// Scalar coefficients of input `d`, which is affine in `z_d`: `mean + half_width z_d`.
pub fn input_coefficients<T: Scalar>(dist: &InputDistribution, basis: &PCBasis, d: usize) -> Vec<T> {
    let u = &dist.dims[d];
    let mut c = vec![T::zero(); basis.len()];
    c[0] = T::lit(u.mean);
    if basis.order >= 1 {
        c[basis.linear_index(d)] = T::lit(u.half_width() / 3f64.sqrt());
    }
    c
}

/// Input vector at a point of `[-1, 1]^dim`.
pub fn inputs_at<T: Scalar>(dist: &InputDistribution, z: &[f64]) -> Vec<T> {
    dist.dims.iter().zip(z).map(|(u, &t)| u.from_unit(T::lit(t))).collect()
}
