//! Total-degree orthonormal Legendre bases with their Galerkin product tensor.

use serde::{Deserialize, Serialize};

use super::legendre::{gauss_legendre, orthonormal_all};
use crate::error::{Error, Result};

const TENSOR_ZERO: f64 = 1e-13;

/// Multi-indices of total degree `<= order` in `dim` variables, by degree then
/// with earlier variables carrying more of the degree.
pub fn total_degree_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    fn fill(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=left).rev() {
            prefix.push(a);
            fill(dim, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        out.push(Vec::new());
        return out;
    }
    for deg in 0..=order {
        fill(dim, deg, &mut Vec::new(), &mut out);
    }
    out
}

/// Tensor Gauss-Legendre rule on `[-1, 1]^dim` with weights summing to 1.
pub fn tensor_rule(dim: usize, q: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (x, w) = gauss_legendre(q);
    let count = q.pow(dim as u32);
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for mut k in 0..count {
        let mut node = Vec::with_capacity(dim);
        let mut weight = 1.0;
        for _ in 0..dim {
            node.push(x[k % q]);
            weight *= w[k % q];
            k /= q;
        }
        nodes.push(node);
        weights.push(weight);
    }
    (nodes, weights)
}

/// Non-zero entry of the product tensor `C[i][j][l] = <psi_i psi_j psi_l>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleEntry {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PCBasis {
    pub dim: usize,
    pub order: usize,
    pub indices: Vec<Vec<usize>>,
    /// Projection rule level per dimension.
    pub level: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `psi[node][basis]` at the projection nodes.
    pub psi: Vec<Vec<f64>>,
    triple: Vec<f64>,
    /// Non-zero tensor entries ordered by `i`, then `j`, then `l`.
    pub sparse: Vec<TripleEntry>,
}

impl PCBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Values of all basis functions at `z` in `[-1, 1]^dim`.
    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        eval_basis(&self.indices, self.order, z)
    }

    pub fn triple(&self, i: usize, j: usize, l: usize) -> f64 {
        let p = self.len();
        self.triple[(i * p + j) * p + l]
    }

    /// Index of the degree-one polynomial in variable `d`.
    pub fn linear_index(&self, d: usize) -> usize {
        self.indices.iter().position(|a| a.iter().enumerate().all(|(k, &v)| v == usize::from(k == d))).expect("order >= 1")
    }

    /// Gram matrix under the projection rule.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let p = self.len();
        let mut g = vec![vec![0.0; p]; p];
        for (psi, &w) in self.psi.iter().zip(&self.weights) {
            for i in 0..p {
                for j in 0..p {
                    g[i][j] += w * psi[i] * psi[j];
                }
            }
        }
        g
    }
}

fn eval_basis(indices: &[Vec<usize>], order: usize, z: &[f64]) -> Vec<f64> {
    let per_dim: Vec<Vec<f64>> = z.iter().map(|&t| orthonormal_all(order, t)).collect();
    indices.iter().map(|a| a.iter().enumerate().map(|(d, &k)| per_dim[d][k]).product()).collect()
}

/// Basis of total degree `order` in `dim` inputs with a `q`-point projection rule.
///
/// The product tensor uses a rule with at least `ceil((3 order + 1) / 2)` points, which
/// integrates every triple product exactly.
pub fn build_basis(dim: usize, order: usize, q: usize) -> Result<PCBasis> {
    if q < order + 1 {
        return Err(Error::BasisMismatch(format!("quadrature level {q} below order + 1 = {}", order + 1)));
    }
    let indices = total_degree_indices(dim, order);
    let p = indices.len();
    let (nodes, weights) = tensor_rule(dim, q);
    let psi: Vec<Vec<f64>> = nodes.iter().map(|z| eval_basis(&indices, order, z)).collect();

    let q_tensor = q.max((3 * order).div_ceil(2) + 1);
    let (tn, tw) = tensor_rule(dim, q_tensor);
    let tpsi: Vec<Vec<f64>> = tn.iter().map(|z| eval_basis(&indices, order, z)).collect();
    let mut triple = vec![0.0; p * p * p];
    for i in 0..p {
        for j in i..p {
            for l in j..p {
                let mut v: f64 = tpsi.iter().zip(&tw).map(|(s, &w)| w * s[i] * s[j] * s[l]).sum();
                if v.abs() < TENSOR_ZERO {
                    v = 0.0;
                }
                for (a, b, c) in [(i, j, l), (i, l, j), (j, i, l), (j, l, i), (l, i, j), (l, j, i)] {
                    triple[(a * p + b) * p + c] = v;
                }
            }
        }
    }
    let mut sparse = Vec::new();
    for i in 0..p {
        for j in 0..p {
            for l in 0..p {
                let value = triple[(i * p + j) * p + l];
                if value != 0.0 {
                    sparse.push(TripleEntry { i, j, l, value });
                }
            }
        }
    }
    Ok(PCBasis { dim, order, indices, level: q, nodes, weights, psi, triple, sparse })
}
