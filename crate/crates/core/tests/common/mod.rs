#![allow(dead_code)]

use musc_up_core::models::reaction_diffusion::{analytic_solution_1d, Params1D};
use musc_up_core::{Grid, InputDistribution};
use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss-Legendre rule on `[-1, 1]` with weights summing to 1, from the Jacobi matrix eigenproblem.
pub fn golub_welsch(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(q, q);
    for k in 1..q {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> =
        (0..q).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Orthonormal Legendre `sqrt(2n+1) P_n(x)` for the uniform measure on `[-1, 1]`.
pub fn legendre_orthonormal(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (2.0 * n as f64 + 1.0).sqrt() * p1
}

pub fn case1_dist(n_micro: usize) -> InputDistribution {
    let k = n_micro as f64 * 0.405 / 1e-4;
    InputDistribution::uniform_relative(&[0.405, k], 0.1).unwrap()
}

/// Mean and std of the continuum solution at `t` under `dist`, by 32x32 tensor quadrature.
pub fn case1_oracle(grid: &Grid<f64>, t: f64, dist: &InputDistribution) -> (Vec<f64>, Vec<f64>) {
    let (z, w) = golub_welsch(32);
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for p in 0..grid.points() {
        let (x, _) = grid.coord(p);
        let (mut s1, mut s2) = (0.0, 0.0);
        for a in 0..32 {
            for b in 0..32 {
                let d = dist.dims[0].mean + dist.dims[0].half_width() * z[a];
                let k = dist.dims[1].mean + dist.dims[1].half_width() * z[b];
                let u = analytic_solution_1d(x, t, Params1D { d, k });
                s1 += w[a] * w[b] * u;
                s2 += w[a] * w[b] * u * u;
            }
        }
        mean.push(s1);
        std.push((s2 - s1 * s1).max(0.0).sqrt());
    }
    (mean, std)
}

pub fn mean_rel(est: &[f64], reference: &[f64]) -> f64 {
    est.iter().zip(reference).map(|(a, b)| ((a - b) / b).abs()).sum::<f64>() / reference.len() as f64
}
