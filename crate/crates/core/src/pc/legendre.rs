//! Legendre polynomials and Gauss-Legendre rules on `[-1, 1]`.

use std::f64::consts::PI;

/// `P_0(x), ..., P_n(x)` by the three-term recurrence.
pub fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p
}

/// Orthonormal Legendre values `sqrt(2k + 1) P_k(x)` under the uniform probability measure.
pub fn orthonormal_all(n: usize, x: f64) -> Vec<f64> {
    legendre_all(n, x).into_iter().enumerate().map(|(k, v)| ((2 * k + 1) as f64).sqrt() * v).collect()
}

/// `q`-point Gauss-Legendre nodes (ascending) and weights summing to 1.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "a quadrature rule needs at least one node");
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        for _ in 0..100 {
            let all = legendre_all(q, x);
            let (p, pm1) = (all[q], all[q - 1]);
            let dp = qf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let all = legendre_all(q, x);
        let dp = qf * (x * all[q] - all[q - 1]) / (x * x - 1.0);
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    (nodes, weights)
}
