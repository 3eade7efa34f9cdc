use musc_up_core::rbf::{fit_interpolator, loo_predictions, RbfSystem};
use musc_up_core::{Error, Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> Grid<f64> {
    Grid::periodic_unit(0.25, 1.0).unwrap()
}

/// Field whose four values are `f(x) * (1, 2, -1, 0.5)`.
fn field_of(v: f64) -> Field<f64> {
    let scale = [1.0, 2.0, -1.0, 0.5];
    Field::new(grid(), 1, scale.iter().map(|s| s * v).collect()).unwrap()
}

fn random_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()
}

#[test]
fn affine_functions_are_reproduced() {
    let x = random_points(12, 1);
    let f = |p: &[f64]| 0.3 - 1.7 * p[0] + 2.2 * p[1];
    let y: Vec<Field<f64>> = x.iter().map(|p| field_of(f(p))).collect();
    let interp = fit_interpolator(&x, &y).unwrap();
    for p in random_points(50, 2) {
        let got = interp.predict(&p);
        let want = field_of(f(&p));
        for (g, w) in got.values().iter().zip(want.values()) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }
}

#[test]
fn interpolates_data_exactly() {
    let x = random_points(20, 3);
    let y: Vec<Field<f64>> = x.iter().map(|p| field_of((3.0 * p[0]).sin() * p[1])).collect();
    let interp = fit_interpolator(&x, &y).unwrap();
    for (p, f) in x.iter().zip(&y) {
        for (g, w) in interp.predict(p).values().iter().zip(f.values()) {
            assert!((g - w).abs() < 1e-10);
        }
    }
}

fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let (mut r, mut f) = (0.0, 1.0 / base as f64);
    while k > 0 {
        r += f * (k % base) as f64;
        k /= base;
        f /= base as f64;
    }
    r
}

#[test]
fn smooth_quadratic_held_out_error() {
    // 20 scattered centers on the unit square, corners included.
    let mut x: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
    x.extend((1..=16).map(|k| vec![radical_inverse(k, 2), radical_inverse(k, 3)]));
    let f = |p: &[f64]| 2.0 + p[0] * p[0] + 0.5 * p[0] * p[1] - p[1] * p[1];
    let y: Vec<Field<f64>> = x.iter().map(|p| field_of(f(p))).collect();
    let interp = fit_interpolator(&x, &y).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let p = [rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)];
        let g = interp.predict(&p).values()[0];
        assert!(((g - f(&p)) / f(&p)).abs() < 1e-2, "at {p:?}: {g} vs {}", f(&p));
    }
}

#[test]
fn leave_one_out_matches_explicit_refits_bitwise() {
    for &n in &[10usize, 25, 50] {
        let x = random_points(n, 10 + n as u64);
        let y: Vec<Field<f64>> = x.iter().map(|p| field_of((2.0 * p[0]).exp() - p[1] * p[1])).collect();
        let loo = loo_predictions(&x, &y).unwrap();
        assert_eq!(loo.len(), n);
        for i in 0..n {
            let xs: Vec<Vec<f64>> = x.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, p)| p.clone()).collect();
            let ys: Vec<Field<f64>> = y.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, f)| f.clone()).collect();
            let refit = fit_interpolator(&xs, &ys).unwrap().predict(&x[i]);
            assert_eq!(loo[i].values(), refit.values(), "N_mu={n}, fold {i}");
        }
    }
}

#[test]
fn isolated_point_has_the_largest_fold_error() {
    let mut x = random_points(30, 5);
    for p in &mut x {
        p[0] *= 0.3;
        p[1] *= 0.3;
    }
    x.push(vec![0.95, -0.9]);
    let f = |p: &[f64]| (4.0 * p[0]).sin() + p[1].powi(3);
    let y: Vec<Field<f64>> = x.iter().map(|p| field_of(f(p))).collect();
    let loo = loo_predictions(&x, &y).unwrap();
    let err: Vec<f64> = loo.iter().zip(&y).map(|(a, b)| (a.values()[0] - b.values()[0]).abs()).collect();
    let worst = err.iter().cloned().enumerate().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap().0;
    assert_eq!(worst, x.len() - 1);
}

#[test]
fn degenerate_center_sets_are_rejected() {
    let x = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    assert!(matches!(RbfSystem::new(&x), Err(Error::DuplicateCenters { first: 1, second: 3 })));
    let x = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
    assert!(matches!(RbfSystem::new(&x), Err(Error::TooFewSamples { .. })));
    let collinear = vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]];
    assert!(matches!(RbfSystem::new(&collinear), Err(Error::Singular { .. })));
}

#[test]
fn coefficients_sum_to_one() {
    let x = random_points(15, 6);
    let sys = RbfSystem::new(&x).unwrap();
    for p in random_points(10, 7) {
        let s: f64 = sys.coefficients(&p).iter().sum();
        assert!((s - 1.0).abs() < 1e-10);
    }
}

#[test]
fn single_precision_fields_are_supported() {
    let x: Vec<Vec<f32>> = random_points(10, 8).into_iter().map(|p| p.into_iter().map(|v| v as f32).collect()).collect();
    let g = Grid::<f32>::periodic_unit(1.0 / 3.0, 1.0).unwrap();
    let y: Vec<Field<f32>> = x.iter().map(|p| Field::new(g, 1, vec![p[0] + 2.0 * p[1], 1.0, 0.0]).unwrap()).collect();
    let got = fit_interpolator(&x, &y).unwrap().predict(&[0.1f32, -0.2]);
    assert!((got.values()[0] - (-0.3)).abs() < 1e-5);
    assert!((got.values()[1] - 1.0).abs() < 1e-5);
}

#[test]
fn leave_one_out_is_exact_on_affine_data() {
    let x = random_points(12, 9);
    let y: Vec<Field<f64>> = x.iter().map(|p| field_of(1.0 + p[0] - 3.0 * p[1])).collect();
    for (got, want) in loo_predictions(&x, &y).unwrap().iter().zip(&y) {
        for (g, w) in got.values().iter().zip(want.values()) {
            assert!((g - w).abs() < 1e-9 * w.abs().max(1.0));
        }
    }
}
