use std::f64::consts::PI;

use ieq_fem::fem::{build_space, quad_rule, FieldCoeffs};
use ieq_fem::mesh::{build_rect_mesh, Rect};
use ieq_fem::mms::{compute_rates, l2_error, mms_exact_ac, mms_exact_ch, mms_source_ac, mms_source_ch, MmsCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fourth-order five-point second derivative.
fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
}

/// Fourth-order first derivative.
fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn lap(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    d2(|s| f(s, y), x, h) + d2(|s| f(x, s), y, h)
}

#[test]
fn ch_source_annihilates_the_pde_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 0.02;
    for _ in 0..50 {
        let x = -PI + 4.0 * PI * rng.random::<f64>();
        let y = -PI + 4.0 * PI * rng.random::<f64>();
        let t = rng.random::<f64>();
        let u_t = d1(|s| mms_exact_ch(x, y, s), t, 1e-3);
        let w = |px: f64, py: f64| {
            let u = mms_exact_ch(px, py, t);
            -lap(&|a, b| mms_exact_ch(a, b, t), px, py, h) + u * u * u - u
        };
        let r = u_t - lap(&w, x, y, h) - mms_source_ch(x, y, t);
        assert!(r.abs() <= 1e-6, "residual {r:e} at ({x}, {y}, {t})");
    }
}

#[test]
fn ac_source_annihilates_the_pde_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-2;
    for _ in 0..50 {
        let x = -1.0 + 2.0 * rng.random::<f64>();
        let y = -1.0 + 2.0 * rng.random::<f64>();
        let t = rng.random::<f64>();
        let u = mms_exact_ac(x, y, t);
        let u_t = d1(|s| mms_exact_ac(x, y, s), t, 1e-3);
        let r = u_t - lap(&|a, b| mms_exact_ac(a, b, t), x, y, h) + (u * u * u - u) - mms_source_ac(x, y, t);
        assert!(r.abs() <= 1e-6, "residual {r:e} at ({x}, {y}, {t})");
    }
}

#[test]
fn exact_solution_values() {
    assert_eq!(mms_exact_ch(0.0, 0.0, 0.7), 0.0);
    assert!((mms_exact_ch(PI, PI, 0.0) - 0.1).abs() < 1e-16);
    assert_eq!(mms_exact_ac(0.0, 0.0, 0.0), 1.0);
}

#[test]
fn exact_solutions_satisfy_neumann_condition() {
    assert!(MmsCase::cahn_hilliard().neumann_defect(0.0, 200) < 1e-10);
    assert!(MmsCase::allen_cahn().neumann_defect(0.0, 200) < 1e-10);
}

#[test]
fn l2_error_examples() {
    let sp = build_space(build_rect_mesh(Rect::square(0.0, 1.0), 4, 4).unwrap(), 2, quad_rule(6).unwrap()).unwrap();
    let f = |x: f64, y: f64, _t: f64| x * x + x * y - 0.5 * y;
    let c = sp.interpolate(|x, y| f(x, y, 0.0));
    assert!(l2_error(&sp, &c, f, 0.0) <= 1e-13);
    let zero = FieldCoeffs::constant(sp.n_dofs, 0.0);
    assert!((l2_error(&sp, &zero, |_, _, _| 1.0, 0.0) - 1.0).abs() < 1e-14);

    // independent value: int (x^2 - I_h x^2)^2 over the unit square, P1, for the ratio
    let err = |n: usize| {
        let sp = build_space(build_rect_mesh(Rect::square(0.0, 1.0), n, n).unwrap(), 1, quad_rule(6).unwrap()).unwrap();
        let c = sp.interpolate(|x, _| x * x);
        l2_error(&sp, &c, |x, _, _| x * x, 0.0)
    };
    let ratio = err(8) / err(16);
    assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    // P1 interpolant of x^2 on a uniform grid has error (x - x_i)(x - x_{i+1}) in x; its L2 norm is h^2 / sqrt(30)
    let h: f64 = 1.0 / 16.0;
    assert!((err(16) - h * h / 30f64.sqrt()).abs() < 1e-12);
}

#[test]
fn rate_examples() {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close(&compute_rates(&[1.0, 0.5, 0.25], 2.0).unwrap(), &[1.0, 1.0]));
    assert!(close(&compute_rates(&[1.0, 0.25, 0.0625], 2.0).unwrap(), &[2.0, 2.0]));
    assert!(close(&compute_rates(&[1.0, 0.125], 2.0).unwrap(), &[3.0]));
    assert!(compute_rates(&[1.0, 0.0], 2.0).is_err());
    assert!(compute_rates(&[1.0], 2.0).is_err());
}
