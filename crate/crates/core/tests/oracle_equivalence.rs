mod common;

use common::checks::*;

#[test]
fn quadrature_points_match_affine_map() {
    for sp in small_spaces() {
        check_quadrature(&sp).unwrap();
    }
}

#[test]
fn assembled_matrices_match_dense_assembly() {
    for (k, sp) in small_spaces().iter().enumerate() {
        check_matrices(sp, 11 + k as u64).unwrap();
    }
}

#[test]
fn every_scheme_step_matches_weak_form() {
    let mut seed = 0;
    for sp in small_spaces() {
        for (eq, sch) in COMBOS {
            for method in 1..=3 {
                for dt in [1e-3, 0.5] {
                    seed += 1;
                    check_step(&sp, eq, sch, method, dt, seed).unwrap();
                }
            }
        }
    }
}
