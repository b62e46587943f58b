//! Jacobi-preconditioned conjugate gradients and diagonally scaled BiCGSTAB.

use super::{dot, norm, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct IterativeResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual recomputed from `b - A x` after convergence.
    pub residual: f64,
}

fn check_system(a: &SparseMatrix, b: &[f64], x0: Option<&[f64]>) -> Result<()> {
    if a.n_rows() != a.n_cols() || b.len() != a.n_rows() {
        return Err(Error::Structural(format!(
            "iterative solve: {}x{} matrix with right-hand side of length {}",
            a.n_rows(),
            a.n_cols(),
            b.len()
        )));
    }
    if let Some(x0) = x0 {
        if x0.len() != b.len() {
            return Err(Error::Structural("initial guess has the wrong length".into()));
        }
    }
    Ok(())
}

fn inverse_diagonal(a: &SparseMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
        .collect()
}

/// Residual `‖b - A x‖ / ‖b‖` from a fresh mat-vec, never from the recurrence.
fn verified(a: &SparseMatrix, b: &[f64], x: Vec<f64>, iterations: usize, tol: f64, solver: &'static str) -> Result<IterativeResult> {
    let residual = a.relative_residual(&x, b);
    if residual.is_finite() && residual <= tol {
        Ok(IterativeResult { x, iterations, residual })
    } else {
        Err(Error::NotConverged {
            solver,
            iterations,
            residual,
        })
    }
}

/// Preconditioned CG for symmetric positive definite `a`.
pub fn solve_cg(a: &SparseMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<IterativeResult> {
    check_system(a, b, x0)?;
    let n = b.len();
    let nb = norm(b);
    if nb == 0.0 {
        return Ok(IterativeResult {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let dinv = inverse_diagonal(a);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r: Vec<f64> = if x0.is_some() {
        let ax = a.matvec(&x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    } else {
        b.to_vec()
    };
    if norm(&r) <= tol * nb {
        return verified(a, b, x, 0, tol, "cg");
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::NotConverged {
                solver: "cg",
                iterations: it,
                residual: norm(&r) / nb,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * nb {
            if a.relative_residual(&x, b) <= tol {
                return verified(a, b, x, it, tol, "cg");
            }
            // recurrence drifted from the true residual: restart from x
            let ax = a.matvec(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
                z[i] = r[i] * dinv[i];
                p[i] = z[i];
            }
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        solver: "cg",
        iterations: max_iter,
        residual: a.relative_residual(&x, b),
    })
}

/// BiCGSTAB on the row-scaled system `D^{-1} A x = D^{-1} b`, restarted on breakdown.
pub fn solve_bicgstab(a: &SparseMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<IterativeResult> {
    check_system(a, b, x0)?;
    let n = b.len();
    let nb = norm(b);
    if nb == 0.0 {
        return Ok(IterativeResult {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let dinv = inverse_diagonal(a);
    let op = |v: &[f64], out: &mut [f64]| {
        a.matvec_into(v, out);
        for (o, d) in out.iter_mut().zip(&dinv) {
            *o *= d;
        }
    };
    let bs: Vec<f64> = b.iter().zip(&dinv).map(|(bi, di)| bi * di).collect();
    let nbs = norm(&bs);
    // the scaled tolerance is tightened so the unscaled residual meets `tol`
    let tol_s = tol * 0.1;
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut tmp = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut it = 0;
    while it < max_iter {
        op(&x, &mut tmp);
        let mut r: Vec<f64> = bs.iter().zip(&tmp).map(|(bi, ai)| bi - ai).collect();
        if norm(&r) <= tol_s * nbs && a.relative_residual(&x, b) <= tol {
            return verified(a, b, x, it, tol, "bicgstab");
        }
        let r_hat = r.clone();
        let mut p = r.clone();
        let mut rho = dot(&r_hat, &r);
        loop {
            if it >= max_iter {
                break;
            }
            it += 1;
            op(&p, &mut v);
            let rv = dot(&r_hat, &v);
            if rv == 0.0 || !rv.is_finite() || rho == 0.0 {
                break;
            }
            let alpha = rho / rv;
            let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
            if norm(&s) <= tol_s * nbs {
                for i in 0..n {
                    x[i] += alpha * p[i];
                }
                break;
            }
            op(&s, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                break;
            }
            let omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * p[i] + omega * s[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm(&r) <= tol_s * nbs || omega == 0.0 {
                break;
            }
            let rho_new = dot(&r_hat, &r);
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        if a.relative_residual(&x, b) <= tol {
            return verified(a, b, x, it, tol, "bicgstab");
        }
    }
    Err(Error::NotConverged {
        solver: "bicgstab",
        iterations: it,
        residual: a.relative_residual(&x, b),
    })
}
