//! Sparse LU via faer, with symbolic reuse and iterative refinement.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

use super::{norm, CsrPattern, SparseMatrix};
use crate::error::{Error, Result};

/// Target relative residual after refinement.
pub const DIRECT_TOL: f64 = 1e-12;
const MAX_REFINE: usize = 3;

/// Caches the symbolic factorization across solves with an unchanged pattern.
///
/// In lagged mode the last numeric factorization is also kept and used to
/// precondition refinement on later matrices with the same pattern; a fresh
/// factorization is computed when that refinement stalls.
#[derive(Default)]
pub struct DirectSolver {
    cached: Option<(Arc<CsrPattern>, SymbolicLu<usize>)>,
    numeric: Option<(Arc<CsrPattern>, Lu<usize, f64>)>,
    tol: Option<f64>,
    lagged: bool,
}

/// Refinement sweeps allowed against a lagged factorization.
const MAX_LAGGED: usize = 12;
/// Required per-sweep residual reduction against a lagged factorization.
const LAGGED_RATE: f64 = 0.3;

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solver that reuses its last numeric factorization while it still contracts.
    pub fn lagged() -> Self {
        DirectSolver {
            lagged: true,
            ..Self::default()
        }
    }

    /// Overrides the post-refinement residual tolerance.
    pub fn with_tolerance(tol: f64) -> Self {
        DirectSolver {
            tol: Some(tol),
            ..Self::default()
        }
    }

    fn symbolic(&mut self, a: &SparseMatrix) -> Result<SymbolicLu<usize>> {
        if let Some((p, sym)) = &self.cached {
            if Arc::ptr_eq(p, a.pattern()) || **p == **a.pattern() {
                return Ok(sym.clone());
            }
        }
        let p = a.pattern();
        // CSR arrays of A are the CSC arrays of A^T
        let view = SymbolicSparseColMatRef::new_checked(p.n_cols, p.n_rows, &p.row_ptr, None, &p.col_idx);
        let sym = SymbolicLu::try_new(view)
            .map_err(|e| Error::Structural(format!("symbolic factorization failed: {e:?}")))?;
        self.cached = Some((p.clone(), sym.clone()));
        Ok(sym)
    }

    fn check(a: &SparseMatrix, b: &[f64]) -> Result<()> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::Structural(format!(
                "direct solve needs a square matrix, got {}x{}",
                a.n_rows(),
                a.n_cols()
            )));
        }
        if b.len() != a.n_rows() {
            return Err(Error::Structural(format!(
                "right-hand side has length {}, matrix has {} rows",
                b.len(),
                a.n_rows()
            )));
        }
        if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural("non-finite entries in linear system".into()));
        }
        Ok(())
    }

    fn factor(&mut self, a: &SparseMatrix) -> Result<Lu<usize, f64>> {
        faer::set_global_parallelism(faer::Par::Seq);
        let n = a.n_rows();
        let sym = self.symbolic(a)?;
        let p = a.pattern();
        let view = SymbolicSparseColMatRef::new_checked(n, n, &p.row_ptr, None, &p.col_idx);
        let at = SparseColMatRef::new(view, a.values());
        Lu::try_new_with_symbolic(sym, at).map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::Singular { pivot_row: index },
            LuError::Generic(g) => Error::Structural(format!("numeric factorization failed: {g:?}")),
        })
    }

    pub fn solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_counted(a, b).map(|(x, _)| x)
    }

    /// Solve returning the number of refinement sweeps taken.
    pub fn solve_counted(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, usize)> {
        Self::check(a, b)?;
        if a.n_rows() == 0 {
            return Ok((Vec::new(), 0));
        }
        let tol = self.tol.unwrap_or(DIRECT_TOL);
        if self.lagged {
            if let Some((p, lu)) = &self.numeric {
                if Arc::ptr_eq(p, a.pattern()) || **p == **a.pattern() {
                    if let Ok(done) = refine(lu, a, b, tol, MAX_LAGGED, Some(LAGGED_RATE)) {
                        return Ok(done);
                    }
                }
            }
        }
        let lu = self.factor(a)?;
        let out = refine(&lu, a, b, tol, MAX_REFINE, None);
        if self.lagged {
            self.numeric = Some((a.pattern().clone(), lu));
        }
        out.map_err(|(res, x)| {
            if res.is_finite() {
                Error::ResidualCheck { residual: res, tolerance: tol }
            } else {
                // a zero pivot shows up as inf/nan in the solution
                Error::Singular {
                    pivot_row: x.iter().position(|v| !v.is_finite()).unwrap_or(0),
                }
            }
        })
    }
}

fn solve_with(lu: &Lu<usize, f64>, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    let n = x.len();
    lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
    x
}

/// Refinement `x += LU^{-1}(b - A x)`. Fails with the last residual and iterate when the
/// tolerance is not reached within `sweeps` or a sweep reduces the residual by less than `rate`.
/// Without `rate` (a fresh factorization) sweeps continue past `tol` while they halve the residual.
fn refine(
    lu: &Lu<usize, f64>,
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    sweeps: usize,
    rate: Option<f64>,
) -> std::result::Result<(Vec<f64>, usize), (f64, Vec<f64>)> {
    let nb = norm(b);
    let scale = if nb > 0.0 { nb } else { 1.0 };
    let mut x = solve_with(lu, b);
    let mut prev = f64::INFINITY;
    for k in 0..=sweeps {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let res = norm(&r) / scale;
        if !res.is_finite() {
            return Err((res, x));
        }
        if res <= tol && (rate.is_some() || k == sweeps || res >= 0.5 * prev) {
            return Ok((x, k));
        }
        if res > tol && k > 0 && rate.is_none() && res >= prev {
            return Err((res, x));
        }
        if let Some(q) = rate {
            if k > 0 && res > q * prev {
                return Err((res, x));
            }
        }
        prev = res;
        let d = solve_with(lu, &r);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
    }
    let res = a.relative_residual(&x, b);
    Err((res, x))
}

/// One-shot direct solve with residual ≤ 1e-12 after refinement.
pub fn solve_direct(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    DirectSolver::new().solve(a, b)
}
