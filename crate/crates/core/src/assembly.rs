//! Mass, stiffness and load assembly on a shared CSR pattern.
//!
//! Element contributions are scattered directly into the value array of the
//! space's precomputed pattern. With more than one assembly thread, each
//! thread accumulates a private value array over a contiguous element range
//! and the arrays are summed in thread order; results then differ from the
//! serial sum in the last bits.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::Result;
use crate::fem::{FeSpace, QuadField};
use crate::sparse::SparseMatrix;

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Number of threads for element loops (1 = deterministic serial order).
pub fn set_assembly_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn assembly_threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

fn accumulate(space: &FeSpace, kernel: impl Fn(usize, &mut [f64]) + Sync) -> Vec<f64> {
    let nnz = space.pattern().nnz();
    let n_elems = space.n_elems();
    let m = space.n_loc() * space.n_loc();
    let run = |range: std::ops::Range<usize>| {
        let mut values = vec![0.0; nnz];
        let mut local = vec![0.0; m];
        for e in range {
            local.iter_mut().for_each(|v| *v = 0.0);
            kernel(e, &mut local);
            for (&pos, &v) in space.scatter(e).iter().zip(&local) {
                values[pos] += v;
            }
        }
        values
    };
    let threads = assembly_threads().min(n_elems.max(1));
    if threads <= 1 {
        return run(0..n_elems);
    }
    let chunk = n_elems.div_ceil(threads);
    let parts: Vec<Vec<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let lo = (t * chunk).min(n_elems);
                let hi = ((t + 1) * chunk).min(n_elems);
                let run = &run;
                s.spawn(move || run(lo..hi))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("assembly thread")).collect()
    });
    let mut values = vec![0.0; nnz];
    for p in parts {
        for (v, x) in values.iter_mut().zip(p) {
            *v += x;
        }
    }
    values
}

/// `M_ij = sum w_q det_j weight phi_i phi_j`
pub fn assemble_mass(space: &FeSpace, weight: Option<&QuadField>) -> Result<SparseMatrix> {
    if let Some(w) = weight {
        space.check_quad(w)?;
    }
    let n = space.n_loc();
    let n_q = space.n_q();
    let values = accumulate(space, |e, local| {
        for q in 0..n_q {
            let mut c = space.quad_weight(e, q);
            if let Some(w) = weight {
                c *= w.get(e, q);
            }
            let phi = space.basis_row(q);
            for i in 0..n {
                let ci = c * phi[i];
                for j in 0..n {
                    local[i * n + j] += ci * phi[j];
                }
            }
        }
    });
    SparseMatrix::new(space.pattern().clone(), values)
}

/// `S_ij = sum w_q det_j weight grad phi_i . grad phi_j`
pub fn assemble_stiffness(space: &FeSpace, weight: Option<&QuadField>) -> Result<SparseMatrix> {
    if let Some(w) = weight {
        space.check_quad(w)?;
    }
    let n = space.n_loc();
    let n_q = space.n_q();
    let values = accumulate(space, |e, local| {
        let g = space.geom(e);
        let mut grads = vec![[0.0; 2]; n];
        for q in 0..n_q {
            let mut c = space.quad_weight(e, q);
            if let Some(w) = weight {
                c *= w.get(e, q);
            }
            for (gi, rg) in grads.iter_mut().zip(space.ref_grad_row(q)) {
                *gi = g.grad(*rg);
            }
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += c * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
    });
    SparseMatrix::new(space.pattern().clone(), values)
}

/// `b_i = sum w_q det_j qf phi_i`
pub fn assemble_load(space: &FeSpace, qf: &QuadField) -> Result<Vec<f64>> {
    space.check_quad(qf)?;
    Ok(space.load_vector(qf))
}

/// Matrices of one step: the constant pair plus the per-step weighted ones.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub mass_h: Option<SparseMatrix>,
    pub mass_h2: Option<SparseMatrix>,
    pub stiffness_m: Option<SparseMatrix>,
}

impl AssembledOperators {
    pub fn new(space: &FeSpace) -> Result<Self> {
        Ok(AssembledOperators {
            mass: assemble_mass(space, None)?,
            stiffness: assemble_stiffness(space, None)?,
            mass_h: None,
            mass_h2: None,
            stiffness_m: None,
        })
    }
}
