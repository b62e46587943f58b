//! Cahn-Hilliard steppers: BDF1 and BDF2 with Methods 1, 2 and 3.
//!
//! Unknowns are `(u, w)` for Methods 2/3 and `(u, w, U_h)` for Method 1.
//! Rows, with `a` the time coefficient and `ubar` the history combination:
//!
//! ```text
//! M2/M3:  a G x + D_M w                        = a G ubar + (s, .)
//!         -(c_grad D + c_pot/2 G_H2) x + G w   = c_pot (H Ubar, .) - c_pot/2 G_H2 ubar
//!
//! M1:     a G x + D_M w                        = a G ubar + (s, .)
//!         -c_grad D x + G w - c_pot G_H U      = 0
//!         -a/2 G_H x + a G U                   = a G Ubar - a/2 G_H ubar
//! ```

use crate::error::{Error, Result};
use crate::ieq::Scheme;
use crate::scheme::{axpy_into, solve_general, SolveOutput, State, StepDiagnostics, StepSystem, Stepper};
use crate::sparse::{compose_blocks, BlockSpec, DirectSolver, SparseMatrix};

pub(crate) fn solve_m23(
    sys: &StepSystem<'_>,
    g_h2: &SparseMatrix,
    h_load: &[f64],
    direct: &mut DirectSolver,
) -> Result<SolveOutput> {
    let n = sys.ubar.len();
    let lower = sys.stiffness.lincomb(sys.c_grad, g_h2, 0.5 * sys.c_pot)?;
    let spec = BlockSpec::new(2, 2)
        .set(0, 0, sys.mass, sys.a)
        .set(0, 1, sys.stiffness_m, 1.0)
        .set(1, 0, &lower, -1.0)
        .set(1, 1, sys.mass, 1.0);
    let k = compose_blocks(&spec)?;

    let mut rhs = vec![0.0; 2 * n];
    let g_ubar = sys.mass.matvec(sys.ubar);
    let (top, bottom) = rhs.split_at_mut(n);
    axpy_into(top, sys.a, &g_ubar);
    if let Some(s) = sys.source {
        axpy_into(top, 1.0, s);
    }
    axpy_into(bottom, sys.c_pot, h_load);
    axpy_into(bottom, -0.5 * sys.c_pot, &g_h2.matvec(sys.ubar));

    let (sol, iterations) = solve_general(&k, &rhs, sys.solver, direct)?;
    Ok(SolveOutput {
        x: sol[..n].to_vec(),
        w: Some(sol[n..].to_vec()),
        aux: None,
        iterations,
    })
}

pub(crate) fn solve_m1(
    sys: &StepSystem<'_>,
    g_h: &SparseMatrix,
    vbar: &[f64],
    direct: &mut DirectSolver,
) -> Result<SolveOutput> {
    let n = sys.ubar.len();
    let a = sys.a;
    let spec = BlockSpec::new(3, 3)
        .set(0, 0, sys.mass, a)
        .set(0, 1, sys.stiffness_m, 1.0)
        .set(1, 0, sys.stiffness, -sys.c_grad)
        .set(1, 1, sys.mass, 1.0)
        .set(1, 2, g_h, -sys.c_pot)
        .set(2, 0, g_h, -0.5 * a)
        .set(2, 2, sys.mass, a);
    let k = compose_blocks(&spec)?;

    let mut rhs = vec![0.0; 3 * n];
    axpy_into(&mut rhs[..n], a, &sys.mass.matvec(sys.ubar));
    if let Some(s) = sys.source {
        axpy_into(&mut rhs[..n], 1.0, s);
    }
    axpy_into(&mut rhs[2 * n..], a, &sys.mass.matvec(vbar));
    axpy_into(&mut rhs[2 * n..], -0.5 * a, &g_h.matvec(sys.ubar));

    let (sol, iterations) = solve_general(&k, &rhs, sys.solver, direct)?;
    Ok(SolveOutput {
        x: sol[..n].to_vec(),
        w: Some(sol[n..2 * n].to_vec()),
        aux: Some(sol[2 * n..].to_vec()),
        iterations,
    })
}

fn check(stepper: &Stepper, scheme: Scheme) -> Result<()> {
    if stepper.equation() != crate::potential::Equation::CahnHilliard {
        return Err(Error::Structural("Cahn-Hilliard step called on an Allen-Cahn stepper".into()));
    }
    if stepper.config().scheme != scheme {
        return Err(Error::Structural(format!(
            "{scheme} step called on a stepper configured for {}",
            stepper.config().scheme
        )));
    }
    Ok(())
}

/// One BDF1 step for the configured method.
pub fn ch_step_bdf1(stepper: &mut Stepper, state: &State) -> Result<(State, StepDiagnostics)> {
    check(stepper, Scheme::Bdf1)?;
    stepper.step(state)
}

/// One BDF2 step; a BDF1 step when the state has no previous level (bootstrap start).
pub fn ch_step_bdf2(stepper: &mut Stepper, state: &State) -> Result<(State, StepDiagnostics)> {
    check(stepper, Scheme::Bdf2)?;
    stepper.step(state)
}
