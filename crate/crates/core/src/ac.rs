//! Allen-Cahn steppers: BDF1, Crank-Nicolson and BDF2 with Methods 1, 2 and 3.
//!
//! ```text
//! M2/M3:  (a G + c_grad D + c_pot/2 G_H2) x = a G ubar - c_pot (H Ubar, .) + c_pot/2 G_H2 ubar + (s, .)
//!
//! M1:     (a G + c_grad D) x + c_pot G_H U  = a G ubar + (s, .)
//!         -a/2 G_H x + a G U                = a G Ubar - a/2 G_H ubar
//! ```
//!
//! Crank-Nicolson solves for midpoint values.

use crate::error::{Error, Result};
use crate::ieq::Scheme;
use crate::scheme::{axpy_into, solve_general, solve_spd, SolveOutput, State, StepDiagnostics, StepSystem, Stepper};
use crate::sparse::{compose_blocks, BlockSpec, DirectSolver, SparseMatrix};

pub(crate) fn solve_m23(
    sys: &StepSystem<'_>,
    g_h2: &SparseMatrix,
    h_load: &[f64],
    direct: &mut DirectSolver,
) -> Result<SolveOutput> {
    let k = sys
        .mass
        .lincomb(sys.a, sys.stiffness, sys.c_grad)?
        .lincomb(1.0, g_h2, 0.5 * sys.c_pot)?;
    let mut rhs = sys.mass.matvec(sys.ubar);
    rhs.iter_mut().for_each(|v| *v *= sys.a);
    axpy_into(&mut rhs, -sys.c_pot, h_load);
    axpy_into(&mut rhs, 0.5 * sys.c_pot, &g_h2.matvec(sys.ubar));
    if let Some(s) = sys.source {
        axpy_into(&mut rhs, 1.0, s);
    }
    let (x, iterations) = solve_spd(&k, &rhs, sys.solver, direct)?;
    Ok(SolveOutput {
        x,
        w: None,
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
    let top_left = sys.mass.lincomb(a, sys.stiffness, sys.c_grad)?;
    let spec = BlockSpec::new(2, 2)
        .set(0, 0, &top_left, 1.0)
        .set(0, 1, g_h, sys.c_pot)
        .set(1, 0, g_h, -0.5 * a)
        .set(1, 1, sys.mass, a);
    let k = compose_blocks(&spec)?;

    let mut rhs = vec![0.0; 2 * n];
    axpy_into(&mut rhs[..n], a, &sys.mass.matvec(sys.ubar));
    if let Some(s) = sys.source {
        axpy_into(&mut rhs[..n], 1.0, s);
    }
    axpy_into(&mut rhs[n..], a, &sys.mass.matvec(vbar));
    axpy_into(&mut rhs[n..], -0.5 * a, &g_h.matvec(sys.ubar));

    let (sol, iterations) = solve_general(&k, &rhs, sys.solver, direct)?;
    Ok(SolveOutput {
        x: sol[..n].to_vec(),
        w: None,
        aux: Some(sol[n..].to_vec()),
        iterations,
    })
}

fn check(stepper: &Stepper, scheme: Scheme) -> Result<()> {
    if stepper.equation() != crate::potential::Equation::AllenCahn {
        return Err(Error::Structural("Allen-Cahn step called on a Cahn-Hilliard stepper".into()));
    }
    if stepper.config().scheme != scheme {
        return Err(Error::Structural(format!(
            "{scheme} step called on a stepper configured for {}",
            stepper.config().scheme
        )));
    }
    Ok(())
}

pub fn ac_step_bdf1(stepper: &mut Stepper, state: &State) -> Result<(State, StepDiagnostics)> {
    check(stepper, Scheme::Bdf1)?;
    stepper.step(state)
}

/// One Crank-Nicolson step; a BDF1 step when the state has no previous level.
pub fn ac_step_cn(stepper: &mut Stepper, state: &State) -> Result<(State, StepDiagnostics)> {
    check(stepper, Scheme::Cn)?;
    stepper.step(state)
}

pub fn ac_step_bdf2(stepper: &mut Stepper, state: &State) -> Result<(State, StepDiagnostics)> {
    check(stepper, Scheme::Bdf2)?;
    stepper.step(state)
}
