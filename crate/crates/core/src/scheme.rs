//! The time-stepping engine shared by the Cahn-Hilliard and Allen-Cahn schemes.
//!
//! Every scheme is written as one linear solve for an unknown `x` around a
//! base value `ubar`, with time coefficient `a`:
//!
//! | scheme | `a`        | `x`          | `ubar`              | `H` frozen at         |
//! |--------|------------|--------------|---------------------|-----------------------|
//! | BDF1   | `1/dt`     | `u^{n+1}`    | `u^n`               | `u^n`                 |
//! | BDF2   | `3/(2 dt)` | `u^{n+1}`    | `(4u^n - u^{n-1})/3`| `2u^n - u^{n-1}`      |
//! | CN     | `2/dt`     | midpoint     | `u^n`               | `3/2 u^n - 1/2 u^{n-1}`|
//!
//! and the auxiliary update `U = Ubar + 1/2 H (x - ubar)` with `Ubar` built
//! from the stepping representation of `U` in the same way.

use std::sync::Arc;

use crate::assembly::{assemble_mass, assemble_stiffness};
use crate::error::{Error, Result};
use crate::fem::{FeSpace, FieldCoeffs, QuadField};
use crate::ieq::{
    dissipation_residual, extrapolate, AuxState, AuxValue, DissipationTerms, EnergyFunctional, EnergyReport,
    ExtrapKind, Method, Scheme,
};
use crate::potential::{h_at, init_aux, Equation, EquationCoeffs, Mobility, PotentialSpec};
use crate::sparse::{dot, DirectSolver, SparseMatrix};
use crate::{ac, ch};

pub type SourceFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Relative residual for iterative step solves.
pub const STEP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Sparse LU for coupled/nonsymmetric systems, refactored only when refinement
    /// against the previous factorization stalls; CG for the SPD Allen-Cahn systems.
    #[default]
    Auto,
    /// Fresh sparse LU every solve.
    Direct,
    /// CG for SPD systems, diagonally scaled BiCGSTAB otherwise.
    Iterative,
}

#[derive(Clone)]
pub struct StepConfig {
    pub dt: f64,
    pub method: Method,
    pub scheme: Scheme,
    pub eq: EquationCoeffs,
    pub potential: PotentialSpec,
    pub solver: LinearSolverKind,
    /// Take the first BDF2/CN step with BDF1 instead of setting `u^{-1} = u^0`.
    pub bdf2_bootstrap: bool,
    pub source: Option<SourceFn>,
    /// Compute `E(u, Pi U)` for Method 2 (one extra projection per energy).
    pub track_projection: bool,
}

impl std::fmt::Debug for StepConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StepConfig")
            .field("dt", &self.dt)
            .field("method", &self.method)
            .field("scheme", &self.scheme)
            .field("eq", &self.eq)
            .field("potential", &self.potential)
            .field("solver", &self.solver)
            .field("bdf2_bootstrap", &self.bdf2_bootstrap)
            .field("source", &self.source.as_ref().map(|_| ".."))
            .field("track_projection", &self.track_projection)
            .finish()
    }
}

impl StepConfig {
    pub fn new(dt: f64, method: Method, scheme: Scheme, eq: EquationCoeffs, potential: PotentialSpec) -> Self {
        StepConfig {
            dt,
            method,
            scheme,
            eq,
            potential,
            solver: LinearSolverKind::Auto,
            bdf2_bootstrap: false,
            source: None,
            track_projection: true,
        }
    }
}

/// Solution state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: FieldCoeffs,
    /// Chemical potential (Cahn-Hilliard only, absent before the first step).
    pub w: Option<FieldCoeffs>,
    pub aux: AuxState,
    pub u_prev: Option<FieldCoeffs>,
    pub aux_prev: Option<AuxState>,
    pub step: usize,
    pub time: f64,
}

pub type ChState = State;
pub type AcState = State;

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Scheme actually applied (BDF1 for a bootstrap step).
    pub scheme_used: Scheme,
    pub e_start: f64,
    /// End energy with the unprojected `U^{n+1}`.
    pub e_end: f64,
    pub terms: DissipationTerms,
    pub diss_residual: f64,
    /// `E(u, U) - E(u, Pi U)` in the scheme's energy (Method 3 only).
    pub m3_slack: Option<f64>,
    /// Magnitude of the quadratic terms entering `m3_slack`.
    pub m3_scale: Option<f64>,
    pub linsolve_iters: usize,
}

/// Inputs of the step's linear system, shared by both equations.
pub(crate) struct StepSystem<'a> {
    pub a: f64,
    pub mass: &'a SparseMatrix,
    pub stiffness: &'a SparseMatrix,
    pub stiffness_m: &'a SparseMatrix,
    pub c_grad: f64,
    pub c_pot: f64,
    pub ubar: &'a [f64],
    pub source: Option<&'a [f64]>,
    pub solver: LinearSolverKind,
}

pub(crate) struct SolveOutput {
    pub x: Vec<f64>,
    pub w: Option<Vec<f64>>,
    /// Method 1 nodal auxiliary unknown.
    pub aux: Option<Vec<f64>>,
    pub iterations: usize,
}

pub struct Stepper {
    space: Arc<FeSpace>,
    equation: Equation,
    cfg: StepConfig,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    mass_weights: Vec<f64>,
    direct: DirectSolver,
}

impl Stepper {
    pub fn new(space: Arc<FeSpace>, equation: Equation, cfg: StepConfig) -> Result<Self> {
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(Error::config("time.dt", format!("must be positive, got {}", cfg.dt)));
        }
        if equation == Equation::CahnHilliard && cfg.scheme == Scheme::Cn {
            return Err(Error::config(
                "time.scheme",
                "Crank-Nicolson is only available for the Allen-Cahn equation",
            ));
        }
        let mass = assemble_mass(&space, None)?;
        let stiffness = assemble_stiffness(&space, None)?;
        let ones = vec![1.0; space.n_dofs];
        let mass_weights = mass.matvec(&ones);
        let direct = match cfg.solver {
            LinearSolverKind::Auto => DirectSolver::lagged(),
            _ => DirectSolver::new(),
        };
        Ok(Stepper {
            space,
            equation,
            cfg,
            mass,
            stiffness,
            mass_weights,
            direct,
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn equation(&self) -> Equation {
        self.equation
    }

    pub fn mass_matrix(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness_matrix(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn energy_functional(&self) -> EnergyFunctional<'_> {
        EnergyFunctional::new(&self.space, &self.stiffness, &self.cfg.eq, self.cfg.potential.b)
    }

    pub fn project(&self, qf: &QuadField) -> Result<FieldCoeffs> {
        self.space.l2_project(&self.mass, qf)
    }

    /// `int u`
    pub fn mass_of(&self, u: &FieldCoeffs) -> f64 {
        dot(&self.mass_weights, &u.values)
    }

    /// Initial state from nodal data `u_h0` and samples `u0_q` of the initial function.
    ///
    /// Method 1 starts from `U_h = Pi sqrt(F(u0) + B)`, Methods 2/3 from the
    /// samples themselves (Method 3 also keeps their projection).
    pub fn init_state(&self, u_h0: FieldCoeffs, u0_q: &QuadField) -> Result<State> {
        self.space.check_coeffs(&u_h0)?;
        self.space.check_quad(u0_q)?;
        let samples = init_aux(&self.cfg.potential, u0_q)?;
        let aux = match self.cfg.method {
            Method::M1 => AuxState::M1 {
                u_h: self.project(&samples)?,
            },
            Method::M2 => AuxState::M2 { u_q: samples },
            Method::M3 => {
                let shadow = self.project(&samples)?;
                AuxState::M3 { u_q: samples, shadow }
            }
        };
        let history = self.cfg.scheme != Scheme::Bdf1 && !self.cfg.bdf2_bootstrap;
        Ok(State {
            u_prev: history.then(|| u_h0.clone()),
            aux_prev: history.then(|| aux.clone()),
            u: u_h0,
            w: None,
            aux,
            step: 0,
            time: 0.0,
        })
    }

    /// Initial state from a function of position: `u_h^0 = Pi u0`.
    pub fn init_from_fn(&self, u0: impl Fn(f64, f64) -> f64) -> Result<State> {
        let samples = self.space.sample(u0);
        let u_h0 = self.project(&samples)?;
        self.init_state(u_h0, &samples)
    }

    /// Two-level start for BDF2/CN from `u0` and the data `u_prev` one step earlier.
    pub fn init_two_level(&self, u0: impl Fn(f64, f64) -> f64, u_prev: impl Fn(f64, f64) -> f64) -> Result<State> {
        let mut st = self.init_from_fn(u0)?;
        if self.cfg.scheme != Scheme::Bdf1 {
            let prev = self.init_from_fn(u_prev)?;
            st.u_prev = Some(prev.u);
            st.aux_prev = Some(prev.aux);
        }
        Ok(st)
    }

    /// Initial state from nodal data, sampled through the finite-element function.
    pub fn init_from_nodal(&self, u_h0: FieldCoeffs) -> Result<State> {
        self.space.check_coeffs(&u_h0)?;
        let samples = self.space.eval_at_quad(&u_h0);
        self.init_state(u_h0, &samples)
    }

    pub fn report(&self, st: &State) -> Result<EnergyReport> {
        let ef = self.energy_functional();
        let sp = &*self.space;
        let u = &st.u.values;
        let base_q = st.aux.base().at_quad(sp);
        let exact_q = st.aux.exact_at_quad(sp);
        let parts = ef.parts(u, &base_q);
        let e_exact = ef.eval(u, &exact_q);
        let track = self.cfg.track_projection;
        let e_projected = match st.aux.method() {
            Method::M2 if track => Some(ef.eval(u, &sp.eval_at_quad(&self.project(&exact_q)?))),
            Method::M2 => None,
            _ => Some(parts.total()),
        };
        let (mut e_bdf2, mut e_bdf2_exact) = (None, None);
        if self.cfg.scheme == Scheme::Bdf2 {
            match (&st.u_prev, &st.aux_prev) {
                (Some(up), Some(ap)) => {
                    let up = &up.values;
                    let exact_prev = ap.exact_at_quad(sp);
                    e_bdf2_exact = Some(ef.bdf2(u, up, &exact_q, &exact_prev));
                    e_bdf2 = match st.aux.method() {
                        Method::M1 => e_bdf2_exact,
                        Method::M3 => Some(ef.bdf2(u, up, &base_q, &ap.base().at_quad(sp))),
                        Method::M2 if track => {
                            let p_n = sp.eval_at_quad(&self.project(&exact_q)?);
                            let star = exact_q.lincomb(2.0, &exact_prev, -1.0);
                            let p_star = sp.eval_at_quad(&self.project(&star)?);
                            let us = extrapolate(u, up, ExtrapKind::Bdf2);
                            Some(0.5 * (ef.eval(u, &p_n) + ef.eval(&us, &p_star)))
                        }
                        Method::M2 => None,
                    };
                }
                // bootstrap start: the averaged energy with u^{-1} = u^0
                _ => {
                    e_bdf2 = e_projected;
                    e_bdf2_exact = Some(e_exact);
                }
            }
        }
        Ok(EnergyReport {
            e_total: parts.total(),
            e_grad: parts.e_grad,
            e_aux: parts.e_aux,
            e_exact,
            e_projected,
            e_bdf2,
            e_bdf2_exact,
            mass: self.mass_of(&st.u),
        })
    }

    /// Advances one step with the configured scheme.
    pub fn step(&mut self, st: &State) -> Result<(State, StepDiagnostics)> {
        let scheme = match (self.cfg.scheme, &st.u_prev) {
            (Scheme::Bdf1, _) | (_, None) => Scheme::Bdf1,
            (s, Some(_)) => s,
        };
        self.step_with(st, scheme)
    }

    pub(crate) fn step_with(&mut self, st: &State, scheme: Scheme) -> Result<(State, StepDiagnostics)> {
        let sp = Arc::clone(&self.space);
        let sp = &*sp;
        sp.check_coeffs(&st.u)?;
        if st.aux.method() != self.cfg.method {
            return Err(Error::Structural(format!(
                "state holds a method-{} auxiliary variable, stepper is configured for method {}",
                st.aux.method(),
                self.cfg.method
            )));
        }
        let dt = self.cfg.dt;
        let (c_grad, c_pot) = (self.cfg.eq.c_grad, self.cfg.eq.c_pot);
        let un = &st.u.values;
        let v_n = st.aux.base();
        let history = match scheme {
            Scheme::Bdf1 => None,
            _ => match (&st.u_prev, &st.aux_prev) {
                (Some(up), Some(ap)) => Some((up.values.clone(), ap.base())),
                _ => {
                    return Err(Error::Structural(format!(
                        "{scheme} step needs the previous time level"
                    )))
                }
            },
        };

        let (a, ubar, ustar, vbar) = match (scheme, &history) {
            (Scheme::Bdf1, _) => (1.0 / dt, un.clone(), un.clone(), v_n.clone()),
            (Scheme::Bdf2, Some((up, vp))) => (
                1.5 / dt,
                un.iter().zip(up).map(|(x, y)| (4.0 * x - y) / 3.0).collect(),
                extrapolate(un, up, ExtrapKind::Bdf2),
                v_n.lincomb(4.0 / 3.0, vp, -1.0 / 3.0),
            ),
            (Scheme::Cn, Some((up, _))) => (2.0 / dt, un.clone(), extrapolate(un, up, ExtrapKind::Cn), v_n.clone()),
            _ => unreachable!("history checked above"),
        };

        let ustar_q = sp.eval_at_quad(&FieldCoeffs::new(ustar));
        let h = h_at(&self.cfg.potential, &ustar_q)?;
        let t_next = (st.step + 1) as f64 * dt;
        let t_src = if scheme == Scheme::Cn { st.time + 0.5 * dt } else { t_next };
        let source = self
            .cfg
            .source
            .as_ref()
            .map(|s| sp.load_vector(&sp.sample(|x, y| s(x, y, t_src))));
        let stiffness_m = match &self.cfg.eq.mobility {
            Mobility::Constant(m) => self.stiffness.scaled(*m),
            Mobility::Function(f) => assemble_stiffness(sp, Some(&ustar_q.map(|v| f(v))))?,
        };
        let vbar_q = vbar.at_quad(sp);

        let sys = StepSystem {
            a,
            mass: &self.mass,
            stiffness: &self.stiffness,
            stiffness_m: &stiffness_m,
            c_grad,
            c_pot,
            ubar: &ubar,
            source: source.as_deref(),
            solver: self.cfg.solver,
        };
        let (out, aux_new) = match self.cfg.method {
            Method::M1 => {
                let g_h = assemble_mass(sp, Some(&h))?;
                let vbar_h = match &vbar {
                    AuxValue::Nodal(c) => c,
                    AuxValue::Quad(_) => unreachable!("method 1 steps from nodal values"),
                };
                let out = match self.equation {
                    Equation::CahnHilliard => ch::solve_m1(&sys, &g_h, &vbar_h.values, &mut self.direct)?,
                    Equation::AllenCahn => ac::solve_m1(&sys, &g_h, &vbar_h.values, &mut self.direct)?,
                };
                let aux = AuxValue::Nodal(FieldCoeffs::new(out.aux.clone().expect("method 1 aux")));
                (out, aux)
            }
            Method::M2 | Method::M3 => {
                let h2 = h.map(|v| v * v);
                let g_h2 = assemble_mass(sp, Some(&h2))?;
                let h_load = sp.load_vector(&h.zip_map(&vbar_q, |x, y| x * y));
                let out = match self.equation {
                    Equation::CahnHilliard => ch::solve_m23(&sys, &g_h2, &h_load, &mut self.direct)?,
                    Equation::AllenCahn => ac::solve_m23(&sys, &g_h2, &h_load, &mut self.direct)?,
                };
                let x_q = sp.eval_at_quad(&FieldCoeffs::new(out.x.clone()));
                let ubar_q = sp.eval_at_quad(&FieldCoeffs::new(ubar.clone()));
                let aux = crate::ieq::update_aux_pointwise(&vbar_q, &h, &x_q, &ubar_q, 0.5);
                (out, AuxValue::Quad(aux))
            }
        };
        let mut iterations = out.iterations;

        // endpoint recovery
        let (u_next, aux_next_val) = if scheme == Scheme::Cn {
            let u: Vec<f64> = out.x.iter().zip(un).map(|(m, u)| 2.0 * m - u).collect();
            let v_n_repr = match (&aux_new, &v_n) {
                (AuxValue::Quad(_), AuxValue::Nodal(c)) => AuxValue::Quad(sp.eval_at_quad(c)),
                (_, v) => v.clone(),
            };
            (u, aux_new.lincomb(2.0, &v_n_repr, -1.0))
        } else {
            (out.x.clone(), aux_new)
        };
        let aux_next = match (self.cfg.method, aux_next_val) {
            (Method::M1, AuxValue::Nodal(u_h)) => AuxState::M1 { u_h },
            (Method::M2, AuxValue::Quad(u_q)) => AuxState::M2 { u_q },
            (Method::M3, AuxValue::Quad(u_q)) => {
                let b = sp.load_vector(&u_q);
                let res = crate::sparse::solve_cg(&self.mass, &b, None, crate::fem::PROJECTION_TOL, 20 * sp.n_dofs + 100)?;
                iterations += res.iterations;
                AuxState::M3 {
                    u_q,
                    shadow: FieldCoeffs::new(res.x),
                }
            }
            _ => unreachable!("representation follows the method"),
        };

        // energy identity
        let ef = self.energy_functional();
        let v_n_q = v_n.at_quad(sp);
        let u_new_q = aux_next.exact_at_quad(sp);
        let du: Vec<f64> = u_next.iter().zip(un).map(|(x, y)| x - y).collect();
        let norm_g = |v: &[f64]| self.mass.bilinear(v, v);
        let norm_d = |v: &[f64]| self.stiffness.bilinear(v, v);
        let src_dot = |v: &[f64]| source.as_ref().map_or(0.0, |s| dot(s, v));

        let (e_start, e_end, second) = match (scheme, &history) {
            (Scheme::Bdf2, Some((up, vp))) => {
                let vp_q = vp.at_quad(sp);
                let dd: Vec<f64> = (0..un.len()).map(|i| u_next[i] - 2.0 * un[i] + up[i]).collect();
                let dv = u_new_q.zip_map(&v_n_q, |x, y| x - 2.0 * y).lincomb(1.0, &vp_q, 1.0);
                let e_start = ef.bdf2(un, up, &v_n_q, &vp_q);
                let e_end = ef.bdf2(&u_next, un, &u_new_q, &v_n_q);
                (e_start, e_end, Some((up.clone(), dd, dv)))
            }
            _ => (ef.eval(un, &v_n_q), ef.eval(&u_next, &u_new_q), None),
        };
        let du_aux = u_new_q.lincomb(1.0, &v_n_q, -1.0);
        let terms = match (self.equation, scheme) {
            (Equation::CahnHilliard, Scheme::Bdf1) => {
                let w = out.w.as_ref().expect("CH step returns w");
                DissipationTerms {
                    dissipation: c_pot * sp.inner_q(&du_aux, &du_aux)
                        + dt * stiffness_m.bilinear(w, w)
                        + 0.5 * c_grad * norm_d(&du),
                    source_work: dt * src_dot(w),
                }
            }
            (Equation::CahnHilliard, _) => {
                let w = out.w.as_ref().expect("CH step returns w");
                let (_, dd, dv) = second.as_ref().expect("BDF2 history");
                DissipationTerms {
                    dissipation: dt * stiffness_m.bilinear(w, w)
                        + 0.25 * c_grad * norm_d(dd)
                        + 0.5 * c_pot * sp.inner_q(dv, dv),
                    source_work: dt * src_dot(w),
                }
            }
            (Equation::AllenCahn, Scheme::Bdf1) => DissipationTerms {
                dissipation: norm_g(&du) / dt + 0.5 * c_grad * norm_d(&du) + c_pot * sp.inner_q(&du_aux, &du_aux),
                source_work: src_dot(&du),
            },
            (Equation::AllenCahn, Scheme::Cn) => DissipationTerms {
                dissipation: norm_g(&du) / dt,
                source_work: src_dot(&du),
            },
            (Equation::AllenCahn, Scheme::Bdf2) => {
                let (up, dd, dv) = second.as_ref().expect("BDF2 history");
                let tau: Vec<f64> = (0..un.len()).map(|i| 3.0 * u_next[i] - 4.0 * un[i] + up[i]).collect();
                DissipationTerms {
                    dissipation: norm_g(&tau) / (4.0 * dt)
                        + 0.25 * c_grad * norm_d(dd)
                        + 0.5 * c_pot * sp.inner_q(dv, dv),
                    source_work: 0.5 * src_dot(&tau),
                }
            }
        };
        let diss_residual = dissipation_residual(e_start, e_end, &terms);

        let (m3_slack, m3_scale) = match &aux_next {
            AuxState::M3 { u_q, shadow } => {
                let p_q = sp.eval_at_quad(shadow);
                let gap = |x: &QuadField, y: &QuadField| sp.inner_q(x, x) - sp.inner_q(y, y);
                let plain = gap(u_q, &p_q);
                if self.cfg.scheme == Scheme::Bdf2 {
                    let s_u = u_q.lincomb(2.0, &v_n_q, -1.0);
                    let s_p = p_q.lincomb(2.0, &v_n_q, -1.0);
                    let scale = 0.5 * c_pot.abs() * (sp.inner_q(u_q, u_q) + sp.inner_q(&s_u, &s_u));
                    (Some(0.5 * c_pot * (plain + gap(&s_u, &s_p))), Some(scale))
                } else {
                    (Some(c_pot * plain), Some(c_pot.abs() * sp.inner_q(u_q, u_q)))
                }
            }
            _ => (None, None),
        };

        let next = State {
            u: FieldCoeffs::new(u_next),
            w: out.w.map(FieldCoeffs::new),
            aux: aux_next,
            u_prev: (self.cfg.scheme != Scheme::Bdf1).then(|| st.u.clone()),
            aux_prev: (self.cfg.scheme != Scheme::Bdf1).then(|| st.aux.clone()),
            step: st.step + 1,
            time: t_next,
        };
        Ok((
            next,
            StepDiagnostics {
                scheme_used: scheme,
                e_start,
                e_end,
                terms,
                diss_residual,
                m3_slack,
                m3_scale,
                linsolve_iters: iterations,
            },
        ))
    }
}

fn max_iterations(n: usize) -> usize {
    10 * n + 1000
}

/// Solves a general (possibly indefinite, nonsymmetric) step system.
pub(crate) fn solve_general(
    k: &SparseMatrix,
    rhs: &[f64],
    kind: LinearSolverKind,
    direct: &mut DirectSolver,
) -> Result<(Vec<f64>, usize)> {
    match kind {
        LinearSolverKind::Auto | LinearSolverKind::Direct => direct.solve_counted(k, rhs),
        LinearSolverKind::Iterative => {
            let r = crate::sparse::solve_bicgstab(k, rhs, None, STEP_TOL, max_iterations(rhs.len()))?;
            Ok((r.x, r.iterations))
        }
    }
}

/// Solves a symmetric positive definite step system.
pub(crate) fn solve_spd(
    k: &SparseMatrix,
    rhs: &[f64],
    kind: LinearSolverKind,
    direct: &mut DirectSolver,
) -> Result<(Vec<f64>, usize)> {
    match kind {
        LinearSolverKind::Direct => direct.solve_counted(k, rhs),
        LinearSolverKind::Auto | LinearSolverKind::Iterative => {
            let r = crate::sparse::solve_cg(k, rhs, None, STEP_TOL, max_iterations(rhs.len()))?;
            Ok((r.x, r.iterations))
        }
    }
}

pub(crate) fn axpy_into(out: &mut [f64], alpha: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}
