//! Manufactured solutions, error norms, convergence rates and the
//! projected-energy condition monitor.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::quadrature::quad_rule;
use crate::fem::{build_space, FeSpace, FieldCoeffs};
use crate::ieq::{Method, Scheme};
use crate::mesh::{build_rect_mesh, Rect};
use crate::potential::{Equation, EquationCoeffs, Form, Mobility, PotentialSpec};
use crate::scheme::{LinearSolverKind, StepConfig, Stepper};

/// Cahn-Hilliard exact solution `u = mu = 0.1 e^{-t/4} sin(x/2) sin(y/2)`.
pub fn mms_exact_ch(x: f64, y: f64, t: f64) -> f64 {
    0.1 * (-t / 4.0).exp() * (x / 2.0).sin() * (y / 2.0).sin()
}

/// Source for the standard Cahn-Hilliard form with `eps`, unit mobility and the double well.
pub fn mms_source_ch_eps(x: f64, y: f64, t: f64, eps: f64) -> f64 {
    let amp = 0.1 * (-t / 4.0).exp();
    let mu = amp * (x / 2.0).sin() * (y / 2.0).sin();
    let nu = (amp * (x / 2.0).cos() * (y / 2.0).sin()).powi(2) + (amp * (x / 2.0).sin() * (y / 2.0).cos()).powi(2);
    -mu / 4.0 + eps * eps * mu / 4.0 - 3.0 * mu * nu / 2.0 + 3.0 * mu.powi(3) / 2.0 - mu / 2.0
}

/// Source with `eps = 1`.
pub fn mms_source_ch(x: f64, y: f64, t: f64) -> f64 {
    mms_source_ch_eps(x, y, t, 1.0)
}

/// Allen-Cahn exact solution `u = e^t cos(pi x) cos(pi y)`.
pub fn mms_exact_ac(x: f64, y: f64, t: f64) -> f64 {
    t.exp() * (PI * x).cos() * (PI * y).cos()
}

/// `s = u_t - Lap u + F'(u) = 2 pi^2 u + u^3` for the rescaled form with `eps = 1`.
pub fn mms_source_ac(x: f64, y: f64, t: f64) -> f64 {
    let u = mms_exact_ac(x, y, t);
    2.0 * PI * PI * u + u * u * u
}

pub type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct MmsCase {
    pub equation: Equation,
    pub form: Form,
    pub eps: f64,
    pub b: f64,
    pub domain: Rect,
    pub exact: ScalarFn,
    pub source: ScalarFn,
}

impl MmsCase {
    pub fn cahn_hilliard() -> Self {
        MmsCase {
            equation: Equation::CahnHilliard,
            form: Form::Standard,
            eps: 1.0,
            b: 1.0,
            domain: Rect::square(-PI, 3.0 * PI),
            exact: Arc::new(mms_exact_ch),
            source: Arc::new(mms_source_ch),
        }
    }

    pub fn allen_cahn() -> Self {
        MmsCase {
            equation: Equation::AllenCahn,
            form: Form::Rescaled,
            eps: 1.0,
            b: 1.0,
            domain: Rect::square(-1.0, 1.0),
            exact: Arc::new(mms_exact_ac),
            source: Arc::new(mms_source_ac),
        }
    }

    pub fn for_equation(eq: Equation) -> Self {
        match eq {
            Equation::CahnHilliard => Self::cahn_hilliard(),
            Equation::AllenCahn => Self::allen_cahn(),
        }
    }

    /// Largest normal derivative of the exact solution on the boundary at `t`,
    /// by central differences on `samples` points per side.
    pub fn neumann_defect(&self, t: f64, samples: usize) -> f64 {
        let d = self.domain;
        let h = 1e-6;
        let u = &self.exact;
        let mut worst: f64 = 0.0;
        for k in 0..=samples {
            let s = k as f64 / samples as f64;
            let x = d.x0 + s * (d.x1 - d.x0);
            let y = d.y0 + s * (d.y1 - d.y0);
            for (px, py, dir) in [(d.x0, y, 0), (d.x1, y, 0), (x, d.y0, 1), (x, d.y1, 1)] {
                let g = if dir == 0 {
                    (u(px + h, py, t) - u(px - h, py, t)) / (2.0 * h)
                } else {
                    (u(px, py + h, t) - u(px, py - h, t)) / (2.0 * h)
                };
                worst = worst.max(g.abs());
            }
        }
        worst
    }
}

/// How two-step schemes obtain their first history level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MmsStart {
    /// First step with BDF1.
    #[default]
    Bootstrap,
    /// `u^{-1}` from the exact solution at `-dt`.
    ExactHistory,
    /// `u^{-1} = u^0`.
    Repeat,
}

impl std::str::FromStr for MmsStart {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(MmsStart::Bootstrap),
            "exact" => Ok(MmsStart::ExactHistory),
            "repeat" => Ok(MmsStart::Repeat),
            _ => Err(Error::config("start", format!("expected bootstrap, exact or repeat, got {s:?}"))),
        }
    }
}

/// One manufactured-solution run.
#[derive(Debug, Clone, Copy)]
pub struct MmsRun {
    pub scheme: Scheme,
    pub method: Method,
    pub degree: usize,
    pub n: usize,
    pub quad_degree: usize,
    pub dt: f64,
    pub t_end: f64,
    pub solver: LinearSolverKind,
    pub start: MmsStart,
    /// Record the energy pair at every time level.
    pub track_energy: bool,
}

impl MmsRun {
    pub fn new(scheme: Scheme, method: Method, degree: usize, n: usize, dt: f64, t_end: f64) -> Self {
        MmsRun {
            scheme,
            method,
            degree,
            n,
            quad_degree: crate::fem::DEFAULT_QUAD_DEGREE,
            dt,
            t_end,
            solver: LinearSolverKind::Auto,
            start: MmsStart::Bootstrap,
            track_energy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsResult {
    pub error: f64,
    pub steps: usize,
    /// `(exact, projected)` energies per time level; empty unless tracked.
    pub energies: Vec<(f64, f64)>,
    pub max_diss_residual: f64,
}

impl MmsCase {
    pub fn build_stepper(&self, run: &MmsRun) -> Result<Stepper> {
        let mesh = build_rect_mesh(self.domain, run.n, run.n)?;
        let space = Arc::new(build_space(mesh, run.degree, quad_rule(run.quad_degree)?)?);
        let coeffs = EquationCoeffs::for_form(self.equation, self.form, self.eps, Mobility::Constant(1.0))?;
        let mut cfg = StepConfig::new(run.dt, run.method, run.scheme, coeffs, PotentialSpec::double_well(self.b)?);
        cfg.solver = run.solver;
        cfg.bdf2_bootstrap = run.start == MmsStart::Bootstrap;
        cfg.source = Some(Arc::clone(&self.source));
        Stepper::new(space, self.equation, cfg)
    }

    /// Runs from the projected exact data to `t_end` and returns the final L2 error.
    pub fn run(&self, run: &MmsRun) -> Result<MmsResult> {
        let steps = (run.t_end / run.dt).round() as usize;
        if steps == 0 || ((steps as f64) * run.dt - run.t_end).abs() > 1e-9 * run.t_end {
            return Err(Error::config("time.dt", format!("t_end {} is not a multiple of dt {}", run.t_end, run.dt)));
        }
        let mut stepper = self.build_stepper(run)?;
        let exact = Arc::clone(&self.exact);
        let mut st = match run.start {
            MmsStart::ExactHistory => stepper.init_two_level(|x, y| exact(x, y, 0.0), |x, y| exact(x, y, -run.dt))?,
            _ => stepper.init_from_fn(|x, y| exact(x, y, 0.0))?,
        };
        let mut energies = Vec::with_capacity(steps + 1);
        let mut max_res: f64 = 0.0;
        let record = |stepper: &Stepper, st: &crate::scheme::State, out: &mut Vec<(f64, f64)>| -> Result<()> {
            if !run.track_energy {
                return Ok(());
            }
            let r = stepper.report(st)?;
            out.push((r.e_exact, r.e_projected.unwrap_or(r.e_total)));
            Ok(())
        };
        record(&stepper, &st, &mut energies)?;
        for _ in 0..steps {
            let (next, diag) = stepper.step(&st)?;
            max_res = max_res.max(diag.diss_residual.abs() / (1.0 + diag.e_start.abs()));
            st = next;
            record(&stepper, &st, &mut energies)?;
        }
        let t = steps as f64 * run.dt;
        Ok(MmsResult {
            error: l2_error(stepper.space(), &st.u, |x, y, t| exact(x, y, t), t),
            steps,
            energies,
            max_diss_residual: max_res,
        })
    }
}

/// `sqrt(sum w_q det_j (u_h(x_q) - exact(x_q, t))^2)`
pub fn l2_error(space: &FeSpace, coeffs: &FieldCoeffs, exact: impl Fn(f64, f64, f64) -> f64, t: f64) -> f64 {
    let uh = space.eval_at_quad(coeffs);
    let ex = space.sample(|x, y| exact(x, y, t));
    let diff = uh.lincomb(1.0, &ex, -1.0);
    space.norm_q(&diff)
}

/// `rate_i = log(e_i / e_{i+1}) / log(factor)`
pub fn compute_rates(errors: &[f64], factor: f64) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::Diagnostic("need at least two errors to compute rates".into()));
    }
    if !(factor > 1.0) {
        return Err(Error::Diagnostic(format!("refinement factor must exceed 1, got {factor}")));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Diagnostic(format!("errors must be positive and finite, got {e}")));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).ln() / factor.ln()).collect())
}

/// Per-step margin of the projected-energy condition for a trace of
/// `(exact energy, projected energy)` pairs; the last entry has no successor.
pub fn projection_condition_margin(trace: &[(f64, f64)]) -> Vec<Option<f64>> {
    (0..trace.len())
        .map(|n| {
            if n == 0 || n + 1 >= trace.len() {
                return None;
            }
            Some(crate::ieq::condition_margin(trace[n - 1].0, trace[n].0, trace[n + 1].0, trace[n].1))
        })
        .collect()
}

/// Steps `n -> n+1` inside windows of nonnegative margin where the projected
/// energy increased by more than `tol (1 + |P^n|)`.
pub fn margin_counterexamples(margins: &[Option<f64>], projected: &[f64], tol: f64) -> Vec<usize> {
    let ok = |k: usize| margins.get(k).copied().flatten().is_some_and(|m| m >= 0.0);
    (0..projected.len().saturating_sub(1))
        .filter(|&n| ok(n) && ok(n + 1))
        .filter(|&n| projected[n + 1] > projected[n] + tol * (1.0 + projected[n].abs()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values() {
        assert_eq!(mms_exact_ch(0.0, 0.0, 0.7), 0.0);
        assert!((mms_exact_ch(PI, PI, 0.0) - 0.1).abs() < 1e-16);
        assert_eq!(mms_exact_ac(0.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn neumann_compatible() {
        assert!(MmsCase::cahn_hilliard().neumann_defect(0.0, 50) < 1e-10);
        assert!(MmsCase::allen_cahn().neumann_defect(0.0, 50) < 1e-9);
    }

    #[test]
    fn rates() {
        let r = compute_rates(&[1.0, 0.5, 0.25], 2.0).unwrap();
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let r = compute_rates(&[1.0, 0.25, 0.0625], 2.0).unwrap();
        assert!(r.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let r = compute_rates(&[1.0, 0.125], 2.0).unwrap();
        assert!((r[0] - 3.0).abs() < 1e-12);
        assert!(compute_rates(&[1.0], 2.0).is_err());
        assert!(compute_rates(&[1.0, 0.0], 2.0).is_err());
        assert!(compute_rates(&[1.0, 0.5], 1.0).is_err());
    }

    #[test]
    fn margins_and_counterexamples() {
        let trace = [(3.0, 3.0), (2.0, 2.0), (1.5, 1.5), (1.4, 1.4)];
        let m = projection_condition_margin(&trace);
        assert_eq!(m[0], None);
        assert_eq!(m[1], Some(0.5));
        assert!(m[3].is_none());
        let proj: Vec<f64> = trace.iter().map(|t| t.1).collect();
        assert!(margin_counterexamples(&m, &proj, 1e-12).is_empty());
        let bumped = [3.0, 2.0, 2.5, 1.4];
        let m = vec![None, Some(0.1), Some(0.1), None];
        assert_eq!(margin_counterexamples(&m, &bumped, 1e-12), vec![1]);
    }
}
