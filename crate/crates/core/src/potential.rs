//! Bulk potentials, the IEQ transform `H = F' / sqrt(F + B)` and equation coefficients.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{FieldCoeffs, QuadField};

pub const DEFAULT_CLAMP_DELTA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// `F = (u^2 - 1)^2 / 4`
    DoubleWell,
    /// `F = theta/2 (u ln u + (1-u) ln(1-u)) + theta_c/2 u (1-u)`
    FloryHuggins { theta: f64, theta_c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub b: f64,
    pub clamp_delta: f64,
}

impl PotentialSpec {
    pub fn double_well(b: f64) -> Result<Self> {
        Self::new(PotentialKind::DoubleWell, b, DEFAULT_CLAMP_DELTA)
    }

    pub fn flory_huggins(theta: f64, theta_c: f64, b: f64) -> Result<Self> {
        Self::new(PotentialKind::FloryHuggins { theta, theta_c }, b, DEFAULT_CLAMP_DELTA)
    }

    /// Validates parameters and checks `F + B > 0` on a sampling of the admissible range.
    pub fn new(kind: PotentialKind, b: f64, clamp_delta: f64) -> Result<Self> {
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::config("problem.B", format!("must be finite and nonnegative, got {b}")));
        }
        let spec = PotentialSpec { kind, b, clamp_delta };
        let samples: Vec<f64> = match kind {
            PotentialKind::DoubleWell => vec![-1.0, 1.0],
            PotentialKind::FloryHuggins { theta, theta_c } => {
                if !(theta.is_finite() && theta > 0.0 && theta_c.is_finite() && theta_c > 0.0) {
                    return Err(Error::config("problem.theta", "theta and theta_c must be positive"));
                }
                if !(clamp_delta > 0.0 && clamp_delta < 0.5) {
                    return Err(Error::config("problem.clamp_delta", "must lie in (0, 1/2)"));
                }
                let n = 20_000;
                (0..=n)
                    .map(|i| clamp_delta + (1.0 - 2.0 * clamp_delta) * i as f64 / n as f64)
                    .collect()
            }
        };
        // double well: F >= 0 with minimum 0 at the wells
        for u in samples {
            let r = spec.f_eval(u) + b;
            if !(r > 0.0) {
                return Err(Error::config(
                    "problem.B",
                    format!("F(u) + B = {r} is not positive at u = {u}; increase B"),
                ));
            }
        }
        Ok(spec)
    }

    fn clamp(&self, u: f64) -> f64 {
        match self.kind {
            PotentialKind::DoubleWell => u,
            PotentialKind::FloryHuggins { .. } => u.clamp(self.clamp_delta, 1.0 - self.clamp_delta),
        }
    }

    pub fn f_eval(&self, u: f64) -> f64 {
        let u = self.clamp(u);
        match self.kind {
            PotentialKind::DoubleWell => 0.25 * (u * u - 1.0).powi(2),
            PotentialKind::FloryHuggins { theta, theta_c } => {
                0.5 * theta * (u * u.ln() + (1.0 - u) * (1.0 - u).ln()) + 0.5 * theta_c * u * (1.0 - u)
            }
        }
    }

    pub fn f_prime(&self, u: f64) -> f64 {
        let u = self.clamp(u);
        match self.kind {
            PotentialKind::DoubleWell => u * u * u - u,
            PotentialKind::FloryHuggins { theta, theta_c } => {
                0.5 * theta * (u.ln() - (1.0 - u).ln()) + 0.5 * theta_c * (1.0 - 2.0 * u)
            }
        }
    }

    /// `sqrt(F(u) + B)`
    pub fn aux_eval(&self, u: f64) -> Result<f64> {
        let r = self.f_eval(u) + self.b;
        if r > 0.0 && r.is_finite() {
            Ok(r.sqrt())
        } else {
            Err(Error::Domain {
                u,
                b: self.b,
                radicand: r,
            })
        }
    }

    /// `F'(u) / sqrt(F(u) + B)`
    pub fn h_eval(&self, u: f64) -> Result<f64> {
        Ok(self.f_prime(u) / self.aux_eval(u)?)
    }
}

/// `sqrt(F(u0) + B)` at every quadrature sample.
pub fn init_aux(p: &PotentialSpec, u0: &QuadField) -> Result<QuadField> {
    u0.try_map(|u| p.aux_eval(u))
}

/// `sqrt(F(u0) + B)` at every nodal coefficient.
pub fn init_aux_nodal(p: &PotentialSpec, u0: &FieldCoeffs) -> Result<FieldCoeffs> {
    Ok(FieldCoeffs::new(u0.values.iter().map(|&u| p.aux_eval(u)).collect::<Result<_>>()?))
}

pub fn h_at(p: &PotentialSpec, u: &QuadField) -> Result<QuadField> {
    u.try_map(|v| p.h_eval(v))
}

#[derive(Clone)]
pub enum Mobility {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Mobility {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Mobility::Constant(m) => *m,
            Mobility::Function(f) => f(u),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Mobility::Constant(m) => Some(*m),
            Mobility::Function(_) => None,
        }
    }
}

impl fmt::Debug for Mobility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mobility::Constant(m) => write!(f, "Constant({m})"),
            Mobility::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    CahnHilliard,
    AllenCahn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Standard,
    Rescaled,
}

#[derive(Debug, Clone)]
pub struct EquationCoeffs {
    pub c_grad: f64,
    pub c_pot: f64,
    pub mobility: Mobility,
}

impl EquationCoeffs {
    pub fn new(c_grad: f64, c_pot: f64, mobility: Mobility) -> Result<Self> {
        if !(c_grad > 0.0 && c_grad.is_finite()) {
            return Err(Error::config("problem.epsilon", format!("gradient coefficient must be positive, got {c_grad}")));
        }
        if !(c_pot > 0.0 && c_pot.is_finite()) {
            return Err(Error::config("problem.epsilon", format!("potential coefficient must be positive, got {c_pot}")));
        }
        if let Mobility::Constant(m) = mobility {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::config("problem.mobility", format!("must be nonnegative, got {m}")));
            }
        }
        Ok(EquationCoeffs { c_grad, c_pot, mobility })
    }

    /// Coefficients of the standard or rescaled form of either equation.
    pub fn for_form(eq: Equation, form: Form, eps: f64, mobility: Mobility) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::config("problem.epsilon", format!("must be positive, got {eps}")));
        }
        let (c_grad, c_pot) = match (eq, form) {
            (_, Form::Standard) => (eps * eps, 1.0),
            (Equation::CahnHilliard, Form::Rescaled) => (eps, 1.0 / eps),
            (Equation::AllenCahn, Form::Rescaled) => (1.0, 1.0 / (eps * eps)),
        };
        Self::new(c_grad, c_pot, mobility)
    }
}
