//! Auxiliary-variable representations, extrapolation and discrete energies.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{FeSpace, FieldCoeffs, QuadField};
use crate::potential::EquationCoeffs;
use crate::sparse::SparseMatrix;

/// Where the auxiliary variable `U = sqrt(F(u) + B)` lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// `U_h` in the finite-element space; monolithic coupled solve.
    M1,
    /// `U` at quadrature points only.
    M2,
    /// `U` at quadrature points, projected onto the space after every step.
    M3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Bdf1,
    Bdf2,
    Cn,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "m1" => Ok(Method::M1),
            "2" | "m2" => Ok(Method::M2),
            "3" | "m3" => Ok(Method::M3),
            _ => Err(Error::config("time.method", format!("expected 1, 2 or 3, got {s:?}"))),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bdf1" => Ok(Scheme::Bdf1),
            "bdf2" => Ok(Scheme::Bdf2),
            "cn" => Ok(Scheme::Cn),
            _ => Err(Error::config("time.scheme", format!("expected bdf1, bdf2 or cn, got {s:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Method::M1 => 1,
            Method::M2 => 2,
            Method::M3 => 3,
        };
        write!(f, "{n}")
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Bdf1 => "bdf1",
            Scheme::Bdf2 => "bdf2",
            Scheme::Cn => "cn",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuxState {
    M1 { u_h: FieldCoeffs },
    M2 { u_q: QuadField },
    M3 { u_q: QuadField, shadow: FieldCoeffs },
}

impl AuxState {
    pub fn method(&self) -> Method {
        match self {
            AuxState::M1 { .. } => Method::M1,
            AuxState::M2 { .. } => Method::M2,
            AuxState::M3 { .. } => Method::M3,
        }
    }

    /// The representation the schemes step from: `U_h`, `U`, or `Pi U`.
    pub fn base(&self) -> AuxValue {
        match self {
            AuxState::M1 { u_h } => AuxValue::Nodal(u_h.clone()),
            AuxState::M2 { u_q } => AuxValue::Quad(u_q.clone()),
            AuxState::M3 { shadow, .. } => AuxValue::Nodal(shadow.clone()),
        }
    }

    /// Samples of the unprojected auxiliary variable.
    pub fn exact_at_quad(&self, space: &FeSpace) -> QuadField {
        match self {
            AuxState::M1 { u_h } => space.eval_at_quad(u_h),
            AuxState::M2 { u_q } | AuxState::M3 { u_q, .. } => u_q.clone(),
        }
    }
}

/// An auxiliary value in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxValue {
    Nodal(FieldCoeffs),
    Quad(QuadField),
}

impl AuxValue {
    pub fn at_quad(&self, space: &FeSpace) -> QuadField {
        match self {
            AuxValue::Nodal(c) => space.eval_at_quad(c),
            AuxValue::Quad(q) => q.clone(),
        }
    }

    /// `a * self + b * other`; both must share a representation.
    pub fn lincomb(&self, a: f64, other: &AuxValue, b: f64) -> AuxValue {
        match (self, other) {
            (AuxValue::Nodal(x), AuxValue::Nodal(y)) => AuxValue::Nodal(x.lincomb(a, y, b)),
            (AuxValue::Quad(x), AuxValue::Quad(y)) => AuxValue::Quad(x.lincomb(a, y, b)),
            _ => panic!("mixed auxiliary representations"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtrapKind {
    /// `2 v_n - v_{n-1}`
    Bdf2,
    /// `3/2 v_n - 1/2 v_{n-1}`
    Cn,
}

impl ExtrapKind {
    pub fn weights(self) -> (f64, f64) {
        match self {
            ExtrapKind::Bdf2 => (2.0, -1.0),
            ExtrapKind::Cn => (1.5, -0.5),
        }
    }
}

pub fn extrapolate(v_n: &[f64], v_nm1: &[f64], kind: ExtrapKind) -> Vec<f64> {
    assert_eq!(v_n.len(), v_nm1.len(), "extrapolate: length mismatch");
    let (a, b) = kind.weights();
    v_n.iter().zip(v_nm1).map(|(x, y)| a * x + b * y).collect()
}

pub fn extrapolate_quad(v_n: &QuadField, v_nm1: &QuadField, kind: ExtrapKind) -> QuadField {
    let (a, b) = kind.weights();
    v_n.lincomb(a, v_nm1, b)
}

/// `U_base + coeff * H * (u_new - u_old)` at every quadrature point.
pub fn update_aux_pointwise(
    u_base: &QuadField,
    h: &QuadField,
    u_new: &QuadField,
    u_old: &QuadField,
    coeff: f64,
) -> QuadField {
    assert!(u_base.same_shape(h) && h.same_shape(u_new) && u_new.same_shape(u_old), "shape mismatch");
    let samples = (0..u_base.samples.len())
        .map(|k| u_base.samples[k] + coeff * h.samples[k] * (u_new.samples[k] - u_old.samples[k]))
        .collect();
    QuadField {
        n_elems: u_base.n_elems,
        n_q: u_base.n_q,
        samples,
    }
}

/// Gradient and auxiliary parts of `E(u, U)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    /// `c_grad/2 A(u, u)`
    pub e_grad: f64,
    /// `c_pot (int U^2 - B |Omega|)`
    pub e_aux: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.e_grad + self.e_aux
    }
}

/// Evaluates `E(u, U)` in the shared quadrature inner product.
pub struct EnergyFunctional<'a> {
    pub space: &'a FeSpace,
    pub stiffness: &'a SparseMatrix,
    pub c_grad: f64,
    pub c_pot: f64,
    pub b: f64,
    area: f64,
}

impl<'a> EnergyFunctional<'a> {
    pub fn new(space: &'a FeSpace, stiffness: &'a SparseMatrix, eq: &EquationCoeffs, b: f64) -> Self {
        let area = space.integrate(&QuadField::constant(space.n_elems(), space.n_q(), 1.0));
        EnergyFunctional {
            space,
            stiffness,
            c_grad: eq.c_grad,
            c_pot: eq.c_pot,
            b,
            area,
        }
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn parts(&self, u: &[f64], aux_q: &QuadField) -> EnergyParts {
        EnergyParts {
            e_grad: 0.5 * self.c_grad * self.stiffness.bilinear(u, u),
            e_aux: self.c_pot * (self.space.inner_q(aux_q, aux_q) - self.b * self.area),
        }
    }

    pub fn eval(&self, u: &[f64], aux_q: &QuadField) -> f64 {
        self.parts(u, aux_q).total()
    }

    /// `1/2 (E(u_n, V_n) + E(2u_n - u_{n-1}, 2V_n - V_{n-1}))`
    pub fn bdf2(&self, u: &[f64], u_prev: &[f64], aux: &QuadField, aux_prev: &QuadField) -> f64 {
        let us = extrapolate(u, u_prev, ExtrapKind::Bdf2);
        let vs = extrapolate_quad(aux, aux_prev, ExtrapKind::Bdf2);
        0.5 * (self.eval(u, aux) + self.eval(&us, &vs))
    }
}

/// Energies of one state in all the variants the trace records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// The energy the scheme dissipates: `E(u, U_h)`, `E(u, U)` or `E(u, Pi U)` for M1/M2/M3.
    pub e_total: f64,
    pub e_grad: f64,
    pub e_aux: f64,
    /// `E(u, U)` with the unprojected auxiliary samples.
    pub e_exact: f64,
    /// `E(u, Pi U)`; present for M2 when projection tracking is on, equal to `e_total` otherwise.
    pub e_projected: Option<f64>,
    /// Averaged BDF2 energy with `U_h`, `Pi U` or the shadow.
    pub e_bdf2: Option<f64>,
    /// Averaged BDF2 energy with unprojected samples.
    pub e_bdf2_exact: Option<f64>,
    pub mass: f64,
}

/// `1/2 max(dE^{n+1}, dE^n) - |E^n - E_Pi^n|` with `dE^k = |E^k - E^{k-1}|`.
pub fn condition_margin(e_prev: f64, e_n: f64, e_next: f64, e_proj_n: f64) -> f64 {
    let d_next = (e_next - e_n).abs();
    let d_n = (e_n - e_prev).abs();
    0.5 * d_next.max(d_n) - (e_n - e_proj_n).abs()
}

/// Sum of the dissipation terms and source work of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DissipationTerms {
    pub dissipation: f64,
    pub source_work: f64,
}

/// `E_end - E_start + dissipation - source work`; zero for the equality schemes.
pub fn dissipation_residual(e_start: f64, e_end: f64, terms: &DissipationTerms) -> f64 {
    e_end - e_start + terms.dissipation - terms.source_work
}
