//! Run configuration: a TOML file with `[problem]`, `[mesh]`, `[time]`,
//! `[initial]` and `[output]` tables.
//!
//! ```toml
//! [problem]
//! equation = "ch"          # ch | ac
//! epsilon = 0.01
//! B = 1.0
//!
//! [mesh]
//! domain = [-1.0, 1.0, -1.0, 1.0]
//! nx = 64
//!
//! [time]
//! dt = 1e-7
//! t_end = 1e-5
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::ieq::{Method, Scheme};
use crate::initial::{Builtin, InitialData};
use crate::mesh::Rect;
use crate::potential::{Equation, EquationCoeffs, Form, Mobility, PotentialKind, PotentialSpec, DEFAULT_CLAMP_DELTA};
use crate::scheme::{LinearSolverKind, StepConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub mesh: MeshConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub equation: String,
    #[serde(default = "default_form")]
    pub form: String,
    pub epsilon: f64,
    #[serde(default = "default_potential")]
    pub potential: String,
    /// Flory-Huggins `theta`; with `theta_c` the default reproduces
    /// `F = 600 (u ln u + (1-u) ln(1-u)) + 1800 u (1-u)`.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub theta_c: Option<f64>,
    #[serde(default)]
    pub clamp_delta: Option<f64>,
    #[serde(rename = "B", alias = "b", default = "default_b")]
    pub b: f64,
    #[serde(default = "default_mobility")]
    pub mobility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// `[x0, x1, y0, y1]`
    #[serde(default = "default_domain")]
    pub domain: [f64; 4],
    pub nx: usize,
    /// Defaults to `nx`.
    #[serde(default)]
    pub ny: Option<usize>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_quad")]
    pub quad_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_method")]
    pub method: u8,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub bdf2_bootstrap: bool,
    /// auto | direct | iterative
    #[serde(default = "default_solver")]
    pub linear_solver: String,
    /// Log `E(u, Pi U)` for Method 2.
    #[serde(default = "default_true")]
    pub track_projection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            seed: 0,
            amplitude: default_amplitude(),
            offset: 0.0,
        }
    }
}

/// Exactly one of `builtin`, `expression` or `random`; random data when empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub expression: Option<String>,
    #[serde(default)]
    pub random: Option<RandomConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub vtk_prefix: Option<String>,
    /// Snapshot cadence in steps; 0 writes the first and last states only.
    #[serde(default)]
    pub vtk_every: usize,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    /// Record per-step wall time (makes the trace nondeterministic).
    #[serde(default)]
    pub timing: bool,
}

fn default_form() -> String {
    "standard".into()
}
fn default_potential() -> String {
    "double-well".into()
}
fn default_b() -> f64 {
    1.0
}
fn default_mobility() -> f64 {
    1.0
}
fn default_domain() -> [f64; 4] {
    [0.0, 1.0, 0.0, 1.0]
}
fn default_degree() -> usize {
    1
}
fn default_quad() -> usize {
    crate::fem::DEFAULT_QUAD_DEGREE
}
fn default_scheme() -> String {
    "bdf1".into()
}
fn default_method() -> u8 {
    2
}
fn default_solver() -> String {
    "auto".into()
}
fn default_true() -> bool {
    true
}
fn default_amplitude() -> f64 {
    0.1
}

pub const DEFAULT_FH_THETA: f64 = 1200.0;
pub const DEFAULT_FH_THETA_C: f64 = 3600.0;

/// Everything a run needs, checked against the module preconditions.
#[derive(Debug, Clone)]
pub struct Validated {
    pub equation: Equation,
    pub form: Form,
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    pub degree: usize,
    pub quad_degree: usize,
    pub steps: usize,
    pub step: StepConfig,
    pub initial: InitialData,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    pub fn validate(&self) -> Result<Validated> {
        let p = &self.problem;
        let equation = match p.equation.as_str() {
            "ch" | "cahn-hilliard" => Equation::CahnHilliard,
            "ac" | "allen-cahn" => Equation::AllenCahn,
            other => return Err(Error::config("problem.equation", format!("expected ch or ac, got {other:?}"))),
        };
        let form = match p.form.as_str() {
            "standard" => Form::Standard,
            "rescaled" => Form::Rescaled,
            other => {
                return Err(Error::config("problem.form", format!("expected standard or rescaled, got {other:?}")))
            }
        };
        if !(p.mobility >= 0.0 && p.mobility.is_finite()) {
            return Err(Error::config("problem.mobility", format!("must be nonnegative, got {}", p.mobility)));
        }
        let coeffs = EquationCoeffs::for_form(equation, form, p.epsilon, Mobility::Constant(p.mobility))?;
        let kind = match p.potential.as_str() {
            "double-well" => {
                if p.theta.is_some() || p.theta_c.is_some() {
                    return Err(Error::config("problem.theta", "only used with the flory-huggins potential"));
                }
                PotentialKind::DoubleWell
            }
            "flory-huggins" => PotentialKind::FloryHuggins {
                theta: p.theta.unwrap_or(DEFAULT_FH_THETA),
                theta_c: p.theta_c.unwrap_or(DEFAULT_FH_THETA_C),
            },
            other => {
                return Err(Error::config(
                    "problem.potential",
                    format!("expected double-well or flory-huggins, got {other:?}"),
                ))
            }
        };
        let potential = PotentialSpec::new(kind, p.b, p.clamp_delta.unwrap_or(DEFAULT_CLAMP_DELTA))?;

        let m = &self.mesh;
        let [x0, x1, y0, y1] = m.domain;
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite() && x1 > x0 && y1 > y0) {
            return Err(Error::config("mesh.domain", format!("expected [x0, x1, y0, y1] with x0 < x1, y0 < y1, got {:?}", m.domain)));
        }
        if m.nx == 0 {
            return Err(Error::config("mesh.nx", "must be at least 1"));
        }
        let ny = m.ny.unwrap_or(m.nx);
        if ny == 0 {
            return Err(Error::config("mesh.ny", "must be at least 1"));
        }
        if m.degree != 1 && m.degree != 2 {
            return Err(Error::config("mesh.degree", format!("must be 1 or 2, got {}", m.degree)));
        }
        if !(1..=6).contains(&m.quad_degree) || m.quad_degree < 2 * m.degree {
            return Err(Error::config(
                "mesh.quad_degree",
                format!("must lie in [2 degree, 6] = [{}, 6], got {}", 2 * m.degree, m.quad_degree),
            ));
        }

        let t = &self.time;
        let scheme = Scheme::from_str(&t.scheme)?;
        let method = Method::from_str(&t.method.to_string())?;
        if equation == Equation::CahnHilliard && scheme == Scheme::Cn {
            return Err(Error::config("time.scheme", "Crank-Nicolson is only available for the Allen-Cahn equation"));
        }
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(Error::config("time.dt", format!("must be positive, got {}", t.dt)));
        }
        if !(t.t_end > 0.0 && t.t_end.is_finite()) {
            return Err(Error::config("time.t_end", format!("must be positive, got {}", t.t_end)));
        }
        let steps = (t.t_end / t.dt).round();
        if steps < 1.0 || (steps * t.dt - t.t_end).abs() > 1e-9 * t.t_end {
            return Err(Error::config("time.t_end", format!("must be a positive multiple of dt = {}", t.dt)));
        }
        let solver = match t.linear_solver.as_str() {
            "auto" => LinearSolverKind::Auto,
            "direct" => LinearSolverKind::Direct,
            "iterative" => LinearSolverKind::Iterative,
            other => {
                return Err(Error::config(
                    "time.linear_solver",
                    format!("expected auto, direct or iterative, got {other:?}"),
                ))
            }
        };
        let mut step = StepConfig::new(t.dt, method, scheme, coeffs, potential);
        step.solver = solver;
        step.bdf2_bootstrap = t.bdf2_bootstrap;
        step.track_projection = t.track_projection;

        let i = &self.initial;
        let initial = match (&i.builtin, &i.expression, &i.random) {
            (Some(b), None, None) => InitialData::Builtin {
                kind: b.parse::<Builtin>()?,
                eps: p.epsilon,
            },
            (None, Some(e), None) => InitialData::Expression(Expr::parse(e)?),
            (None, None, r) => {
                let r = r.clone().unwrap_or_default();
                if !(r.amplitude.is_finite() && r.offset.is_finite() && r.amplitude >= 0.0) {
                    return Err(Error::config("initial.random", "amplitude must be nonnegative and finite"));
                }
                InitialData::Random {
                    seed: r.seed,
                    amplitude: r.amplitude,
                    offset: r.offset,
                }
            }
            _ => return Err(Error::config("initial", "give exactly one of builtin, expression or random")),
        };

        if self.output.vtk_every > 0 && self.output.vtk_prefix.is_none() {
            return Err(Error::config("output.vtk_every", "requires output.vtk_prefix"));
        }

        Ok(Validated {
            equation,
            form,
            domain: Rect::new(x0, x1, y0, y1),
            nx: m.nx,
            ny,
            degree: m.degree,
            quad_degree: m.quad_degree,
            steps: steps as usize,
            step,
            initial,
        })
    }
}

/// Reads, parses and validates a configuration file; returns the text as well for hashing.
pub fn load_config(path: impl AsRef<Path>) -> Result<(RunConfig, Validated, String)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = RunConfig::parse(&text)?;
    let v = cfg.validate()?;
    Ok((cfg, v, text))
}
