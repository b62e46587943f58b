//! Initial data: builtin profiles, expressions and seeded random fields.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fem::{FeSpace, FieldCoeffs};
use crate::scheme::{State, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// Allen-Cahn three-disc profile `-tanh(d / (sqrt 2 eps))` on `[-2,2]^2`.
    ThreeCircle,
    /// Cahn-Hilliard product of four `tanh` discs on `[-1,1]^2`.
    FourCircle,
    /// `0.71` on `|x|, |y| <= 0.2`, `0.69` elsewhere.
    Step,
    /// `1` left of `x0`, `-1` right of `x1`, `-sin(pi x / (2 x1))` between, `x1 = -x0 = sqrt 2 / 20`.
    SineRamp,
}

impl Builtin {
    pub const NAMES: [&'static str; 4] = ["three-circle", "four-circle", "step", "sine-ramp"];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::ThreeCircle => "three-circle",
            Builtin::FourCircle => "four-circle",
            Builtin::Step => "step",
            Builtin::SineRamp => "sine-ramp",
        }
    }

    /// The profile at `(x, y)`; `eps` is the interface parameter of the run.
    pub fn eval(self, x: f64, y: f64, eps: f64) -> f64 {
        match self {
            Builtin::ThreeCircle => {
                let r13 = 2.0 - 1.5 * eps;
                let d = |cy: f64, r: f64| (x * x + (y - cy) * (y - cy)).sqrt() - r;
                let dist = (-d(2.0, r13)).max(d(0.0, 1.0)).max(-d(-2.0, r13));
                -(dist / (std::f64::consts::SQRT_2 * eps)).tanh()
            }
            Builtin::FourCircle => {
                let f = |cx: f64, cy: f64| (((x - cx).powi(2) + (y - cy).powi(2) - 0.04) / eps).tanh();
                f(0.3, 0.0) * f(-0.3, 0.0) * f(0.0, 0.3) * f(0.0, -0.3)
            }
            Builtin::Step => {
                if x.abs() <= 0.2 && y.abs() <= 0.2 {
                    0.71
                } else {
                    0.69
                }
            }
            Builtin::SineRamp => {
                let x1 = std::f64::consts::SQRT_2 / 20.0;
                if x < -x1 {
                    1.0
                } else if x > x1 {
                    -1.0
                } else {
                    -(std::f64::consts::PI * x / (2.0 * x1)).sin()
                }
            }
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "three-circle" => Ok(Builtin::ThreeCircle),
            "four-circle" => Ok(Builtin::FourCircle),
            "step" => Ok(Builtin::Step),
            "sine-ramp" => Ok(Builtin::SineRamp),
            _ => Err(Error::config(
                "initial.builtin",
                format!("unknown builtin {s:?}; expected one of {}", Builtin::NAMES.join(", ")),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Builtin { kind: Builtin, eps: f64 },
    Expression(Expr),
    /// Nodal values `amplitude (2 xi - 1) + offset` with `xi` uniform on `[0, 1)`.
    Random { seed: u64, amplitude: f64, offset: f64 },
}

/// Nodal random field from a ChaCha8 stream seeded with `seed`.
pub fn random_field(n: usize, seed: u64, amplitude: f64, offset: f64) -> FieldCoeffs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FieldCoeffs::new((0..n).map(|_| amplitude * (2.0 * rng.random::<f64>() - 1.0) + offset).collect())
}

impl InitialData {
    /// Nodal values for output or inspection; functions are interpolated.
    pub fn nodal(&self, space: &FeSpace) -> FieldCoeffs {
        match self {
            InitialData::Builtin { kind, eps } => space.interpolate(|x, y| kind.eval(x, y, *eps)),
            InitialData::Expression(e) => space.interpolate(|x, y| e.eval(x, y, 0.0)),
            InitialData::Random { seed, amplitude, offset } => random_field(space.n_dofs, *seed, *amplitude, *offset),
        }
    }

    /// Initial state: `u_h^0 = Pi u0` for functions, the nodal values themselves for random data.
    pub fn init_state(&self, stepper: &Stepper) -> Result<State> {
        match self {
            InitialData::Builtin { kind, eps } => stepper.init_from_fn(|x, y| kind.eval(x, y, *eps)),
            InitialData::Expression(e) => stepper.init_from_fn(|x, y| e.eval(x, y, 0.0)),
            InitialData::Random { .. } => stepper.init_from_nodal(self.nodal(stepper.space())),
        }
    }
}
