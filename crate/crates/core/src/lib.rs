//! Finite-element solvers for the Cahn-Hilliard and Allen-Cahn equations using
//! invariant energy quadratization (IEQ) time stepping.

pub mod ac;
pub mod assembly;
pub mod ch;
pub mod config;
pub mod driver;
pub mod error;
pub mod expr;
pub mod fem;
pub mod ieq;
pub mod initial;
pub mod io;
pub mod mesh;
pub mod mms;
pub mod potential;
pub mod scheme;
pub mod sparse;

pub use error::{Error, Result};
