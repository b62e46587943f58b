//! Python bindings: run configurations and convergence studies from Python.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ieq_fem::config::{load_config, RunConfig};
use ieq_fem::driver::{run_mms, run_simulation, MmsMode, MmsStudy, RunOptions, RunSummary};
use ieq_fem::ieq::{Method, Scheme};
use ieq_fem::mms::MmsStart;
use ieq_fem::potential::Equation;
use ieq_fem::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Config { .. } | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn summary_dict<'py>(py: Python<'py>, s: &RunSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let col = |f: fn(&ieq_fem::io::TraceRow) -> f64| s.rows.iter().map(f).collect::<Vec<f64>>();
    d.set_item("step", s.rows.iter().map(|r| r.step).collect::<Vec<_>>())?;
    d.set_item("t", col(|r| r.t))?;
    d.set_item("mass", col(|r| r.mass))?;
    d.set_item("energy", col(|r| r.energy))?;
    d.set_item("energy_exact", col(|r| r.energy_exact))?;
    d.set_item("energy_projected", s.rows.iter().map(|r| r.energy_projected).collect::<Vec<_>>())?;
    d.set_item("condition_margin", s.rows.iter().map(|r| r.condition_margin).collect::<Vec<_>>())?;
    d.set_item("diss_residual", col(|r| r.diss_residual))?;
    d.set_item("u", s.final_state.u.values.clone())?;
    d.set_item("dof_coords", s.space.dof_coords.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())?;
    d.set_item("wall_s", s.wall.as_secs_f64())?;
    d.set_item("violations", s.violations.clone())?;
    Ok(d)
}

/// Runs a TOML configuration given as text; no files are written.
#[pyfunction]
#[pyo3(signature = (config, strict = false))]
fn run<'py>(py: Python<'py>, config: &str, strict: bool) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig::parse(config).map_err(to_py)?;
    let v = cfg.validate().map_err(to_py)?;
    let s = py
        .detach(|| run_simulation(&cfg, &v, config, RunOptions { strict, no_output: true }))
        .map_err(to_py)?;
    summary_dict(py, &s)
}

/// Runs a TOML configuration file, writing the outputs it requests.
#[pyfunction]
#[pyo3(signature = (path, strict = false))]
fn run_file<'py>(py: Python<'py>, path: &str, strict: bool) -> PyResult<Bound<'py, PyDict>> {
    let (cfg, v, text) = load_config(path).map_err(to_py)?;
    let s = py
        .detach(|| run_simulation(&cfg, &v, &text, RunOptions { strict, no_output: false }))
        .map_err(to_py)?;
    summary_dict(py, &s)
}

/// Manufactured-solution convergence study; one dict per level.
#[pyfunction]
#[pyo3(signature = (equation, scheme = "bdf1", method = 2, mode = "temporal", levels = 4,
                    degree = None, n = None, dt = None, t_end = None, start = "bootstrap"))]
#[allow(clippy::too_many_arguments)]
fn mms<'py>(
    py: Python<'py>,
    equation: &str,
    scheme: &str,
    method: u8,
    mode: &str,
    levels: usize,
    degree: Option<usize>,
    n: Option<usize>,
    dt: Option<f64>,
    t_end: Option<f64>,
    start: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let equation = match equation {
        "ch" => Equation::CahnHilliard,
        "ac" => Equation::AllenCahn,
        _ => return Err(PyValueError::new_err(format!("equation must be ch or ac, got {equation:?}"))),
    };
    let mut study = MmsStudy::new(
        equation,
        scheme.parse::<Scheme>().map_err(to_py)?,
        method.to_string().parse::<Method>().map_err(to_py)?,
        mode.parse::<MmsMode>().map_err(to_py)?,
        levels,
    );
    study.degree = degree;
    study.n = n;
    study.dt = dt;
    study.t_end = t_end;
    study.start = start.parse::<MmsStart>().map_err(to_py)?;
    let rows = py.detach(|| run_mms(&study)).map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("param", r.param)?;
            d.set_item("n", r.n)?;
            d.set_item("dt", r.dt)?;
            d.set_item("error", r.error)?;
            d.set_item("rate", r.rate)?;
            d.set_item("wall_s", r.wall.as_secs_f64())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn ieq_fem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_file, m)?)?;
    m.add_function(wrap_pyfunction!(mms, m)?)?;
    Ok(())
}
