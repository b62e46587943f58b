//! Simulation orchestration, convergence studies and method benchmarks.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::config::{RunConfig, Validated};
use crate::error::{Error, Result};
use crate::fem::{build_space, quad_rule, FeSpace};
use crate::ieq::{AuxState, EnergyReport, Method, Scheme};
use crate::io::{write_csv, write_manifest, write_vtk, TraceRow};
use crate::mesh::build_rect_mesh;
use crate::mms::{compute_rates, MmsCase, MmsRun, MmsStart};
use crate::potential::{Equation, Mobility};
use crate::scheme::{State, StepDiagnostics, Stepper};

/// Identity residual tolerance, relative to `1 + |E|`.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Lower bound for the Method 3 slack `E(u, U) - E(u, Pi U)`, relative to `1 + c_pot |U|^2`.
pub const SLACK_TOL: f64 = -1e-12;
/// Mass drift tolerance, relative to `1 + |int u0|`.
pub const MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Turn the identity, slack and mass invariants into hard errors.
    pub strict: bool,
    /// Skip all file output.
    pub no_output: bool,
}

pub struct RunSummary {
    pub rows: Vec<TraceRow>,
    pub final_state: State,
    pub steps: usize,
    pub wall: Duration,
    pub space: Arc<FeSpace>,
    /// Invariant violations tolerated outside strict mode, as `(step, message)`.
    pub violations: Vec<(usize, String)>,
}

pub fn build_run_space(v: &Validated) -> Result<Arc<FeSpace>> {
    let mesh = build_rect_mesh(v.domain, v.nx, v.ny)?;
    Ok(Arc::new(build_space(mesh, v.degree, quad_rule(v.quad_degree)?)?))
}

/// The pair `(E, E_Pi)` the projected-energy condition is stated for.
fn margin_pair(scheme: Scheme, r: &EnergyReport) -> Option<(f64, f64)> {
    match scheme {
        Scheme::Bdf2 => Some((r.e_bdf2_exact?, r.e_bdf2?)),
        _ => Some((r.e_exact, r.e_projected?)),
    }
}

fn row_from(step: usize, time: f64, r: &EnergyReport, diag: Option<&StepDiagnostics>) -> TraceRow {
    TraceRow {
        step,
        t: time,
        mass: r.mass,
        energy: r.e_total,
        energy_exact: r.e_exact,
        energy_projected: r.e_projected,
        energy_bdf2: r.e_bdf2,
        energy_bdf2_exact: r.e_bdf2_exact,
        diss_residual: diag.map_or(0.0, |d| d.diss_residual),
        condition_margin: None,
        m3_slack: diag.and_then(|d| d.m3_slack),
        linsolve_iters: diag.map_or(0, |d| d.linsolve_iters),
        wall_ms: 0.0,
    }
}

/// Checks one step against the invariants; returns a description of the first violation.
pub fn check_step(
    diag: &StepDiagnostics,
    row: &TraceRow,
    mass0: f64,
    conserve_mass: bool,
) -> Option<String> {
    if !(row.energy.is_finite() && row.mass.is_finite()) {
        return Some("non-finite energy or mass".into());
    }
    let tol = IDENTITY_TOL * (1.0 + diag.e_start.abs());
    if diag.diss_residual.abs() > tol {
        return Some(format!("energy identity residual {:e} exceeds {:e}", diag.diss_residual, tol));
    }
    if let Some(s) = diag.m3_slack {
        let tol = SLACK_TOL * (1.0 + diag.m3_scale.unwrap_or(0.0));
        if s < tol {
            return Some(format!("method 3 slack {s:e} below {tol:e}"));
        }
    }
    if conserve_mass {
        let tol = MASS_TOL * (1.0 + mass0.abs());
        if (row.mass - mass0).abs() > tol {
            return Some(format!("mass drift {:e} exceeds {:e}", row.mass - mass0, tol));
        }
    }
    None
}

fn vtk_path(prefix: &str, step: usize) -> PathBuf {
    PathBuf::from(format!("{prefix}_{step:06}.vtk"))
}

fn snapshot(prefix: &str, space: &FeSpace, st: &State) -> Result<()> {
    let mut fields = vec![("u", &st.u)];
    if let Some(w) = &st.w {
        fields.push(("w", w));
    }
    match &st.aux {
        AuxState::M1 { u_h } => fields.push(("U", u_h)),
        AuxState::M3 { shadow, .. } => fields.push(("U", shadow)),
        AuxState::M2 { .. } => {}
    }
    write_vtk(vtk_path(prefix, st.step), &space.mesh, &fields)
}

/// Runs a validated configuration from `t = 0` to `t_end`.
pub fn run_simulation(cfg: &RunConfig, v: &Validated, config_text: &str, opts: RunOptions) -> Result<RunSummary> {
    let space = build_run_space(v)?;
    let mut stepper = Stepper::new(Arc::clone(&space), v.equation, v.step.clone())?;
    let mut st = v.initial.init_state(&stepper)?;
    let scheme = v.step.scheme;
    let conserve_mass = v.equation == Equation::CahnHilliard && matches!(v.step.eq.mobility, Mobility::Constant(_));
    let out = &cfg.output;
    let write = !opts.no_output;
    let vtk = out.vtk_prefix.as_deref().filter(|_| write);

    let start = Instant::now();
    let r0 = stepper.report(&st)?;
    let mass0 = r0.mass;
    let mut rows = Vec::with_capacity(v.steps + 1);
    let mut pairs = Vec::with_capacity(v.steps + 1);
    let mut violations = Vec::new();
    rows.push(row_from(0, 0.0, &r0, None));
    pairs.push(margin_pair(scheme, &r0));
    if let Some(p) = vtk {
        snapshot(p, &space, &st)?;
    }

    for n in 0..v.steps {
        let t_step = Instant::now();
        let wrap = |e: Error, st: &State| Error::AtStep {
            step: st.step + 1,
            time: st.time + v.step.dt,
            source: Box::new(e),
        };
        let (next, diag) = stepper.step(&st).map_err(|e| wrap(e, &st))?;
        let r = stepper.report(&next).map_err(|e| wrap(e, &st))?;
        let mut row = row_from(next.step, next.time, &r, Some(&diag));
        if out.timing {
            row.wall_ms = t_step.elapsed().as_secs_f64() * 1e3;
        }
        if let Some(msg) = check_step(&diag, &row, mass0, conserve_mass) {
            if opts.strict {
                return Err(Error::Identity { step: next.step, message: msg });
            }
            violations.push((next.step, msg));
        }
        pairs.push(margin_pair(scheme, &r));
        if n >= 1 {
            if let (Some(a), Some(b), Some(c)) = (pairs[n - 1], pairs[n], pairs[n + 1]) {
                rows[n].condition_margin = Some(crate::ieq::condition_margin(a.0, b.0, c.0, b.1));
            }
        }
        rows.push(row);
        st = next;
        if let Some(p) = vtk {
            if (out.vtk_every > 0 && st.step % out.vtk_every == 0) || st.step == v.steps {
                snapshot(p, &space, &st)?;
            }
        }
    }
    let wall = start.elapsed();

    if write {
        if let Some(csv) = &out.csv {
            write_csv(csv, &rows)?;
        }
        let manifest = out
            .manifest
            .clone()
            .or_else(|| out.csv.as_ref().map(|c| c.with_extension("json")));
        if let Some(m) = manifest {
            let mut notes = Vec::new();
            if v.degree == 2 && vtk.is_some() {
                notes.push("P2 fields are written at mesh vertices only in VTK snapshots".to_string());
            }
            if !out.timing {
                notes.push("wall_ms column disabled (output.timing = false)".to_string());
            }
            write_manifest(m, config_text, cfg.to_json(), &notes)?;
        }
    }
    Ok(RunSummary {
        rows,
        final_state: st,
        steps: v.steps,
        wall,
        space,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmsMode {
    Temporal,
    Spatial,
}

impl std::str::FromStr for MmsMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(MmsMode::Temporal),
            "spatial" => Ok(MmsMode::Spatial),
            _ => Err(Error::config("mode", format!("expected temporal or spatial, got {s:?}"))),
        }
    }
}

/// Convergence study parameters; unset fields take the standard setup of the mode.
#[derive(Debug, Clone, Copy)]
pub struct MmsStudy {
    pub equation: Equation,
    pub scheme: Scheme,
    pub method: Method,
    pub mode: MmsMode,
    pub levels: usize,
    pub degree: Option<usize>,
    /// Temporal mode: cells per side. Spatial mode: coarsest cells per side.
    pub n: Option<usize>,
    /// Temporal mode: coarsest step. Spatial mode: the fixed step.
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub start: MmsStart,
}

impl MmsStudy {
    pub fn new(equation: Equation, scheme: Scheme, method: Method, mode: MmsMode, levels: usize) -> Self {
        MmsStudy {
            equation,
            scheme,
            method,
            mode,
            levels,
            degree: None,
            n: None,
            dt: None,
            t_end: None,
            start: MmsStart::Bootstrap,
        }
    }

    /// The runs of the study, coarsest first.
    pub fn runs(&self) -> Vec<MmsRun> {
        (0..self.levels)
            .map(|k| {
                let f = (1usize << k) as f64;
                let mut run = match self.mode {
                    MmsMode::Temporal => {
                        let n = self.n.unwrap_or(match self.equation {
                            Equation::CahnHilliard => 48,
                            Equation::AllenCahn => 64,
                        });
                        MmsRun::new(self.scheme, self.method, self.degree.unwrap_or(2), n, self.dt.unwrap_or(0.2) / f, self.t_end.unwrap_or(1.0))
                    }
                    MmsMode::Spatial => MmsRun::new(
                        self.scheme,
                        self.method,
                        self.degree.unwrap_or(1),
                        self.n.unwrap_or(8) << k,
                        self.dt.unwrap_or(1e-6),
                        self.t_end.unwrap_or(1e-3),
                    ),
                };
                run.start = self.start;
                run.track_energy = self.mode == MmsMode::Temporal;
                run
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsRow {
    /// `dt` in temporal mode, `h` in spatial mode.
    pub param: f64,
    pub n: usize,
    pub dt: f64,
    pub error: f64,
    /// Rate against the previous row.
    pub rate: Option<f64>,
    pub max_diss_residual: f64,
    pub wall: Duration,
    /// `(exact, projected)` energies per time level; temporal studies only.
    pub energies: Vec<(f64, f64)>,
}

/// Runs a convergence study and returns one row per level.
pub fn run_mms(study: &MmsStudy) -> Result<Vec<MmsRow>> {
    if study.levels < 2 {
        return Err(Error::config("levels", "need at least two levels"));
    }
    let case = MmsCase::for_equation(study.equation);
    let mut rows: Vec<MmsRow> = Vec::new();
    for run in study.runs() {
        let t0 = Instant::now();
        let res = case.run(&run)?;
        let param = match study.mode {
            MmsMode::Temporal => run.dt,
            MmsMode::Spatial => (case.domain.x1 - case.domain.x0) / run.n as f64,
        };
        rows.push(MmsRow {
            param,
            n: run.n,
            dt: run.dt,
            error: res.error,
            rate: None,
            max_diss_residual: res.max_diss_residual,
            wall: t0.elapsed(),
            energies: res.energies,
        });
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let rates = compute_rates(&errors, 2.0)?;
    for (row, rate) in rows.iter_mut().skip(1).zip(rates) {
        row.rate = Some(rate);
    }
    Ok(rows)
}

pub fn format_mms_table(study: &MmsStudy, rows: &[MmsRow]) -> String {
    let label = match study.mode {
        MmsMode::Temporal => "dt",
        MmsMode::Spatial => "h",
    };
    let mut s = format!("{:>12} {:>6} {:>14} {:>8} {:>10}\n", label, "n", "L2 error", "rate", "wall [s]");
    for r in rows {
        let rate = r.rate.map_or("-".to_string(), |v| format!("{v:.3}"));
        s += &format!(
            "{:>12.4e} {:>6} {:>14.6e} {:>8} {:>10.2}\n",
            r.param,
            r.n,
            r.error,
            rate,
            r.wall.as_secs_f64()
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub wall: Duration,
    pub final_energy: f64,
    pub linsolve_iters: usize,
}

/// Times the same run for each method, sequentially and single-threaded.
pub fn run_bench(cfg: &RunConfig, v: &Validated, methods: &[Method]) -> Result<Vec<BenchRow>> {
    if methods.is_empty() {
        return Err(Error::config("methods", "give at least one method"));
    }
    let threads = crate::assembly::assembly_threads();
    crate::assembly::set_assembly_threads(1);
    let result = methods
        .iter()
        .map(|&m| {
            let mut vm = v.clone();
            vm.step.method = m;
            vm.step.track_projection = false;
            let s = run_simulation(cfg, &vm, "", RunOptions { strict: false, no_output: true })?;
            let last = s.rows.last().expect("initial row");
            Ok(BenchRow {
                method: m,
                wall: s.wall,
                final_energy: last.energy,
                linsolve_iters: s.rows.iter().map(|r| r.linsolve_iters).sum(),
            })
        })
        .collect();
    crate::assembly::set_assembly_threads(threads);
    result
}

pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let mut s = format!("{:>6} {:>12} {:>22} {:>10}\n", "method", "wall [s]", "final energy", "iters");
    for r in rows {
        s += &format!(
            "{:>6} {:>12.3} {:>22.15e} {:>10}\n",
            r.method.to_string(),
            r.wall.as_secs_f64(),
            r.final_energy,
            r.linsolve_iters
        );
    }
    let t = |m: Method| rows.iter().find(|r| r.method == m).map(|r| r.wall);
    if let (Some(t1), Some(t2)) = (t(Method::M1), t(Method::M2)) {
        s += &format!("M1 >= M2: {}\n", t1 >= t2);
    }
    if let (Some(t1), Some(t3)) = (t(Method::M1), t(Method::M3)) {
        s += &format!("M1 >= M3: {}\n", t1 >= t3);
    }
    s
}

/// Loads a configuration file and runs it.
pub fn run_file(path: &Path, opts: RunOptions) -> Result<RunSummary> {
    let (cfg, v, text) = crate::config::load_config(path)?;
    run_simulation(&cfg, &v, &text, opts)
}
