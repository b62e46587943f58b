//! Trace CSV, legacy VTK snapshots and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem::FieldCoeffs;
use crate::mesh::Mesh;

/// One trace row per time level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    /// Energy with the stepping auxiliary variable.
    pub energy: f64,
    /// Energy with the unprojected auxiliary variable.
    pub energy_exact: f64,
    pub energy_projected: Option<f64>,
    pub energy_bdf2: Option<f64>,
    pub energy_bdf2_exact: Option<f64>,
    pub diss_residual: f64,
    pub condition_margin: Option<f64>,
    pub m3_slack: Option<f64>,
    pub linsolve_iters: usize,
    pub wall_ms: f64,
}

pub const CSV_HEADER: &str = "step,t,mass,energy,energy_exact,energy_projected,energy_bdf2,energy_bdf2_exact,\
diss_residual,condition_margin,m3_slack,linsolve_iters,wall_ms";

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

fn opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        num(out, v);
    }
}

impl TraceRow {
    pub fn to_csv_line(&self) -> String {
        let mut s = String::with_capacity(256);
        let _ = write!(s, "{},", self.step);
        for v in [self.t, self.mass, self.energy, self.energy_exact] {
            num(&mut s, v);
            s.push(',');
        }
        for v in [self.energy_projected, self.energy_bdf2, self.energy_bdf2_exact] {
            opt(&mut s, v);
            s.push(',');
        }
        num(&mut s, self.diss_residual);
        s.push(',');
        opt(&mut s, self.condition_margin);
        s.push(',');
        opt(&mut s, self.m3_slack);
        let _ = write!(s, ",{},", self.linsolve_iters);
        num(&mut s, self.wall_ms);
        s
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 13 {
            return Err(Error::Diagnostic(format!("expected 13 columns, got {}", cols.len())));
        }
        let bad = |c: &str| Error::Diagnostic(format!("bad CSV value {c:?}"));
        let f = |c: &str| c.parse::<f64>().map_err(|_| bad(c));
        let o = |c: &str| if c.is_empty() { Ok(None) } else { f(c).map(Some) };
        let i = |c: &str| c.parse::<usize>().map_err(|_| bad(c));
        Ok(TraceRow {
            step: i(cols[0])?,
            t: f(cols[1])?,
            mass: f(cols[2])?,
            energy: f(cols[3])?,
            energy_exact: f(cols[4])?,
            energy_projected: o(cols[5])?,
            energy_bdf2: o(cols[6])?,
            energy_bdf2_exact: o(cols[7])?,
            diss_residual: f(cols[8])?,
            condition_margin: o(cols[9])?,
            m3_slack: o(cols[10])?,
            linsolve_iters: i(cols[11])?,
            wall_ms: f(cols[12])?,
        })
    }
}

pub fn csv_string(rows: &[TraceRow]) -> String {
    let mut s = String::with_capacity(64 + 256 * rows.len());
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_line());
        s.push('\n');
    }
    s
}

/// Writes `content`, creating missing parent directories.
fn write_file(path: &Path, content: String) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    let path = path.as_ref();
    write_file(path, csv_string(rows))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::Diagnostic(format!("{}: missing trace header", path.display()))),
    }
    lines.map(TraceRow::from_csv_line).collect()
}

/// Legacy ASCII VTK with triangle cells; fields of a P2 space are written at the vertices.
pub fn vtk_string(mesh: &Mesh, fields: &[(&str, &FieldCoeffs)]) -> Result<String> {
    let nv = mesh.n_vertices();
    for (name, f) in fields {
        if f.len() < nv {
            return Err(Error::Structural(format!("field {name} has {} values for {nv} vertices", f.len())));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Structural(format!("invalid VTK field name {name:?}")));
        }
    }
    let nt = mesh.n_triangles();
    let mut s = String::with_capacity(64 * (nv + nt));
    s.push_str("# vtk DataFile Version 2.0\nieqfem snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nv} double");
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
        for (name, f) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in &f.values[..nv] {
                let _ = writeln!(s, "{v:.16e}");
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(path: impl AsRef<Path>, mesh: &Mesh, fields: &[(&str, &FieldCoeffs)]) -> Result<()> {
    let path = path.as_ref();
    write_file(path, vtk_string(mesh, fields)?)
}

/// Git-style content hash: `sha256("blob <len>\0" + content)`, hex encoded.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest_json(config_text: &str, config: serde_json::Value, notes: &[String]) -> serde_json::Value {
    serde_json::json!({
        "program": "ieqfem",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": content_hash(config_text.as_bytes()),
        "config": config,
        "notes": notes,
    })
}

pub fn write_manifest(path: impl AsRef<Path>, config_text: &str, config: serde_json::Value, notes: &[String]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&manifest_json(config_text, config, notes))
        .map_err(|e| Error::Diagnostic(format!("manifest serialization failed: {e}")))?;
    write_file(path, text + "\n")
}
