//! CSV series, legacy ASCII VTK snapshots and the machine-readable status
//! file. Every data file starts with a provenance header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use porous_opt::error::Result;
use porous_opt::fespaces::{P0Field, P1DGField, RT0Field};
use porous_opt::mesh::{format_triangle_mesh, PrimalMesh};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hashes identifying the inputs of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_sha256: String,
    pub mesh_sha256: String,
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

impl Provenance {
    pub fn new(config_fingerprint: &str, mesh: &PrimalMesh) -> Self {
        let (node, ele) = format_triangle_mesh(mesh);
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config_fingerprint),
            mesh_sha256: sha256_hex(&(node + &ele)),
        }
    }

    /// `# key: value` lines.
    pub fn header(&self) -> String {
        format!(
            "# porous-opt {}\n# config-sha256: {}\n# mesh-sha256: {}\n",
            self.version, self.config_sha256, self.mesh_sha256
        )
    }

    fn one_line(&self) -> String {
        format!(
            "porous-opt {} config {} mesh {}",
            self.version,
            &self.config_sha256[..16],
            &self.mesh_sha256[..16]
        )
    }
}

/// Scalar table written with full `f64` round-trip precision.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut s = provenance.header();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(v) => v.to_string(),
                    Cell::Float(v) => format!("{v:.17e}"),
                    Cell::Text(v) => v.clone(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Output directory plus the provenance stamped into each file.
#[derive(Debug, Clone)]
pub struct Writer {
    pub dir: PathBuf,
    pub provenance: Provenance,
}

impl Writer {
    pub fn new(dir: &Path, provenance: Provenance) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            provenance,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv(&self, name: &str, table: &Table) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, table.to_csv(&self.provenance))?;
        Ok(path)
    }

    pub fn vtk(&self, name: &str, mesh: &PrimalMesh, fields: &Snapshot<'_>) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, vtk(mesh, fields, &self.provenance))?;
        Ok(path)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, format!("{}{body}", self.provenance.header()))?;
        Ok(path)
    }
}

/// Fields written into one VTK file; absent entries are skipped.
#[derive(Debug, Default)]
pub struct Snapshot<'a> {
    pub time: f64,
    pub saturation: Option<(&'a str, &'a P1DGField)>,
    pub velocity: Option<(&'a str, &'a RT0Field)>,
    pub pressure: Option<(&'a str, &'a P0Field)>,
}

/// Legacy ASCII unstructured grid. Vertices are duplicated per triangle so
/// the discontinuous saturation is stored exactly as point data; velocity
/// (at barycentres) and pressure are cell data.
pub fn vtk(mesh: &PrimalMesh, fields: &Snapshot<'_>, provenance: &Provenance) -> String {
    let nt = mesh.n_triangles();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{} t={:.17e}", provenance.one_line(), fields.time);
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS {} double", 3 * nt);
    for k in 0..nt {
        for p in mesh.tri_points(k) {
            let _ = writeln!(s, "{:.17e} {:.17e} 0", p.x, p.y);
        }
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for k in 0..nt {
        let _ = writeln!(s, "3 {} {} {}", 3 * k, 3 * k + 1, 3 * k + 2);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if let Some((name, c)) = fields.saturation {
        let _ = writeln!(
            s,
            "POINT_DATA {}\nSCALARS {name} double 1\nLOOKUP_TABLE default",
            3 * nt
        );
        for v in &c.values {
            let _ = writeln!(s, "{v:.17e}");
        }
    }
    if fields.velocity.is_some() || fields.pressure.is_some() {
        let _ = writeln!(s, "CELL_DATA {nt}");
    }
    if let Some((name, p)) = fields.pressure {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in &p.values {
            let _ = writeln!(s, "{v:.17e}");
        }
    }
    if let Some((name, u)) = fields.velocity {
        let _ = writeln!(s, "VECTORS {name} double");
        for k in 0..nt {
            let v = u.eval(mesh, k, &mesh.barycentre(k));
            let _ = writeln!(s, "{:.17e} {:.17e} 0", v.x, v.y);
        }
    }
    s
}

/// Outcome recorded in `status.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Status {
    pub command: String,
    pub status: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

pub fn write_status(dir: &Path, status: &Status) -> Result<()> {
    fs::create_dir_all(dir)?;
    let body = serde_json::to_string_pretty(status).expect("status serialises");
    fs::write(dir.join("status.json"), body + "\n")?;
    Ok(())
}
