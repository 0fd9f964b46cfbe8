use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// A CSV table with a `#schema=` header line. Numbers are written in Rust's
/// shortest round-trip form so that reruns are byte-comparable.
pub struct Table {
    kind: &'static str,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Table {
    pub fn new(kind: &'static str, columns: &[&str]) -> Self {
        Table { kind, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(
            row.into_iter()
                .map(|c| match c {
                    Cell::Num(v) if v.is_nan() => "nan".to_string(),
                    Cell::Num(v) if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) => format!("{v:e}"),
                    Cell::Num(v) => format!("{v}"),
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(s) => s,
                })
                .collect(),
        );
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#schema=rzf-secrecy/{}/v{SCHEMA_VERSION}", self.kind);
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub schema: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub trials: usize,
    pub workers: usize,
    pub versions: Versions,
    pub wall_time_s: f64,
    pub arguments: serde_json::Value,
    pub scenario: serde_json::Value,
    pub summary: serde_json::Value,
}

#[derive(Serialize)]
pub struct Versions {
    pub cli: &'static str,
    pub library: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Versions { cli: env!("CARGO_PKG_VERSION"), library: rzf_secrecy::VERSION }
    }
}

/// SHA-256 over the canonical JSON of the scenario and the result-affecting arguments.
pub fn config_hash(scenario: &serde_json::Value, args: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(scenario.to_string().as_bytes());
    h.update(b"\n");
    h.update(args.to_string().as_bytes());
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn write_outputs(out: Option<&Path>, table: &Table, manifest: &Manifest) -> std::io::Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, table.render())?;
            let mut f = std::fs::File::create(manifest_path(p))?;
            serde_json::to_writer_pretty(&mut f, manifest)?;
            writeln!(f)?;
        }
        None => {
            std::io::stdout().write_all(table.render().as_bytes())?;
        }
    }
    Ok(())
}
