//! Result files. JSON goes through `serde_json::Value`, whose maps are
//! ordered, so keys come out sorted; CSV is RFC 4180 via the `csv` crate.
//! Files are always rewritten from scratch.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use shellvk::geometry::Sym2;
use shellvk::{SurfaceChart, VectorField3};

use crate::config::{Format, RunConfig};

/// One `--verify` check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    /// Passes when `value ≤ limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), pass: value <= limit, value, limit }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Check { name: name.into(), pass: ok, value: if ok { 1.0 } else { 0.0 }, limit: 1.0 }
    }
}

pub struct Outputs {
    dir: PathBuf,
    json: bool,
    csv: bool,
    pub written: Vec<String>,
    timings: Vec<(String, f64)>,
    clock: Instant,
}

impl Outputs {
    pub fn new(cfg: &RunConfig) -> std::io::Result<Self> {
        let dir = PathBuf::from(&cfg.output.directory);
        fs::create_dir_all(&dir)?;
        Ok(Outputs {
            dir,
            json: cfg.wants(Format::Json),
            csv: cfg.wants(Format::Csv),
            written: Vec::new(),
            timings: Vec::new(),
            clock: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Records the time since the previous stage.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push((name.to_string(), (now - self.clock).as_secs_f64()));
        self.clock = now;
    }

    pub fn timings(&self) -> Value {
        Value::Object(self.timings.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        if self.json {
            write_json(&self.dir.join(name), value)?;
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> std::io::Result<()> {
        if !self.csv {
            return Ok(());
        }
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Per-node dump: `u1, u2, x, y, z` followed by the named columns.
    pub fn node_csv(&mut self, name: &str, chart: &SurfaceChart, columns: &[(String, Vec<f64>)]) -> std::io::Result<()> {
        let mut header: Vec<String> = ["u1", "u2", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
        header.extend(columns.iter().map(|c| c.0.clone()));
        let rows: Vec<Vec<String>> = chart
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, n)| {
                let mut row = vec![n.u[0], n.u[1], n.r.x, n.r.y, n.r.z];
                row.extend(columns.iter().map(|c| c.1[k]));
                row.iter().map(f64::to_string).collect()
            })
            .collect();
        self.csv(name, &header, &rows)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let v = serde_json::to_value(value).map_err(std::io::Error::other)?;
    let mut text = serde_json::to_string_pretty(&v).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Columns `{p}x, {p}y, {p}z` of a vector field.
pub fn vector_columns(prefix: &str, v: &VectorField3) -> Vec<(String, Vec<f64>)> {
    ["x", "y", "z"]
        .iter()
        .enumerate()
        .map(|(c, s)| (format!("{prefix}{s}"), v.0.iter().map(|x| x[c]).collect()))
        .collect()
}

/// Columns `{p}11, {p}12, {p}22` of a symmetric form field.
pub fn form_columns(prefix: &str, b: &[Sym2]) -> Vec<(String, Vec<f64>)> {
    vec![
        (format!("{prefix}11"), b.iter().map(|s| s.m11).collect()),
        (format!("{prefix}12"), b.iter().map(|s| s.m12).collect()),
        (format!("{prefix}22"), b.iter().map(|s| s.m22).collect()),
    ]
}

pub fn matrix_rows(m: &nalgebra::Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}
