//! Result tables and run manifests.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Simulated,
    Optimized,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::Simulated => "simulated",
            Provenance::Optimized => "optimized",
        }
    }
}

/// One sweep coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Coord {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<u32> for Coord {
    fn from(v: u32) -> Self {
        Coord::Int(v as i64)
    }
}

impl From<usize> for Coord {
    fn from(v: usize) -> Self {
        Coord::Int(v as i64)
    }
}

impl From<f64> for Coord {
    fn from(v: f64) -> Self {
        Coord::Real(v)
    }
}

impl From<&str> for Coord {
    fn from(v: &str) -> Self {
        Coord::Text(v.to_string())
    }
}

impl From<String> for Coord {
    fn from(v: String) -> Self {
        Coord::Text(v)
    }
}

impl Coord {
    fn render(&self) -> String {
        match self {
            Coord::Int(v) => v.to_string(),
            Coord::Real(v) => format_number(*v),
            Coord::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coords: Vec<Coord>,
    pub metric: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

/// Rows sharing one set of sweep keys.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub keys: Vec<String>,
    pub rows: Vec<Row>,
    /// Numerical tolerance attached to each metric, where one applies.
    pub tolerances: BTreeMap<String, f64>,
}

impl Table {
    pub fn new(keys: &[&str]) -> Self {
        Table {
            keys: keys.iter().map(|k| k.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn tolerance(&mut self, metric: &str, tol: f64) -> &mut Self {
        self.tolerances.insert(metric.to_string(), tol);
        self
    }

    /// Adds a row. Non-finite values are a numerical failure.
    pub fn push(
        &mut self,
        coords: Vec<Coord>,
        metric: &str,
        value: f64,
        std_error: Option<f64>,
        provenance: Provenance,
        seed: Option<u64>,
    ) -> Result<(), CliError> {
        assert_eq!(coords.len(), self.keys.len(), "coordinate count for {metric}");
        if !value.is_finite() || std_error.is_some_and(|s| !s.is_finite()) {
            return Err(CliError::Core(cogmac_core::Error::Numerical {
                context: "result table",
                detail: format!("{metric} at {coords:?} is not finite ({value})"),
            }));
        }
        self.rows.push(Row {
            coords,
            metric: metric.to_string(),
            value,
            std_error,
            provenance,
            seed,
        });
        Ok(())
    }

    pub fn analytic(&mut self, coords: Vec<Coord>, metric: &str, value: f64) -> Result<(), CliError> {
        self.push(coords, metric, value, None, Provenance::Analytic, None)
    }

    pub fn optimized(&mut self, coords: Vec<Coord>, metric: &str, value: f64) -> Result<(), CliError> {
        self.push(coords, metric, value, None, Provenance::Optimized, None)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = self.keys.clone();
        h.extend(["metric", "value", "std_error", "provenance", "seed"].map(String::from));
        h
    }

    pub fn write(&self, format: Format, path: &Path) -> Result<(), CliError> {
        let file = File::create(path).map_err(|source| CliError::Io {
            context: format!("creating {}", path.display()),
            source,
        })?;
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(file);
                w.write_record(self.header())?;
                for r in &self.rows {
                    let mut rec: Vec<String> = r.coords.iter().map(Coord::render).collect();
                    rec.push(r.metric.clone());
                    rec.push(format_number(r.value));
                    rec.push(r.std_error.map(format_number).unwrap_or_default());
                    rec.push(r.provenance.as_str().to_string());
                    rec.push(r.seed.map(|s| s.to_string()).unwrap_or_default());
                    w.write_record(&rec)?;
                }
                w.flush().map_err(|source| CliError::Io {
                    context: format!("writing {}", path.display()),
                    source,
                })?;
            }
            Format::Jsonl => {
                let mut w = BufWriter::new(file);
                for r in &self.rows {
                    let mut obj = serde_json::Map::new();
                    for (k, c) in self.keys.iter().zip(&r.coords) {
                        obj.insert(k.clone(), serde_json::to_value(c)?);
                    }
                    obj.insert("metric".into(), r.metric.clone().into());
                    obj.insert("value".into(), r.value.into());
                    obj.insert("std_error".into(), r.std_error.into());
                    obj.insert("provenance".into(), r.provenance.as_str().into());
                    obj.insert("seed".into(), r.seed.into());
                    obj.insert("tolerance".into(), self.tolerances.get(&r.metric).copied().into());
                    serde_json::to_writer(&mut w, &obj)?;
                    w.write_all(b"\n").map_err(|source| CliError::Io {
                        context: format!("writing {}", path.display()),
                        source,
                    })?;
                }
                w.flush().map_err(|source| CliError::Io {
                    context: format!("writing {}", path.display()),
                    source,
                })?;
            }
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits, enough to recover the
/// exact `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub keys: Vec<String>,
    pub rows: usize,
    pub tolerances: BTreeMap<String, f64>,
}

/// Everything needed to regenerate the rows of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub outputs: Vec<OutputRecord>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Manifest {
            tool: "cogmac",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            argv: std::env::args().collect(),
            config_path: None,
            config_sha256: None,
            seed,
            parameters: serde_json::Value::Null,
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let file = File::create(path).map_err(|source| CliError::Io {
            context: format!("creating {}", path.display()),
            source,
        })?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }
}

/// Writes `table` as `<dir>/<stem>.<ext>` and records it in `manifest`.
pub fn emit(
    table: &Table,
    dir: &Path,
    stem: &str,
    format: Format,
    manifest: &mut Manifest,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        context: format!("creating {}", dir.display()),
        source,
    })?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    table.write(format, &path)?;
    manifest.outputs.push(OutputRecord {
        path: path.clone(),
        keys: table.keys.clone(),
        rows: table.rows.len(),
        tolerances: table.tolerances.clone(),
    });
    Ok(path)
}
