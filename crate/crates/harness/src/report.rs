//! Result records and their CSV/JSON forms.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment_id: String,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub build: String,
    /// The spec that produced the record, with all defaults filled in.
    pub spec: ExperimentSpec,
    pub columns: Vec<String>,
    /// One row per sweep point, aligned with `columns`.
    pub rows: Vec<Vec<f64>>,
    pub metadata: BTreeMap<String, Value>,
    /// Wall-clock time; the only field that varies between identical runs.
    pub runtime_s: f64,
}

impl ResultRecord {
    /// Equality ignoring `runtime_s`.
    pub fn same_results(&self, other: &ResultRecord) -> bool {
        ResultRecord {
            runtime_s: 0.0,
            ..self.clone()
        } == ResultRecord {
            runtime_s: 0.0,
            ..other.clone()
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

/// Header plus one line per row. Numbers use the shortest decimal form
/// that reads back to the same `f64`.
pub fn write_csv<W: Write>(mut w: W, record: &ResultRecord) -> std::io::Result<()> {
    writeln!(w, "{}", record.columns.join(","))?;
    for row in &record.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn to_json(record: &ResultRecord) -> Result<String> {
    Ok(serde_json::to_string_pretty(record)?)
}

pub fn from_json(text: &str) -> Result<ResultRecord> {
    Ok(serde_json::from_str(text)?)
}

fn file_stem(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("result{s}")
    } else {
        s
    }
}

/// Writes `<dir>/<id>.csv` and/or `<dir>/<id>.json`, creating `dir`.
pub fn emit_report(record: &ResultRecord, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let stem = file_stem(&record.experiment_id);
    let mut written = Vec::new();
    if matches!(format, Format::Csv | Format::Both) {
        let path = dir.join(format!("{stem}.csv"));
        let mut buf = Vec::new();
        write_csv(&mut buf, record).expect("write to memory");
        std::fs::write(&path, buf).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    if matches!(format, Format::Json | Format::Both) {
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, to_json(record)?).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
