//! CSV schemas written by `run` and `sweep` and read back by `plot`.
//!
//! | file          | columns                                                                 |
//! |---------------|-------------------------------------------------------------------------|
//! | traces.csv    | variant, n, c0, c1, signal, fidelity, fidelity_se                       |
//! | summary.csv   | variant, f_max, n_opt, n_1e, n_1e_low_confidence, duration_us, f_max_se |
//! | sweep.csv     | axis, value, variant, f_max, n_opt, improvement                         |
//! | shots_*.csv   | shot, c_1, …, c_N                                                       |
//!
//! Empty cells mean "not computed" (for example `fidelity_se` on the
//! expectation backend).

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nvreadout_core::ShotTraces;
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, AppError, Result};

pub const TRACE_HEADER: [&str; 7] = ["variant", "n", "c0", "c1", "signal", "fidelity", "fidelity_se"];
pub const SUMMARY_HEADER: [&str; 7] = [
    "variant",
    "f_max",
    "n_opt",
    "n_1e",
    "n_1e_low_confidence",
    "duration_us",
    "f_max_se",
];
pub const SWEEP_HEADER: [&str; 6] = ["axis", "value", "variant", "f_max", "n_opt", "improvement"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub variant: String,
    pub n: usize,
    pub c0: f64,
    pub c1: f64,
    pub signal: f64,
    pub fidelity: f64,
    pub fidelity_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub f_max: f64,
    pub n_opt: usize,
    pub n_1e: Option<f64>,
    pub n_1e_low_confidence: Option<bool>,
    pub duration_us: f64,
    pub f_max_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub variant: String,
    pub f_max: f64,
    pub n_opt: usize,
    pub improvement: f64,
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| AppError::io_path(path, e))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let pb = path.to_path_buf();
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(&pb, e))?;
    }
    w.flush().map_err(|e| AppError::io_path(path, e))
}

pub fn write_shots(path: &Path, shots: &ShotTraces) -> Result<()> {
    let pb = path.to_path_buf();
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["shot".to_string()];
    header.extend((1..=shots.n_readouts).map(|k| format!("c_{k}")));
    w.write_record(&header).map_err(|e| csv_err(&pb, e))?;
    let mut rec = Vec::with_capacity(shots.n_readouts + 1);
    for (i, row) in shots.rows().enumerate() {
        rec.clear();
        rec.push(i.to_string());
        rec.extend(row.iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(&pb, e))?;
    }
    w.flush().map_err(|e| AppError::io_path(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|e| AppError::io_path(path, e))
}

/// Reads `path` as rows of `T`, insisting on exactly `header`.
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, kind: &str, header: &[&str]) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io_path(path, e))?;
    parse_rows(&text, &path.display().to_string(), kind, header)
}

pub fn parse_rows<T: for<'de> Deserialize<'de>>(
    text: &str,
    source: &str,
    kind: &str,
    header: &[&str],
) -> Result<Vec<T>> {
    let mismatch = |reason: String| AppError::SchemaMismatch {
        path: source.into(),
        kind: kind.into(),
        reason,
    };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let got = r.headers().map_err(|e| mismatch(e.to_string()))?.clone();
    if got.is_empty() {
        return Err(mismatch("empty input".into()));
    }
    if got.iter().ne(header.iter().copied()) {
        return Err(mismatch(format!(
            "expected columns [{}], found [{}]",
            header.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        rows.push(rec.map_err(|e| mismatch(format!("row {}: {e}", i + 1)))?);
    }
    if rows.is_empty() {
        return Err(mismatch("no data rows".into()));
    }
    Ok(rows)
}

pub(crate) fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
