//! File formats: datasets as CSV (`x1,…,xs,y`), models and configs as JSON,
//! and the per-iteration training trace as CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use dasgd_core::{Dataset, IterationRecord, NewsvendorParams, Sample, TrainState};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::error::{CliError, Result};

pub fn dataset_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("x{j}")).chain(std::iter::once("y".to_string())).collect()
}

pub fn write_dataset_to<W: Write>(w: W, data: &Dataset) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(dataset_header(data.dim()))?;
    let mut row = Vec::with_capacity(data.dim() + 1);
    for s in data.samples() {
        row.clear();
        row.extend(s.x.iter().chain(std::iter::once(&s.y)).map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn dataset_bytes(data: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset_to(&mut buf, data).expect("writing to memory cannot fail");
    buf
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    write_dataset_to(BufWriter::new(file), data).map_err(CliError::csv(path))
}

/// Parses a dataset; `path` only labels errors.
pub fn read_dataset_from<R: Read>(r: R, path: &Path) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(CliError::csv(path))?.clone();
    let dim = header.len().checked_sub(1).ok_or_else(|| CliError::format(path, "empty header"))?;
    if header.iter().ne(dataset_header(dim).iter().map(String::as_str)) {
        return Err(CliError::format(path, format!("header must be x1..x{dim},y, found {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(CliError::csv(path))?;
        let vals = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| CliError::format(path, format!("row {}: {e}", i + 1)))?;
        let (y, x) = vals.split_last().expect("csv enforces the header width");
        let s = Sample::new(x.to_vec(), *y);
        if !s.is_finite() {
            return Err(CliError::format(path, format!("row {}: non-finite value", i + 1)));
        }
        samples.push(s);
    }
    Ok(Dataset::new(dim, samples)?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(CliError::io(path))?;
    read_dataset_from(BufReader::new(file), path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(CliError::io(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| CliError::Json { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.into(), source })?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// Serializes rows with a header into a CSV file.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

/// Like [`write_rows`], but writes the header line even for no rows.
pub fn write_rows_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(header).map_err(CliError::csv(path))?;
    for r in rows {
        w.serialize(r).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).map_err(CliError::csv(path))?;
    rdr.deserialize().collect::<csv::Result<Vec<T>>>().map_err(CliError::csv(path))
}

/// A trained policy as written by `train` and read by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub method: Method,
    /// Coefficients followed by the intercept.
    pub theta: Vec<f64>,
    pub gamma: f64,
    pub rho: Option<f64>,
    pub l1_weight: Option<f64>,
    pub params: NewsvendorParams,
    pub iterations: usize,
}

impl ModelFile {
    pub fn state(&self) -> TrainState {
        TrainState { theta: self.theta.clone(), gamma: self.gamma, t: self.iterations }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub gamma: f64,
    pub h_value: f64,
    pub grad_theta_norm_sq: f64,
    pub inner_steps: usize,
}

impl From<&IterationRecord> for TraceRow {
    fn from(r: &IterationRecord) -> Self {
        Self { t: r.t, gamma: r.gamma, h_value: r.h_value, grad_theta_norm_sq: r.grad_theta_norm_sq, inner_steps: r.inner_steps }
    }
}
