//! CSV and JSON file formats.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constructions::TailSample;
use crate::dpot::DataMatrix;
use crate::error::{Error, Result};
use crate::max_link::{TabulatedCdf, TabulatedDensity};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn parse_record(rec: &csv::StringRecord) -> Option<Vec<f64>> {
    rec.iter().map(|f| f.parse::<f64>().ok()).collect()
}

fn parse_error(path: &Path, line: usize, detail: &str) -> Error {
    Error::InvalidInput(format!("{}: line {line}: {detail}", path.display()))
}

/// Reads a numeric matrix; a first row that does not parse as numbers is
/// taken as a header and returned separately.
pub fn read_matrix_csv_with_header(path: &Path) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let mut header = None;
    let mut rows = Vec::new();
    for (i, rec) in reader(path)?.records().enumerate() {
        let rec = rec?;
        match parse_record(&rec) {
            Some(row) => rows.push(row),
            None if i == 0 => header = Some(rec.iter().map(str::to_owned).collect()),
            None => return Err(parse_error(path, i + 1, "non-numeric field")),
        }
    }
    Ok((header, rows))
}

pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(read_matrix_csv_with_header(path)?.1)
}

pub fn write_matrix_csv(path: &Path, rows: &[Vec<f64>], header: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for row in rows {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an observation file; the first row must be a header.
pub fn read_data_csv(path: &Path) -> Result<DataMatrix> {
    let mut records = reader(path)?.into_records();
    let header: Vec<String> = match records.next() {
        Some(rec) => rec?.iter().map(str::to_owned).collect(),
        None => return Err(parse_error(path, 1, "empty file")),
    };
    if header.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(parse_error(path, 1, "header row required"));
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = parse_record(&rec).ok_or_else(|| parse_error(path, i + 2, "non-numeric field"))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::TooFewExceedances { count: 0, required: 1 });
    }
    DataMatrix::from_rows(&rows, Some(header))
}

pub fn write_data_csv(path: &Path, data: &DataMatrix) -> Result<()> {
    write_matrix_csv(path, &data.to_rows(), Some(data.columns()))
}

/// One row per draw, optionally followed by a `kind` column.
pub fn write_samples_csv(path: &Path, samples: &[TailSample], with_kind: bool) -> Result<()> {
    let d = samples.first().map_or(0, |s| s.values.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    if with_kind {
        header.push("kind".into());
    }
    w.write_record(&header)?;
    for s in samples {
        let mut rec: Vec<String> = s.values.iter().map(f64::to_string).collect();
        if with_kind {
            rec.push(s.kind.label().into());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric-only rows with a header of `x1..xd`.
pub fn write_vectors_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let d = rows.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    write_matrix_csv(path, rows, Some(&header))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSidecar {
    pub grid_step: Option<f64>,
    pub tail_mass_tol: f64,
}

/// `cdf.csv` pairs with `cdf.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Reads a two-column `(s, value)` table.
pub fn read_tabulated_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = read_matrix_csv(path)?;
    let mut grid = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != 2 {
            return Err(parse_error(path, i + 1, "expected two columns (s, value)"));
        }
        grid.push(r[0]);
        values.push(r[1]);
    }
    Ok((grid, values))
}

pub fn read_sidecar(csv_path: &Path) -> Result<Option<TabulatedSidecar>> {
    let p = sidecar_path(csv_path);
    if p.exists() {
        read_json(&p).map(Some)
    } else {
        Ok(None)
    }
}

/// Reads a CDF table; the tail tolerance comes from the sidecar when
/// present, else from `default_tail_mass_tol`.
pub fn read_tabulated_cdf(path: &Path, default_tail_mass_tol: f64) -> Result<TabulatedCdf> {
    let (grid, values) = read_tabulated_csv(path)?;
    let tol = read_sidecar(path)?.map_or(default_tail_mass_tol, |s| s.tail_mass_tol);
    TabulatedCdf::new(grid, values, tol)
}

pub fn read_tabulated_density(path: &Path, tol_norm: f64) -> Result<TabulatedDensity> {
    let (grid, values) = read_tabulated_csv(path)?;
    TabulatedDensity::new(grid, values, tol_norm)
}

pub fn write_tabulated_csv(path: &Path, grid: &[f64], values: &[f64], sidecar: Option<&TabulatedSidecar>) -> Result<()> {
    let rows: Vec<Vec<f64>> = grid.iter().zip(values).map(|(s, v)| vec![*s, *v]).collect();
    write_matrix_csv(path, &rows, Some(&["s".to_string(), "value".to_string()]))?;
    if let Some(sc) = sidecar {
        write_json(&sidecar_path(path), sc)?;
    }
    Ok(())
}

pub fn write_tabulated_cdf(path: &Path, cdf: &TabulatedCdf) -> Result<()> {
    let sc = TabulatedSidecar {
        grid_step: cdf.grid_step(),
        tail_mass_tol: cdf.tail_mass_tol(),
    };
    write_tabulated_csv(path, cdf.grid(), cdf.values(), Some(&sc))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
