//! Plain-text exchange formats.
//!
//! * matrices: CSV, one row per line, no header;
//! * vectors: one value per line (a single CSV row or column is also accepted);
//! * index sets: one 1-based index per line.
//!
//! Floats are written in Rust's shortest round-trip representation, so output is
//! byte-stable for identical values.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{}:{line}: '{}' is not a number", path.display(), field.trim())))
}

/// Reads a header-less CSV matrix.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Parse(format!("{}:{}: expected {c} columns, found {}", path.display(), i + 1, rec.len())))
            }
            _ => {}
        }
        for f in rec.iter() {
            data.push(parse_f64(f, path, i + 1)?);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse(format!("{}: empty matrix", path.display())))?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Reads a vector stored as a single column or a single row.
pub fn read_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let path = path.as_ref();
    let m = read_matrix(path)?;
    if m.ncols() == 1 || m.nrows() == 1 {
        Ok(DVector::from_iterator(m.len(), m.transpose().iter().copied()))
    } else {
        Err(Error::Parse(format!("{}: a vector file must have one row or one column, found {}×{}", path.display(), m.nrows(), m.ncols())))
    }
}

/// Reads 1-based indices, returning them 0-based.
pub fn read_index_set(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: usize = t.parse().map_err(|_| Error::Parse(format!("{}:{}: '{t}' is not an index", path.display(), i + 1)))?;
        if v == 0 {
            return Err(Error::Parse(format!("{}:{}: indices are 1-based", path.display(), i + 1)));
        }
        out.push(v - 1);
    }
    Ok(out)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_vector(path: impl AsRef<Path>, v: &DVector<f64>) -> Result<()> {
    let out: String = v.iter().map(|x| format!("{x}\n")).collect();
    write_text(path, &out)
}

/// Writes 0-based indices as 1-based, one per line.
pub fn write_index_set(path: impl AsRef<Path>, idx: &[usize]) -> Result<()> {
    let out: String = idx.iter().map(|i| format!("{}\n", i + 1)).collect();
    write_text(path, &out)
}

/// Writes a CSV table with a header row.
pub fn write_table<S: AsRef<str>>(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
