//! Plain CSV for matrices, vectors and curves. Numbers are written with
//! `{:.16e}` so they round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{DenseVector, Matrix};

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|c| {
            c.trim().parse::<f64>().map_err(|e| {
                Error::InvalidInput(format!("line {}: cannot parse {:?}: {e}", lineno + 1, c))
            })
        })
        .collect()
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// One row per line, comma separated.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| format_f64(v)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let rows = data_lines(text)
        .map(|(i, l)| parse_row(l, i))
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

/// One entry per line.
pub fn vector_to_csv(v: &DenseVector) -> String {
    let mut out = String::new();
    for &x in v.iter() {
        let _ = writeln!(out, "{}", format_f64(x));
    }
    out
}

/// Accepts one entry per line or a single comma-separated row.
pub fn vector_from_csv(text: &str) -> Result<DenseVector> {
    let mut entries = Vec::new();
    for (i, l) in data_lines(text) {
        entries.extend(parse_row(l, i)?);
    }
    DenseVector::new(entries)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    matrix_from_csv(&fs::read_to_string(path)?)
}

pub fn read_vector(path: &Path) -> Result<DenseVector> {
    vector_from_csv(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    Ok(fs::write(path, matrix_to_csv(m))?)
}

pub fn write_vector(path: &Path, v: &DenseVector) -> Result<()> {
    Ok(fs::write(path, vector_to_csv(v))?)
}

/// Column-oriented table with a header row. All columns must have equal
/// length.
pub fn curves_to_csv(header: &[&str], columns: &[&[f64]]) -> Result<String> {
    if header.len() != columns.len() {
        return Err(Error::DimensionMismatch {
            expected: header.len(),
            found: columns.len(),
        });
    }
    let n = columns.first().map_or(0, |c| c.len());
    if let Some(bad) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| format_f64(c[i])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(out)
}

/// Parses a table written by [`curves_to_csv`] into its header and columns.
pub fn curves_from_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = data_lines(text);
    let (_, head) = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty table".into()))?;
    let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (i, l) in lines {
        let row = parse_row(l, i)?;
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch {
                expected: header.len(),
                found: row.len(),
            });
        }
        cols.iter_mut().zip(row).for_each(|(c, v)| c.push(v));
    }
    Ok((header, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = Matrix::from_rows(&[vec![0.1, -1.0 / 3.0], vec![1e-300, 7.0e22]]).unwrap();
        let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn vector_accepts_row_or_column() {
        let v = DenseVector::new(vec![std::f64::consts::PI, -2.5]).unwrap();
        assert_eq!(vector_from_csv(&vector_to_csv(&v)).unwrap(), v);
        assert_eq!(vector_from_csv("1,2,3\n").unwrap().len(), 3);
        assert!(vector_from_csv("1,x\n").is_err());
        assert!(vector_from_csv("").is_err());
    }

    #[test]
    fn curves_round_trip() {
        let a = [1.0, 2.0];
        let b = [0.5, 0.25];
        let text = curves_to_csv(&["iter", "d"], &[&a, &b]).unwrap();
        let (h, cols) = curves_from_csv(&text).unwrap();
        assert_eq!(h, vec!["iter", "d"]);
        assert_eq!(cols, vec![a.to_vec(), b.to_vec()]);
        assert!(curves_to_csv(&["a"], &[&a, &b]).is_err());
    }
}
