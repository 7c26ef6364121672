//! Matrix and label file formats.
//!
//! CSV matrices have one row per ambient coordinate and one column per
//! sample, with no header. The binary format is the magic `SSCM`, then
//! `u32` row and column counts, then the entries as little-endian `f64` in
//! column-major order.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::{Result, SscError};

pub const BINARY_MAGIC: &[u8; 4] = b"SSCM";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.bin` and `.sscm` files are binary, everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("sscm") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn parse_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (c, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| SscError::Parse {
                line: line_no,
                message: format!("column {}: cannot parse {cell:?} as a number", c + 1),
            })?;
            if !v.is_finite() {
                return Err(SscError::Parse { line: line_no, message: format!("column {}: non-finite value {cell}", c + 1) });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(SscError::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

pub fn to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn encode_binary(m: &DMatrix<f64>) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.nrows()).map_err(|_| SscError::InvalidConfig("too many rows for the binary format".into()))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| SscError::InvalidConfig("too many columns for the binary format".into()))?;
    let mut out = Vec::with_capacity(12 + 8 * m.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_binary(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let bad = |message: &str| SscError::Parse { line: 0, message: message.to_string() };
    if bytes.len() < 12 || &bytes[..4] != BINARY_MAGIC {
        return Err(bad("missing SSCM header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[12..];
    if body.len() != 8 * rows * cols {
        return Err(bad(&format!("expected {} data bytes for {rows}x{cols}, found {}", 8 * rows * cols, body.len())));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for (k, chunk) in body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(bad(&format!("non-finite entry at row {}, column {}", k % rows.max(1) + 1, k / rows.max(1) + 1)));
        }
        values.push(v);
    }
    Ok(DMatrix::from_vec(rows, cols, values))
}

/// Reads a matrix, recognizing the binary format by its magic bytes.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| SscError::Parse { line: 0, message: "file is not UTF-8 text".into() })?;
        parse_csv(&text)
    }
}

pub fn save_matrix(path: &Path, m: &DMatrix<f64>, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => fs::write(path, to_csv(m))?,
        MatrixFormat::Binary => fs::write(path, encode_binary(m)?)?,
    }
    Ok(())
}

/// One non-negative integer label per line.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.trim().parse().map_err(|_| SscError::Parse { line: k + 1, message: format!("invalid label {:?}", l.trim()) })
        })
        .collect()
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(&fs::read_to_string(path)?)
}

pub fn save_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_example() {
        let m = parse_csv("1,0,0\n0,1,1\n").unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 3));
        assert_eq!(m.column(0).as_slice(), &[1.0, 0.0]);
        assert_eq!(m.column(2).as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn csv_errors_name_the_line() {
        match parse_csv("1,2\n3,NaN\n") {
            Err(SscError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_csv("1,2\n3\n") {
            Err(SscError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_csv("1,inf\n").is_err());
        assert!(parse_csv("1,x\n").is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DMatrix::from_fn(4, 5, |r, c| ((r * 7 + c) as f64).sin() * 1e-3 + 1.0 / 3.0);
        assert_eq!(parse_csv(&to_csv(&m)).unwrap(), m);
    }

    #[test]
    fn binary_round_trip_and_errors() {
        let m = DMatrix::from_fn(3, 2, |r, c| r as f64 - 0.1 * c as f64);
        assert_eq!(decode_binary(&encode_binary(&m).unwrap()).unwrap(), m);
        assert!(decode_binary(b"SSCX\0\0\0\0\0\0\0\0").is_err());
        let mut short = encode_binary(&m).unwrap();
        short.pop();
        assert!(decode_binary(&short).is_err());
    }

    #[test]
    fn labels_parse() {
        assert_eq!(parse_labels("0\n2\n1\n").unwrap(), vec![0, 2, 1]);
        assert!(parse_labels("0\n-1\n").is_err());
    }
}
