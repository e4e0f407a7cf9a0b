//! Dense row-major matrices and their on-disk formats.
//!
//! Two formats are supported: plain CSV (one row per line, comma separated)
//! and a small binary container: the magic bytes `RBFM`, `u32` rows, `u32`
//! cols (little endian), then `rows * cols` little-endian `f64` values.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const BINARY_MAGIC: &[u8; 4] = b"RBFM";

/// Row-major real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix dims must be positive, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {}) is {}",
                pos / cols,
                pos % cols,
                values[pos]
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::Shape(format!(
                "row {bad} has {} entries, expected {m}",
                rows[bad].len()
            )));
        }
        Self::new(n, m, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest |a_ij - a_ji|, or `None` for non-square matrices.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        Some(worst)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry().is_some_and(|a| a <= tol)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                values.push(self.get(i, j));
            }
        }
        DenseMatrix { rows: self.cols, cols: self.rows, values }
    }

    /// Mean squared difference between two equally shaped matrices.
    pub fn mse(&self, other: &DenseMatrix) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.values.len() as f64)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Keep rows and columns whose indices appear in `idx` (in that order).
    pub fn submatrix(&self, row_idx: &[usize], col_idx: &[usize]) -> Result<DenseMatrix> {
        if let Some(&bad) = row_idx.iter().find(|&&i| i >= self.rows) {
            return Err(Error::Range(format!("row {bad} >= {}", self.rows)));
        }
        if let Some(&bad) = col_idx.iter().find(|&&j| j >= self.cols) {
            return Err(Error::Range(format!("col {bad} >= {}", self.cols)));
        }
        DenseMatrix::from_fn(row_idx.len(), col_idx.len(), |a, b| self.get(row_idx[a], col_idx[b]))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24);
        for i in 0..self.rows {
            push_csv_row(&mut out, self.row(i));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let rows = parse_csv_rows(text)?;
        if rows.is_empty() {
            return Err(Error::Parse("empty matrix file".into()));
        }
        Self::from_rows(&rows)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.values.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_binary(mut reader: impl Read) -> Result<Self> {
        let mut header = [0u8; 12];
        reader.read_exact(&mut header)?;
        if &header[..4] != BINARY_MAGIC {
            return Err(Error::Parse("bad magic, expected RBFM".into()));
        }
        let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let mut body = Vec::new();
        reader.read_to_end(&mut body)?;
        if body.len() != rows * cols * 8 {
            return Err(Error::Parse(format!(
                "{rows}x{cols} payload needs {} bytes, got {}",
                rows * cols * 8,
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(rows, cols, values)
    }

    /// Reads a matrix, choosing the format from the file's magic bytes.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path.as_ref())?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(bytes.as_slice())
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Parse("matrix file is neither RBFM nor UTF-8 CSV".into()))?;
            Self::parse_csv(&text)
        }
    }

    /// Writes CSV unless the extension is `.bin`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = if path.extension().is_some_and(|e| e == "bin") {
            self.to_binary()
        } else {
            self.to_csv_string().into_bytes()
        };
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }
}

/// Fixed 17-significant-digit rendering used by every text output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn push_csv_row(out: &mut String, row: &[f64]) {
    for (j, v) in row.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

pub(crate) fn parse_f64(field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("not a number: {field:?}")))
}

pub(crate) fn parse_csv_line(line: &str) -> Result<Vec<f64>> {
    if line.trim().is_empty() {
        return Ok(Vec::new());
    }
    line.split(',').map(parse_f64).collect()
}

pub(crate) fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    BufReader::new(text.as_bytes())
        .lines()
        .map(|l| l.map_err(Error::from))
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| parse_csv_line(&l?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(matches!(DenseMatrix::new(2, 2, vec![1.0; 3]), Err(Error::Shape(_))));
        assert!(matches!(DenseMatrix::new(0, 2, vec![]), Err(Error::Shape(_))));
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(DenseMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let m = DenseMatrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0) - 0.7).unwrap();
        assert_eq!(DenseMatrix::parse_csv(&m.to_csv_string()).unwrap(), m);
        assert_eq!(DenseMatrix::from_binary(m.to_binary().as_slice()).unwrap(), m);
    }

    #[test]
    fn binary_layout() {
        let m = DenseMatrix::new(1, 2, vec![1.0, -2.0]).unwrap();
        let b = m.to_binary();
        assert_eq!(&b[..4], b"RBFM");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &2u32.to_le_bytes());
        assert_eq!(&b[12..20], &1.0f64.to_le_bytes());
        assert_eq!(b.len(), 28);
        assert!(DenseMatrix::from_binary(&b[..27]).is_err());
    }

    #[test]
    fn ragged_csv_is_rejected() {
        assert!(DenseMatrix::parse_csv("1,2\n3\n").is_err());
        assert!(DenseMatrix::parse_csv("1,x\n").is_err());
    }

    #[test]
    fn transpose_and_symmetry() {
        let m = DenseMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64).unwrap();
        let t = m.transpose();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.get(2, 1), m.get(1, 2));
        assert_eq!(m.asymmetry(), None);
        assert!(DenseMatrix::identity(4).unwrap().is_symmetric(0.0));
    }
}
