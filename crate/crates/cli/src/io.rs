//! File plumbing shared by the subcommands: format selection by
//! extension, byte-exact encoding, and checksums.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rbfdecomp::apps::{image_to_matrix, matrix_to_image, GrayImage};
use rbfdecomp::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
    Pgm,
}

impl MatrixFormat {
    /// `.bin` is binary, `.pgm` an image, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("bin") => Self::Binary,
            Some("pgm") => Self::Pgm,
            _ => Self::Csv,
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn encode_matrix(matrix: &DenseMatrix, format: MatrixFormat) -> Vec<u8> {
    match format {
        MatrixFormat::Csv => matrix.to_csv_string().into_bytes(),
        MatrixFormat::Binary => matrix.to_binary(),
        MatrixFormat::Pgm => matrix_to_image(matrix).to_pgm(false),
    }
}

/// Writes bytes, creating parent directories, and returns their checksum.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<u64> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(fnv1a64(bytes))
}

pub fn write_matrix(path: &Path, matrix: &DenseMatrix) -> Result<u64> {
    write_bytes(path, &encode_matrix(matrix, MatrixFormat::from_path(path)))
}

/// Reads CSV, binary (sniffed) or PGM (by extension) into a matrix.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let matrix = match MatrixFormat::from_path(path) {
        MatrixFormat::Pgm => image_to_matrix(&GrayImage::read_pgm(path)?),
        _ => DenseMatrix::read(path)?,
    };
    Ok(matrix)
}

/// `dir/stem.suffix` next to `path`, e.g. `out.csv` -> `out.trace.csv`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn report_written(path: &Path, rows: usize, cols: usize, checksum: u64) {
    println!("wrote {rows}x{cols} to {} (fnv1a64 {checksum:016x})", path.display());
}
