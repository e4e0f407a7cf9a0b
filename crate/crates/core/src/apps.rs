//! Downstream analyses of fitted approximations: edge prediction scored by
//! ROC/AUC, one-dimensional clustering for community recovery, correlation
//! of learned coordinates with ground truth, and grayscale image I/O.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use itertools::Itertools;

use crate::error::{ensure_arg, Error, Result};
use crate::matrix::{fmt_f64, DenseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct RocPoint {
    /// Scores at or above this are predicted edges; `+inf` for the origin.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// `threshold,fpr,tpr` rows followed by an `auc,<value>` footer.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let thr = if p.threshold.is_infinite() { "inf".to_string() } else { fmt_f64(p.threshold) };
            let _ = writeln!(out, "{thr},{},{}", fmt_f64(p.fpr), fmt_f64(p.tpr));
        }
        let _ = writeln!(out, "auc,{}", fmt_f64(self.auc));
        out
    }
}

/// ROC curve of predicting edges by thresholding `approx`.
///
/// Only off-diagonal pairs `i < j` are scored. Tied scores share one
/// threshold and move the curve together.
pub fn edge_prediction_roc(adjacency: &DenseMatrix, approx: &DenseMatrix) -> Result<RocCurve> {
    if adjacency.shape() != approx.shape() || !adjacency.is_square() {
        return Err(Error::Shape("adjacency and approximation must be equal square matrices".into()));
    }
    ensure_arg!(
        adjacency.values().iter().all(|&v| v == 0.0 || v == 1.0),
        "adjacency must be binary"
    );
    let n = adjacency.rows();
    let mut scored: Vec<(f64, bool)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| (approx.get(i, j), adjacency.get(i, j) == 1.0))
        .collect();
    let positives = scored.iter().filter(|s| s.1).count();
    let negatives = scored.len() - positives;
    ensure_arg!(positives > 0 && negatives > 0, "need both edges and non-edges to score");

    scored.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for group in scored.chunk_by(|x, y| x.0 == y.0) {
        tp += group.iter().filter(|s| s.1).count();
        fp += group.len() - group.iter().filter(|s| s.1).count();
        points.push(RocPoint {
            threshold: group[0].0,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Splits sorted values at the `k - 1` widest consecutive gaps.
///
/// Labels increase with value. Equal gaps are cut at the lower sorted
/// position first.
pub fn cluster_1d(values: &[f64], k: usize) -> Result<Vec<usize>> {
    let n = values.len();
    ensure_arg!(k >= 1 && k <= n, "cluster count {k} outside [1, {n}]");
    ensure_arg!(values.iter().all(|v| v.is_finite()), "values must be finite");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut gaps: Vec<(f64, usize)> = order
        .windows(2)
        .enumerate()
        .map(|(pos, w)| (values[w[1]] - values[w[0]], pos))
        .collect();
    gaps.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut cuts: Vec<usize> = gaps.iter().take(k - 1).map(|g| g.1).collect();
    cuts.sort_unstable();

    let mut labels = vec![0; n];
    let mut label = 0;
    let mut next_cut = cuts.iter().peekable();
    for (pos, &idx) in order.iter().enumerate() {
        labels[idx] = label;
        if next_cut.peek() == Some(&&pos) {
            next_cut.next();
            label += 1;
        }
    }
    Ok(labels)
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    labels.iter().copied().sorted().dedup().collect()
}

/// Fraction of agreeing labels under the best matching of label names.
pub fn community_accuracy(labels: &[usize], ground_truth: &[usize]) -> Result<f64> {
    ensure_arg!(labels.len() == ground_truth.len(), "labelings differ in length");
    ensure_arg!(!labels.is_empty(), "labelings are empty");
    let (ours, theirs) = (distinct(labels), distinct(ground_truth));
    ensure_arg!(
        ours.len() == theirs.len(),
        "labelings use {} and {} distinct labels",
        ours.len(),
        theirs.len()
    );
    ensure_arg!(ours.len() <= 8, "exhaustive matching supports at most 8 labels");
    let k = ours.len();
    let index = |set: &[usize], x: usize| set.binary_search(&x).expect("label present");
    let mut confusion = vec![0usize; k * k];
    for (&a, &b) in labels.iter().zip(ground_truth) {
        confusion[index(&ours, a) * k + index(&theirs, b)] += 1;
    }
    let best = (0..k)
        .permutations(k)
        .map(|perm| perm.iter().enumerate().map(|(a, &b)| confusion[a * k + b]).sum::<usize>())
        .max()
        .unwrap_or(0);
    Ok(best as f64 / labels.len() as f64)
}

pub fn pearson_correlation(u: &[f64], t: &[f64]) -> Result<f64> {
    ensure_arg!(u.len() == t.len() && u.len() >= 2, "need two equal-length samples of size >= 2");
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mt = t.iter().sum::<f64>() / n;
    let (mut suu, mut stt, mut sut) = (0.0, 0.0, 0.0);
    for (&a, &b) in u.iter().zip(t) {
        suu += (a - mu) * (a - mu);
        stt += (b - mt) * (b - mt);
        sut += (a - mu) * (b - mt);
    }
    ensure_arg!(suu > 0.0 && stt > 0.0, "zero variance");
    Ok((sut / (suu * stt).sqrt()).clamp(-1.0, 1.0))
}

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Out-of-range intensities are clamped.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        ensure_arg!(width > 0 && height > 0, "image dims must be positive");
        if pixels.len() != width * height {
            return Err(Error::Shape(format!("{width}x{height} image needs {} pixels", width * height)));
        }
        if pixels.iter().any(|p| p.is_nan()) {
            return Err(Error::NonFinite("pixel".into()));
        }
        let pixels = pixels.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(Self { width, height, pixels })
    }

    /// Luminance conversion of interleaved RGB intensities in `[0, 1]`.
    pub fn from_rgb(width: usize, height: usize, rgb: &[f64]) -> Result<Self> {
        if rgb.len() != 3 * width * height {
            return Err(Error::Shape("RGB buffer length must be 3 * width * height".into()));
        }
        let gray = rgb.chunks_exact(3).map(|c| 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]).collect();
        Self::new(width, height, gray)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Top-left crop of at most `max_w x max_h`.
    pub fn crop(&self, max_w: usize, max_h: usize) -> GrayImage {
        let (w, h) = (self.width.min(max_w), self.height.min(max_h));
        let pixels = (0..h).flat_map(|y| self.pixels[y * self.width..y * self.width + w].iter().copied()).collect();
        GrayImage { width: w, height: h, pixels }
    }

    /// 8-bit PGM, binary (`P5`) or ASCII (`P2`), maxval 255.
    pub fn to_pgm(&self, ascii: bool) -> Vec<u8> {
        let bytes: Vec<u8> = self.pixels.iter().map(|p| (p * 255.0).round() as u8).collect();
        let magic = if ascii { "P2" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        if ascii {
            for row in bytes.chunks(self.width) {
                out.extend(row.iter().map(u8::to_string).join(" ").bytes());
                out.push(b'\n');
            }
        } else {
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn from_pgm(data: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut token = || -> Result<String> {
            loop {
                while pos < data.len() && data[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < data.len() && data[pos] == b'#' {
                    while pos < data.len() && data[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Parse("PGM truncated".into()));
            }
            Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
        };
        let magic = token()?;
        let int = |s: String| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM integer {s:?}")));
        let width = int(token()?)?;
        let height = int(token()?)?;
        let maxval = int(token()?)?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Parse(format!("unsupported PGM maxval {maxval}")));
        }
        let count = width * height;
        let raw: Vec<usize> = match magic.as_str() {
            "P2" => (0..count).map(|_| token().and_then(int)).collect::<Result<_>>()?,
            "P5" => {
                // Exactly one whitespace byte separates the header from the raster.
                let start = pos + 1;
                if data.len() < start + count {
                    return Err(Error::Parse("PGM raster truncated".into()));
                }
                data[start..start + count].iter().map(|&b| b as usize).collect()
            }
            other => return Err(Error::Parse(format!("unsupported image magic {other:?}"))),
        };
        if raw.iter().any(|&v| v > maxval) {
            return Err(Error::Parse("pixel exceeds maxval".into()));
        }
        Self::new(width, height, raw.into_iter().map(|v| v as f64 / maxval as f64).collect())
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_pgm(&fs::read(path)?)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>, ascii: bool) -> Result<()> {
        fs::write(path, self.to_pgm(ascii))?;
        Ok(())
    }
}

pub fn image_to_matrix(image: &GrayImage) -> DenseMatrix {
    DenseMatrix::new(image.height, image.width, image.pixels.clone()).expect("clamped pixels are finite")
}

pub fn matrix_to_image(matrix: &DenseMatrix) -> GrayImage {
    GrayImage::new(matrix.cols(), matrix.rows(), matrix.values().to_vec()).expect("finite matrix")
}
