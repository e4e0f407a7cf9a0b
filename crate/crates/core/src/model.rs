//! The RBF decomposition model.
//!
//! A model with `r` components approximates an `n x m` matrix as
//!
//! ```text
//! k0_ij = b + sum_k a_k * exp(-(u_k[i] - v_k[j])^2)
//! ```
//!
//! Symmetric models store only `u`; every read of `v` returns `u`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{parse_csv_line, parse_f64, push_csv_row, DenseMatrix};

/// Single RBF kernel value `exp(-(x - y)^2)`.
#[inline(always)]
pub fn rbf(x: f64, y: f64) -> f64 {
    let d = x - y;
    (-d * d).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfModel {
    r: usize,
    n: usize,
    m: usize,
    /// `r * n`, component-major.
    u: Vec<f64>,
    /// `r * m`, empty for symmetric models.
    v: Vec<f64>,
    a: Vec<f64>,
    b: f64,
    symmetric: bool,
}

impl RbfModel {
    pub fn new_asymmetric(
        n: usize,
        m: usize,
        u: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        a: Vec<f64>,
        b: f64,
    ) -> Result<Self> {
        let r = a.len();
        check_vectors("u", &u, r, n)?;
        check_vectors("v", &v, r, m)?;
        Self::from_flat(r, n, m, u.concat(), v.concat(), a, b, false)
    }

    pub fn new_symmetric(n: usize, u: Vec<Vec<f64>>, a: Vec<f64>, b: f64) -> Result<Self> {
        let r = a.len();
        check_vectors("u", &u, r, n)?;
        Self::from_flat(r, n, n, u.concat(), Vec::new(), a, b, true)
    }

    /// A model with no components, predicting `b` everywhere.
    pub fn offset_only(n: usize, m: usize, b: f64) -> Result<Self> {
        Self::from_flat(0, n, m, Vec::new(), Vec::new(), Vec::new(), b, false)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_flat(
        r: usize,
        n: usize,
        m: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        a: Vec<f64>,
        b: f64,
        symmetric: bool,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Shape(format!("model dims must be positive, got {n}x{m}")));
        }
        if symmetric && n != m {
            return Err(Error::Shape(format!("symmetric model must be square, got {n}x{m}")));
        }
        let v_len = if symmetric { 0 } else { r * m };
        if u.len() != r * n || v.len() != v_len || a.len() != r {
            return Err(Error::Shape("component storage does not match r, n, m".into()));
        }
        let all = u.iter().chain(&v).chain(&a).chain(std::iter::once(&b));
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("model parameters must be finite".into()));
        }
        Ok(Self { r, n, m, u, v, a, b, symmetric })
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    #[inline]
    pub fn u(&self, k: usize) -> &[f64] {
        &self.u[k * self.n..(k + 1) * self.n]
    }

    #[inline]
    pub fn v(&self, k: usize) -> &[f64] {
        if self.symmetric {
            self.u(k)
        } else {
            &self.v[k * self.m..(k + 1) * self.m]
        }
    }

    #[inline]
    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    #[inline]
    pub fn offset(&self) -> f64 {
        self.b
    }

    pub(crate) fn u_flat(&self) -> &[f64] {
        &self.u
    }

    pub(crate) fn v_flat(&self) -> &[f64] {
        if self.symmetric {
            &self.u
        } else {
            &self.v
        }
    }

    /// Mutable views of (u, v, a, b); `v` is empty for symmetric models.
    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut f64) {
        (&mut self.u, &mut self.v, &mut self.a, &mut self.b)
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.a).all(|x| x.is_finite()) && self.b.is_finite()
    }

    /// Number of learnable scalars: vectors, coefficients and offset.
    pub fn param_count(&self) -> usize {
        self.vector_param_count() + self.r + 1
    }

    /// Number of vector entries only (`u` and, when asymmetric, `v`).
    pub fn vector_param_count(&self) -> usize {
        self.u.len() + self.v.len()
    }

    /// `exp(-(u_k[i] - v_k[j])^2)` for a single component.
    pub fn rbf_entry(&self, k: usize, i: usize, j: usize) -> Result<f64> {
        if k >= self.r || i >= self.n || j >= self.m {
            return Err(Error::Range(format!(
                "(k={k}, i={i}, j={j}) outside r={}, {}x{}",
                self.r, self.n, self.m
            )));
        }
        Ok(rbf(self.u(k)[i], self.v(k)[j]))
    }

    #[inline]
    pub(crate) fn entry_unchecked(&self, i: usize, j: usize) -> f64 {
        let mut acc = self.b;
        for k in 0..self.r {
            acc += self.a[k] * rbf(self.u[k * self.n + i], self.v_flat()[k * self.m + j]);
        }
        acc
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.n || j >= self.m {
            return Err(Error::Range(format!("({i}, {j}) outside {}x{}", self.n, self.m)));
        }
        Ok(self.entry_unchecked(i, j))
    }

    /// Dense reconstruction. Symmetric models produce an exactly symmetric matrix.
    pub fn evaluate_full(&self) -> DenseMatrix {
        let (n, m) = (self.n, self.m);
        let mut out = vec![0.0; n * m];
        if self.symmetric {
            for i in 0..n {
                for j in i..n {
                    let val = self.entry_unchecked(i, j);
                    out[i * n + j] = val;
                    out[j * n + i] = val;
                }
            }
        } else {
            for i in 0..n {
                for j in 0..m {
                    out[i * m + j] = self.entry_unchecked(i, j);
                }
            }
        }
        DenseMatrix::new(n, m, out).expect("finite model yields finite matrix")
    }

    pub fn evaluate_entries(&self, sample: &IndexSample) -> Result<Vec<f64>> {
        sample.check_bounds(self.n, self.m)?;
        Ok(sample.pairs().iter().map(|&(i, j)| self.entry_unchecked(i, j)).collect())
    }

    pub(crate) fn check_target(&self, target: &DenseMatrix) -> Result<()> {
        if target.shape() != (self.n, self.m) {
            return Err(Error::Shape(format!(
                "target is {}x{}, model is {}x{}",
                target.rows(),
                target.cols(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    /// Serializes to the CSV model container.
    ///
    /// Layout: a `r,n,m,symmetric,b` header line and its values, one line of
    /// coefficients, `r` lines of `u` vectors, then `r` lines of `v` vectors
    /// (omitted for symmetric models).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("r,n,m,symmetric,b\n");
        let _ = writeln!(out, "{},{},{},{},{:.16e}", self.r, self.n, self.m, self.symmetric, self.b);
        push_csv_row(&mut out, &self.a);
        for k in 0..self.r {
            push_csv_row(&mut out, self.u(k));
        }
        if !self.symmetric {
            for k in 0..self.r {
                push_csv_row(&mut out, self.v(k));
            }
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("model file truncated before {what}")))
        };
        if next("header")?.trim() != "r,n,m,symmetric,b" {
            return Err(Error::Parse("missing model header".into()));
        }
        let meta: Vec<&str> = next("header values")?.split(',').map(str::trim).collect();
        if meta.len() != 5 {
            return Err(Error::Parse("header needs 5 fields".into()));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad integer {s:?}")));
        let (r, n, m) = (int(meta[0])?, int(meta[1])?, int(meta[2])?);
        let symmetric = match meta[3] {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(Error::Parse(format!("bad symmetric flag {other:?}"))),
        };
        let b = parse_f64(meta[4])?;
        let a = parse_csv_line(next("coefficients")?)?;
        if a.len() != r {
            return Err(Error::Parse(format!("expected {r} coefficients, got {}", a.len())));
        }
        let mut read_block = |len: usize, what: &str| -> Result<Vec<f64>> {
            let mut flat = Vec::with_capacity(r * len);
            for k in 0..r {
                let row = parse_csv_line(next(what)?)?;
                if row.len() != len {
                    return Err(Error::Parse(format!("{what} row {k} has {} entries, expected {len}", row.len())));
                }
                flat.extend(row);
            }
            Ok(flat)
        };
        let u = read_block(n, "u vectors")?;
        let v = if symmetric { Vec::new() } else { read_block(m, "v vectors")? };
        Self::from_flat(r, n, m, u, v, a, b, symmetric)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_csv(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

fn check_vectors(name: &str, vs: &[Vec<f64>], r: usize, len: usize) -> Result<()> {
    if vs.len() != r {
        return Err(Error::Shape(format!("{} {name} vectors for {r} coefficients", vs.len())));
    }
    if let Some((k, bad)) = vs.iter().enumerate().find(|(_, x)| x.len() != len) {
        return Err(Error::Shape(format!("{name}[{k}] has length {}, expected {len}", bad.len())));
    }
    Ok(())
}

/// A set of distinct matrix coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSample {
    pairs: Vec<(usize, usize)>,
}

impl IndexSample {
    /// Builds a sample, rejecting repeated coordinates.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut sorted = pairs.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Argument(format!("duplicate pair {:?} in sample", w[0])));
        }
        Ok(Self { pairs })
    }

    /// Caller guarantees distinctness.
    pub(crate) fn from_distinct(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    /// Every coordinate of an `n x m` matrix in row-major order.
    pub fn exhaustive(n: usize, m: usize) -> Self {
        Self { pairs: (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect() }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn check_bounds(&self, n: usize, m: usize) -> Result<()> {
        match self.pairs.iter().find(|&&(i, j)| i >= n || j >= m) {
            Some(p) => Err(Error::Range(format!("pair {p:?} outside {n}x{m}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> RbfModel {
        RbfModel::new_symmetric(2, vec![vec![0.0, 1.0]], vec![1.0], 0.0).unwrap()
    }

    fn sample_model() -> RbfModel {
        RbfModel::new_asymmetric(
            3,
            4,
            vec![vec![0.1, -0.4, 0.9], vec![1.5, 0.2, -0.3]],
            vec![vec![0.0, 0.5, -1.0, 2.0], vec![-0.2, 0.3, 0.8, 1.1]],
            vec![1.3, -0.7],
            0.25,
        )
        .unwrap()
    }

    #[test]
    fn rbf_entry_values() {
        let m = RbfModel::new_asymmetric(
            1,
            3,
            vec![vec![0.0]],
            vec![vec![0.0, 1.0, -1.0]],
            vec![1.0],
            0.0,
        )
        .unwrap();
        assert_eq!(m.rbf_entry(0, 0, 0).unwrap(), 1.0);
        assert!((m.rbf_entry(0, 0, 1).unwrap() - 0.36787944117144233).abs() < 1e-15);
        let shifted = RbfModel::new_asymmetric(1, 1, vec![vec![0.3]], vec![vec![-0.7]], vec![1.0], 0.0).unwrap();
        assert!((shifted.rbf_entry(0, 0, 0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(m.rbf_entry(1, 0, 0), Err(Error::Range(_))));
        assert!(matches!(m.rbf_entry(0, 1, 0), Err(Error::Range(_))));
        assert!(matches!(m.rbf_entry(0, 0, 3), Err(Error::Range(_))));
    }

    #[test]
    fn evaluate_full_examples() {
        let ones = RbfModel::new_asymmetric(2, 3, vec![vec![0.0; 2]], vec![vec![0.0; 3]], vec![1.0], 0.0).unwrap();
        assert!(ones.evaluate_full().values().iter().all(|&v| v == 1.0));

        let constant = RbfModel::new_asymmetric(2, 3, vec![vec![0.4, 1.0]], vec![vec![2.0; 3]], vec![0.0], -3.5).unwrap();
        assert!(constant.evaluate_full().values().iter().all(|&v| v == -3.5));

        let k = two_by_two().evaluate_full();
        let e = (-1.0f64).exp();
        assert_eq!(k.values(), &[1.0, e, e, 1.0]);
    }

    #[test]
    fn symmetric_diagonal_and_transpose() {
        let m = RbfModel::new_symmetric(
            5,
            vec![vec![0.1, 0.7, -0.3, 2.0, 0.0], vec![1.0, -1.0, 0.5, 0.25, 3.0]],
            vec![2.0, -0.75],
            0.1,
        )
        .unwrap();
        let k = m.evaluate_full();
        assert_eq!(k, k.transpose());
        for i in 0..5 {
            assert_eq!(k.get(i, i), 0.1 + 2.0 - 0.75);
        }
        assert_eq!(m.v(1), m.u(1));
    }

    #[test]
    fn evaluate_entries_matches_full() {
        let m = sample_model();
        let full = m.evaluate_full();
        let all = m.evaluate_entries(&IndexSample::exhaustive(3, 4)).unwrap();
        assert_eq!(all.as_slice(), full.values());
        let one = two_by_two().evaluate_entries(&IndexSample::new(vec![(0, 0)]).unwrap()).unwrap();
        assert_eq!(one, vec![1.0]);
        let bad = IndexSample::new(vec![(3, 0)]).unwrap();
        assert!(matches!(m.evaluate_entries(&bad), Err(Error::Range(_))));
    }

    #[test]
    fn param_counts() {
        let sym = RbfModel::new_symmetric(100, vec![vec![0.0; 100]; 2], vec![1.0, 1.0], 0.0).unwrap();
        assert_eq!(sym.param_count(), 203);
        assert_eq!(sym.vector_param_count(), 200);
        let asym = RbfModel::new_asymmetric(3, 4, vec![vec![0.0; 3]], vec![vec![0.0; 4]], vec![1.0], 0.0).unwrap();
        assert_eq!(asym.param_count(), 9);
        assert_eq!(RbfModel::offset_only(3, 4, 0.0).unwrap().param_count(), 1);
    }

    #[test]
    fn construction_errors() {
        assert!(RbfModel::new_symmetric(2, vec![vec![0.0; 3]], vec![1.0], 0.0).is_err());
        assert!(RbfModel::new_asymmetric(2, 2, vec![vec![0.0; 2]], vec![], vec![1.0], 0.0).is_err());
        assert!(RbfModel::new_symmetric(2, vec![vec![f64::NAN, 0.0]], vec![1.0], 0.0).is_err());
        assert!(IndexSample::new(vec![(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn model_csv_round_trip() {
        for m in [sample_model(), two_by_two(), RbfModel::offset_only(2, 3, 1.5).unwrap()] {
            let text = m.to_csv_string();
            assert_eq!(RbfModel::parse_csv(&text).unwrap(), m);
        }
        assert!(RbfModel::parse_csv("r,n,m,symmetric,b\n1,2,2,true,0\n1\n0\n").is_err());
    }
}
