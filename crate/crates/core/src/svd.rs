//! Truncated SVD and symmetric eigendecomposition baselines.
//!
//! Both decompositions use Jacobi rotations: one-sided (Hestenes) Jacobi for
//! the SVD and cyclic two-sided Jacobi for symmetric matrices. They are
//! exact to working precision at the desk-scale sizes used here.

use std::fmt::Write as _;

use crate::error::{ensure_arg, Error, Result};
use crate::matrix::{push_csv_row, DenseMatrix};

const MAX_SWEEPS: usize = 80;

/// Best low-rank approximation of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdApprox {
    pub rank: usize,
    pub rows: usize,
    pub cols: usize,
    pub left_vectors: Vec<Vec<f64>>,
    /// Nonincreasing. For the eigen variant these are `|lambda|`.
    pub singular_values: Vec<f64>,
    pub right_vectors: Vec<Vec<f64>>,
    /// Signed eigenvalues ordered by `|lambda|`, eigen variant only.
    pub eigenvalues: Option<Vec<f64>>,
    /// Sum of squared discarded singular values.
    pub tail_energy: f64,
}

impl SvdApprox {
    pub fn is_eigen(&self) -> bool {
        self.eigenvalues.is_some()
    }

    /// Signed weight of each retained rank-one term.
    fn weights(&self) -> &[f64] {
        self.eigenvalues.as_deref().unwrap_or(&self.singular_values)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.rows * self.cols];
        for ((x, y), &w) in self.left_vectors.iter().zip(&self.right_vectors).zip(self.weights()) {
            for i in 0..self.rows {
                let wx = w * x[i];
                let row = &mut out[i * self.cols..(i + 1) * self.cols];
                for (o, &yj) in row.iter_mut().zip(y) {
                    *o += wx * yj;
                }
            }
        }
        DenseMatrix::new(self.rows, self.cols, out).expect("finite factors")
    }

    /// Exact MSE of the truncation, from the discarded spectrum.
    pub fn tail_mse(&self) -> f64 {
        self.tail_energy / (self.rows * self.cols) as f64
    }

    /// Stored scalars: both vector sets plus the weights (one set for eigen).
    pub fn param_count(&self) -> usize {
        self.vector_param_count() + self.rank
    }

    pub fn vector_param_count(&self) -> usize {
        if self.is_eigen() {
            self.rank * self.rows
        } else {
            self.rank * (self.rows + self.cols)
        }
    }

    /// CSV container: a `rank,n,m,kind` header and its values, a line of
    /// weights (singular values, or signed eigenvalues), the left vectors,
    /// then the right vectors (omitted for the eigen variant).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("rank,n,m,kind\n");
        let kind = if self.is_eigen() { "eigen" } else { "svd" };
        let _ = writeln!(out, "{},{},{},{kind}", self.rank, self.rows, self.cols);
        push_csv_row(&mut out, self.weights());
        for x in &self.left_vectors {
            push_csv_row(&mut out, x);
        }
        if !self.is_eigen() {
            for y in &self.right_vectors {
                push_csv_row(&mut out, y);
            }
        }
        out
    }
}

/// Full thin SVD: `(U columns, sigma, V columns)` with `min(n, m)` triplets,
/// sorted by nonincreasing singular value.
fn jacobi_svd(target: &DenseMatrix) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let transposed = target.rows() < target.cols();
    let a = if transposed { target.transpose() } else { target.clone() };
    let (n, m) = a.shape();
    // Columns of A, rotated in place until mutually orthogonal.
    let mut w: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| a.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..m).map(|j| unit(m, j)).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = w.iter().enumerate().map(|(j, col)| (norm(col), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let sigma_max = order.first().map_or(0.0, |o| o.0);
    let cutoff = sigma_max * 1e-13 * n.max(m) as f64;

    let mut left: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut sigma = Vec::with_capacity(m);
    let mut right = Vec::with_capacity(m);
    for &(s, j) in &order {
        let x = if s > cutoff && s > 0.0 {
            w[j].iter().map(|x| x / s).collect()
        } else {
            complete_basis(&left, n)
        };
        left.push(x);
        sigma.push(s);
        right.push(v[j].clone());
    }
    let (mut left, mut right) = if transposed { (right, left) } else { (left, right) };
    for (x, y) in left.iter_mut().zip(right.iter_mut()) {
        canonical_sign(x, y);
    }
    (left, sigma, right)
}

/// Singular values, nonincreasing, `min(n, m)` of them.
pub fn singular_values(target: &DenseMatrix) -> Vec<f64> {
    jacobi_svd(target).1
}

/// Best rank-`rank` approximation in Frobenius norm.
pub fn truncated_svd(target: &DenseMatrix, rank: usize) -> Result<SvdApprox> {
    let k = target.rows().min(target.cols());
    ensure_arg!(rank >= 1 && rank <= k, "rank {rank} outside [1, {k}]");
    let (mut left, mut sigma, mut right) = jacobi_svd(target);
    let tail_energy = tail(&sigma, rank);
    left.truncate(rank);
    sigma.truncate(rank);
    right.truncate(rank);
    Ok(SvdApprox {
        rank,
        rows: target.rows(),
        cols: target.cols(),
        left_vectors: left,
        singular_values: sigma,
        right_vectors: right,
        eigenvalues: None,
        tail_energy,
    })
}

/// `(rank, mse)` of the best rank-r approximation for `r = 1..=max_rank`.
pub fn svd_mse_curve(target: &DenseMatrix, max_rank: usize) -> Result<Vec<(usize, f64)>> {
    let k = target.rows().min(target.cols());
    ensure_arg!(max_rank >= 1 && max_rank <= k, "max_rank {max_rank} outside [1, {k}]");
    let sigma = singular_values(target);
    let cells = (target.rows() * target.cols()) as f64;
    Ok((1..=max_rank).map(|r| (r, tail(&sigma, r) / cells)).collect())
}

/// Smallest rank whose best approximation has MSE strictly below `threshold`.
pub fn min_rank_below(target: &DenseMatrix, threshold: f64) -> usize {
    let sigma = singular_values(target);
    let cells = (target.rows() * target.cols()) as f64;
    (1..=sigma.len()).find(|&r| tail(&sigma, r) / cells < threshold).unwrap_or(sigma.len())
}

fn tail(sigma: &[f64], rank: usize) -> f64 {
    // Summed smallest first.
    sigma[rank.min(sigma.len())..].iter().rev().map(|s| s * s).sum()
}

/// Eigenpairs of a symmetric matrix, ordered by nonincreasing `|lambda|`.
pub fn symmetric_eigen(target: &DenseMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    ensure_arg!(target.is_square(), "eigendecomposition needs a square matrix");
    let n = target.rows();
    let mut a: Vec<f64> = target.values().to_vec();
    let mut vecs: Vec<f64> = (0..n * n).map(|x| if x / n == x % n { 1.0 } else { 0.0 }).collect();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum();
        if off <= f64::EPSILON * f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (vecs[k * n + p], vecs[k * n + q]);
                    vecs[k * n + p] = c * vkp - s * vkq;
                    vecs[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y * n + y].abs().total_cmp(&a[x * n + x].abs()).then(x.cmp(&y)));
    let values = order.iter().map(|&j| a[j * n + j]).collect();
    let vectors = order
        .iter()
        .map(|&j| {
            let mut x: Vec<f64> = (0..n).map(|i| vecs[i * n + j]).collect();
            let mut dummy = Vec::new();
            canonical_sign(&mut x, &mut dummy);
            x
        })
        .collect();
    Ok((values, vectors))
}

/// Best rank-`rank` approximation of a symmetric matrix from its
/// largest-magnitude eigenpairs.
pub fn symmetric_lowrank(target: &DenseMatrix, rank: usize) -> Result<SvdApprox> {
    if !target.is_symmetric(1e-12) {
        return Err(Error::Argument("symmetric_lowrank needs a symmetric matrix".into()));
    }
    let n = target.rows();
    ensure_arg!(rank >= 1 && rank <= n, "rank {rank} outside [1, {n}]");
    let (mut values, mut vectors) = symmetric_eigen(target)?;
    let abs: Vec<f64> = values.iter().map(|l| l.abs()).collect();
    let tail_energy = tail(&abs, rank);
    values.truncate(rank);
    vectors.truncate(rank);
    Ok(SvdApprox {
        rank,
        rows: n,
        cols: n,
        singular_values: abs[..rank].to_vec(),
        left_vectors: vectors.clone(),
        right_vectors: vectors,
        eigenvalues: Some(values),
        tail_energy,
    })
}

fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    e
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// A unit vector orthogonal to every vector in `basis`.
fn complete_basis(basis: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    let mut best_norm = 0.0;
    for j in 0..n {
        let mut x = unit(n, j);
        // Two Gram-Schmidt passes.
        for _ in 0..2 {
            for b in basis {
                let c = dot(&x, b);
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
            }
        }
        let nx = norm(&x);
        if nx > best_norm {
            best_norm = nx;
            best = Some(x);
        }
        if nx > 0.5 {
            break;
        }
    }
    let mut x = best.expect("basis smaller than dimension");
    x.iter_mut().for_each(|v| *v /= best_norm);
    x
}

/// Flips `(x, y)` so that the largest-magnitude entry of `x` is nonnegative.
fn canonical_sign(x: &mut [f64], y: &mut [f64]) {
    let pivot = x
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i);
    if let Some(i) = pivot {
        if x[i] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
            y.iter_mut().for_each(|v| *v = -*v);
        }
    }
}
