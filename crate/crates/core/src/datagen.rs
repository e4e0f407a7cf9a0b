//! Seeded generators for every target family: Gaussian noise, the
//! two-component exact RBF matrix, random graphs, the S-curve point cloud,
//! and Gram-derived distances.
//!
//! Each generator takes a root seed; independent parts of one generator
//! draw from separate streams (see [`crate::rng`]).

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_arg, Error, Result};
use crate::matrix::{push_csv_row, DenseMatrix};
use crate::model::{rbf, RbfModel};
use crate::rng;

pub fn gaussian_matrix(n: usize, m: usize, seed: u64) -> Result<DenseMatrix> {
    ensure_arg!(n > 0 && m > 0, "dims must be positive");
    let mut rng = rng::stream(seed, 0);
    let values = (0..n * m).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::new(n, m, values)
}

/// Normalized Gaussian filter taps for offsets `-radius..=radius`, radius `ceil(4 sigma)`.
fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Index into `0..n` with half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(mut idx: i64, n: i64) -> usize {
    let period = 2 * n;
    idx = idx.rem_euclid(period);
    if idx >= n {
        idx = period - 1 - idx;
    }
    idx as usize
}

/// Convolves `values` with a normalized Gaussian of width `sigma`, reflect-padded.
pub fn gaussian_filter(values: &[f64], sigma: f64) -> Result<Vec<f64>> {
    ensure_arg!(sigma > 0.0 && sigma.is_finite(), "sigma must be positive");
    let taps = gaussian_taps(sigma);
    let radius = (taps.len() / 2) as i64;
    let n = values.len() as i64;
    Ok((0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(t, w)| w * values[reflect(i + t as i64 - radius, n)])
                .sum()
        })
        .collect())
}

/// Standard normal vector smoothed by a Gaussian filter of width `sigma`.
pub fn smoothed_gaussian_vector(n: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    ensure_arg!(n > 0, "length must be positive");
    let mut rng = rng::stream(seed, 0);
    let raw: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    gaussian_filter(&raw, sigma)
}

/// `5 K(u1) - 4 K(u2)` with symmetric components built from smoothed
/// Gaussian vectors of widths 3 and 6. Returns the matrix and `(u1, u2)`.
pub fn k_exact2(n: usize, seed: u64) -> Result<(DenseMatrix, Vec<f64>, Vec<f64>)> {
    ensure_arg!(n >= 2, "n must be at least 2");
    let u1 = standardize(smoothed_gaussian_vector(n, 3.0, rng::derive_seed(seed, 1))?);
    let u2 = standardize(smoothed_gaussian_vector(n, 6.0, rng::derive_seed(seed, 2))?);
    let model = RbfModel::new_symmetric(n, vec![u1.clone(), u2.clone()], vec![5.0, -4.0], 0.0)?;
    Ok((model.evaluate_full(), u1, u2))
}

/// Rescales to zero mean and unit (population) standard deviation.
pub fn standardize(mut x: Vec<f64>) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        x.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
    x
}

fn check_prob(p: f64, name: &str) -> Result<()> {
    ensure_arg!((0.0..=1.0).contains(&p), "{name} = {p} is not a probability");
    Ok(())
}

fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<DenseMatrix> {
    let mut values = vec![0.0; n * n];
    for &(i, j) in edges {
        values[i * n + j] = 1.0;
        values[j * n + i] = 1.0;
    }
    DenseMatrix::new(n, n, values)
}

pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<DenseMatrix> {
    ensure_arg!(n > 0, "graph needs at least one vertex");
    check_prob(p, "p")?;
    let mut rng = rng::stream(seed, 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    adjacency_from_edges(n, &edges)
}

/// Preferential attachment. The first `m_attach` vertices form a clique;
/// each later vertex connects to `m_attach` distinct earlier vertices drawn
/// with probability proportional to their current degree.
pub fn barabasi_albert(n: usize, m_attach: usize, seed: u64) -> Result<DenseMatrix> {
    ensure_arg!(m_attach >= 1 && m_attach < n, "need 1 <= m_attach < n, got m_attach={m_attach}, n={n}");
    let mut rng = rng::stream(seed, 0);
    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();
    for i in 0..m_attach {
        for j in (i + 1)..m_attach {
            edges.push((i, j));
            degree[i] += 1;
            degree[j] += 1;
        }
    }
    for new in m_attach..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(m_attach);
        for _ in 0..m_attach {
            let weight = |v: usize| if chosen.contains(&v) { 0 } else { degree[v] };
            let total: usize = (0..new).map(weight).sum();
            let pick = if total == 0 {
                // Only reachable while every candidate is isolated (m_attach = 1 start).
                let free: Vec<usize> = (0..new).filter(|v| !chosen.contains(v)).collect();
                free[rng.random_range(0..free.len())]
            } else {
                let mut ticket = rng.random_range(0..total);
                let mut picked = None;
                for v in 0..new {
                    let w = weight(v);
                    if ticket < w {
                        picked = Some(v);
                        break;
                    }
                    ticket -= w;
                }
                picked.expect("ticket below total weight")
            };
            chosen.push(pick);
        }
        for &t in &chosen {
            edges.push((t, new));
            degree[t] += 1;
            degree[new] += 1;
        }
    }
    adjacency_from_edges(n, &edges)
}

/// Stochastic block model with vertices ordered by block.
pub fn sbm(sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<DenseMatrix> {
    ensure_arg!(!sizes.is_empty() && sizes.iter().all(|&s| s > 0), "block sizes must be positive");
    check_prob(p_in, "p_in")?;
    check_prob(p_out, "p_out")?;
    let labels = block_labels(sizes);
    let n = labels.len();
    let mut rng = rng::stream(seed, 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    adjacency_from_edges(n, &edges)
}

/// Block index of every vertex for the SBM vertex ordering.
pub fn block_labels(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect()
}

/// Expected SBM adjacency: `p_in` within blocks, `p_out` across.
pub fn sbm_expectation(sizes: &[usize], p_in: f64, p_out: f64) -> Result<DenseMatrix> {
    let labels = block_labels(sizes);
    let n = labels.len();
    DenseMatrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { p_in } else { p_out })
}

/// Points with optional per-point labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, labels: Option<Vec<f64>>) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        ensure_arg!(points.iter().all(|p| p.len() == d), "points must share a dimension");
        if points.iter().flatten().chain(labels.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point cloud".into()));
        }
        if let Some(l) = &labels {
            ensure_arg!(l.len() == points.len(), "{} labels for {} points", l.len(), points.len());
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    /// One point per line, label (if any) in the last column.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.points.iter().enumerate() {
            let mut row = p.clone();
            if let Some(l) = &self.labels {
                row.push(l[i]);
            }
            push_csv_row(&mut out, &row);
        }
        out
    }
}

fn s_curve_point(t: f64, y: f64) -> [f64; 3] {
    let sign = if t > 0.0 { 1.0 } else if t < 0.0 { -1.0 } else { 0.0 };
    [t.sin(), 2.0 * y, sign * (t.cos() - 1.0)]
}

/// S-shaped surface sample: `t ~ U[-3pi/2, 3pi/2]`, `y ~ U[0, 2]`, point
/// `(sin t, 2y, sgn(t)(cos t - 1))` plus iid `N(0, delta^2)` noise per
/// coordinate. Labels are the `t` values.
pub fn s_curve(n_points: usize, noise_delta: f64, seed: u64) -> Result<PointCloud> {
    ensure_arg!(n_points >= 1, "need at least one point");
    ensure_arg!(noise_delta >= 0.0 && noise_delta.is_finite(), "noise must be nonnegative");
    let mut param_rng = rng::stream(seed, 0);
    let mut noise_rng = rng::stream(seed, 1);
    let mut points = Vec::with_capacity(n_points);
    let mut labels = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let t = param_rng.random_range(-1.5 * PI..=1.5 * PI);
        let y = param_rng.random_range(0.0..=2.0);
        let mut p = s_curve_point(t, y).to_vec();
        for c in &mut p {
            *c += noise_delta * noise_rng.sample::<f64, _>(StandardNormal);
        }
        points.push(p);
        labels.push(t);
    }
    PointCloud::new(points, Some(labels))
}

/// Noiseless surface position for a given `t` and scaled width coordinate `2y`.
pub fn s_curve_surface(t: f64, width: f64) -> [f64; 3] {
    s_curve_point(t, width / 2.0)
}

/// `exp(-|x_i - x_j|^2 / 2)` for every pair of points.
pub fn soft_distance_matrix(cloud: &PointCloud) -> Result<DenseMatrix> {
    ensure_arg!(!cloud.is_empty(), "point cloud is empty");
    let n = cloud.len();
    let mut values = vec![1.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = cloud.points[i]
                .iter()
                .zip(&cloud.points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let k = (-d2 / 2.0).exp();
            values[i * n + j] = k;
            values[j * n + i] = k;
        }
    }
    DenseMatrix::new(n, n, values)
}

/// Feature-space distances from a Gram matrix:
/// `d_ij = sqrt(max(0, g_ii + g_jj - 2 g_ij))`.
pub fn distance_from_gram(gram: &DenseMatrix) -> Result<DenseMatrix> {
    if !gram.is_symmetric(1e-12) {
        return Err(Error::Argument("Gram matrix must be symmetric".into()));
    }
    let n = gram.rows();
    ensure_arg!((0..n).all(|i| gram.get(i, i) >= 0.0), "Gram diagonal must be nonnegative");
    DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            (gram.get(a, a) + gram.get(b, b) - 2.0 * gram.get(a, b)).max(0.0).sqrt()
        }
    })
}

/// RBF Gram matrix `exp(-|x_i - x_j|^2 / (2 h^2))` of random Gaussian points
/// in `dim` dimensions: the synthetic stand-in for an externally supplied
/// kernel.
pub fn synthetic_gram(n: usize, dim: usize, length_scale: f64, seed: u64) -> Result<DenseMatrix> {
    ensure_arg!(n > 0 && dim > 0 && length_scale > 0.0, "bad synthetic Gram parameters");
    let mut rng = rng::stream(seed, 0);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let h2 = 2.0 * length_scale * length_scale;
    DenseMatrix::from_fn(n, n, |i, j| {
        let d2: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / h2).exp()
    })
}

/// Ground-truth sidecar for the two-component matrix: `n` rows of `u1,u2`.
pub fn truth_csv(u1: &[f64], u2: &[f64]) -> String {
    let mut out = String::from("u1,u2\n");
    for (a, b) in u1.iter().zip(u2) {
        let _ = writeln!(out, "{a:.16e},{b:.16e}");
    }
    out
}

/// Symmetric one-component matrix `exp(-(u_i - u_j)^2)` for a ground-truth vector.
pub fn single_component(u: &[f64]) -> Result<DenseMatrix> {
    let n = u.len();
    DenseMatrix::from_fn(n, n, |i, j| rbf(u[i], u[j]))
}
