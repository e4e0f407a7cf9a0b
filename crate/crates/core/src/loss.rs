//! Mean squared error objective and its analytic gradient.
//!
//! Residuals are `rho_ij = k0_ij - k_ij` (prediction minus target). With
//! `e_ij = exp(-(u_i - v_j)^2)` for one component, the gradient of the mean
//! over `N` scored entries is
//!
//! ```text
//! db     =  2/N * sum rho_ij
//! da_k   =  2/N * sum rho_ij e_ij
//! du_k_i = -4/N * a_k * sum_j rho_ij e_ij (u_i - v_j)
//! dv_k_j = +4/N * a_k * sum_i rho_ij e_ij (u_i - v_j)
//! ```
//!
//! For symmetric models `v` is `u`, so both the row and the column
//! contributions land in `du`.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::model::{rbf, IndexSample, RbfModel};

/// Gradient of the loss with respect to every model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    r: usize,
    n: usize,
    m: usize,
    symmetric: bool,
    du: Vec<f64>,
    dv: Vec<f64>,
    da: Vec<f64>,
    db: f64,
}

impl GradientSet {
    pub fn zeros_like(model: &RbfModel) -> Self {
        let (r, n, m) = (model.components(), model.rows(), model.cols());
        let symmetric = model.is_symmetric();
        Self {
            r,
            n,
            m,
            symmetric,
            du: vec![0.0; r * n],
            dv: if symmetric { Vec::new() } else { vec![0.0; r * m] },
            da: vec![0.0; r],
            db: 0.0,
        }
    }

    fn reset(&mut self) {
        self.du.fill(0.0);
        self.dv.fill(0.0);
        self.da.fill(0.0);
        self.db = 0.0;
    }

    pub fn components(&self) -> usize {
        self.r
    }

    pub fn du(&self, k: usize) -> &[f64] {
        &self.du[k * self.n..(k + 1) * self.n]
    }

    /// `None` for symmetric models, whose column vectors are not stored.
    pub fn dv(&self, k: usize) -> Option<&[f64]> {
        (!self.symmetric).then(|| &self.dv[k * self.m..(k + 1) * self.m])
    }

    pub fn da(&self) -> &[f64] {
        &self.da
    }

    pub fn db(&self) -> f64 {
        self.db
    }

    pub(crate) fn flat(&self) -> (&[f64], &[f64], &[f64], f64) {
        (&self.du, &self.dv, &self.da, self.db)
    }

    /// All entries in model parameter order (u, v, a, b).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.du.len() + self.dv.len() + self.r + 1);
        out.extend_from_slice(&self.du);
        out.extend_from_slice(&self.dv);
        out.extend_from_slice(&self.da);
        out.push(self.db);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

pub fn mse_loss(target: &DenseMatrix, model: &RbfModel) -> Result<f64> {
    model.check_target(target)?;
    let mut sum = 0.0;
    for i in 0..model.rows() {
        let row = target.row(i);
        for (j, &t) in row.iter().enumerate() {
            let d = model.entry_unchecked(i, j) - t;
            sum += d * d;
        }
    }
    Ok(sum / (model.rows() * model.cols()) as f64)
}

fn check_sample(target: &DenseMatrix, model: &RbfModel, sample: &IndexSample) -> Result<()> {
    model.check_target(target)?;
    if sample.is_empty() {
        return Err(Error::Argument("sample must not be empty".into()));
    }
    sample.check_bounds(model.rows(), model.cols())
}

pub fn mse_loss_subset(target: &DenseMatrix, model: &RbfModel, sample: &IndexSample) -> Result<f64> {
    check_sample(target, model, sample)?;
    let sum: f64 = sample
        .pairs()
        .iter()
        .map(|&(i, j)| {
            let d = model.entry_unchecked(i, j) - target.get(i, j);
            d * d
        })
        .sum();
    Ok(sum / sample.len() as f64)
}

pub fn gradient(target: &DenseMatrix, model: &RbfModel) -> Result<GradientSet> {
    model.check_target(target)?;
    let mut ws = Workspace::default();
    let mut grad = GradientSet::zeros_like(model);
    ws.full(target, model, &mut grad);
    Ok(grad)
}

pub fn gradient_subset(target: &DenseMatrix, model: &RbfModel, sample: &IndexSample) -> Result<GradientSet> {
    check_sample(target, model, sample)?;
    let mut ws = Workspace::default();
    let mut grad = GradientSet::zeros_like(model);
    ws.subset(target, model, sample, &mut grad);
    Ok(grad)
}

/// Reusable scratch buffers for repeated loss/gradient evaluations.
///
/// Both entry points return the loss of the model they were given, so the
/// optimizer gets it for free with each gradient.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    kernel: Vec<f64>,
    resid: Vec<f64>,
}

impl Workspace {
    /// Full-matrix loss and gradient. Shapes must already be validated.
    pub(crate) fn full(&mut self, target: &DenseMatrix, model: &RbfModel, grad: &mut GradientSet) -> f64 {
        if model.is_symmetric() {
            self.full_symmetric(target, model, grad)
        } else {
            self.full_asymmetric(target, model, grad)
        }
    }

    fn full_asymmetric(&mut self, target: &DenseMatrix, model: &RbfModel, grad: &mut GradientSet) -> f64 {
        let (r, n, m) = (model.components(), model.rows(), model.cols());
        let nm = n * m;
        let a = model.coefficients();
        self.kernel.resize(r * nm, 0.0);
        self.resid.clear();
        self.resid.resize(nm, model.offset());

        for k in 0..r {
            let (u, v) = (model.u(k), model.v(k));
            let ker = &mut self.kernel[k * nm..(k + 1) * nm];
            for i in 0..n {
                let ui = u[i];
                let krow = &mut ker[i * m..(i + 1) * m];
                let prow = &mut self.resid[i * m..(i + 1) * m];
                for j in 0..m {
                    let e = rbf(ui, v[j]);
                    krow[j] = e;
                    prow[j] += a[k] * e;
                }
            }
        }
        let mut loss = 0.0;
        let mut db = 0.0;
        for (p, &t) in self.resid.iter_mut().zip(target.values()) {
            *p -= t;
            loss += *p * *p;
            db += *p;
        }

        grad.reset();
        let scale = 1.0 / nm as f64;
        grad.db = 2.0 * scale * db;
        for k in 0..r {
            let (u, v) = (model.u(k), model.v(k));
            let ker = &self.kernel[k * nm..(k + 1) * nm];
            let du = &mut grad.du[k * n..(k + 1) * n];
            let dv = &mut grad.dv[k * m..(k + 1) * m];
            let mut da = 0.0;
            for i in 0..n {
                let ui = u[i];
                let krow = &ker[i * m..(i + 1) * m];
                let rrow = &self.resid[i * m..(i + 1) * m];
                let mut dui = 0.0;
                for j in 0..m {
                    let w = rrow[j] * krow[j];
                    da += w;
                    let t = w * (ui - v[j]);
                    dui += t;
                    dv[j] += t;
                }
                du[i] = dui;
            }
            grad.da[k] = 2.0 * scale * da;
            let c = 4.0 * scale * a[k];
            du.iter_mut().for_each(|x| *x *= -c);
            dv.iter_mut().for_each(|x| *x *= c);
        }
        loss * scale
    }

    fn full_symmetric(&mut self, target: &DenseMatrix, model: &RbfModel, grad: &mut GradientSet) -> f64 {
        let (r, n) = (model.components(), model.rows());
        let nn = n * n;
        let a = model.coefficients();
        let diag: f64 = model.offset() + a.iter().sum::<f64>();
        // Kernel values are only stored for i < j; the diagonal is 1.
        self.kernel.resize(r * nn, 0.0);
        self.resid.clear();
        self.resid.resize(nn, model.offset());

        for k in 0..r {
            let u = model.u(k);
            let ker = &mut self.kernel[k * nn..(k + 1) * nn];
            for i in 0..n {
                let ui = u[i];
                for j in (i + 1)..n {
                    let e = rbf(ui, u[j]);
                    ker[i * n + j] = e;
                    self.resid[i * n + j] += a[k] * e;
                }
            }
        }
        let mut loss = 0.0;
        let mut db = 0.0;
        for i in 0..n {
            let d = diag - target.get(i, i);
            self.resid[i * n + i] = d;
            loss += d * d;
            db += d;
            for j in (i + 1)..n {
                let pred = self.resid[i * n + j];
                let dij = pred - target.get(i, j);
                let dji = pred - target.get(j, i);
                // Store the pair sum above the diagonal; only it is needed below.
                self.resid[i * n + j] = dij + dji;
                loss += dij * dij + dji * dji;
                db += dij + dji;
            }
        }

        grad.reset();
        let scale = 1.0 / nn as f64;
        grad.db = 2.0 * scale * db;
        let diag_resid: f64 = (0..n).map(|i| self.resid[i * n + i]).sum();
        for k in 0..r {
            let u = model.u(k);
            let ker = &self.kernel[k * nn..(k + 1) * nn];
            let du = &mut grad.du[k * n..(k + 1) * n];
            let mut da = diag_resid;
            for i in 0..n {
                let ui = u[i];
                let mut dui = 0.0;
                for j in (i + 1)..n {
                    let w = self.resid[i * n + j] * ker[i * n + j];
                    da += w;
                    let t = w * (ui - u[j]);
                    dui += t;
                    du[j] -= t;
                }
                du[i] += dui;
            }
            grad.da[k] = 2.0 * scale * da;
            let c = -4.0 * scale * a[k];
            du.iter_mut().for_each(|x| *x *= c);
        }
        loss * scale
    }

    /// Loss and gradient restricted to `sample`. Inputs must be validated.
    pub(crate) fn subset(
        &mut self,
        target: &DenseMatrix,
        model: &RbfModel,
        sample: &IndexSample,
        grad: &mut GradientSet,
    ) -> f64 {
        let (r, n, m) = (model.components(), model.rows(), model.cols());
        let a = model.coefficients();
        let (u, v) = (model.u_flat(), model.v_flat());
        self.kernel.resize(r, 0.0);
        grad.reset();
        let mut loss = 0.0;
        let mut db = 0.0;
        // Raw sums are accumulated per parameter, then scaled once, in the
        // same order the full-matrix path uses.
        for &(i, j) in sample.pairs() {
            let mut pred = model.offset();
            for k in 0..r {
                let e = rbf(u[k * n + i], v[k * m + j]);
                self.kernel[k] = e;
                pred += a[k] * e;
            }
            let rho = pred - target.get(i, j);
            loss += rho * rho;
            db += rho;
            for k in 0..r {
                let w = rho * self.kernel[k];
                grad.da[k] += w;
                let t = w * (u[k * n + i] - v[k * m + j]);
                grad.du[k * n + i] += t;
                if model.is_symmetric() {
                    grad.du[k * n + j] -= t;
                } else {
                    grad.dv[k * m + j] += t;
                }
            }
        }
        let scale = 1.0 / sample.len() as f64;
        grad.db = 2.0 * scale * db;
        for k in 0..r {
            grad.da[k] *= 2.0 * scale;
            let c = 4.0 * scale * a[k];
            grad.du[k * n..(k + 1) * n].iter_mut().for_each(|x| *x *= -c);
            if !model.is_symmetric() {
                grad.dv[k * m..(k + 1) * m].iter_mut().for_each(|x| *x *= c);
            }
        }
        loss * scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asym_model() -> RbfModel {
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

    fn sym_model() -> RbfModel {
        RbfModel::new_symmetric(
            4,
            vec![vec![0.1, -0.4, 0.9, 0.3], vec![1.5, 0.2, -0.3, 0.0]],
            vec![0.8, 1.7],
            -0.2,
        )
        .unwrap()
    }

    fn target(n: usize, m: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, m, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.4).unwrap()
    }

    #[test]
    fn zero_residual_gives_zero_loss_and_gradient() {
        for model in [asym_model(), sym_model()] {
            let t = model.evaluate_full();
            assert_eq!(mse_loss(&t, &model).unwrap(), 0.0);
            assert_eq!(gradient(&t, &model).unwrap().max_abs(), 0.0);
            let s = IndexSample::new(vec![(0, 1), (2, 3)]).unwrap();
            assert_eq!(gradient_subset(&t, &model, &s).unwrap().max_abs(), 0.0);
            assert_eq!(mse_loss_subset(&t, &model, &IndexSample::new(vec![(1, 1)]).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn offset_only_against_ones() {
        let model = RbfModel::new_asymmetric(2, 2, vec![vec![0.0; 2]], vec![vec![0.0; 2]], vec![0.0], 0.0).unwrap();
        let ones = DenseMatrix::filled(2, 2, 1.0).unwrap();
        assert_eq!(mse_loss(&ones, &model).unwrap(), 1.0);
    }

    #[test]
    fn exhaustive_subset_matches_full() {
        let m = asym_model();
        let t = target(3, 4);
        let all = IndexSample::exhaustive(3, 4);
        assert_eq!(mse_loss_subset(&t, &m, &all).unwrap(), mse_loss(&t, &m).unwrap());
        assert_eq!(gradient_subset(&t, &m, &all).unwrap(), gradient(&t, &m).unwrap());

        let s = sym_model();
        let t = target(4, 4);
        let all = IndexSample::exhaustive(4, 4);
        assert_eq!(mse_loss_subset(&t, &s, &all).unwrap(), mse_loss(&t, &s).unwrap());
        let (g1, g2) = (gradient_subset(&t, &s, &all).unwrap(), gradient(&t, &s).unwrap());
        for (x, y) in g1.to_vec().iter().zip(g2.to_vec()) {
            assert!((x - y).abs() <= 1e-14 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn shape_and_sample_errors() {
        let m = asym_model();
        let wrong = target(4, 3);
        assert!(matches!(mse_loss(&wrong, &m), Err(Error::Shape(_))));
        assert!(matches!(gradient(&wrong, &m), Err(Error::Shape(_))));
        let t = target(3, 4);
        let empty = IndexSample::new(vec![]).unwrap();
        assert!(matches!(mse_loss_subset(&t, &m, &empty), Err(Error::Argument(_))));
        assert!(matches!(gradient_subset(&t, &m, &empty), Err(Error::Argument(_))));
        let out = IndexSample::new(vec![(0, 4)]).unwrap();
        assert!(matches!(gradient_subset(&t, &m, &out), Err(Error::Range(_))));
    }

    #[test]
    fn loss_returned_by_workspace_matches_mse() {
        let mut ws = Workspace::default();
        for (model, t) in [(asym_model(), target(3, 4)), (sym_model(), target(4, 4))] {
            let mut g = GradientSet::zeros_like(&model);
            let l = ws.full(&t, &model, &mut g);
            let reference = mse_loss(&t, &model).unwrap();
            assert!((l - reference).abs() <= 1e-14 * reference);
        }
    }
}
