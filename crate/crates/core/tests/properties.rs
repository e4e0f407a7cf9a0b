//! Invariants of the model, loss and analysis functions, checked on
//! random instances.

use proptest::prelude::*;
use rbfdecomp::apps::{cluster_1d, community_accuracy, edge_prediction_roc, pearson_correlation};
use rbfdecomp::datagen::distance_from_gram;
use rbfdecomp::{gradient, gradient_subset, mse_loss, mse_loss_subset, DenseMatrix, IndexSample, RbfModel};

#[derive(Debug, Clone)]
struct Instance {
    n: usize,
    m: usize,
    symmetric: bool,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    a: Vec<f64>,
    b: f64,
    target: Vec<f64>,
}

impl Instance {
    fn model(&self) -> RbfModel {
        if self.symmetric {
            RbfModel::new_symmetric(self.n, self.u.clone(), self.a.clone(), self.b).unwrap()
        } else {
            RbfModel::new_asymmetric(self.n, self.m, self.u.clone(), self.v.clone(), self.a.clone(), self.b).unwrap()
        }
    }

    fn target(&self) -> DenseMatrix {
        DenseMatrix::new(self.n, self.m, self.target.clone()).unwrap()
    }

    /// Parameters in gradient order: u rows, v rows, a, b.
    fn flat(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.u.concat();
        if !self.symmetric {
            p.extend(self.v.concat());
        }
        p.extend(&self.a);
        p.push(self.b);
        p
    }

    fn with_flat(&self, p: &[f64]) -> Instance {
        let r = self.a.len();
        let mut it = p.iter().copied();
        let mut take = |len: usize| -> Vec<f64> { it.by_ref().take(len).collect() };
        let u = (0..r).map(|_| take(self.n)).collect();
        let v = if self.symmetric { Vec::new() } else { (0..r).map(|_| take(self.m)).collect() };
        let a = take(r);
        let b = take(1)[0];
        Instance { u, v, a, b, ..self.clone() }
    }

    fn shifted(&self, c: f64, sign: f64) -> Instance {
        let map = |rows: &Vec<Vec<f64>>| rows.iter().map(|x| x.iter().map(|&t| sign * t + c).collect()).collect();
        Instance { u: map(&self.u), v: map(&self.v), ..self.clone() }
    }
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=6, 1usize..=6, 1usize..=3, any::<bool>()).prop_flat_map(|(n, m0, r, symmetric)| {
        let m = if symmetric { n } else { m0 };
        (
            prop::collection::vec(prop::collection::vec(-2.0..2.0f64, n), r),
            prop::collection::vec(prop::collection::vec(-2.0..2.0f64, m), r),
            prop::collection::vec(-2.0..2.0f64, r),
            -1.0..1.0f64,
            prop::collection::vec(-2.0..2.0f64, n * m),
        )
            .prop_map(move |(u, v, a, b, target)| Instance {
                n,
                m,
                symmetric,
                u,
                v: if symmetric { Vec::new() } else { v },
                a,
                b,
                target,
            })
    })
}

fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn translation_and_reflection_leave_the_matrix_unchanged(inst in instance(), c in -3.0..3.0f64, flip in any::<bool>()) {
        let sign = if flip { -1.0 } else { 1.0 };
        let base = inst.model().evaluate_full();
        let moved = inst.shifted(c, sign).model().evaluate_full();
        for (x, y) in base.values().iter().zip(moved.values()) {
            prop_assert!(close(*x, *y, 1e-12), "{x} vs {y}");
        }
    }

    #[test]
    fn gradient_matches_central_differences(inst in instance()) {
        let target = inst.target();
        let analytic = gradient(&target, &inst.model()).unwrap().to_vec();
        let p = inst.flat();
        prop_assert_eq!(analytic.len(), p.len());
        let h = 1e-6;
        for idx in 0..p.len() {
            let mut plus = p.clone();
            plus[idx] += h;
            let mut minus = p.clone();
            minus[idx] -= h;
            let lp = mse_loss(&target, &inst.with_flat(&plus).model()).unwrap();
            let lm = mse_loss(&target, &inst.with_flat(&minus).model()).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            prop_assert!((fd - analytic[idx]).abs() <= 1e-6 * (1.0 + analytic[idx].abs()), "coordinate {idx}: fd {fd} analytic {}", analytic[idx]);
        }
    }

    #[test]
    fn translation_is_a_null_direction_of_the_gradient(inst in instance()) {
        let g = gradient(&inst.target(), &inst.model()).unwrap();
        for k in 0..g.components() {
            let mut total: f64 = g.du(k).iter().sum();
            let mut scale: f64 = g.du(k).iter().map(|x| x.abs()).sum();
            if let Some(dv) = g.dv(k) {
                total += dv.iter().sum::<f64>();
                scale += dv.iter().map(|x| x.abs()).sum::<f64>();
            }
            prop_assert!(total.abs() <= 1e-12 * (1.0 + scale), "component {k}: {total}");
        }
    }

    #[test]
    fn singleton_minibatches_average_to_the_full_loss(inst in instance()) {
        let (target, model) = (inst.target(), inst.model());
        let full = mse_loss(&target, &model).unwrap();
        let full_grad = gradient(&target, &model).unwrap().to_vec();
        let mut loss_sum = 0.0;
        let mut grad_sum = vec![0.0; full_grad.len()];
        for i in 0..inst.n {
            for j in 0..inst.m {
                let s = IndexSample::new(vec![(i, j)]).unwrap();
                loss_sum += mse_loss_subset(&target, &model, &s).unwrap();
                for (acc, g) in grad_sum.iter_mut().zip(gradient_subset(&target, &model, &s).unwrap().to_vec()) {
                    *acc += g;
                }
            }
        }
        let cells = (inst.n * inst.m) as f64;
        prop_assert!(close(loss_sum / cells, full, 1e-12));
        for (x, y) in grad_sum.iter().zip(&full_grad) {
            prop_assert!(close(x / cells, *y, 1e-12), "{} vs {y}", x / cells);
        }
    }

    #[test]
    fn distant_centres_stall_the_vector_gradient(n in 1usize..5, m in 1usize..5, gap in 12.0..30.0f64) {
        let u = vec![(0..n).map(|i| i as f64 * 0.1).collect::<Vec<_>>()];
        let v = vec![(0..m).map(|j| gap + j as f64 * 0.1).collect::<Vec<_>>()];
        let model = RbfModel::new_asymmetric(n, m, u, v, vec![1.0], 0.0).unwrap();
        let target = DenseMatrix::filled(n, m, 1.0).unwrap();
        let g = gradient(&target, &model).unwrap();
        let bound = 4.0 * (gap + 1.0) * (-(gap - 1.0) * (gap - 1.0)).exp();
        prop_assert!(g.du(0).iter().chain(g.dv(0).unwrap()).all(|x| x.abs() <= bound));
        prop_assert!(g.db().abs() > 1.0);
    }

    #[test]
    fn auc_ignores_strictly_increasing_maps(bits in prop::collection::vec(any::<bool>(), 28), scores in prop::collection::vec(-3.0..3.0f64, 64)) {
        let n = 8;
        let mut adj = vec![0.0; n * n];
        let mut approx = vec![0.0; n * n];
        let mut next = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let e = if bits[next] { 1.0 } else { 0.0 };
                adj[i * n + j] = e;
                adj[j * n + i] = e;
                next += 1;
            }
        }
        for i in 0..n {
            for j in 0..n {
                approx[i * n + j] = scores[i.min(j) * n + i.max(j)];
            }
        }
        prop_assume!(bits.iter().any(|&b| b) && bits.iter().any(|&b| !b));
        let adj = DenseMatrix::new(n, n, adj).unwrap();
        let raw = DenseMatrix::new(n, n, approx.clone()).unwrap();
        let mapped = DenseMatrix::new(n, n, approx.iter().map(|x| x.exp() * 3.0 - 1.0).collect()).unwrap();
        let a = edge_prediction_roc(&adj, &raw).unwrap();
        let b = edge_prediction_roc(&adj, &mapped).unwrap();
        prop_assert_eq!(a.auc, b.auc);
        let fprs = |c: &rbfdecomp::apps::RocCurve| c.points.iter().map(|p| (p.fpr, p.tpr)).collect::<Vec<_>>();
        prop_assert_eq!(fprs(&a), fprs(&b));
    }

    #[test]
    fn clustering_follows_affine_maps(raw in prop::collection::btree_set(-400i32..400, 3..30), k in 1usize..4, scale_pow in -2i32..3, shift in -20i32..20) {
        let values: Vec<f64> = raw.iter().map(|&x| x as f64 / 8.0).collect();
        prop_assume!(k <= values.len());
        let mut gaps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        prop_assume!(gaps.windows(2).all(|w| w[0] != w[1]));
        let alpha = 2f64.powi(scale_pow);
        let base = cluster_1d(&values, k).unwrap();
        let up: Vec<f64> = values.iter().map(|v| alpha * v + shift as f64).collect();
        prop_assert_eq!(cluster_1d(&up, k).unwrap(), base.clone());
        let down: Vec<f64> = values.iter().map(|v| -alpha * v + shift as f64).collect();
        let reversed: Vec<usize> = base.iter().map(|l| k - 1 - l).collect();
        prop_assert_eq!(cluster_1d(&down, k).unwrap(), reversed);
    }

    #[test]
    fn community_accuracy_is_symmetric(pairs in prop::collection::vec((0usize..4, 0usize..4), 4..40)) {
        let (x, y): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let distinct = |v: &[usize]| { let mut d = v.to_vec(); d.sort_unstable(); d.dedup(); d.len() };
        prop_assume!(distinct(&x) == distinct(&y));
        prop_assert_eq!(community_accuracy(&x, &y).unwrap(), community_accuracy(&y, &x).unwrap());
    }

    #[test]
    fn pearson_is_symmetric_and_affine_invariant(pairs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..50), alpha in 0.1..10.0f64, beta in -5.0..5.0f64) {
        let (u, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let spread = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread(&u) > 1e-3 && spread(&t) > 1e-3);
        let r = pearson_correlation(&u, &t).unwrap();
        prop_assert!(close(r, pearson_correlation(&t, &u).unwrap(), 1e-12));
        let mapped: Vec<f64> = u.iter().map(|x| alpha * x + beta).collect();
        prop_assert!(close(r, pearson_correlation(&mapped, &t).unwrap(), 1e-9));
    }

    #[test]
    fn gram_distances_satisfy_the_triangle_inequality(n in 2usize..8, d in 1usize..5, seed_vals in prop::collection::vec(-2.0..2.0f64, 40)) {
        let b: Vec<Vec<f64>> = (0..n).map(|i| (0..d).map(|k| seed_vals[(i * d + k) % seed_vals.len()] + i as f64 * 0.01 * k as f64).collect()).collect();
        let gram = DenseMatrix::from_fn(n, n, |i, j| b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum()).unwrap();
        let dist = distance_from_gram(&gram).unwrap();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    prop_assert!(dist.get(i, j) <= dist.get(i, k) + dist.get(k, j) + 1e-9);
                }
            }
        }
    }
}
