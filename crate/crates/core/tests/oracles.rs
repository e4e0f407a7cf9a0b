//! Library results against independent, deliberately naive computations.

use rbfdecomp::datagen::{self, distance_from_gram, gaussian_matrix};
use rbfdecomp::svd::{singular_values, svd_mse_curve, truncated_svd};
use rbfdecomp::{fit, mse_loss, DenseMatrix, FitConfig, RbfModel};

fn naive_entry(u: &[Vec<f64>], v: &[Vec<f64>], a: &[f64], b: f64, i: usize, j: usize) -> f64 {
    b + (0..a.len()).map(|k| a[k] * (-(u[k][i] - v[k][j]).powi(2)).exp()).sum::<f64>()
}

#[test]
fn evaluation_and_loss_match_a_direct_sum() {
    let u = vec![vec![0.3, -1.2, 0.8, 2.0], vec![-0.5, 0.0, 0.4, 1.1]];
    let v = vec![vec![1.0, -0.2, 0.6], vec![0.9, -1.4, 0.25]];
    let (a, b) = (vec![1.7, -0.6], 0.35);
    let model = RbfModel::new_asymmetric(4, 3, u.clone(), v.clone(), a.clone(), b).unwrap();
    let target = DenseMatrix::from_fn(4, 3, |i, j| (i as f64 - j as f64) * 0.3).unwrap();
    let full = model.evaluate_full();
    let mut sq = 0.0;
    for i in 0..4 {
        for j in 0..3 {
            let want = naive_entry(&u, &v, &a, b, i, j);
            assert!((full.get(i, j) - want).abs() < 1e-14);
            sq += (want - target.get(i, j)).powi(2);
        }
    }
    assert!((mse_loss(&target, &model).unwrap() - sq / 12.0).abs() < 1e-14);
}

#[test]
fn gram_distances_match_explicit_features() {
    let b = gaussian_matrix(12, 5, 21).unwrap();
    let gram = DenseMatrix::from_fn(12, 12, |i, j| b.row(i).iter().zip(b.row(j)).map(|(x, y)| x * y).sum()).unwrap();
    let d = distance_from_gram(&gram).unwrap();
    for i in 0..12 {
        for j in 0..12 {
            let want: f64 = b.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!((d.get(i, j) - want).abs() < 1e-10, "({i},{j}) {} vs {want}", d.get(i, j));
        }
    }
}

#[test]
fn gaussian_mse_curve_matches_reconstructions() {
    let t = gaussian_matrix(40, 40, 5).unwrap();
    let curve = svd_mse_curve(&t, 40).unwrap();
    assert_eq!(curve.len(), 40);
    assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1));
    assert!(curve[39].1 < 1e-20);
    for rank in [1, 7, 20, 33] {
        let direct = t.mse(&truncated_svd(&t, rank).unwrap().reconstruct()).unwrap();
        assert!((direct - curve[rank - 1].1).abs() <= 1e-10 * curve[rank - 1].1.max(1e-12), "rank {rank}");
    }
    let energy: f64 = singular_values(&t).iter().map(|s| s * s).sum();
    assert!((energy - t.frobenius_sq()).abs() < 1e-9 * energy);
}

#[test]
fn kexact2_is_exactly_two_symmetric_components() {
    let (k, u1, u2) = datagen::k_exact2(30, 4).unwrap();
    for i in 0..30 {
        for j in 0..30 {
            let want = 5.0 * (-(u1[i] - u1[j]).powi(2)).exp() - 4.0 * (-(u2[i] - u2[j]).powi(2)).exp();
            assert!((k.get(i, j) - want).abs() < 1e-14);
        }
    }
    assert!((k.get(3, 3) - 1.0).abs() < 1e-15);
}

#[test]
fn single_component_is_recovered_up_to_an_isometry() {
    let truth = [0.0, 0.5, 1.1, 1.4, 2.2, 2.6];
    let target = datagen::single_component(&truth).unwrap();
    let mut config = FitConfig::new(1);
    config.symmetric = true;
    config.batch_runs = 16;
    config.max_iters = 4000;
    config.learning_rate = 0.02;
    config.seed = 3;
    let report = fit(&target, &config).unwrap();
    assert!(report.best_loss < 1e-8, "best loss {}", report.best_loss);
    let u = report.best_model.u(0);
    // Pairwise distances are the invariant: shifts and reflections of u
    // give the same matrix.
    for i in 0..truth.len() {
        for j in 0..truth.len() {
            let (got, want) = ((u[i] - u[j]).abs(), (truth[i] - truth[j]).abs());
            assert!((got - want).abs() < 1e-2, "|u{i} - u{j}| = {got}, want {want}");
        }
    }
}
