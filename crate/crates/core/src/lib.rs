//! Approximation of real matrices by an offset plus a signed combination of
//! one-dimensional RBF components, `k0_ij = b + sum_k a_k exp(-(u_k[i] - v_k[j])^2)`,
//! together with the truncated SVD baseline, matrix generators and the
//! downstream analyses used to compare the two.

pub mod apps;
pub mod datagen;
pub mod error;
pub mod loss;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod rng;
pub mod svd;

pub use error::{Error, Result};
pub use loss::{gradient, gradient_subset, mse_loss, mse_loss_subset, GradientSet};
pub use matrix::DenseMatrix;
pub use model::{IndexSample, RbfModel};
pub use optim::{fit, init_model, sample_minibatch, FitConfig, FitReport, OptimizerKind};
