//! Fit settings gathered from a `key = value` file and from flags.
//!
//! Keys use the [`FitConfig`] field names. Values given on the command
//! line replace values from the file; anything left unset keeps the
//! library default.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rbfdecomp::{FitConfig, OptimizerKind};
use toml::{Table, Value};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitOverrides {
    pub components: Option<usize>,
    pub symmetric: Option<bool>,
    pub optimizer: Option<OptimizerKind>,
    pub learning_rate: Option<f64>,
    pub max_iters: Option<usize>,
    pub batch_runs: Option<usize>,
    pub init_scale: Option<f64>,
    pub stochastic: Option<bool>,
    pub minibatch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub target_loss: Option<f64>,
    pub seed: Option<u64>,
    pub trace_stride: Option<usize>,
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(x) => Ok(*x as f64),
        _ => bail!("config key {key} must be a number"),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(x) if *x >= 0 => Ok(*x as usize),
        _ => bail!("config key {key} must be a nonnegative integer"),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().with_context(|| format!("config key {key} must be true or false"))
}

impl FitOverrides {
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().context("config is not valid key = value TOML")?;
        let mut o = Self::default();
        for (key, v) in &table {
            let k = key.as_str();
            match k {
                "components" => o.components = Some(as_usize(k, v)?),
                "symmetric" => o.symmetric = Some(as_bool(k, v)?),
                "optimizer" => {
                    let name = v.as_str().with_context(|| format!("config key {k} must be a string"))?;
                    o.optimizer = Some(name.parse()?);
                }
                "learning_rate" => o.learning_rate = Some(as_f64(k, v)?),
                "max_iters" => o.max_iters = Some(as_usize(k, v)?),
                "batch_runs" => o.batch_runs = Some(as_usize(k, v)?),
                "init_scale" => o.init_scale = Some(as_f64(k, v)?),
                "stochastic" => o.stochastic = Some(as_bool(k, v)?),
                "minibatch_size" => o.minibatch_size = Some(as_usize(k, v)?),
                "weight_decay" => o.weight_decay = Some(as_f64(k, v)?),
                "beta1" => o.beta1 = Some(as_f64(k, v)?),
                "beta2" => o.beta2 = Some(as_f64(k, v)?),
                "epsilon" => o.epsilon = Some(as_f64(k, v)?),
                "target_loss" => o.target_loss = Some(as_f64(k, v)?),
                "seed" => o.seed = Some(as_usize(k, v)? as u64),
                "trace_stride" => o.trace_stride = Some(as_usize(k, v)?),
                other => bail!("unknown config key {other:?}"),
            }
        }
        Ok(o)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    /// Field-wise `self` where set, otherwise `fallback`.
    pub fn or(self, fallback: Self) -> Self {
        Self {
            components: self.components.or(fallback.components),
            symmetric: self.symmetric.or(fallback.symmetric),
            optimizer: self.optimizer.or(fallback.optimizer),
            learning_rate: self.learning_rate.or(fallback.learning_rate),
            max_iters: self.max_iters.or(fallback.max_iters),
            batch_runs: self.batch_runs.or(fallback.batch_runs),
            init_scale: self.init_scale.or(fallback.init_scale),
            stochastic: self.stochastic.or(fallback.stochastic),
            minibatch_size: self.minibatch_size.or(fallback.minibatch_size),
            weight_decay: self.weight_decay.or(fallback.weight_decay),
            beta1: self.beta1.or(fallback.beta1),
            beta2: self.beta2.or(fallback.beta2),
            epsilon: self.epsilon.or(fallback.epsilon),
            target_loss: self.target_loss.or(fallback.target_loss),
            seed: self.seed.or(fallback.seed),
            trace_stride: self.trace_stride.or(fallback.trace_stride),
        }
    }

    /// Library defaults with the set fields applied. The iteration budget
    /// follows the component count unless given. `seed` is left at the
    /// default when unset; the caller decides how to pick one.
    pub fn to_config(&self) -> FitConfig {
        let mut c = FitConfig::new(self.components.unwrap_or(1));
        c.symmetric = self.symmetric.unwrap_or(c.symmetric);
        c.optimizer = self.optimizer.unwrap_or(c.optimizer);
        c.learning_rate = self.learning_rate.unwrap_or(c.learning_rate);
        c.max_iters = self.max_iters.unwrap_or(c.max_iters);
        c.batch_runs = self.batch_runs.unwrap_or(c.batch_runs);
        c.init_scale = self.init_scale.unwrap_or(c.init_scale);
        c.stochastic = self.stochastic.unwrap_or(c.stochastic);
        c.minibatch_size = self.minibatch_size.unwrap_or(c.minibatch_size);
        c.weight_decay = self.weight_decay.unwrap_or(c.weight_decay);
        c.beta1 = self.beta1.unwrap_or(c.beta1);
        c.beta2 = self.beta2.unwrap_or(c.beta2);
        c.epsilon = self.epsilon.unwrap_or(c.epsilon);
        c.target_loss = self.target_loss.or(c.target_loss);
        c.seed = self.seed.unwrap_or(c.seed);
        c.trace_stride = self.trace_stride.unwrap_or(c.trace_stride);
        c
    }
}
