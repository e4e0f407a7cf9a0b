//! Paired RBF-versus-SVD experiment suites at desk scale.
//!
//! Every suite produces rows of [`ResultRow`], scalar [`MetricRow`]s
//! (accuracy, correlation, AUC, component counts) and named artifacts.
//! Data and fits draw from distinct streams of the suite seed, so a
//! suite is reproducible from its seed alone.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use rand::seq::index;
use rbfdecomp::apps::{
    cluster_1d, community_accuracy, edge_prediction_roc, image_to_matrix, matrix_to_image, pearson_correlation,
    GrayImage, RocCurve,
};
use rbfdecomp::datagen::{self, PointCloud};
use rbfdecomp::matrix::fmt_f64;
use rbfdecomp::rng::{self, derive_seed};
use rbfdecomp::svd::{svd_mse_curve, symmetric_lowrank, truncated_svd};
use rbfdecomp::{fit, DenseMatrix, FitConfig, FitReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Kexact2,
    Gaussian,
    Graphs,
    Sbm,
    Scurve,
    Edges,
    Image,
    Gram,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Self::Kexact2 => "kexact2",
            Self::Gaussian => "gaussian",
            Self::Graphs => "graphs",
            Self::Sbm => "sbm",
            Self::Scurve => "scurve",
            Self::Edges => "edges",
            Self::Image => "image",
            Self::Gram => "gram",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rbf,
    RbfStochastic,
    Svd,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Rbf => "RBF",
            Self::RbfStochastic => "RBF-SGD",
            Self::Svd => "SVD",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub setting: String,
    pub method: Method,
    pub components: usize,
    pub params_full: usize,
    pub params_vectors: usize,
    pub mse: f64,
    pub iterations: usize,
    pub seed: u64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub experiment: String,
    pub setting: String,
    pub method: Method,
    pub components: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOutput {
    pub rows: Vec<ResultRow>,
    pub metrics: Vec<MetricRow>,
    /// File name and contents.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl SuiteOutput {
    pub fn results_csv(&self) -> String {
        let mut out = String::from("experiment,setting,method,components,params_full,params_vectors,mse,iterations,seed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.experiment,
                r.setting,
                r.method.tag(),
                r.components,
                r.params_full,
                r.params_vectors,
                fmt_f64(r.mse),
                r.iterations,
                r.seed
            );
        }
        out
    }

    /// Wall-clock times, kept apart from the reproducible results.
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("experiment,setting,method,components,elapsed_seconds\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3}",
                r.experiment,
                r.setting,
                r.method.tag(),
                r.components,
                r.elapsed_seconds
            );
        }
        out
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("experiment,setting,method,components,metric,value\n");
        for m in &self.metrics {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                m.experiment,
                m.setting,
                m.method.tag(),
                m.components,
                m.metric,
                fmt_f64(m.value)
            );
        }
        out
    }

    pub fn metric(&self, setting: &str, metric: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.setting == setting && m.metric == metric).map(|m| m.value)
    }
}

/// Knobs shared by all suites; `None` keeps the suite default.
#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub seed: u64,
    pub runs: Option<usize>,
    pub iters_per_component: Option<usize>,
    pub components: Option<Vec<usize>>,
    pub image: Option<PathBuf>,
    pub quiet: bool,
}

impl SuiteOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Default::default() }
    }

    fn runs(&self, default: usize) -> usize {
        self.runs.unwrap_or(default)
    }

    fn iters(&self, components: usize) -> usize {
        self.iters_per_component.unwrap_or(rbfdecomp::optim::DEFAULT_ITERS_PER_COMPONENT) * components
    }

    fn components(&self, default: &[usize]) -> Vec<usize> {
        self.components.clone().unwrap_or_else(|| default.to_vec())
    }

    fn data_seed(&self, tag: u64) -> u64 {
        derive_seed(self.seed, tag)
    }

    fn fit_seed(&self, tag: u64) -> u64 {
        derive_seed(self.seed, 1_000 + tag)
    }
}

/// Builds a fit configuration with the library defaults for everything
/// but the listed knobs.
pub fn fit_config(components: usize, symmetric: bool, runs: usize, max_iters: usize, seed: u64) -> FitConfig {
    let mut c = FitConfig::new(components);
    c.symmetric = symmetric;
    c.batch_runs = runs;
    c.max_iters = max_iters;
    c.seed = seed;
    c
}

struct Recorder<'a> {
    suite: Suite,
    opts: &'a SuiteOptions,
    out: SuiteOutput,
}

impl<'a> Recorder<'a> {
    fn new(suite: Suite, opts: &'a SuiteOptions) -> Self {
        Self { suite, opts, out: SuiteOutput::default() }
    }

    fn log(&self, line: &str) {
        if !self.opts.quiet {
            eprintln!("[{}] {line}", self.suite.name());
        }
    }

    fn fit(&mut self, setting: &str, target: &DenseMatrix, config: &FitConfig) -> Result<FitReport> {
        let start = Instant::now();
        let report = fit(target, config).with_context(|| format!("fitting {setting} with r={}", config.components))?;
        let elapsed = start.elapsed().as_secs_f64();
        let model = &report.best_model;
        let method = if config.stochastic { Method::RbfStochastic } else { Method::Rbf };
        self.log(&format!(
            "{setting} {} r={} mse={:.3e} ({elapsed:.1} s)",
            method.tag(),
            config.components,
            report.best_loss
        ));
        self.out.rows.push(ResultRow {
            experiment: self.suite.name().into(),
            setting: setting.into(),
            method,
            components: config.components,
            params_full: model.param_count(),
            params_vectors: model.vector_param_count(),
            mse: report.best_loss,
            iterations: report.iterations_used,
            seed: config.seed,
            elapsed_seconds: elapsed,
        });
        Ok(report)
    }

    /// Appends SVD rows for ranks `1..=max_rank` from the exact tail energies.
    fn svd_curve(&mut self, setting: &str, target: &DenseMatrix, max_rank: usize, symmetric: bool) -> Result<Vec<(usize, f64)>> {
        let start = Instant::now();
        let curve = svd_mse_curve(target, max_rank)?;
        let elapsed = start.elapsed().as_secs_f64();
        let (n, m) = target.shape();
        for &(k, mse) in &curve {
            let vectors = if symmetric { k * n } else { k * (n + m) };
            self.out.rows.push(ResultRow {
                experiment: self.suite.name().into(),
                setting: setting.into(),
                method: Method::Svd,
                components: k,
                params_full: vectors + k,
                params_vectors: vectors,
                mse,
                iterations: 0,
                seed: self.opts.seed,
                elapsed_seconds: elapsed,
            });
        }
        Ok(curve)
    }

    fn metric(&mut self, setting: &str, method: Method, components: usize, metric: &str, value: f64) {
        self.log(&format!("{setting} {} r={components} {metric}={value:.6}", method.tag()));
        self.out.metrics.push(MetricRow {
            experiment: self.suite.name().into(),
            setting: setting.into(),
            method,
            components,
            metric: metric.into(),
            value,
        });
    }

    fn artifact(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.out.artifacts.push((name.into(), bytes.into()));
    }
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<SuiteOutput> {
    let mut rec = Recorder::new(suite, opts);
    match suite {
        Suite::Kexact2 => kexact2(&mut rec)?,
        Suite::Gaussian => gaussian(&mut rec)?,
        Suite::Graphs => graphs(&mut rec)?,
        Suite::Sbm => sbm(&mut rec)?,
        Suite::Scurve => scurve(&mut rec)?,
        Suite::Edges => edges(&mut rec)?,
        Suite::Image => image(&mut rec)?,
        Suite::Gram => gram(&mut rec)?,
    }
    Ok(rec.out)
}

fn runs_csv(rows: &mut String, setting: &str, report: &FitReport) {
    for (run, loss) in report.per_run_final_losses.iter().enumerate() {
        let _ = writeln!(rows, "{setting},{run},{}", fmt_f64(*loss));
    }
}

fn trace_csv(rows: &mut String, setting: &str, report: &FitReport) {
    for (it, loss) in &report.loss_trajectory {
        let _ = writeln!(rows, "{setting},{it},{}", fmt_f64(*loss));
    }
}

/// Exact two-component target: exact and over-parametrized fits at two
/// initialization scales, against symmetric truncations.
fn kexact2(rec: &mut Recorder) -> Result<()> {
    let n = 100;
    let (target, u1, u2) = datagen::k_exact2(n, rec.opts.data_seed(0))?;
    rec.artifact("kexact2_truth.csv", datagen::truth_csv(&u1, &u2));
    rec.svd_curve("n=100", &target, 8, true)?;
    let runs = rec.opts.runs(100);
    let iters = rec.opts.iters_per_component.map_or(10_000, |i| i * 2);
    let mut runs_rows = String::from("setting,run,mse\n");
    let mut trace_rows = String::from("setting,iteration,mse\n");
    for (tag, (r, scale)) in [(2, 0.1), (4, 0.1), (2, 1.0), (4, 1.0)].into_iter().enumerate() {
        let setting = format!("n=100 init={scale}");
        let mut config = fit_config(r, true, runs, iters, rec.opts.fit_seed(tag as u64));
        config.init_scale = scale;
        let report = rec.fit(&setting, &target, &config)?;
        rec.metric(&setting, Method::Rbf, r, "success_fraction_1e-4", report.success_fraction(1e-4));
        runs_csv(&mut runs_rows, &format!("{setting} r={r}"), &report);
        trace_csv(&mut trace_rows, &format!("{setting} r={r}"), &report);
    }
    rec.artifact("kexact2_runs.csv", runs_rows);
    rec.artifact("kexact2_trace.csv", trace_rows);
    Ok(())
}

/// Smallest SVD rank whose MSE is at or below `mse`, if any.
fn matching_rank(curve: &[(usize, f64)], mse: f64) -> Option<usize> {
    curve.iter().find(|c| c.1 <= mse).map(|c| c.0)
}

fn gaussian(rec: &mut Recorder) -> Result<()> {
    let runs = rec.opts.runs(4);
    let components = rec.opts.components(&[2, 5, 10, 15]);
    for (tag, (n, m)) in [(40, 40), (30, 60)].into_iter().enumerate() {
        let setting = format!("{n}x{m}");
        let target = datagen::gaussian_matrix(n, m, rec.opts.data_seed(tag as u64))?;
        let curve = rec.svd_curve(&setting, &target, n.min(m), false)?;
        for &r in &components {
            let config = fit_config(r, false, runs, rec.opts.iters(r), rec.opts.fit_seed(tag as u64 * 100 + r as u64));
            let report = rec.fit(&setting, &target, &config)?;
            let rank = matching_rank(&curve, report.best_loss).unwrap_or(n.min(m));
            rec.metric(&setting, Method::Rbf, r, "svd_rank_to_match", rank as f64);
        }
    }
    Ok(())
}

/// Graph adjacencies of the reconstruction study.
pub fn graph_targets(seed: u64) -> Result<Vec<(&'static str, DenseMatrix)>> {
    Ok(vec![
        ("er n=40 p=0.5", datagen::erdos_renyi(40, 0.5, derive_seed(seed, 0))?),
        ("ba n=40 m=3", datagen::barabasi_albert(40, 3, derive_seed(seed, 1))?),
    ])
}

fn graphs(rec: &mut Recorder) -> Result<()> {
    let runs = rec.opts.runs(4);
    let components = rec.opts.components(&[2, 4, 8, 12, 16, 20, 24]);
    let threshold = 1e-5;
    for (tag, (setting, target)) in graph_targets(rec.opts.data_seed(0))?.into_iter().enumerate() {
        let curve = rec.svd_curve(setting, &target, target.rows(), true)?;
        let svd_rank = curve.iter().find(|c| c.1 < threshold).map_or(target.rows(), |c| c.0);
        rec.metric(setting, Method::Svd, svd_rank, "min_components_below_1e-5", svd_rank as f64);
        let mut best: Option<usize> = None;
        for &r in &components {
            let mut config = fit_config(r, true, runs, rec.opts.iters(r), rec.opts.fit_seed(tag as u64 * 100 + r as u64));
            config.target_loss = Some(threshold / 2.0);
            let report = rec.fit(setting, &target, &config)?;
            if report.best_loss < threshold && best.is_none() {
                best = Some(r);
            }
        }
        if let Some(r) = best {
            rec.metric(setting, Method::Rbf, r, "min_components_below_1e-5", r as f64);
            rec.metric(setting, Method::Rbf, r, "component_ratio_to_svd", r as f64 / svd_rank as f64);
        }
    }
    Ok(())
}

pub struct SbmOutcome {
    pub adjacency: DenseMatrix,
    pub truth: Vec<usize>,
    pub coordinates: Vec<f64>,
    pub labels: Vec<usize>,
    pub accuracy: f64,
    pub report: FitReport,
}

pub const SBM_SIZES: [usize; 5] = [8, 12, 16, 20, 24];

/// One symmetric component on a planted-partition graph, then a
/// five-way split of the learned coordinates.
pub fn sbm_pipeline(data_seed: u64, config: &FitConfig) -> Result<SbmOutcome> {
    let adjacency = datagen::sbm(&SBM_SIZES, 0.8, 0.2, data_seed)?;
    let truth = datagen::block_labels(&SBM_SIZES);
    let report = fit(&adjacency, config)?;
    let coordinates = report.best_model.u(0).to_vec();
    let labels = cluster_1d(&coordinates, SBM_SIZES.len())?;
    let accuracy = community_accuracy(&labels, &truth)?;
    Ok(SbmOutcome { adjacency, truth, coordinates, labels, accuracy, report })
}

fn sbm(rec: &mut Recorder) -> Result<()> {
    let setting = "n=80 blocks=5";
    let config = fit_config(1, true, rec.opts.runs(20), rec.opts.iters(1), rec.opts.fit_seed(0));
    let start = Instant::now();
    let outcome = sbm_pipeline(rec.opts.data_seed(0), &config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let model = &outcome.report.best_model;
    rec.out.rows.push(ResultRow {
        experiment: "sbm".into(),
        setting: setting.into(),
        method: Method::Rbf,
        components: 1,
        params_full: model.param_count(),
        params_vectors: model.vector_param_count(),
        mse: outcome.report.best_loss,
        iterations: outcome.report.iterations_used,
        seed: config.seed,
        elapsed_seconds: elapsed,
    });
    rec.metric(setting, Method::Rbf, 1, "community_accuracy", outcome.accuracy);

    rec.svd_curve(setting, &outcome.adjacency, 5, true)?;
    let leading = symmetric_lowrank(&outcome.adjacency, 1)?;
    let svd_labels = cluster_1d(&leading.left_vectors[0], SBM_SIZES.len())?;
    rec.metric(setting, Method::Svd, 1, "community_accuracy", community_accuracy(&svd_labels, &outcome.truth)?);

    let mut coords = String::from("vertex,block,u,label\n");
    for i in 0..outcome.truth.len() {
        let _ = writeln!(coords, "{i},{},{},{}", outcome.truth[i], fmt_f64(outcome.coordinates[i]), outcome.labels[i]);
    }
    rec.artifact("sbm_coords.csv", coords);
    rec.artifact("sbm_adjacency.csv", outcome.adjacency.to_csv_string());
    Ok(())
}

pub struct ScurveOutcome {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub abs_pearson: f64,
    pub report: FitReport,
}

pub const SCURVE_POINTS: usize = 1000;
pub const SCURVE_SUBSAMPLE: usize = 256;

/// Soft-distance matrix of a seeded subsample of the S-curve, one
/// symmetric component, and the correlation of `u` with the curve time.
pub fn scurve_pipeline(delta: f64, data_seed: u64, config: &FitConfig) -> Result<ScurveOutcome> {
    let cloud = datagen::s_curve(SCURVE_POINTS, delta, data_seed)?;
    let mut pick = rng::stream(data_seed, 2);
    let mut idx = index::sample(&mut pick, SCURVE_POINTS, SCURVE_SUBSAMPLE).into_vec();
    idx.sort_unstable();
    let sub: PointCloud = cloud.select(&idx);
    let target = datagen::soft_distance_matrix(&sub)?;
    let report = fit(&target, config)?;
    let u = report.best_model.u(0).to_vec();
    let t = sub.labels.clone().context("S-curve points carry labels")?;
    let abs_pearson = pearson_correlation(&u, &t)?.abs();
    Ok(ScurveOutcome { t, u, abs_pearson, report })
}

fn scurve(rec: &mut Recorder) -> Result<()> {
    let runs = rec.opts.runs(10);
    let mut coords = String::from("delta,t,u\n");
    for (tag, delta) in [0.0, 0.2, 0.4, 0.6].into_iter().enumerate() {
        let setting = format!("delta={delta}");
        let config = fit_config(1, true, runs, rec.opts.iters(1), rec.opts.fit_seed(tag as u64));
        let start = Instant::now();
        let outcome = scurve_pipeline(delta, rec.opts.data_seed(0), &config)?;
        let model = &outcome.report.best_model;
        rec.out.rows.push(ResultRow {
            experiment: "scurve".into(),
            setting: setting.clone(),
            method: Method::Rbf,
            components: 1,
            params_full: model.param_count(),
            params_vectors: model.vector_param_count(),
            mse: outcome.report.best_loss,
            iterations: outcome.report.iterations_used,
            seed: config.seed,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        rec.metric(&setting, Method::Rbf, 1, "abs_pearson", outcome.abs_pearson);
        for (t, u) in outcome.t.iter().zip(&outcome.u) {
            let _ = writeln!(coords, "{delta},{},{}", fmt_f64(*t), fmt_f64(*u));
        }
    }
    rec.artifact("scurve_coords.csv", coords);
    Ok(())
}

/// ROC curves of thresholding an `r`-component symmetric RBF fit and the
/// rank-`r` symmetric truncation.
pub fn edge_rocs(adjacency: &DenseMatrix, report: &FitReport, rank: usize) -> Result<(RocCurve, RocCurve)> {
    let rbf = edge_prediction_roc(adjacency, &report.best_model.evaluate_full())?;
    let svd = edge_prediction_roc(adjacency, &symmetric_lowrank(adjacency, rank)?.reconstruct())?;
    Ok((rbf, svd))
}

fn edges(rec: &mut Recorder) -> Result<()> {
    let setting = "er n=40 p=0.5";
    let adjacency = datagen::erdos_renyi(40, 0.5, rec.opts.data_seed(0))?;
    let runs = rec.opts.runs(10);
    rec.svd_curve(setting, &adjacency, 40, true)?;
    for r in rec.opts.components(&[2, 7]) {
        let config = fit_config(r, true, runs, rec.opts.iters(r), rec.opts.fit_seed(r as u64));
        let report = rec.fit(setting, &adjacency, &config)?;
        let (rbf, svd) = edge_rocs(&adjacency, &report, r)?;
        rec.metric(setting, Method::Rbf, r, "auc", rbf.auc);
        rec.metric(setting, Method::Svd, r, "auc", svd.auc);
        rec.artifact(format!("edges_roc_rbf_r{r}.csv"), rbf.to_csv_string());
        rec.artifact(format!("edges_roc_svd_r{r}.csv"), svd.to_csv_string());
    }
    Ok(())
}

pub const IMAGE_CROP: usize = 128;

fn image(rec: &mut Recorder) -> Result<()> {
    let Some(path) = rec.opts.image.clone() else {
        bail!("the image suite needs --image <file.pgm>");
    };
    let img = GrayImage::read_pgm(&path)?.crop(IMAGE_CROP, IMAGE_CROP);
    let target = image_to_matrix(&img);
    let setting = format!("{}x{}", img.width(), img.height());
    rec.artifact("image_input.pgm", img.to_pgm(false));
    let curve = rec.svd_curve(&setting, &target, target.rows().min(target.cols()), false)?;
    let runs = rec.opts.runs(2);
    for r in rec.opts.components(&[4, 8, 16]) {
        let config = fit_config(r, false, runs, rec.opts.iters(r), rec.opts.fit_seed(r as u64));
        let report = rec.fit(&setting, &target, &config)?;
        rec.artifact(format!("image_rbf_r{r}.pgm"), matrix_to_image(&report.best_model.evaluate_full()).to_pgm(false));
        if r <= curve.len() {
            let svd = truncated_svd(&target, r)?;
            rec.artifact(format!("image_svd_r{r}.pgm"), matrix_to_image(&svd.reconstruct()).to_pgm(false));
        }
    }
    Ok(())
}

/// Distances derived from a synthetic Gram matrix: full-gradient and
/// minibatch fits against symmetric truncations at equal counts.
fn gram(rec: &mut Recorder) -> Result<()> {
    let n = 64;
    let setting = format!("n={n} dim=3");
    let g = datagen::synthetic_gram(n, 3, 1.0, rec.opts.data_seed(0))?;
    let target = datagen::distance_from_gram(&g)?;
    let components = rec.opts.components(&[1, 2, 4, 8]);
    let max = components.iter().copied().max().unwrap_or(1).min(n);
    let curve = rec.svd_curve(&setting, &target, max, true)?;
    let runs = rec.opts.runs(10);
    for &r in &components {
        let config = fit_config(r, true, runs, rec.opts.iters(r), rec.opts.fit_seed(r as u64));
        let full = rec.fit(&setting, &target, &config)?;
        let mut sgd = config.clone();
        sgd.stochastic = true;
        sgd.minibatch_size = (5 * r * n).min(n * n);
        sgd.seed = rec.opts.fit_seed(100 + r as u64);
        rec.fit(&setting, &target, &sgd)?;
        if let Some(&(_, svd_mse)) = curve.get(r - 1) {
            rec.metric(&setting, Method::Rbf, r, "rbf_below_svd", f64::from(u8::from(full.best_loss < svd_mse)));
        }
    }
    Ok(())
}
