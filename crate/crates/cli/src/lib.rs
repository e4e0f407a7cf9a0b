//! `rbfdecomp` command-line driver: data generation, fitting, SVD
//! baselines, format conversion and the experiment suites.

pub mod config;
pub mod experiments;
pub mod io;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rbfdecomp::apps::{matrix_to_image, GrayImage};
use rbfdecomp::datagen;
use rbfdecomp::matrix::fmt_f64;
use rbfdecomp::svd::{svd_mse_curve, symmetric_lowrank, truncated_svd};
use rbfdecomp::{fit, DenseMatrix, OptimizerKind, RbfModel};

use crate::config::FitOverrides;
use crate::experiments::{run_suite, Suite, SuiteOptions};
use crate::io::{read_matrix, report_written, sidecar, write_bytes, write_matrix};

pub const EXIT_ARGUMENT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "rbfdecomp", version, about = "Approximate matrices by sums of RBF components and compare with truncated SVD")]
pub struct Cli {
    /// Worker threads for parallel restarts (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic matrix or point cloud.
    Gen(GenArgs),
    /// Fit an RBF decomposition with random restarts.
    Fit(FitArgs),
    /// Truncated SVD reconstruction or MSE-versus-rank curve.
    Svd(SvdArgs),
    /// Evaluate a saved model to a matrix or image.
    Reconstruct(ReconstructArgs),
    /// Run an experiment suite and write CSV results.
    ///
    /// Desk-scale defaults: graphs on 40 vertices, Gaussian 40x40 and
    /// 30x60, SBM on 80 vertices, S-curve of 1000 points subsampled to 256,
    /// images cropped to 128x128, synthetic Gram on 64 points.
    Experiment(ExperimentArgs),
    /// Convert between CSV, binary (.bin) and PGM (.pgm) by extension.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Gaussian,
    Kexact2,
    Er,
    Ba,
    Sbm,
    Scurve,
    Gram,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub family: Family,
    /// Rows, vertices or points (family default when omitted).
    #[arg(long)]
    pub n: Option<usize>,
    /// Columns of a Gaussian matrix (defaults to n).
    #[arg(long)]
    pub m: Option<usize>,
    /// Edge probability (er).
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Edges per new vertex (ba).
    #[arg(long, default_value_t = 3)]
    pub attach: usize,
    /// Block sizes (sbm).
    #[arg(long, value_delimiter = ',', default_values_t = [8, 12, 16, 20, 24])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.8)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.2)]
    pub p_out: f64,
    /// Noise standard deviation per coordinate (scurve).
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Point dimension (gram).
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub length_scale: f64,
    /// Emit feature-space distances instead of the Gram matrix (gram).
    #[arg(long)]
    pub distance: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Target matrix (CSV, .bin or .pgm).
    pub input: PathBuf,
    /// `key = value` file with FitConfig field names; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of RBF components.
    #[arg(long = "r", alias = "components")]
    pub components: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub symmetric: Option<bool>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    /// Steps per restart (default 10000 per component).
    #[arg(long = "iters")]
    pub max_iters: Option<usize>,
    /// Independent restarts.
    #[arg(long = "runs")]
    pub batch_runs: Option<usize>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stochastic: Option<bool>,
    #[arg(long = "minibatch")]
    pub minibatch_size: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Stop a restart once its MSE reaches this.
    #[arg(long)]
    pub target_loss: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trace_stride: Option<usize>,
    /// Best model (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Loss trajectory of the best restart (default: <out>.trace.csv).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Final loss of every restart (default: <out>.runs.csv).
    #[arg(long)]
    pub runs_out: Option<PathBuf>,
}

impl FitArgs {
    fn overrides(&self) -> FitOverrides {
        FitOverrides {
            components: self.components,
            symmetric: self.symmetric,
            optimizer: self.optimizer,
            learning_rate: self.learning_rate,
            max_iters: self.max_iters,
            batch_runs: self.batch_runs,
            init_scale: self.init_scale,
            stochastic: self.stochastic,
            minibatch_size: self.minibatch_size,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            target_loss: self.target_loss,
            seed: self.seed,
            trace_stride: self.trace_stride,
        }
    }
}

#[derive(Debug, Args)]
pub struct SvdArgs {
    pub input: PathBuf,
    /// Write the rank-k reconstruction to --out.
    #[arg(long, conflicts_with = "curve", required_unless_present = "curve")]
    pub rank: Option<usize>,
    /// Write `rank,mse` for ranks 1..=k to --out.
    #[arg(long)]
    pub curve: Option<usize>,
    /// Use the eigendecomposition of a symmetric input.
    #[arg(long)]
    pub symmetric: bool,
    /// Also write the retained factors (CSV) with --rank.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Model file written by `fit`.
    pub model: PathBuf,
    /// Output matrix (.csv, .bin) or image (.pgm, values clamped to [0, 1]).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub suite: Suite,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
    /// Restarts per fit (suite default when omitted).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Iteration budget per component (default 10000).
    #[arg(long)]
    pub iters_per_component: Option<usize>,
    /// Component counts to sweep.
    #[arg(long, value_delimiter = ',')]
    pub components: Option<Vec<usize>>,
    /// Input PGM for the image suite.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Suppress per-fit progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Write PGM as ASCII (P2) instead of binary (P5).
    #[arg(long)]
    pub ascii: bool,
}

/// Process exit code for an error raised by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rbfdecomp::Error>() {
            return match e {
                rbfdecomp::Error::AllDiverged { .. } => EXIT_DIVERGED,
                rbfdecomp::Error::Io(_) | rbfdecomp::Error::Parse(_) | rbfdecomp::Error::NonFinite(_) => EXIT_IO,
                _ => EXIT_ARGUMENT,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_ARGUMENT
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        println!("seed {s}");
        s
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().context("building thread pool")?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Svd(a) => cmd_svd(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::Convert(a) => cmd_convert(&a),
    }
}

fn emit(path: &Path, matrix: &DenseMatrix) -> Result<()> {
    let checksum = write_matrix(path, matrix)?;
    report_written(path, matrix.rows(), matrix.cols(), checksum);
    Ok(())
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let seed = seed_or_entropy(a.seed);
    let matrix = match a.family {
        Family::Gaussian => {
            let n = a.n.unwrap_or(40);
            datagen::gaussian_matrix(n, a.m.unwrap_or(n), seed)?
        }
        Family::Kexact2 => {
            let (matrix, u1, u2) = datagen::k_exact2(a.n.unwrap_or(100), seed)?;
            let truth = sidecar(&a.out, "truth.csv");
            write_bytes(&truth, datagen::truth_csv(&u1, &u2).as_bytes())?;
            println!("wrote ground truth to {}", truth.display());
            matrix
        }
        Family::Er => datagen::erdos_renyi(a.n.unwrap_or(40), a.p, seed)?,
        Family::Ba => datagen::barabasi_albert(a.n.unwrap_or(40), a.attach, seed)?,
        Family::Sbm => {
            if a.n.is_some() {
                bail!("sbm takes --sizes, not --n");
            }
            let labels = datagen::block_labels(&a.sizes);
            let mut text = String::from("vertex,block\n");
            for (i, l) in labels.iter().enumerate() {
                let _ = writeln!(text, "{i},{l}");
            }
            let path = sidecar(&a.out, "labels.csv");
            write_bytes(&path, text.as_bytes())?;
            println!("wrote block labels to {}", path.display());
            datagen::sbm(&a.sizes, a.p_in, a.p_out, seed)?
        }
        Family::Scurve => {
            let cloud = datagen::s_curve(a.n.unwrap_or(1000), a.delta, seed)?;
            let labels = cloud.labels.as_deref().context("S-curve points carry labels")?;
            let rows: Vec<Vec<f64>> =
                cloud.points.iter().zip(labels).map(|(p, &t)| p.iter().copied().chain([t]).collect()).collect();
            DenseMatrix::from_rows(&rows)?
        }
        Family::Gram => {
            let g = datagen::synthetic_gram(a.n.unwrap_or(64), a.dim, a.length_scale, seed)?;
            if a.distance {
                datagen::distance_from_gram(&g)?
            } else {
                g
            }
        }
    };
    emit(&a.out, &matrix)
}

fn trajectory_csv(points: &[(usize, f64)]) -> String {
    let mut out = String::from("iteration,mse\n");
    for (it, loss) in points {
        let _ = writeln!(out, "{it},{}", fmt_f64(*loss));
    }
    out
}

fn runs_csv(losses: &[f64]) -> String {
    let mut out = String::from("run,final_mse\n");
    for (run, loss) in losses.iter().enumerate() {
        let _ = writeln!(out, "{run},{}", fmt_f64(*loss));
    }
    out
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let file = match &a.config {
        Some(path) => FitOverrides::read(path)?,
        None => FitOverrides::default(),
    };
    let merged = a.overrides().or(file);
    let mut config = merged.to_config();
    config.seed = seed_or_entropy(merged.seed);
    let target = read_matrix(&a.input)?;
    let report = fit(&target, &config)?;

    let model_sum = write_bytes(&a.out, report.best_model.to_csv_string().as_bytes())?;
    let trace = a.trace.clone().unwrap_or_else(|| sidecar(&a.out, "trace.csv"));
    write_bytes(&trace, trajectory_csv(&report.loss_trajectory).as_bytes())?;
    let runs = a.runs_out.clone().unwrap_or_else(|| sidecar(&a.out, "runs.csv"));
    write_bytes(&runs, runs_csv(&report.per_run_final_losses).as_bytes())?;

    let reached = match config.target_loss {
        Some(t) if report.best_loss <= t => " (target reached)",
        Some(_) => " (target not reached)",
        None => "",
    };
    println!(
        "best mse {} run {} of {} after {} iterations, {} diverged, seed {}{reached}",
        fmt_f64(report.best_loss),
        report.best_run,
        config.batch_runs,
        report.iterations_used,
        report.diverged_runs(),
        config.seed
    );
    println!("wrote model to {} (fnv1a64 {model_sum:016x})", a.out.display());
    Ok(())
}

pub fn cmd_svd(a: &SvdArgs) -> Result<()> {
    let target = read_matrix(&a.input)?;
    if let Some(max_rank) = a.curve {
        let mut text = String::from("rank,mse\n");
        for (k, mse) in svd_mse_curve(&target, max_rank)? {
            let _ = writeln!(text, "{k},{}", fmt_f64(mse));
        }
        let sum = write_bytes(&a.out, text.as_bytes())?;
        println!("wrote {max_rank}-rank curve to {} (fnv1a64 {sum:016x})", a.out.display());
        return Ok(());
    }
    let rank = a.rank.context("either --rank or --curve is required")?;
    let approx = if a.symmetric { symmetric_lowrank(&target, rank)? } else { truncated_svd(&target, rank)? };
    println!("rank {rank} mse {}", fmt_f64(approx.tail_mse()));
    if let Some(path) = &a.factors {
        let sum = write_bytes(path, approx.to_csv_string().as_bytes())?;
        println!("wrote factors to {} (fnv1a64 {sum:016x})", path.display());
    }
    emit(&a.out, &approx.reconstruct())
}

pub fn cmd_reconstruct(a: &ReconstructArgs) -> Result<()> {
    let model = RbfModel::read(&a.model)?;
    emit(&a.out, &model.evaluate_full())
}

pub fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    let matrix = read_matrix(&a.input)?;
    if io::MatrixFormat::from_path(&a.output) == io::MatrixFormat::Pgm {
        let img: GrayImage = matrix_to_image(&matrix);
        let sum = write_bytes(&a.output, &img.to_pgm(a.ascii))?;
        report_written(&a.output, matrix.rows(), matrix.cols(), sum);
        return Ok(());
    }
    emit(&a.output, &matrix)
}

pub fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let opts = SuiteOptions {
        seed: seed_or_entropy(a.seed),
        runs: a.runs,
        iters_per_component: a.iters_per_component,
        components: a.components.clone(),
        image: a.image.clone(),
        quiet: a.quiet,
    };
    let out = run_suite(a.suite, &opts)?;
    let dir = &a.out_dir;
    write_bytes(&dir.join("results.csv"), out.results_csv().as_bytes())?;
    write_bytes(&dir.join("timings.csv"), out.timings_csv().as_bytes())?;
    write_bytes(&dir.join("metrics.csv"), out.metrics_csv().as_bytes())?;
    for (name, bytes) in &out.artifacts {
        write_bytes(&dir.join(name), bytes)?;
    }
    for m in &out.metrics {
        println!("{} {} {} r={} {} = {}", m.experiment, m.setting, m.method.tag(), m.components, m.metric, fmt_f64(m.value));
    }
    println!("wrote {} result rows to {}", out.rows.len(), dir.join("results.csv").display());
    Ok(())
}
