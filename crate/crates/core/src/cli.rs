//! Command-line front end: `synth`, `eigen`, `train` and `evaluate`.
//!
//! Exit codes: 0 success, 1 fatal error, 2 invalid configuration, 3 partial
//! failure (some classes failed to train or could not be loaded).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classifiers::{self, Labeled, OconOptions, DEFAULT_ACON_HIDDEN, DEFAULT_OCON_HIDDEN};
use crate::eigenspace::{compute_eigenspace, Eigenspace, DEFAULT_COMPONENTS};
use crate::evaluator::{self, Format, Mode, OconRegistry, Protocol, TraceSummary};
use crate::imageio::{self, Role};
use crate::mlp::TrainingConfig;
use crate::parallel::{self, Allocation, PoolConfig, WeightStore};
use crate::{Error, Result};

/// Dispatch overhead above this share of compute time triggers a warning.
pub const OVERHEAD_WARN_RATIO: f64 = 0.1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ocon", version, about = "OCON/ACON face verification over eigenface features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a deterministic synthetic dataset (PGM images plus manifest).
    Synth(SynthArgs),
    /// Compute and save the eigenspace of a manifest's training images.
    Eigen(EigenArgs),
    /// Train OCON subnets or the ACON network and persist their weights.
    Train(TrainArgs),
    /// Evaluate persisted models with the per-class verification protocol.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Training images per class.
    #[arg(long, default_value_t = 20)]
    pub train: usize,
    /// Test images per class.
    #[arg(long, default_value_t = 20)]
    pub test: usize,
    /// Image side length in pixels.
    #[arg(long, default_value_t = 16)]
    pub side: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory; receives `images/` and `manifest.tsv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct FeatureArgs {
    /// Tab-separated manifest of `<path> <class_id> <train|test>` records.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Eigenspace file; computed from the training images and saved here when
    /// missing. Defaults to `eigenspace.txt` next to the manifest.
    #[arg(long)]
    pub eigenspace: Option<PathBuf>,
    /// Number of eigenfaces kept.
    #[arg(long, default_value_t = DEFAULT_COMPONENTS)]
    pub components: usize,
    /// Integer box-filter downsampling applied to every image before PCA.
    #[arg(long, default_value_t = 1)]
    pub downsample: usize,
}

#[derive(Debug, Args)]
pub struct EigenArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    /// Replica directories for weight files (repeat or comma-separate).
    #[arg(long = "store", env = "OCON_STORE_ROOTS", value_delimiter = ',', required = true)]
    pub roots: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Ocon,
    Acon,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub store: StoreArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Ocon)]
    pub mode: ModeArg,
    /// Hidden layer sizes (default 20 for OCON subnets, 60 for ACON).
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum, default_value_t = Allocation::RoundRobin)]
    pub allocation: Allocation,
    #[arg(long = "lr", default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// MSE goal. Desk-scale default; the large-scale setting is 1e-6.
    #[arg(long, default_value_t = 1e-3)]
    pub goal: f64,
    /// Epoch cap. Desk-scale default; the large-scale setting is 700000.
    #[arg(long, default_value_t = 20_000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cap on negatives per OCON subnet (all other-class samples by default).
    #[arg(long)]
    pub max_negatives: Option<usize>,
    /// Keep every n-th epoch in the convergence traces.
    #[arg(long, default_value_t = 1)]
    pub history_stride: usize,
    /// Directory for `epoch,mse` trace CSVs and the convergence table.
    #[arg(long)]
    pub traces: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub store: StoreArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Ocon)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// OCON acceptance threshold on the subnet output.
    #[arg(long, default_value_t = classifiers::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10)]
    pub positives: usize,
    #[arg(long, default_value_t = 10)]
    pub negatives: usize,
    /// Seed for the negative-exemplar draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report closed-set identification on the training and test sets
    /// (table format only).
    #[arg(long)]
    pub identification: bool,
}

/// Projected training and test samples.
pub struct Features {
    pub eigenspace: Eigenspace,
    pub train: Vec<Labeled>,
    pub test: Vec<Labeled>,
}

fn eigenspace_path(args: &FeatureArgs) -> PathBuf {
    args.eigenspace.clone().unwrap_or_else(|| {
        args.manifest
            .parent()
            .unwrap_or(Path::new(""))
            .join("eigenspace.txt")
    })
}

/// Loads the manifest, obtains the eigenspace (computing and saving it when
/// absent) and projects every image.
pub fn prepare_features(args: &FeatureArgs) -> Result<Features> {
    let (_, samples) = imageio::load_manifest(&args.manifest)?;
    let vectors = samples
        .iter()
        .map(|s| Ok((s.class_id, s.role, s.image.downsample(args.downsample)?.to_vector())))
        .collect::<Result<Vec<_>>>()?;

    let path = eigenspace_path(args);
    let eigenspace = if path.exists() {
        Eigenspace::load(&path)?
    } else {
        let train: Vec<Vec<f64>> = vectors
            .iter()
            .filter(|v| v.1 == Role::Train)
            .map(|v| v.2.clone())
            .collect();
        let space = compute_eigenspace(&train, args.components)?;
        space.save(&path)?;
        space
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class_id, role, v) in vectors {
        let labeled = Labeled::new(eigenspace.project(&v)?, class_id);
        match role {
            Role::Train => train.push(labeled),
            Role::Test => test.push(labeled),
        }
    }
    Ok(Features {
        eigenspace,
        train,
        test,
    })
}

fn io_err(e: std::io::Error) -> Error {
    Error::file("<stdout>", e)
}

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<i32> {
    let samples = imageio::generate_synthetic(args.classes, args.train, args.test, args.side, args.seed)?;
    let (path, manifest) = imageio::write_dataset(&samples, &args.out)?;
    writeln!(out, "wrote {} images and {}", manifest.records.len(), path.display()).map_err(io_err)?;
    Ok(EXIT_OK)
}

fn cmd_eigen(args: &EigenArgs, out: &mut dyn Write) -> Result<i32> {
    let path = eigenspace_path(&args.features);
    if path.exists() {
        std::fs::remove_file(&path).map_err(|e| Error::file(&path, e))?;
    }
    let f = prepare_features(&args.features)?;
    writeln!(
        out,
        "eigenspace: {} components of dimension {} -> {}",
        f.eigenspace.components(),
        f.eigenspace.dim(),
        path.display()
    )
    .map_err(io_err)?;
    Ok(EXIT_OK)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::file(path, e))
}

fn cmd_train(args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let config = TrainingConfig {
        learning_rate: args.learning_rate,
        momentum: args.momentum,
        goal: args.goal,
        max_epochs: args.max_epochs,
        seed: args.seed,
        history_stride: args.history_stride,
    };
    config.validate()?;
    let store = WeightStore::new(args.store.roots.clone())?;
    let features = prepare_features(&args.features)?;
    if let Some(dir) = &args.traces {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }

    let mut exit = EXIT_OK;
    let mut summaries = Vec::new();
    match args.mode {
        ModeArg::Ocon => {
            let options = OconOptions {
                hidden: args.hidden.clone().unwrap_or_else(|| vec![DEFAULT_OCON_HIDDEN]),
                max_negatives: args.max_negatives,
            };
            let pool = PoolConfig::new(args.workers, args.allocation)?;
            let jobs = classifiers::ocon_jobs(&features.train, &options, &config)?;
            let outcome = parallel::run_pool(jobs, &pool)?;
            for r in &outcome.results {
                match &r.result {
                    Ok(model) => {
                        let report = parallel::persist(model, &store)?;
                        for f in &report.failures {
                            writeln!(err, "warning: {f}").map_err(io_err)?;
                        }
                        let trace = model.trace.as_ref().expect("freshly trained");
                        summaries.push(TraceSummary::new(Mode::Ocon, Some(model.class_id), trace));
                        if let Some(dir) = &args.traces {
                            let path = dir.join(format!("trace_class_{}.csv", model.class_id));
                            write_file(&path, &evaluator::convergence_trace_csv(trace))?;
                        }
                    }
                    Err(e) => {
                        writeln!(err, "class {} failed: {e}", r.class_id).map_err(io_err)?;
                        exit = EXIT_PARTIAL;
                    }
                }
            }
            let ratio = outcome.overhead_ratio();
            writeln!(
                out,
                "trained {} of {} subnets on {} worker(s) in {:.2}s (dispatch/compute {:.4})",
                outcome.models().count(),
                outcome.results.len(),
                pool.workers,
                outcome.wall_time.as_secs_f64(),
                ratio
            )
            .map_err(io_err)?;
            if ratio > OVERHEAD_WARN_RATIO {
                writeln!(err, "warning: dispatch overhead {ratio:.3} exceeds {OVERHEAD_WARN_RATIO} of compute time")
                    .map_err(io_err)?;
            }
        }
        ModeArg::Acon => {
            let hidden = args.hidden.clone().unwrap_or_else(|| vec![DEFAULT_ACON_HIDDEN]);
            let model = classifiers::train_acon(&features.train, &hidden, &config)?;
            let report = parallel::persist_acon(&model, &store)?;
            for f in &report.failures {
                writeln!(err, "warning: {f}").map_err(io_err)?;
            }
            let trace = model.trace.as_ref().expect("freshly trained");
            summaries.push(TraceSummary::new(Mode::Acon, None, trace));
            if let Some(dir) = &args.traces {
                write_file(&dir.join("trace_acon.csv"), &evaluator::convergence_trace_csv(trace))?;
            }
        }
    }

    let table = evaluator::render_traces(&summaries, Format::Table);
    if let Some(dir) = &args.traces {
        write_file(&dir.join("convergence.csv"), &evaluator::render_traces(&summaries, Format::Csv))?;
    }
    out.write_all(table.as_bytes()).map_err(io_err)?;
    let (ocon, acon): (Vec<_>, Vec<_>) = summaries.into_iter().partition(|s| s.mode == Mode::Ocon);
    write!(out, "{}", evaluator::convergence_summary(&ocon, acon.first())).map_err(io_err)?;
    Ok(exit)
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold must be in (0, 1), got {}",
            args.threshold
        )));
    }
    let store = WeightStore::new(args.store.roots.clone())?;
    let features = prepare_features(&args.features)?;
    let protocol = Protocol {
        n_pos: args.positives,
        n_neg: args.negatives,
        seed: args.seed,
        threshold: args.threshold,
    };

    let report = match args.mode {
        ModeArg::Ocon => {
            let mut registry = OconRegistry::new(args.threshold);
            let mut ensemble = Vec::new();
            for class_id in classifiers::class_set(&features.train) {
                match parallel::load_with_report(class_id, &store) {
                    Ok((model, skipped)) => {
                        for s in skipped {
                            writeln!(err, "note: skipped replica: {s}").map_err(io_err)?;
                        }
                        ensemble.push(model.clone());
                        registry.insert(model);
                    }
                    Err(e) => {
                        writeln!(err, "class {class_id}: {e}").map_err(io_err)?;
                        registry.insert_unavailable(class_id, e.to_string());
                    }
                }
            }
            let report = evaluator::evaluate_all(&registry, &features.test, &protocol)?;
            if args.identification && args.format == Format::Table && !report.has_errors() {
                let ensemble = classifiers::OconEnsemble::new(ensemble)?;
                write_identification(out, &ensemble, &features)?;
            }
            report
        }
        ModeArg::Acon => {
            let model = parallel::load_acon(&store)?;
            let report = evaluator::evaluate_all(&model, &features.test, &protocol)?;
            if args.identification && args.format == Format::Table {
                write_identification(out, &model, &features)?;
            }
            report
        }
    };
    out.write_all(evaluator::render_report(&report, args.format).as_bytes())
        .map_err(io_err)?;
    Ok(if report.has_errors() { EXIT_PARTIAL } else { EXIT_OK })
}

fn write_identification(
    out: &mut dyn Write,
    model: &dyn evaluator::Identifier,
    features: &Features,
) -> Result<()> {
    let train = evaluator::identify_all(model, &features.train)?;
    let test = evaluator::identify_all(model, &features.test)?;
    writeln!(
        out,
        "identification: training set {}/{} ({:.1}%), test set {}/{} ({:.1}%)",
        train.correct,
        train.total,
        train.rate(),
        test.correct,
        test.total,
        test.rate()
    )
    .map_err(io_err)
}

/// Runs a parsed command.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Eigen(a) => cmd_eigen(a, out),
        Command::Train(a) => cmd_train(a, out, err),
        Command::Evaluate(a) => cmd_evaluate(a, out, err),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match run(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
