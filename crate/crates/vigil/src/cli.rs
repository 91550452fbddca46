//! Command-line front end: generate, detect, classify, inspect.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use vigil_core::classifier::Preset;
use vigil_core::features::AxisSet;

use crate::config::KvConfig;
use crate::error::{CliError, Result};
use crate::pipeline::{
    self, ClassifyOptions, DetectOptions, ForecasterKind, GenerateOptions,
};

#[derive(Parser)]
#[command(
    name = "vigil",
    version,
    about = "Predictive-maintenance toolkit: synthetic sensor data, anomaly detection, and defect classification"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic farm and motor dataset tree with a manifest.
    Generate(GenerateArgs),
    /// Run a forecaster over every farm series and flag anomalies.
    Detect(DetectArgs),
    /// Train, transfer, or grid-evaluate a defect classifier.
    Classify(ClassifyArgs),
    /// Print the metadata of any stored artifact.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory for the dataset tree.
    #[arg(long)]
    out: PathBuf,
    /// Optional key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DetectArgs {
    /// Dataset directory produced by `generate`.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for reports.
    #[arg(long)]
    out: PathBuf,
    /// Optional key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Forecaster: arima or lstm.
    #[arg(long)]
    forecaster: Option<String>,
    /// Training fraction of each series.
    #[arg(long)]
    split: Option<f64>,
    /// Relative-error threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Flag only observations below the forecast (the literal rule form).
    #[arg(long)]
    one_sided: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write per-series actual/predicted columns for plotting.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Window dataset file.
    #[arg(long)]
    windows: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Tuning preset: baseline, select-axes, normalize, wide, deep,
    /// long-train, big-batch.
    #[arg(long)]
    preset: Option<String>,
    /// Axis subset, e.g. XZ or XZY (overrides the preset).
    #[arg(long)]
    axes: Option<String>,
    /// Hidden layer widths, e.g. 50,50 (overrides the preset).
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Force feature normalization on or off (overrides the preset).
    #[arg(long)]
    normalize: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Collapse labels to normal / not-normal.
    #[arg(long)]
    binary: bool,
    /// Interpolated samples to add per RPM group.
    #[arg(long)]
    augment: Option<usize>,
    /// Produce the train-RPM x test-RPM accuracy grid.
    #[arg(long)]
    grid: bool,
    /// Keep only these RPM groups, e.g. 100,200,300.
    #[arg(long)]
    rpms: Option<String>,
    /// Uniformly decimate each axis segment to this length.
    #[arg(long)]
    decimate: Option<usize>,
    /// Initialize from a stored classifier artifact instead of fresh.
    #[arg(long)]
    transfer_from: Option<PathBuf>,
    /// Fine-tuning epochs after a transfer (0 keeps the source weights).
    #[arg(long, default_value_t = 10)]
    fine_tune_epochs: u32,
    /// Fine-tune only the output layer.
    #[arg(long)]
    freeze_hidden: bool,
}

#[derive(Args)]
struct InspectArgs {
    /// Artifact file to describe.
    artifact: PathBuf,
}

/// Parses argv and runs the selected command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Keep clap's rendered help/version on stdout with code 0; any
            // real usage problem exits 1.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let mut opts = GenerateOptions::default();
            if let Some(path) = &args.config {
                opts.apply_config(&KvConfig::load(path)?)?;
            }
            if let Some(seed) = args.seed {
                opts.seed = seed;
            }
            let manifest = pipeline::generate(&args.out, &opts)?;
            println!(
                "generated {} files under {} (seed {})",
                manifest.entries.len(),
                args.out.display(),
                opts.seed
            );
            Ok(())
        }
        Command::Detect(args) => {
            let mut opts = DetectOptions::default();
            if let Some(path) = &args.config {
                opts.apply_config(&KvConfig::load(path)?)?;
            }
            if let Some(f) = &args.forecaster {
                opts.forecaster = ForecasterKind::parse(f)?;
            }
            if let Some(s) = args.split {
                opts.split = s;
            }
            if let Some(t) = args.threshold {
                opts.threshold = t;
            }
            if args.one_sided {
                opts.one_sided = true;
            }
            if let Some(seed) = args.seed {
                opts.seed = seed;
            }
            if args.plot_data {
                opts.plot_data = true;
            }
            let summary = pipeline::detect_all(&args.data, &args.out, &opts)?;
            for o in &summary.outcomes {
                match &o.result {
                    Ok(report) => println!(
                        "device{} {}: rmse {:.4}, {} anomalies",
                        o.device,
                        o.sensor.name(),
                        report.rmse,
                        report.anomaly_count()
                    ),
                    Err(e) => eprintln!("device{} {}: FAILED: {e}", o.device, o.sensor.name()),
                }
            }
            if summary.all_failed() {
                return Err(CliError::numeric("every series failed"));
            }
            println!(
                "aggregate over {} sensor types written to {}",
                summary.aggregate_rows,
                args.out.join("aggregate.csv").display()
            );
            Ok(())
        }
        Command::Classify(args) => {
            let mut opts = ClassifyOptions::new(args.windows);
            if let Some(p) = &args.preset {
                opts.preset = Some(Preset::parse(p).map_err(|e| CliError::usage(e.to_string()))?);
            }
            if let Some(a) = &args.axes {
                opts.axes = Some(AxisSet::parse(a).map_err(|e| CliError::usage(e.to_string()))?);
            }
            if let Some(h) = &args.hidden {
                let hidden: std::result::Result<Vec<usize>, _> =
                    h.split(',').map(|s| s.trim().parse()).collect();
                opts.hidden =
                    Some(hidden.map_err(|_| CliError::usage(format!("bad --hidden '{h}'")))?);
            }
            opts.epochs = args.epochs;
            opts.batch = args.batch;
            opts.learning_rate = args.learning_rate;
            opts.normalize = args.normalize;
            if let Some(seed) = args.seed {
                opts.seed = seed;
            }
            opts.binary = args.binary;
            opts.augment = args.augment;
            opts.grid = args.grid;
            if let Some(r) = &args.rpms {
                let rpms: std::result::Result<Vec<u32>, _> =
                    r.split(',').map(|s| s.trim().parse()).collect();
                opts.rpms = Some(rpms.map_err(|_| CliError::usage(format!("bad --rpms '{r}'")))?);
            }
            opts.decimate = args.decimate;
            opts.transfer_from = args.transfer_from;
            opts.fine_tune_epochs = args.fine_tune_epochs;
            opts.freeze_hidden = args.freeze_hidden;

            let summary = pipeline::classify(&args.out, &opts)?;
            match summary.accuracy {
                Some(acc) => println!("test accuracy {acc:.4}"),
                None if summary.grid_rows > 0 => {
                    println!("grid with {} rows written", summary.grid_rows)
                }
                None => println!("artifact written (no held-out evaluation)"),
            }
            Ok(())
        }
        Command::Inspect(args) => {
            print!("{}", pipeline::inspect(&args.artifact)?);
            Ok(())
        }
    }
}
