use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fsra::harness::dataset::export_dataset;
use fsra::harness::plot::{plot, PlotSpec};
use fsra::harness::{
    parse_sweep, run_eer_sweep, run_robustness_sweep, run_throughput_sweep, Detector, DetectorKind,
    RunReport, SweepSpec, ThresholdMode,
};
use fsra::mpad::{run, DetectorParams, Trace};
use fsra::{synthesize_frame, FrameSeed, SystemConfig};

#[derive(Parser)]
#[command(
    name = "fsra",
    version,
    about = "Fixed-symbol aided random access simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Element error rate of the activity detector over a parameter sweep
    Eer(SweepArgs),
    /// Packet throughput and failure attribution over a parameter sweep
    Throughput(SweepArgs),
    /// EER against the CSI error level (defaults to channel_error_std=0,0.1,0.3)
    Robustness(SweepArgs),
    /// Run one frame and print the true and detected indicator matrices
    Detect(DetectArgs),
    /// Export a training dataset as line-delimited JSON
    GenDataset(DatasetArgs),
    /// Draw an SVG line chart from one or more sweep CSV files
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    /// TOML system configuration; unspecified fields take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding `rng_seed` from the config
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> anyhow::Result<SystemConfig> {
        let mut config = match &self.config {
            Some(path) => SystemConfig::from_file(path)?,
            None => SystemConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.rng_seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct DetectorArgs {
    /// mpad, mpad_weighted, lmmse, mf or oracle
    #[arg(long)]
    detector: Option<DetectorKind>,
    /// Weight file for mpad_weighted
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Let message passing keep at most one slot per device
    #[arg(long)]
    row_constraint: bool,
}

impl DetectorArgs {
    fn build(&self) -> anyhow::Result<Detector> {
        let kind = self.detector.unwrap_or(if self.weights.is_some() {
            DetectorKind::MpadWeighted
        } else {
            DetectorKind::Mpad
        });
        Ok(kind.build(self.weights.as_deref())?)
    }

    fn params(&self, config: &SystemConfig) -> DetectorParams {
        DetectorParams {
            row_constraint: self.row_constraint,
            ..DetectorParams::from_config(config)
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Monte-Carlo frames per sweep point
    #[arg(long, default_value_t = 1000)]
    frames: u64,
    /// Config field and values, e.g. n_antennas_complex=20,30,40
    #[arg(long)]
    sweep: Option<String>,
    /// CSV output path (a manifest is written next to it); stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fixed decision threshold for lmmse/mf instead of calibration
    #[arg(long)]
    threshold: Option<f64>,
    /// Frames used to calibrate the lmmse/mf threshold at each point
    #[arg(long, default_value_t = 2000)]
    calibration_frames: u64,
    /// Fill the `seconds` column with wall-clock times
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Frame index within the seed
    #[arg(long, default_value_t = 0)]
    frame: u64,
    /// Threshold for lmmse/mf
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args)]
struct DatasetArgs {
    #[command(flatten)]
    common: Common,
    /// Number of records
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Sweep CSV files, one curve each
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Column to plot against swept_value
    #[arg(long, default_value = "eer")]
    column: String,
    #[arg(long, default_value = "swept value")]
    x_label: String,
    #[arg(long)]
    log_y: bool,
    #[arg(long)]
    out: PathBuf,
}

fn sweep(args: &SweepArgs, kind: &str) -> anyhow::Result<()> {
    let config = args.common.load()?;
    let mut spec = SweepSpec::new(config, args.detector.build()?, args.frames);
    spec.row_constraint = args.detector.row_constraint;
    spec.threshold = match args.threshold {
        Some(t) => ThresholdMode::Fixed(t),
        None => ThresholdMode::Calibrated {
            frames: args.calibration_frames,
        },
    };
    let sweep = match (&args.sweep, kind) {
        (Some(s), _) => Some(parse_sweep(s)?),
        (None, "robustness") => Some(("channel_error_std".to_string(), vec![0.0, 0.1, 0.3])),
        (None, _) => None,
    };
    if let Some((param, values)) = sweep {
        spec = spec.sweep(&param, &values);
    }
    let report: RunReport = match kind {
        "eer" => run_eer_sweep(&spec)?,
        "throughput" => run_throughput_sweep(&spec)?,
        "robustness" => run_robustness_sweep(&spec)?,
        _ => unreachable!("subcommand names are fixed"),
    };
    match &args.out {
        Some(path) => {
            let manifest = report
                .save(path, args.timing)
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} and {}", path.display(), manifest.display());
        }
        None => report.write_csv(std::io::stdout().lock(), args.timing)?,
    }
    Ok(())
}

fn detect_one(args: &DetectArgs) -> anyhow::Result<()> {
    let config = args.common.load()?;
    let detector = args.detector.build()?;
    let params = args.detector.params(&config);
    let frame = synthesize_frame(&config, FrameSeed::new(config.rng_seed, args.frame));
    let truth = frame.indicator.to_binary();
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "true S ({} active):\n{truth}",
        frame.indicator.active_count()
    )?;
    match &detector {
        Detector::Mpad | Detector::MpadWeighted(_) => {
            let weights = match &detector {
                Detector::MpadWeighted(w) => Some(w),
                _ => None,
            };
            let rx = &frame.rx_fixed;
            let result = run(
                &rx.y,
                &rx.h_csi,
                &config,
                &params,
                weights,
                Trace::default(),
            )?;
            writeln!(out, "detected S:\n{}", result.s_hat)?;
            writeln!(out, "output LLRs:")?;
            for row in result.llr.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:9.3}")).collect();
                writeln!(out, "{}", cells.join(" "))?;
            }
        }
        _ => {
            let s_hat = detector.decide_with(&frame, &config, &params, args.threshold)?;
            writeln!(out, "detected S:\n{s_hat}")?;
        }
    }
    let s_hat = detector.decide_with(&frame, &config, &params, args.threshold)?;
    writeln!(out, "element errors: {}", truth.hamming(&s_hat))?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Eer(a) => sweep(a, "eer"),
        Command::Throughput(a) => sweep(a, "throughput"),
        Command::Robustness(a) => sweep(a, "robustness"),
        Command::Detect(a) => detect_one(a),
        Command::GenDataset(a) => {
            let config = a.common.load()?;
            if a.samples == 0 {
                bail!("--samples must be at least 1");
            }
            export_dataset(&config, a.samples, &a.out)?;
            eprintln!("wrote {} records to {}", a.samples, a.out.display());
            Ok(())
        }
        Command::Plot(a) => {
            plot(&PlotSpec {
                inputs: a.inputs.clone(),
                column: a.column.clone(),
                x_label: a.x_label.clone(),
                log_y: a.log_y,
                out: a.out.clone(),
            })?;
            Ok(())
        }
    }
}
