mod archive;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use noisenet_core::{Error, NoiseKind};

#[derive(Parser)]
#[command(
    name = "noisenet",
    version,
    about = "Train and analyze feed-forward networks under additive analog noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum SweepKind {
    Correlated,
    Uncorrelated,
}

impl From<SweepKind> for NoiseKind {
    fn from(kind: SweepKind) -> NoiseKind {
        match kind {
            SweepKind::Correlated => NoiseKind::Correlated,
            SweepKind::Uncorrelated => NoiseKind::Uncorrelated,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate an IDX image/label pair (optionally gzipped) and persist it
    /// as a checksummed dataset archive.
    Ingest {
        /// IDX image file.
        images: PathBuf,
        /// IDX label file.
        labels: PathBuf,
        /// Output archive path.
        #[arg(short, long)]
        out: PathBuf,
        /// Dataset name stored in the archive (default: output file stem).
        #[arg(long)]
        name: Option<String>,
        /// Number of label classes to validate against.
        #[arg(long, default_value_t = 10)]
        classes: usize,
    },
    /// Train a model from a config file; writes checkpoint, history CSV,
    /// and manifest.
    Train {
        /// Config file (key = value lines).
        config: PathBuf,
        /// Override a config key, e.g. --set training.epochs=5. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Directory for checkpoints and CSVs.
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Monte Carlo accuracy sweep over a log-spaced noise variance grid.
    Sweep {
        /// Trained checkpoint.
        checkpoint: PathBuf,
        /// Evaluation dataset archive.
        #[arg(long)]
        data: PathBuf,
        /// Noise family to sweep.
        #[arg(long, value_enum)]
        kind: SweepKind,
        /// Smallest variance.
        #[arg(long, default_value_t = 1e-3)]
        min: f64,
        /// Largest variance.
        #[arg(long, default_value_t = 1.0)]
        max: f64,
        /// Number of grid points.
        #[arg(long, default_value_t = 30)]
        points: usize,
        /// Independent noise draws per grid point.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1234)]
        seed: u64,
        /// Output CSV (default: <checkpoint stem>_<kind>.csv next to the
        /// checkpoint).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Analytic vs sampled density of a sigmoid applied to a Gaussian.
    Pdf {
        /// Gaussian means, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
        mu: Vec<f64>,
        /// Gaussian variance.
        #[arg(long, default_value_t = 0.2)]
        variance: f64,
        /// Monte Carlo sample count.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Histogram bins over (0, 1).
        #[arg(long, default_value_t = 200)]
        bins: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "pdf_out")]
        out_dir: PathBuf,
    },
    /// Per-row weight statistics and, with --data, activation distributions.
    Inspect {
        /// Trained checkpoint.
        checkpoint: PathBuf,
        /// Dataset archive to drive the network with.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Maximum samples used for distributions.
        #[arg(long, default_value_t = 2048)]
        sample_cap: usize,
        /// Directory for CSVs (default: next to the checkpoint).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Finite-difference verification of every training mode's gradients.
    Gradcheck {
        #[arg(long, default_value_t = 200)]
        probes: usize,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

/// 0 success, 1 runtime failure, 2 usage or bad input. Clap itself exits 2
/// on bad flags, matching the config/usage bucket.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::DivergenceDetected(_) | Error::GradientMismatch(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest {
            images,
            labels,
            out,
            name,
            classes,
        } => commands::cmd_ingest(&images, &labels, &out, name, classes),
        Command::Train {
            config,
            set,
            out_dir,
        } => commands::cmd_train(&config, &set, &out_dir),
        Command::Sweep {
            checkpoint,
            data,
            kind,
            min,
            max,
            points,
            repeats,
            seed,
            out,
        } => commands::cmd_sweep(
            &checkpoint,
            &data,
            kind.into(),
            min,
            max,
            points,
            repeats,
            seed,
            out,
        ),
        Command::Pdf {
            mu,
            variance,
            samples,
            bins,
            seed,
            out_dir,
        } => commands::cmd_pdf(&mu, variance, samples, bins, seed, &out_dir),
        Command::Inspect {
            checkpoint,
            data,
            sample_cap,
            out_dir,
        } => commands::cmd_inspect(&checkpoint, data.as_deref(), sample_cap, out_dir),
        Command::Gradcheck {
            probes,
            tolerance,
            seed,
        } => commands::cmd_gradcheck(probes, tolerance, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
