//! `cordscan`: spinal-cord diffusion MRI pipeline from the command line.

mod commands;
mod error;
mod svg;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "cordscan", version, about = "Diffusion MRI microstructure analysis of the cervical spinal cord")]
struct Cli {
    /// Worker threads (default: all available cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic spinal-cord dataset with known ground truth.
    Phantom(PhantomArgs),
    /// Fit DTI and/or Ball-and-Stick models voxel-wise.
    Fit(FitArgs),
    /// Average metric maps over vertebral levels into a cohort CSV.
    Aggregate(AggregateArgs),
    /// Group statistics on a cohort CSV.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// LDA classification of lesioned levels scored by ROC AUC.
    Classify(ClassifyArgs),
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    /// JSON phantom description; omitted fields take default values.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Seed for the noise generator (overrides the spec's seed).
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// 4D diffusion-weighted NIfTI volume.
    #[arg(long)]
    pub dwi: PathBuf,
    /// FSL b-value file.
    #[arg(long)]
    pub bval: PathBuf,
    /// FSL gradient direction file.
    #[arg(long)]
    pub bvec: PathBuf,
    /// 3D mask; voxels with a non-zero value are fitted.
    #[arg(long)]
    pub mask: PathBuf,
    /// dti, ballstick or both.
    #[arg(long, default_value = "both")]
    pub model: String,
    /// Stick radial diffusivity in mm²/s (0 gives a pure stick).
    #[arg(long, default_value_t = cordscan::models::LAMBDA_PERP_DEFAULT)]
    pub lambda_perp: f64,
    /// Ball (free water) diffusivity in mm²/s.
    #[arg(long, default_value_t = cordscan::models::D0_DEFAULT)]
    pub d0: f64,
    /// Output directory for the metric maps.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AggregateArgs {
    /// Directory holding fww, stick_ad, ad, fa, md and rd maps (.nii or .nii.gz).
    #[arg(long)]
    pub maps: PathBuf,
    /// Vertebral level label volume (values 0..7).
    #[arg(long)]
    pub labels: PathBuf,
    /// White-matter partial-volume weights in [0, 1].
    #[arg(long)]
    pub wm: PathBuf,
    /// Binary lesion mask (required for patients).
    #[arg(long)]
    pub lesion: Option<PathBuf>,
    #[arg(long)]
    pub subject: String,
    /// healthy or patient.
    #[arg(long)]
    pub group: String,
    /// Levels to summarize, e.g. 2-4 or 1-7.
    #[arg(long, default_value = "2-4")]
    pub levels: String,
    /// Use an unweighted mean over voxels whose WM weight reaches this value.
    #[arg(long)]
    pub binary_wm: Option<f64>,
    /// Cohort CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Add rows to an existing cohort CSV instead of replacing it.
    #[arg(long)]
    pub append: bool,
}

#[derive(Subcommand, Debug)]
pub enum StatsCommand {
    /// Welch t-tests of NAWM and lesioned levels against healthy levels.
    Welch(WelchArgs),
    /// Pearson correlation matrix of the six metrics.
    Corr(CorrArgs),
    /// Level-wise comparison (additive two-way model, Tukey HSD) and pooling report.
    Levels(LevelsArgs),
}

#[derive(Args, Debug)]
pub struct WelchArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Lesion-fraction thresholds defining the lesioned groups.
    #[arg(long, default_value = "0.05,0.10")]
    pub thr: String,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CorrArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Rows to correlate: all, healthy, nawm, ms or patients.
    #[arg(long, default_value = "all")]
    pub rows: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LevelsArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Subjects to include: healthy, patient or all.
    #[arg(long, default_value = "healthy")]
    pub group: String,
    /// Pairwise comparison CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of the pooled level runs per metric and their intersection.
    #[arg(long)]
    pub runs: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Metric combinations separated by `;` (default: the eight standard sets).
    #[arg(long)]
    pub combos: Option<String>,
    /// Lesion-fraction thresholds, `start:stop:step` or a list.
    #[arg(long, default_value = "0.02:0.20:0.02")]
    pub thr: String,
    #[arg(long, default_value_t = cordscan::classify::DEFAULT_SPLITS)]
    pub splits: usize,
    #[arg(long)]
    pub seed: u64,
    /// Fraction of rows used for training in each split.
    #[arg(long, default_value_t = cordscan::classify::DEFAULT_TRAIN_FRAC)]
    pub train_frac: f64,
    /// Ridge added to the pooled covariance.
    #[arg(long, default_value_t = cordscan::classify::DEFAULT_RIDGE)]
    pub ridge: f64,
    /// Standardize with training-split statistics only.
    #[arg(long)]
    pub no_leak: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// AUC-versus-threshold plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Phantom(a) => commands::phantom(&a),
        Command::Fit(a) => commands::fit(&a, cli.threads),
        Command::Aggregate(a) => commands::aggregate(&a),
        Command::Stats(StatsCommand::Welch(a)) => commands::welch(&a),
        Command::Stats(StatsCommand::Corr(a)) => commands::corr(&a),
        Command::Stats(StatsCommand::Levels(a)) => commands::levels(&a),
        Command::Classify(a) => commands::classify(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CORDSCAN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
