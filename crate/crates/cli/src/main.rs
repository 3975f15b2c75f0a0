use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

#[derive(Parser, Debug)]
#[command(name = "sepdist", version, about = "Entanglement distribution with separable ancillas: Gaussian-state toolkit")]
struct Cli {
    /// Worker threads for sampling (outputs do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate the protocol analytically and write the stage trace and criterion curve.
    RunProtocol(RunProtocolArgs),
    /// Separability, physicality and classicality verdicts for a covariance file.
    Analyze(AnalyzeArgs),
    /// Apply or invert phase noise on mode A ahead of Alice's beam splitter.
    Dephase(DephaseArgs),
    /// Draw a Monte Carlo sample set of the measured channels.
    Simulate(SimulateArgs),
    /// Reconstruct a two-mode covariance with block errors from a sample CSV.
    Tomography(TomographyArgs),
    /// Reproduce the bundled reference numbers.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    BeforeBs,
    AfterBs,
    APosteriori,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OrderingArg {
    ModulationThenLoss,
    LossThenModulation,
}

#[derive(Args, Debug, Clone)]
pub struct ProtocolFlags {
    /// Squeezing parameter.
    #[arg(long)]
    r: f64,
    #[arg(long, value_enum, default_value = "before-bs")]
    variant: VariantArg,
    /// Fraction of Bob's output power lost.
    #[arg(long, default_value_t = 0.5)]
    loss: f64,
    #[arg(long, default_value_t = 1.0)]
    detector_gain: f64,
    #[arg(long, value_enum, default_value = "modulation-then-loss")]
    loss_ordering: OrderingArg,
    /// Gain grid as `lo,hi,points`.
    #[arg(long, default_value = "0.05,2,200")]
    gain_grid: String,
}

#[derive(Args, Debug)]
pub struct RunProtocolArgs {
    #[command(flatten)]
    protocol: ProtocolFlags,
    #[arg(long, env = "SEPDIST_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// JSON state file.
    file: PathBuf,
    /// Mode to partially transpose.
    #[arg(long, default_value_t = 1)]
    mode: usize,
    #[arg(long)]
    ppt: bool,
    #[arg(long)]
    duan: bool,
    #[arg(long)]
    physical: bool,
    #[arg(long)]
    classical: bool,
    #[arg(long, default_value_t = 0.05)]
    g_min: f64,
    #[arg(long, default_value_t = 2.0)]
    g_max: f64,
    /// Write the verdict JSON here (and a manifest next to it).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReadingArg {
    SquareDegrees,
    StdDevDegrees,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("direction").required(true).args(["invert", "forward"]))]
#[command(group = clap::ArgGroup::new("noise").required(true).args(["sigma2", "phase_noise_deg"]))]
pub struct DephaseArgs {
    /// JSON state file (the A'C' output for --invert, the AC input for --forward).
    file: PathBuf,
    #[arg(long, requires = "d")]
    invert: bool,
    #[arg(long)]
    forward: bool,
    /// Mean vector `a,b,c,d` (defaults to the file's mean for --forward).
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    /// Phase-noise variance in rad².
    #[arg(long)]
    sigma2: Option<f64>,
    /// Phase-noise figure in degrees, converted according to --reading.
    #[arg(long)]
    phase_noise_deg: Option<f64>,
    #[arg(long, value_enum, default_value = "square-degrees")]
    reading: ReadingArg,
    /// Alice's beam-splitter transmittance.
    #[arg(long = "T", alias = "t", default_value_t = 0.5)]
    transmittance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SamplingArg {
    Continuous,
    Grid,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    protocol: ProtocolFlags,
    /// Displacement cells per axis.
    #[arg(long, default_value_t = 80)]
    n_outer: usize,
    /// Records per cell.
    #[arg(long, default_value_t = 100)]
    n_inner: usize,
    #[arg(long, value_enum, default_value = "continuous")]
    sampling: SamplingArg,
    #[arg(long, env = "SEPDIST_SEED", default_value_t = 0)]
    seed: u64,
    /// Apply the a-posteriori correction (a-posteriori variant only).
    #[arg(long)]
    correct: bool,
    /// Correction fraction; solved for when omitted.
    #[arg(long, requires = "correct")]
    fraction: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PairArg {
    /// A' and C' after Alice's beam splitter.
    Ac,
    /// A' and B' at the output.
    Ab,
}

#[derive(Args, Debug)]
pub struct TomographyArgs {
    /// Sample CSV.
    samples: PathBuf,
    /// JSON sidecar (defaults to the CSV path with a .json extension).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ac")]
    pair: PairArg,
    /// Settings as `θA,θB;θA,θB;…` in degrees (defaults to the five canonical settings).
    #[arg(long)]
    settings: Option<String>,
    #[arg(long, default_value_t = 10)]
    blocks: usize,
    /// Shuffle records with this seed before blocking.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<sepdist::Error>() {
            return match e {
                e if e.is_validation() => 2,
                sepdist::Error::Numerical(_) => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::RunProtocol(a) => commands::run_protocol(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Dephase(a) => commands::dephase(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Tomography(a) => commands::tomography(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
