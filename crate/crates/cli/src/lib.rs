//! Command-line front end for `itl-core`: synthetic data, scaling scans,
//! dissipation estimates, structure functions, covering dimensions, bound
//! verdicts and the acceptance suite, all writing CSV and JSON reports.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

/// Exit status for a clean run.
pub const EXIT_OK: i32 = 0;
/// The suite ran but a criterion failed.
pub const EXIT_FAILED_CHECK: i32 = 1;
/// Bad input, configuration or I/O.
pub const EXIT_VALIDATION: i32 = 2;
/// Degenerate fit, CFL or resolution failure.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
    Core(itl_core::Error),
    FailedChecks(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_VALIDATION,
            CliError::FailedChecks(_) => EXIT_FAILED_CHECK,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::FailedChecks(n) => write!(f, "{n} acceptance criteria failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<itl_core::Error> for CliError {
    fn from(e: itl_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "itl", version, about = "Intermittency diagnostics for periodic flow fields", args_override_self = true)]
pub struct Cli {
    /// `key = value` file of default flags; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the available cores. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = "itl-out")]
    pub out: PathBuf,
    /// Leave the timestamp out of JSON reports.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

pub const SUBCOMMANDS: [&str; 8] = ["info", "synth", "mollify", "dissipation", "structure", "dimension", "bounds", "verify"];

/// Flags that take no value, for the config file.
pub const SWITCHES: [&str; 1] = ["no-timestamp"];

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Print the header of an ITL1 field file.
    Info(InfoArgs),
    /// Write a synthetic field.
    Synth(SynthArgs),
    /// Scaling scan of a mollification quantity across dyadic ε.
    Mollify(MollifyArgs),
    /// Duchon-Robert dissipation estimate and local energy balance.
    Dissipation(DissipationArgs),
    /// Structure functions and fitted exponents.
    Structure(StructureArgs),
    /// Covering dimension of a super-level or mask set.
    Dimension(DimensionArgs),
    /// Bound calculators and verdicts.
    Bounds(BoundsArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Info(_) => "info",
            Command::Synth(_) => "synth",
            Command::Mollify(_) => "mollify",
            Command::Dissipation(_) => "dissipation",
            Command::Structure(_) => "structure",
            Command::Dimension(_) => "dimension",
            Command::Bounds(_) => "bounds",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct InfoArgs {
    pub file: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    TaylorGreen,
    VortexSheet,
    Besov,
    Burgers,
    Cantor,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Cells per axis.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Box length per axis.
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    pub length: f64,
    #[arg(long, default_value_t = 1)]
    pub nt: usize,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long, default_value_t = 0.4)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub jump: f64,
    /// Sheet width; 0 is the sharp sheet.
    #[arg(long, default_value_t = 0.0)]
    pub width: f64,
    #[arg(long, default_value_t = 6)]
    pub level: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileArg {
    Bump,
    Triangle,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct MollifyArgs {
    pub file: PathBuf,
    /// moll_error, moll_derivative, reynolds, pressure_comm, cubic_comm or dr_pairing.
    #[arg(long, default_value = "moll_error")]
    pub quantity: String,
    /// Lebesgue exponent of the norm.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Derivative order.
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Dyadic levels `lo:hi`: ε = L·2^-j for j in lo..=hi.
    #[arg(long, default_value = "3:6")]
    pub levels: String,
    #[arg(long, value_enum, default_value = "bump")]
    pub profile: ProfileArg,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct DissipationArgs {
    pub file: PathBuf,
    /// Mollification scale ε = L·2^-level.
    #[arg(long, default_value_t = 5)]
    pub level: u32,
    #[arg(long, value_enum, default_value = "bump")]
    pub profile: ProfileArg,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct StructureArgs {
    pub file: PathBuf,
    /// Orders p, comma separated.
    #[arg(long = "orders", value_delimiter = ',', default_value = "2,3,6")]
    pub orders: Vec<f64>,
    /// Number of dyadic shells starting at 2h.
    #[arg(long, default_value_t = 6)]
    pub shells: usize,
    /// Restrict shifts to one axis.
    #[arg(long)]
    pub axis: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Minkowski,
    Eulerian,
    Lagrangian,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SetArg {
    /// `{|f| > q-quantile}` per slice.
    Superlevel,
    /// `{f > 1/2}`.
    Mask,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct DimensionArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "minkowski")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "mask")]
    pub set: SetArg,
    #[arg(long, default_value_t = 0.99)]
    pub quantile: f64,
    /// Dyadic levels `lo:hi`: δ = L·2^-j for j in lo..=hi.
    #[arg(long, default_value = "3:6")]
    pub levels: String,
    /// Eulerian τ = δ^β.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Lagrangian τ = δ^β₂.
    #[arg(long, default_value_t = 1.0)]
    pub beta2: f64,
    /// Velocity field for Lagrangian covers, mollified at each δ.
    #[arg(long)]
    pub velocity: Option<PathBuf>,
    #[arg(long)]
    pub refine: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct BoundsArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub d: f64,
    /// Eulerian dimension of the dissipation support.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub gamma_lagrangian: Option<f64>,
    /// Measured regularity θ = ζ_p/p.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Band around θ; defaults to θ itself.
    #[arg(long)]
    pub theta_lower: Option<f64>,
    #[arg(long)]
    pub theta_upper: Option<f64>,
    /// Time-regularity exponent.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Finest-scale |⟨D_ε, φ⟩|.
    #[arg(long)]
    pub pairing: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub pairing_floor: f64,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct VerifyArgs {
    /// Criteria to run, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
}

/// Parse `argv`, apply the config file and run. Returns the exit status.
pub fn run(argv: Vec<OsString>) -> i32 {
    match try_run(argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("itl: {e}");
            e.exit_code()
        }
    }
}

fn try_run(argv: Vec<OsString>) -> Result<(), CliError> {
    let argv = match config::config_path(&argv)? {
        Some(path) => {
            let entries = config::load(std::path::Path::new(&path))?;
            let flags = config::to_flags(&entries, &SWITCHES)?;
            config::inject(argv, flags, &SUBCOMMANDS)
        }
        None => argv,
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    Ok(())
                }
                _ => Err(CliError::Validation(e.to_string().trim_end().to_string())),
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        // a pool may already exist when called repeatedly in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    commands::dispatch(&cli)
}
