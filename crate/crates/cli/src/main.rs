//! `gfe`: exponent tables, period detection, portraits, sweeps and phase
//! comparisons from the command line.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "gfe", version, about = "Generalized Floquet exponents and attractiveness portraits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute LE_J, LE_O, LE_V and GFE over a window plan; without --T the
    /// detected period is used as a single window.
    Exponents(ExponentsArgs),
    /// Detect a closed orbit and report period, rotation number and closure.
    Period(PeriodArgs),
    /// Build an attractiveness portrait and render SVG views.
    Portrait(PortraitArgs),
    /// Sweep one parameter: cycle detection, cycle count and exponents per value.
    Sweep(SweepArgs),
    /// Align a chaotic run with a periodic orbit by phase shift.
    Compare(CompareArgs),
}

/// Flags shared by every subcommand. Each overrides the same key in --config.
#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    /// Key=value file supplying defaults for any flag (flags win).
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    /// System name: silnikov, lorenz, circle, vanderpol, nosehoover_new, nosehoover_classic, rosenbrock.
    #[arg(long)]
    pub system: Option<String>,
    /// Parameter override, repeatable (e.g. --set b=0.6).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Initial state as comma-separated components.
    #[arg(long, value_name = "X,Y[,Z]", allow_hyphen_values = true)]
    pub seed: Option<String>,
    /// Window length.
    #[arg(long = "T", value_name = "T")]
    pub window: Option<f64>,
    /// Window count (exponents) or sample count (portrait).
    #[arg(long = "m", value_name = "M")]
    pub count: Option<usize>,
    /// Time discarded before windows, samples or orbit search.
    #[arg(long)]
    pub transient: Option<f64>,
    /// Absolute integration tolerance.
    #[arg(long = "tol-abs")]
    pub tol_abs: Option<f64>,
    /// Relative integration tolerance.
    #[arg(long = "tol-rel")]
    pub tol_rel: Option<f64>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: Option<std::path::PathBuf>,
    /// Comma-separated SVG views: xy, xz, yz, iso.
    #[arg(long, value_name = "LIST")]
    pub views: Option<String>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ExponentsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated subset of LE_J, LE_O, LE_V, GFE.
    #[arg(long, value_name = "LIST")]
    pub methods: Option<String>,
    /// Magnitude rendered as 0* in sign signatures.
    #[arg(long = "zero-star")]
    pub zero_star: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PeriodArgs {
    #[command(flatten)]
    pub common: Common,
    /// Write the recorded section crossings to crossings.csv.
    #[arg(long)]
    pub crossings: bool,
    /// Export crossings of a coordinate plane instead, e.g. z=0 (implies --crossings).
    #[arg(long, value_name = "AXIS=VALUE", allow_hyphen_values = true)]
    pub section: Option<String>,
    /// Distance at which a return closes the orbit.
    #[arg(long = "closure-tol")]
    pub closure_tol: Option<f64>,
    /// Search budget after the transient.
    #[arg(long = "max-time")]
    pub max_time: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PortraitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fixed half-length factor (overrides the bounding-box policy).
    #[arg(long)]
    pub scale: Option<f64>,
    /// Longest segment as a fraction of the bounding-box diagonal.
    #[arg(long = "scale-fraction")]
    pub scale_fraction: Option<f64>,
    /// Real-part magnitude treated as neutral.
    #[arg(long)]
    pub neutral: Option<f64>,
    /// Time spacing of the drawn trajectory.
    #[arg(long)]
    pub spacing: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Parameter to sweep.
    #[arg(long, value_name = "KEY")]
    pub param: Option<String>,
    /// Comma-separated parameter values (may be empty).
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    pub values: Option<String>,
    /// Comma-separated subset of LE_J, LE_O, LE_V, GFE.
    #[arg(long, value_name = "LIST")]
    pub methods: Option<String>,
    /// Loop distance below which two cycles are the same.
    #[arg(long = "match-tol")]
    pub match_tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Overrides for the periodic run, applied on top of --set (repeatable).
    #[arg(long = "periodic-set", value_name = "KEY=VALUE")]
    pub periodic_set: Vec<String>,
    /// Component to compare: x, y, z or an index.
    #[arg(long)]
    pub component: Option<String>,
    /// Length of the chaotic series.
    #[arg(long)]
    pub span: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Exponents(a) => commands::exponents(a),
        Command::Period(a) => commands::period(a),
        Command::Portrait(a) => commands::portrait(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Compare(a) => commands::compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
