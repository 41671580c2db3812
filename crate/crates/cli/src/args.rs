use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "thermoctl", version, about = "Minimal-work protocols and speed limits for effective two-level systems")]
pub struct Cli {
    /// Flat key=value file; keys are long flag names. Flags on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel work (defaults to all cores).
    #[arg(long, global = true, env = "THERMOCTL_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Minimal-work protocol for a fixed final population.
    Optimal(OptimalArgs),
    /// Minimal-work protocol when only the final energy is fixed.
    FreeFinal(FreeFinalArgs),
    /// Minimum time to move the population between two values.
    SpeedLimit(SpeedLimitArgs),
    /// Minimal erasure work over a grid of degeneracy ratios and durations.
    ErasureSweep(SweepArgs),
    /// Forward-simulate a protocol file and report its work.
    Simulate(SimulateArgs),
    /// Brute-force piecewise-constant optimizer, compared against the analytic minimum.
    Oracle(OracleArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum UnitsArg {
    /// Energies in k_B T, times in 1/(n gamma).
    Scaled,
    /// Energies in 1/beta units, times in 1/gamma units.
    Physical,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Degeneracy of the excited sector.
    #[arg(long, requires = "m", conflicts_with = "r")]
    pub n: Option<u32>,
    /// Degeneracy of the ground sector.
    #[arg(long, requires = "n")]
    pub m: Option<u32>,
    /// Degeneracy ratio m/n.
    #[arg(long)]
    pub r: Option<f64>,
    /// Inverse temperature (physical units only).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Bath coupling rate per state (physical units only).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = UnitsArg::Scaled)]
    pub units: UnitsArg,
}

#[derive(Args, Debug, Clone)]
pub struct DurationArgs {
    /// Protocol duration.
    #[arg(long, conflicts_with = "tau_ratio")]
    pub tau: Option<f64>,
    /// Protocol duration as a multiple of the speed limit.
    #[arg(long)]
    pub tau_ratio: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output path prefix: writes PREFIX.csv (or .json), PREFIX.summary.json
    /// and, for solver commands, PREFIX.protocol.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Points on the output time grid.
    #[arg(long, default_value_t = 2001)]
    pub samples: usize,
}

#[derive(Args, Debug, Clone)]
pub struct OptimalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub p0: f64,
    #[arg(long)]
    pub p_tau: f64,
    /// Initial energy before the start quench (default: equilibrium with p0).
    #[arg(long)]
    pub e0: Option<f64>,
    /// Final energy after the end quench (default: equilibrium with p-tau).
    #[arg(long)]
    pub e_tau: Option<f64>,
    #[command(flatten)]
    pub duration: DurationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct FreeFinalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub p0: f64,
    /// Initial energy (default: equilibrium with p0).
    #[arg(long)]
    pub e0: Option<f64>,
    /// Final energy; the final population is optimized.
    #[arg(long)]
    pub e_tau: f64,
    /// Protocol duration.
    #[arg(long)]
    pub tau: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SpeedLimitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub p0: f64,
    #[arg(long)]
    pub p_tau: f64,
    /// Duration to test for feasibility.
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 1e-5)]
    pub p_tau: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub r_max: f64,
    #[arg(long, default_value_t = 41)]
    pub r_points: usize,
    /// Comma-separated tau/tau_min values.
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,20")]
    pub durations: Vec<f64>,
    /// CSV path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Protocol file.
    #[arg(long)]
    pub protocol: PathBuf,
    #[arg(long)]
    pub p0: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub p0: f64,
    #[arg(long)]
    pub p_tau: f64,
    #[arg(long)]
    pub e0: Option<f64>,
    #[arg(long)]
    pub e_tau: Option<f64>,
    #[command(flatten)]
    pub duration: DurationArgs,
    /// Number of piecewise-constant levels.
    #[arg(long = "levels", default_value_t = 50)]
    pub levels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the optimized levels as a protocol file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
