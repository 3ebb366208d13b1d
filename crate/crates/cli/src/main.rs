mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::CliError;

#[derive(Parser, Debug)]
#[command(name = "bellctx", version, about = "Reproducible Bell-statistics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a hidden-variable model into a counterfactual table and a four-context bundle.
    SimulateLhv(SimulateLhvArgs),
    /// Sample Born-rule outcomes for a two-qubit state into a four-context bundle.
    SimulateQuantum(SimulateQuantumArgs),
    /// Decide whether four contexts admit a joint distribution (or a reshuffled table).
    Feasibility(FeasibilityArgs),
    /// Violation frequency and z-score of Ŝ across sample sizes.
    ViolationCurve(ViolationCurveArgs),
    /// Per-quadruple B-values from noisy pointer readouts.
    WeakBvalues(WeakArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModelPreset {
    /// ½·(1,1,1,1) + ½·(1,1,1,−1), exact S = 2.
    Boundary,
    /// Every outcome +1, exact S = 2.
    AllPlus,
}

#[derive(Args, Debug)]
#[group(id = "model_source", required = true, multiple = false)]
struct ModelArgs {
    /// TOML model file.
    #[arg(long, group = "model_source")]
    model: Option<PathBuf>,
    /// Built-in model.
    #[arg(long, value_enum, group = "model_source")]
    preset: Option<ModelPreset>,
    /// Sign-cosine model tuned to this exact S in [-2, 2].
    #[arg(long, group = "model_source", allow_hyphen_values = true)]
    target_s: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateLhvArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Trials per context (also the table size).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum StatePreset {
    Singlet,
    MaximallyMixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum ConventionArg {
    Spin,
    Polarization,
}

#[derive(Args, Debug)]
struct SimulateQuantumArgs {
    /// Density matrix file: 16 `re im` lines, row-major.
    #[arg(long, conflicts_with = "preset")]
    state: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "singlet")]
    preset: StatePreset,
    /// `a1 a2 b1 b2` in radians; defaults to the angles maximizing the singlet.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "optimize")]
    angles: Option<String>,
    /// Search the angles maximizing |S| for this state.
    #[arg(long)]
    optimize: bool,
    #[arg(long, value_enum, default_value = "spin")]
    convention: ConventionArg,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[group(id = "input", required = true, multiple = false)]
struct FeasibilityInput {
    /// Behavior TOML (`p11`..`p22` and/or `counts11`..`counts22`).
    #[arg(long, group = "input")]
    behavior: Option<PathBuf>,
    /// Bundle CSV `trial,context_i,context_j,a,b`.
    #[arg(long, group = "input")]
    bundle: Option<PathBuf>,
    /// Counterfactual table CSV `trial,a1,a2,b1,b2`; its projections are tested.
    #[arg(long, group = "input")]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FeasibilityArgs {
    #[command(flatten)]
    input: FeasibilityInput,
    /// Allowed per-context L1 deviation in counts (count data only).
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ViolationCurveArgs {
    /// Study TOML: generator, n_values, trials, threshold, orientation.
    #[arg(long)]
    study: PathBuf,
    /// Override n_values (comma-separated, ascending).
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Count |Ŝ| > threshold instead of following the sign of the exact S.
    #[arg(long)]
    abs: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum WeakSource {
    /// Read rows of a table sampled from a hidden-variable model.
    Lhv,
    /// Symmetric source centered on a target value.
    Calibrated,
}

#[derive(Args, Debug)]
struct WeakArgs {
    #[arg(long, value_enum)]
    source: WeakSource,
    /// LHV source: TOML model file.
    #[arg(long, conflicts_with_all = ["preset", "model_s"])]
    model: Option<PathBuf>,
    /// LHV source: built-in model.
    #[arg(long, value_enum)]
    preset: Option<ModelPreset>,
    /// LHV source: sign-cosine model with this exact S.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "preset")]
    model_s: Option<f64>,
    /// Calibrated source: center of the B-value distribution (default 2√2).
    #[arg(long, allow_hyphen_values = true)]
    target: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Number of records.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SimulateLhv(a) => commands::simulate_lhv(a),
        Command::SimulateQuantum(a) => commands::simulate_quantum(a),
        Command::Feasibility(a) => commands::feasibility(a),
        Command::ViolationCurve(a) => commands::violation_curve(a),
        Command::WeakBvalues(a) => commands::weak_bvalues(a),
    };
    match result {
        Ok(code) => code,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
