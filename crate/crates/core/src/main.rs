//! Command-line front end: solve one equilibrium, sweep a parameter axis,
//! synthesize the bundled San Francisco-style scenario, or emit the
//! concavity certificate / equity report for a solved state.
//!
//! Exit codes: 0 on success, 2 on validation problems (bad arguments or
//! scenario files), 3 when a solver fails or does not converge.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use modalgame::{
    best_response_iterate, certify_concavity, default_initial_strategies, evaluate_equity,
    export_results, expost_evaluate, fare_grid, load_scenario, partition_zones, run_sweep,
    save_scenario, synthesize_sf_scenario, AccessibilityTensor, CandidateEquilibrium,
    EpsilonReport, ExportFormat, IterationRecord, PartitionStrategy, Scenario, SfConfig,
    SolverOptions, SweepAxis, TheilReport, TncStrategy, TransitSolveConfig, TransitStrategy,
};

#[derive(Parser)]
#[command(
    name = "modalgame",
    version,
    about = "Equilibrium solver for a ride-hail platform vs. transit agency game"
)]
struct Cli {
    /// Worker threads; MODALGAME_THREADS is used when the flag is absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one equilibrium and report the ε-Nash audit.
    Solve(SolveArgs),
    /// Re-solve the game along one parameter axis and export the records.
    Sweep(SweepArgs),
    /// Generate the synthetic San Francisco-style scenario file.
    SynthSf(SynthSfArgs),
    /// Emit the transit concavity certificate for a solved state.
    Certify(StateArgs),
    /// Emit the accessibility and Theil equity report for a solved state.
    Theil(TheilArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Where to write the JSON report (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Which parameter to vary.
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated parameter values, solved in the given order
    /// (e.g. "36,30,24,20"; "inf" disables the wait-cap policy).
    #[arg(long, value_parser = parse_values)]
    values: Values,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct SynthSfArgs {
    /// RNG seed for the gravity demand matrix.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Where to write the scenario file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StateArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Solved-state JSON from `solve --out`; solved fresh when omitted.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Where to write the JSON report (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheilArgs {
    #[command(flatten)]
    inner: StateArgs,
    /// Accessibility shift to apply (derived from this state when omitted).
    #[arg(long)]
    shift: Option<f64>,
}

/// Flags shared by every verb that runs the solvers.
#[derive(Args)]
struct SolverArgs {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Convergence threshold on the per-player strategy deltas.
    #[arg(long, default_value_t = 1e-3)]
    sigma: f64,
    /// Cap on best-response rounds.
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Zone partition used by the profit-bound relaxation.
    #[arg(long, value_enum, default_value_t = PartitionArg::Pairwise)]
    partition: PartitionArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    CAv,
    WAMax,
    Subsidy,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> SweepAxis {
        match a {
            AxisArg::CAv => SweepAxis::CAv,
            AxisArg::WAMax => SweepAxis::WAMax,
            AxisArg::Subsidy => SweepAxis::Subsidy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionArg {
    Pairwise,
    Singleton,
    Whole,
}

impl From<PartitionArg> for PartitionStrategy {
    fn from(p: PartitionArg) -> PartitionStrategy {
        match p {
            PartitionArg::Pairwise => PartitionStrategy::PairwiseByIndex,
            PartitionArg::Singleton => PartitionStrategy::Singleton,
            PartitionArg::Whole => PartitionStrategy::Whole,
        }
    }
}

#[derive(Clone)]
struct Values(Vec<f64>);

fn parse_values(raw: &str) -> Result<Values, String> {
    let mut out = Vec::new();
    for piece in raw.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        out.push(
            piece
                .parse::<f64>()
                .map_err(|_| format!("'{piece}' is not a number"))?,
        );
    }
    if out.is_empty() {
        return Err("no values given".into());
    }
    Ok(Values(out))
}

const SOLVE_SCHEMA_VERSION: u32 = 1;

/// The `solve` verb's output document; `certify` and `theil` accept it back
/// through `--state`.
#[derive(Serialize, Deserialize)]
struct SolveDoc {
    schema_version: u32,
    converged: bool,
    iterations: usize,
    tnc: TncStrategy,
    transit: TransitStrategy,
    epsilon: EpsilonReport,
    theil: TheilReport,
    trajectory: Vec<IterationRecord>,
}

#[derive(Serialize)]
struct TheilDoc {
    schema_version: u32,
    theil: TheilReport,
    accessibility: AccessibilityTensor,
}

/// Failures carrying the exit code they map to.
enum CliError {
    /// Bad inputs: arguments, scenario files, unreadable state. Exit 2.
    Invalid(String),
    /// Solver failure or non-convergence. Exit 3.
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Solver(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn solver(e: impl std::fmt::Display) -> CliError {
    CliError::Solver(e.to_string())
}

fn configure_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("MODALGAME_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        // A second initialization (e.g. in tests) is harmless; results do
        // not depend on the pool size, only wall time does.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(invalid),
        None => {
            use std::io::Write;
            // A closed pipe (e.g. piping into `head`) is not an error.
            match writeln!(std::io::stdout(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(invalid(e)),
                _ => Ok(()),
            }
        }
    }
}

fn options_from(args: &SolverArgs) -> SolverOptions {
    SolverOptions {
        sigma: args.sigma,
        max_iter: args.max_iter,
        ..SolverOptions::default()
    }
}

fn solve_pipeline(
    scenario: &Scenario,
    args: &SolverArgs,
) -> Result<(CandidateEquilibrium, EpsilonReport), CliError> {
    let options = options_from(args);
    let (tnc0, transit0) = default_initial_strategies(scenario).swap_remove(0);
    let candidate =
        best_response_iterate(&tnc0, &transit0, scenario, &options).map_err(solver)?;
    let partition = partition_zones(scenario.num_zones(), args.partition.into());
    let report = expost_evaluate(&candidate, scenario, &partition, &options).map_err(solver)?;
    Ok((candidate, report))
}

/// Recover the strategy pair to report on: a saved solve document if given,
/// otherwise a fresh solve.
fn state_for(
    scenario: &Scenario,
    args: &StateArgs,
) -> Result<(TncStrategy, TransitStrategy), CliError> {
    match &args.state {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(invalid)?;
            let doc: SolveDoc = serde_json::from_str(&text).map_err(invalid)?;
            if doc.schema_version != SOLVE_SCHEMA_VERSION {
                return Err(CliError::Invalid(format!(
                    "unsupported state schema version {}",
                    doc.schema_version
                )));
            }
            Ok((doc.tnc, doc.transit))
        }
        None => {
            let (candidate, _) = solve_pipeline(scenario, &args.solver)?;
            Ok((candidate.tnc, candidate.transit))
        }
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<u8, CliError> {
    let scenario = load_scenario(&args.solver.scenario).map_err(invalid)?;
    let (candidate, epsilon) = solve_pipeline(&scenario, &args.solver)?;
    let (_, theil) =
        evaluate_equity(&candidate.tnc, &candidate.transit, &scenario, None).map_err(solver)?;
    let doc = SolveDoc {
        schema_version: SOLVE_SCHEMA_VERSION,
        converged: candidate.converged,
        iterations: candidate.iterations,
        tnc: candidate.tnc,
        transit: candidate.transit,
        epsilon,
        theil,
        trajectory: candidate.trajectory,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(invalid)?;
    text.push('\n');
    emit(&args.out, text.trim_end())?;
    if !doc.converged {
        eprintln!(
            "best-response play did not converge within {} rounds",
            doc.iterations
        );
        return Ok(3);
    }
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, CliError> {
    let scenario = load_scenario(&args.solver.scenario).map_err(invalid)?;
    let options = options_from(&args.solver);
    let results = run_sweep(
        &scenario,
        args.axis.into(),
        &args.values.0,
        &options,
        args.solver.partition.into(),
    )
    .map_err(invalid)?;
    let format = match args.format {
        FormatArg::Csv => ExportFormat::Csv,
        FormatArg::Json => ExportFormat::Json,
    };
    export_results(&results, &args.out, format).map_err(invalid)?;
    let solved = results.points.iter().filter(|p| p.outcome.is_some()).count();
    for p in results.points.iter().filter(|p| p.error.is_some()) {
        eprintln!(
            "point {} = {} failed: {}",
            results.axis.label(),
            p.value,
            p.error.as_deref().unwrap_or("unknown")
        );
    }
    if solved == 0 {
        return Err(CliError::Solver("every sweep point failed".into()));
    }
    Ok(0)
}

fn cmd_synth_sf(args: &SynthSfArgs) -> Result<u8, CliError> {
    let scenario = synthesize_sf_scenario(args.seed, &SfConfig::default());
    save_scenario(&args.out, &scenario).map_err(invalid)?;
    Ok(0)
}

fn cmd_certify(args: &StateArgs) -> Result<u8, CliError> {
    let scenario = load_scenario(&args.solver.scenario).map_err(invalid)?;
    let (tnc, _) = state_for(&scenario, args)?;
    let grid = fare_grid(&scenario, TransitSolveConfig::default().fare_points);
    let certificate = certify_concavity(&scenario, &tnc, &grid).map_err(solver)?;
    let mut text = serde_json::to_string_pretty(&certificate).map_err(invalid)?;
    text.push('\n');
    emit(&args.out, text.trim_end())?;
    Ok(0)
}

fn cmd_theil(args: &TheilArgs) -> Result<u8, CliError> {
    let scenario = load_scenario(&args.inner.solver.scenario).map_err(invalid)?;
    let (tnc, transit) = state_for(&scenario, &args.inner)?;
    let (accessibility, theil) =
        evaluate_equity(&tnc, &transit, &scenario, args.shift).map_err(solver)?;
    let doc = TheilDoc { schema_version: SOLVE_SCHEMA_VERSION, theil, accessibility };
    let mut text = serde_json::to_string_pretty(&doc).map_err(invalid)?;
    text.push('\n');
    emit(&args.inner.out, text.trim_end())?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::SynthSf(args) => cmd_synth_sf(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Theil(args) => cmd_theil(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
