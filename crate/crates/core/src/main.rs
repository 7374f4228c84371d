//! Command-line interface: solve, export-lp, generate, experiment, oracle.
//!
//! Exit codes: 0 success, 1 input/output failure (unreadable or malformed
//! data files), 2 usage error (bad flags, bad configuration, bad experiment
//! grid), 3 solve finished without finding a feasible roster (the roster is
//! still written, with a warning banner).
//!
//! Everything deterministic goes to stdout (or `--output`); progress,
//! warnings, and timing go to stderr, so repeated runs with the same seed
//! produce byte-identical payloads. `--measure` opts into wall-clock
//! reporting; `ROSTERGA_THREADS` sets the experiment worker count and never
//! changes the output bytes.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rosterga::dataio::{
    export_lp, load_instance, write_demand, write_penalties, write_patterns,
    write_qualifications, write_schedule, write_wishes, DataError, PenaltySynthesisConfig,
};
use rosterga::engine::{evolve, GAConfig};
use rosterga::exact::{brute_force_solve, DEFAULT_ENUM_LIMIT};
use rosterga::fitness::FitnessWeights;
use rosterga::harness::{
    generate_instance, load_experiment_grid, run_experiment, ArchetypeKind, ArchetypeSpec,
    ConfigOverrides, HarnessError,
};
use rosterga::model::Instance;

const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rosterga",
    version,
    about = "Weekly nurse rostering with a penalty-based genetic algorithm"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print the roster.
    Solve(SolveArgs),
    /// Write an instance as an integer program in LP text.
    ExportLp(ExportLpArgs),
    /// Generate the instance files of a ward archetype.
    Generate(GenerateArgs),
    /// Run a TOML experiment grid and emit CSV.
    Experiment(ExperimentArgs),
    /// Enumerate a small instance exhaustively and print the optimum.
    Oracle(OracleArgs),
}

/// Where the instance comes from: either the instance files or a generated
/// archetype.
#[derive(Args)]
struct InstanceArgs {
    /// Demand file (use together with --qualifications and --wishes).
    #[arg(long, requires = "qualifications", requires = "wishes", conflicts_with = "archetype")]
    demand: Option<PathBuf>,
    /// Qualifications file.
    #[arg(long, requires = "demand")]
    qualifications: Option<PathBuf>,
    /// Wishes file.
    #[arg(long, requires = "demand")]
    wishes: Option<PathBuf>,
    /// Pattern library file (optional; regenerated when absent).
    #[arg(long, requires = "demand")]
    patterns: Option<PathBuf>,
    /// Penalties file (optional; synthesized when absent).
    #[arg(long, requires = "demand")]
    penalties: Option<PathBuf>,
    /// Generate an instance: normal, restrictive, unrestrictive, fluctuating.
    #[arg(long, value_name = "KIND")]
    archetype: Option<String>,
    /// Nurse count for --archetype.
    #[arg(long, requires = "archetype")]
    nurses: Option<usize>,
    /// Generator seed for --archetype; defaults to --seed where one exists.
    #[arg(long, requires = "archetype")]
    instance_seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// RNG seed for the run.
    #[arg(long, required_unless_present = "random")]
    seed: Option<u64>,
    /// Draw the seed from the OS and echo it to stderr.
    #[arg(long, conflicts_with = "seed")]
    random: bool,
    /// Write the roster here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report wall-clock time on stderr.
    #[arg(long)]
    measure: bool,
}

#[derive(Args)]
struct ExportLpArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Write the LP text here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Archetype: normal, restrictive, unrestrictive, fluctuating.
    #[arg(long, value_name = "KIND")]
    archetype: String,
    /// Nurse count override.
    #[arg(long)]
    nurses: Option<usize>,
    /// Generator seed.
    #[arg(long, required_unless_present = "random")]
    seed: Option<u64>,
    /// Draw the seed from the OS and echo it to stderr.
    #[arg(long, conflicts_with = "seed")]
    random: bool,
    /// Directory receiving demand/qualifications/wishes/patterns/penalties.
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML grid of instances and configurations.
    #[arg(long)]
    grid: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Record real wall-clock times in the CSV.
    #[arg(long)]
    measure: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Refuse search spaces larger than this many rosters.
    #[arg(long, default_value_t = DEFAULT_ENUM_LIMIT)]
    limit: u64,
    /// Weight of one uncovered demand slot.
    #[arg(long)]
    demand_weight: Option<u32>,
    /// Weight of one surplus senior on a weekend shift.
    #[arg(long)]
    senior_weight: Option<u32>,
    /// Carry the previous-week penalty only when at least this.
    #[arg(long)]
    prev_week_threshold: Option<u32>,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Display) -> Failure {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    fn run(message: impl Display) -> Failure {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<DataError> for Failure {
    fn from(err: DataError) -> Failure {
        Failure::run(err)
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Failure {
        Failure::run(err)
    }
}

impl From<HarnessError> for Failure {
    fn from(err: HarnessError) -> Failure {
        match err {
            HarnessError::Io { .. } => Failure::run(err),
            _ => Failure::usage(err),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            if failure.code == 2 {
                eprintln!("run 'rosterga <command> --help' for usage");
            }
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Solve(args) => solve(args),
        Command::ExportLp(args) => export_lp_cmd(args),
        Command::Generate(args) => generate(args),
        Command::Experiment(args) => experiment(args),
        Command::Oracle(args) => oracle(args),
    }
}

/// Resolves --seed/--random into a concrete seed, echoing drawn seeds.
fn resolve_seed(seed: Option<u64>, random: bool) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            debug_assert!(random, "clap enforces --seed unless --random");
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            s
        }
    }
}

/// Builds the instance from files or from an archetype; `fallback_seed`
/// feeds archetype generation when --instance-seed is not given.
fn resolve_instance(
    args: &InstanceArgs,
    fallback_seed: Option<u64>,
) -> Result<Instance, Failure> {
    match (&args.demand, &args.archetype) {
        (None, None) => Err(Failure::usage(
            "give an instance: either --archetype KIND or --demand/--qualifications/--wishes",
        )),
        (Some(_), Some(_)) => Err(Failure::usage(
            "--demand and --archetype are mutually exclusive",
        )),
        (Some(demand), None) => {
            // clap's `requires` guarantees these two are present.
            let quals = args.qualifications.as_ref().expect("required by clap");
            let wishes = args.wishes.as_ref().expect("required by clap");
            let outcome = load_instance(
                demand,
                quals,
                wishes,
                args.patterns.as_deref(),
                args.penalties.as_deref(),
                &PenaltySynthesisConfig::default(),
            )?;
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            Ok(outcome.instance)
        }
        (None, Some(kind)) => {
            let kind: ArchetypeKind = kind.parse().map_err(Failure::usage)?;
            let seed = args
                .instance_seed
                .or(fallback_seed)
                .ok_or_else(|| Failure::usage("--archetype needs --instance-seed"))?;
            let mut spec = ArchetypeSpec::new(kind, seed);
            if let Some(n) = args.nurses {
                spec = spec.with_nurse_count(n);
            }
            generate_instance(&spec).map_err(Failure::usage)
        }
    }
}

/// Writes `payload` to `--output` or stdout.
fn emit(output: Option<&PathBuf>, payload: &[u8]) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, payload)
            .map_err(|e| Failure::run(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(payload).map_err(Failure::from)?;
            stdout.flush().map_err(Failure::from)
        }
    }
}

fn solve(args: SolveArgs) -> Result<ExitCode, Failure> {
    let seed = resolve_seed(args.seed, args.random);
    let instance = resolve_instance(&args.instance, Some(seed))?;
    let (mut config, weights) = args
        .overrides
        .apply(GAConfig::default(), FitnessWeights::default())
        .map_err(Failure::usage)?;
    config.seed = seed;
    let outcome = evolve(&instance, &config, &weights).map_err(Failure::usage)?;

    let mut payload = Vec::new();
    write_schedule(&instance, &outcome.best, &weights, &mut payload)?;
    emit(args.output.as_ref(), &payload)?;

    eprintln!(
        "best fitness {} after {} generations",
        outcome.stats.best_fitness, outcome.stats.generations
    );
    if args.measure {
        eprintln!("wall time: {} ms", outcome.stats.wall.as_millis());
    }
    if outcome.stats.feasible {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: no feasible roster found");
        Ok(ExitCode::from(EXIT_INFEASIBLE))
    }
}

fn export_lp_cmd(args: ExportLpArgs) -> Result<ExitCode, Failure> {
    let instance = resolve_instance(&args.instance, None)?;
    let mut payload = Vec::new();
    export_lp(&instance, &mut payload)?;
    emit(args.output.as_ref(), &payload)?;
    Ok(ExitCode::SUCCESS)
}

fn generate(args: GenerateArgs) -> Result<ExitCode, Failure> {
    let kind: ArchetypeKind = args.archetype.parse().map_err(Failure::usage)?;
    let seed = resolve_seed(args.seed, args.random);
    let mut spec = ArchetypeSpec::new(kind, seed);
    if let Some(n) = args.nurses {
        spec = spec.with_nurse_count(n);
    }
    let instance = generate_instance(&spec).map_err(Failure::usage)?;

    fs::create_dir_all(&args.output_dir)
        .map_err(|e| Failure::run(format!("{}: {e}", args.output_dir.display())))?;
    let write_one = |name: &str, body: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| {
        let mut payload = Vec::new();
        body(&mut payload).map_err(Failure::from)?;
        let path = args.output_dir.join(name);
        fs::write(&path, payload).map_err(|e| Failure::run(format!("{}: {e}", path.display())))
    };
    write_one("demand.txt", &|out| write_demand(&instance.demand, out))?;
    write_one("qualifications.txt", &|out| {
        write_qualifications(&instance.nurses, out)
    })?;
    write_one("wishes.txt", &|out| write_wishes(&instance.nurses, out))?;
    write_one("patterns.txt", &|out| write_patterns(&instance.patterns, out))?;
    write_one("penalties.txt", &|out| write_penalties(&instance.nurses, out))?;
    eprintln!(
        "wrote 5 instance files for archetype '{kind}' (seed {seed}) to {}",
        args.output_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Reads the experiment worker count from ROSTERGA_THREADS (default 1).
fn thread_count() -> Result<usize, Failure> {
    match std::env::var("ROSTERGA_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(Failure::usage(format!("ROSTERGA_THREADS: {e}"))),
        Ok(text) => match text.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::usage(format!(
                "ROSTERGA_THREADS must be a positive integer, got '{text}'"
            ))),
        },
    }
}

fn experiment(args: ExperimentArgs) -> Result<ExitCode, Failure> {
    let grid = load_experiment_grid(&args.grid)?;
    let threads = thread_count()?;
    let mut payload = Vec::new();
    run_experiment(&grid, args.measure, threads, &mut payload)?;
    emit(args.output.as_ref(), &payload)?;
    Ok(ExitCode::SUCCESS)
}

fn oracle(args: OracleArgs) -> Result<ExitCode, Failure> {
    let instance = resolve_instance(&args.instance, None)?;
    let mut weights = FitnessWeights::default();
    if let Some(v) = args.demand_weight {
        weights.demand_weight = v;
    }
    if let Some(v) = args.senior_weight {
        weights.senior_weight = v;
    }
    if let Some(v) = args.prev_week_threshold {
        weights.prev_week_threshold = v;
    }
    let result = brute_force_solve(&instance, &weights, args.limit).map_err(Failure::usage)?;

    let mut payload = Vec::new();
    let genes: Vec<String> = result.optimum.genes.iter().map(|g| g.to_string()).collect();
    writeln!(payload, "enumerated {} rosters", result.enumerated)?;
    writeln!(payload, "optimum fitness: {}", result.optimum_fitness)?;
    writeln!(payload, "optimum genes: {}", genes.join(" "))?;
    match &result.feasible_optimum {
        Some((chromosome, cost)) => {
            let genes: Vec<String> = chromosome.genes.iter().map(|g| g.to_string()).collect();
            writeln!(payload, "feasible optimum preference cost: {cost}")?;
            writeln!(payload, "feasible optimum genes: {}", genes.join(" "))?;
        }
        None => writeln!(payload, "no feasible roster exists")?,
    }
    writeln!(payload)?;
    write_schedule(&instance, &result.optimum, &weights, &mut payload)?;
    emit(None, &payload)?;
    Ok(ExitCode::SUCCESS)
}
