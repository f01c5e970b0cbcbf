//! `offload`: solve single scenarios, run seeded sweeps, check assignments.
//!
//! Exit codes: 0 ok, 1 other error, 2 infeasible (or violations found),
//! 3 oracle budget exceeded, 4 malformed input.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use offload_core::experiment::{run_algorithm, run_sweep, Algorithm, RunOptions, SweepSpec};
use offload_core::matching::{adma_with, write_trace_jsonl, AdmaConfig};
use offload_core::model::validate_assignment;
use offload_core::oracle::{oracle_report, OracleBudget};
use offload_core::relaxation::{build_op1_lp, build_op3_lp, LpStatus};
use offload_core::scenario::{self, generate, GenParams, Metadata};
use offload_core::{Assignment, Error, RunReport, Scenario};

const EXIT_OTHER: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_SCHEMA: u8 = 4;

#[derive(Parser)]
#[command(name = "offload", version, about = "Task offloading solvers for multi-AP, multi-server edge systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and print the run report as JSON.
    Solve(SolveArgs),
    /// Run a sweep spec and write summary CSV.
    Sweep(SweepArgs),
    /// Check an assignment against a scenario's constraints.
    Validate(ValidateArgs),
    /// Generate a random scenario.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Cga,
    Mga,
    Fga,
    Adma,
    Elr,
    Flr,
    Oracle,
    /// Exhaustive search on the min-max objective.
    OracleOp2,
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario JSON file, or `-` for stdin.
    scenario: PathBuf,
    #[arg(long, value_enum)]
    algo: AlgoArg,
    /// Seeds FGA tie-breaks and ADMA delivery order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    zeta: f64,
    /// Overrides every user's fairness weight.
    #[arg(long)]
    eta: Option<f64>,
    /// Overrides the FGA priority constant.
    #[arg(long)]
    y: Option<f64>,
    /// Oracle search-space cap.
    #[arg(long, default_value_t = OracleBudget::default().max_paths)]
    budget: u64,
    /// Round in which each task starts proposing (ADMA), comma separated in task order.
    #[arg(long, value_delimiter = ',')]
    arrivals: Option<Vec<usize>>,
    /// Write the ADMA message trace here as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the relaxation in LP text format here (elr, flr).
    #[arg(long)]
    lp: Option<PathBuf>,
    /// Leave the assignment out of the report.
    #[arg(long)]
    no_assignment: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec JSON file.
    spec: PathBuf,
    /// Overrides the number of seeds per grid value.
    #[arg(long)]
    seeds: Option<usize>,
    /// Overrides the first seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    budget: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    scenario: PathBuf,
    /// Assignment JSON, or a run report containing one; `-` for stdin.
    assignment: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Small,
    Large,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = Preset::Small)]
    preset: Preset,
    /// Generator parameters JSON; replaces the preset.
    #[arg(long, conflicts_with = "preset")]
    params: Option<PathBuf>,
    /// Center of the task demand interval.
    #[arg(long, default_value_t = 4.0)]
    r_mean: f64,
    /// Tasks per user for the large preset.
    #[arg(long, default_value_t = 3)]
    tasks: usize,
    #[arg(long)]
    equal_r: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        io::stdin().read_to_string(&mut text)?;
    } else {
        text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(text)
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_scenario(path: &Path) -> anyhow::Result<Scenario> {
    let text = read_input(path)?;
    scenario::from_json_str(&text).with_context(|| format!("loading scenario {}", path.display()))
}

/// Runs the solver; the flag tells whether the instance turned out infeasible.
fn solve(args: &SolveArgs) -> anyhow::Result<(RunReport, bool)> {
    let mut s = load_scenario(&args.scenario)?;
    if let Some(eta) = args.eta {
        s = s.with_eta(eta)?;
    }
    let opts = RunOptions {
        mga_epsilon: args.epsilon,
        mga_zeta: args.zeta,
        fga_y: args.y,
        oracle_budget: OracleBudget::new(args.budget)?,
    };
    if let Some(lp_path) = &args.lp {
        let lp = match args.algo {
            AlgoArg::Elr => build_op1_lp(&s),
            AlgoArg::Flr => build_op3_lp(&s),
            _ => bail!("--lp applies to elr and flr only"),
        };
        fs::write(lp_path, lp.to_lp_format()).with_context(|| format!("writing {}", lp_path.display()))?;
    }
    let report = match args.algo {
        AlgoArg::Adma => {
            let cfg = AdmaConfig { seed: args.seed, arrivals: args.arrivals.clone(), record_trace: args.trace.is_some() };
            let out = adma_with(&s, &cfg);
            if let Some(path) = &args.trace {
                let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                write_trace_jsonl(&out.trace, BufWriter::new(f))?;
            }
            out.report.with_seed(args.seed)
        }
        AlgoArg::OracleOp2 => oracle_report(&s, opts.oracle_budget, true)?.with_seed(args.seed),
        other => {
            let algo = match other {
                AlgoArg::Cga => Algorithm::Cga,
                AlgoArg::Mga => Algorithm::Mga,
                AlgoArg::Fga => Algorithm::Fga,
                AlgoArg::Elr => Algorithm::Elr,
                AlgoArg::Flr => Algorithm::Flr,
                _ => Algorithm::Oracle,
            };
            run_algorithm(algo, &s, args.seed, &opts)?
        }
    };
    let infeasible = match args.algo {
        AlgoArg::Elr | AlgoArg::Flr => report.lp_status == Some(LpStatus::Infeasible),
        AlgoArg::Oracle | AlgoArg::OracleOp2 => report.objective.is_none(),
        _ => false,
    };
    let report = if args.no_assignment { report.without_assignment() } else { report };
    Ok((report, infeasible))
}

fn cmd_solve(args: SolveArgs) -> anyhow::Result<u8> {
    let (report, infeasible) = solve(&args)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    write_output(args.out.as_deref(), &text)?;
    if infeasible {
        eprintln!("instance is infeasible");
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(0)
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<u8> {
    let text = read_input(&args.spec)?;
    let mut spec: SweepSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing sweep spec {}", args.spec.display()))?;
    if let Some(n) = args.seeds {
        spec.seeds = n;
    }
    if let Some(s) = args.seed {
        spec.first_seed = s;
    }
    if let Some(e) = args.epsilon {
        spec.options.mga_epsilon = e;
    }
    if let Some(z) = args.zeta {
        spec.options.mga_zeta = z;
    }
    if let Some(b) = args.budget {
        spec.options.oracle_budget = OracleBudget::new(b)?;
    }
    let result = run_sweep(&spec)?;
    write_output(args.out.as_deref(), &result.to_csv())?;
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<u8> {
    let s = load_scenario(&args.scenario)?;
    let text = read_input(&args.assignment)?;
    let mut value: serde_json::Value = serde_json::from_str(&text).context("parsing assignment")?;
    if let Some(inner) = value.get_mut("assignment").map(serde_json::Value::take) {
        value = inner;
    }
    let assignment: Assignment = serde_json::from_value(value).context("parsing assignment")?;
    let violations = validate_assignment(&s, &assignment);
    let mut out = io::stdout().lock();
    for v in &violations {
        writeln!(out, "{v}")?;
    }
    if violations.is_empty() {
        writeln!(out, "ok: {} tasks, no violations", assignment.total_tasks())?;
        Ok(0)
    } else {
        writeln!(out, "{} violation(s)", violations.len())?;
        Ok(EXIT_INFEASIBLE)
    }
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<u8> {
    let mut params = match &args.params {
        Some(p) => serde_json::from_str(&read_input(p)?).context("parsing generator parameters")?,
        None => match args.preset {
            Preset::Small => GenParams::small_system(args.r_mean),
            Preset::Large => GenParams::large_system(args.r_mean, args.tasks),
        },
    };
    if args.equal_r {
        params.equal_r = true;
    }
    let s = generate(&params, args.seed)?;
    let text = scenario::to_json(&s, Some(&Metadata::new(&params, args.seed)))? + "\n";
    write_output(args.out.as_deref(), &text)?;
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::BudgetExceeded { .. } => EXIT_BUDGET,
                Error::InvalidScenario(_) | Error::Json(_) => EXIT_SCHEMA,
                _ => EXIT_OTHER,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_SCHEMA;
        }
    }
    EXIT_OTHER
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
