//! `asr` — joint anycast path/server optimization experiments.
//!
//! Subcommands: `validate` a configuration, `solve` one assignment,
//! `simulate` a full run, `sensitivity` a perturbation sweep. Exit codes:
//! 0 success, 1 validation failure, 2 I/O or parse failure, 3 infeasible.

mod grid;
mod output;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use asr_core::config::{load_config, ConfigDocument, ConfigError};
use asr_core::optimizer::{sensitivity_sweep, solve_exact, solve_greedy, Assignment, SolveError};
use asr_core::posy::{perturb, GpInstance};
use asr_core::sim::{export_csv, parse_trace_csv, run, summarize, SimError, TraceEvent};

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "asr", version, about = "Application-specific anycast routing optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a configuration and check it against every invariant
    Validate {
        /// Configuration file (TOML)
        config: PathBuf,
    },
    /// Compute one joint path/server assignment
    Solve {
        config: PathBuf,
        /// Apply a named perturbation from the config's [perturbation.*]
        #[arg(long)]
        perturbation: Option<String>,
        /// Also write the assignment as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the tick simulator and export statistics
    Simulate {
        config: PathBuf,
        /// Trace CSV file(s) overriding the generators per target
        #[arg(long = "trace")]
        traces: Vec<PathBuf>,
        /// Override the config's RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Apply a named perturbation for the whole run
        #[arg(long)]
        perturbation: Option<String>,
        /// Directory for the CSV series and the summary
        #[arg(long, default_value = "asr-out")]
        out_dir: PathBuf,
    },
    /// Solve across a grid of constraint perturbations
    Sensitivity {
        config: PathBuf,
        /// Grid spec, e.g. "all=1.0; load+delay=1.0..0.8:5"
        #[arg(long)]
        grid: String,
        /// Write the sweep CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match &e {
            ConfigError::Io { .. } | ConfigError::Parse { .. } => EXIT_IO_PARSE,
            ConfigError::Invalid { .. } => EXIT_VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match &e {
            SolveError::Infeasible { .. } => EXIT_INFEASIBLE,
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match &e {
            SimError::TraceParse { .. } | SimError::BadTarget { .. } => EXIT_IO_PARSE,
            SimError::Solve(SolveError::Infeasible { .. }) => EXIT_INFEASIBLE,
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_IO_PARSE, e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASR_LOG", "error")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Solve {
            config,
            perturbation,
            out,
        } => cmd_solve(&config, perturbation.as_deref(), out.as_deref()),
        Command::Simulate {
            config,
            traces,
            seed,
            perturbation,
            out_dir,
        } => cmd_simulate(&config, &traces, seed, perturbation.as_deref(), &out_dir),
        Command::Sensitivity { config, grid, out } => {
            cmd_sensitivity(&config, &grid, out.as_deref())
        }
    }
}

fn cmd_validate(config: &Path) -> Result<(), Failure> {
    let doc = load_config(config)?;
    print!("ok: {doc}");
    Ok(())
}

/// Applies a named perturbation; `None` leaves the base program untouched.
fn perturbed_instance(doc: &ConfigDocument, name: Option<&str>) -> Result<GpInstance, Failure> {
    match name {
        None => Ok(doc.instance.clone()),
        Some(name) => {
            let u = doc.perturbation_vector(name).ok_or_else(|| {
                Failure::new(
                    EXIT_VALIDATION,
                    format!(
                        "no perturbation named `{name}` in the config (available: {})",
                        doc.perturbations
                            .keys()
                            .cloned()
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                )
            })?;
            Ok(perturb(&doc.instance, &u).map_err(SolveError::from)?)
        }
    }
}

fn solve_with_fallback(
    g: &GpInstance,
    doc: &ConfigDocument,
) -> Result<(Assignment, bool), SolveError> {
    match solve_exact(g, &doc.graph, &doc.users) {
        Ok(a) => Ok((a, true)),
        Err(SolveError::BudgetExceeded { required, budget }) => {
            log::info!("{required} assignments exceed budget {budget}; using greedy solver");
            Ok((solve_greedy(g, &doc.graph, &doc.users)?, false))
        }
        Err(e) => Err(e),
    }
}

fn cmd_solve(config: &Path, perturbation: Option<&str>, out: Option<&Path>) -> Result<(), Failure> {
    let doc = load_config(config)?;
    let g = perturbed_instance(&doc, perturbation)?;
    let (assignment, used_exact) = solve_with_fallback(&g, &doc)?;
    output::print_assignment(&doc, &assignment, used_exact);
    if let Some(path) = out {
        output::write_assignment_csv(path, &doc, &assignment)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_simulate(
    config: &Path,
    trace_files: &[PathBuf],
    seed: Option<u64>,
    perturbation: Option<&str>,
    out_dir: &Path,
) -> Result<(), Failure> {
    let mut doc = load_config(config)?;
    if let Some(seed) = seed {
        doc.sim.seed = seed;
    }
    let g = perturbed_instance(&doc, perturbation)?;

    let mut events: Vec<TraceEvent> = Vec::new();
    for path in trace_files {
        let file = File::open(path)
            .map_err(|e| Failure::new(EXIT_IO_PARSE, format!("{}: {e}", path.display())))?;
        let parsed = parse_trace_csv(file)
            .map_err(|e| Failure::new(EXIT_IO_PARSE, format!("{}: {e}", path.display())))?;
        events.extend(parsed);
    }
    events.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite trace times"));

    let stats = run(&doc.graph, &g, &doc.users, &doc.sim, &events)?;
    export_csv(&stats, out_dir)?;
    print!("{}", summarize(&stats));
    println!("wrote CSV series and summary to {}", out_dir.display());
    Ok(())
}

fn cmd_sensitivity(config: &Path, grid_spec: &str, out: Option<&Path>) -> Result<(), Failure> {
    let doc = load_config(config)?;
    let factors = grid::parse_grid(grid_spec)
        .map_err(|e| Failure::new(EXIT_VALIDATION, format!("bad --grid spec: {e}")))?;
    let u_grid: Vec<Vec<f64>> = factors
        .iter()
        .map(|f| doc.instance.family_perturbation(f))
        .collect();
    let report = sensitivity_sweep(&doc.instance, &doc.graph, &doc.users, &u_grid);
    let feasible = report.rows.iter().filter(|r| r.outcome.is_ok()).count();
    match out {
        Some(path) => {
            let file = File::create(path)?;
            output::write_sweep_csv(file, &doc, &factors, &report)?;
            println!(
                "{} rows ({} feasible); wrote {}",
                report.rows.len(),
                feasible,
                path.display()
            );
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            output::write_sweep_csv(&mut lock, &doc, &factors, &report)?;
            lock.flush()?;
        }
    }
    Ok(())
}
