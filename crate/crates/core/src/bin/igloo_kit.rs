//! Command-line front end. All real work lives in `igloo_kit::cli`; this
//! file only parses arguments, routes them, and honors the exit-code
//! contract: 0 every check passed, 1 some check failed, 2 usage or
//! configuration error, 3 a search budget ran out first.

use clap::{Parser, Subcommand};
use igloo_kit::cli::{commands, ConfigError, Report, EXIT_CONFIG};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "igloo-kit",
    version,
    about = "Layered protocol toolkit: refinement, composition, I/O specifications, monitors, simulation",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check both refinement steps of a scenario's layer chain
    CheckRefinement {
        /// Builtin scenario name or path to a scenario file
        #[arg(long)]
        scenario: String,
        /// Exploration depth (concrete steps)
        #[arg(long, default_value_t = 5)]
        depth: usize,
        /// Cap on explored state pairs per step
        #[arg(long)]
        budget: Option<usize>,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check parallel composition against trace-set composition on random systems
    CheckComposition {
        /// Trace depth per trial
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Base seed; trial k uses seed + k
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random trials
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check guarded components against their process translations on random instances
    CheckTheorem3 {
        /// Trace depth per trial
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Base seed; trial k uses seed + k
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random trials
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check processes against their canonical heap models
    CheckTheorem4 {
        /// "random" for a seeded batch, or a named process: example8
        #[arg(long, default_value = "random")]
        process: String,
        /// Trace depth
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Base seed for the random batch
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random trials
        #[arg(long, default_value_t = 50)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate bounded trace sets of a scenario's models
    Enumerate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Cap on sample traces included in the report
        #[arg(long, default_value_t = 20)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a monitored, seeded simulation and validate its log
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scheduler steps before the run stops
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        /// Record monitor denials and keep running instead of stopping
        #[arg(long)]
        audit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a previously recorded log against the scenario's models
    Replay {
        #[arg(long)]
        scenario: String,
        /// Path to a simulate report (or bare trace log) to validate
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print one unfolding of a component's I/O specification predicate
    DumpIospec {
        #[arg(long)]
        scenario: String,
        /// Component name, e.g. node:2, srv:1, cli:1, or an agent name
        #[arg(long)]
        component: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cmd: Command) -> Result<(Report, Option<PathBuf>), ConfigError> {
    match cmd {
        Command::CheckRefinement {
            scenario,
            depth,
            budget,
            out,
        } => Ok((commands::check_refinement_cmd(&scenario, depth, budget)?, out)),
        Command::CheckComposition {
            depth,
            seed,
            budget,
            out,
        } => Ok((commands::check_composition_cmd(budget, seed, depth), out)),
        Command::CheckTheorem3 {
            depth,
            seed,
            budget,
            out,
        } => Ok((commands::check_theorem3_cmd(budget, seed, depth), out)),
        Command::CheckTheorem4 {
            process,
            depth,
            seed,
            budget,
            out,
        } => Ok((
            commands::check_theorem4_cmd(&process, budget, seed, depth)?,
            out,
        )),
        Command::Enumerate {
            scenario,
            depth,
            budget,
            out,
        } => Ok((commands::enumerate_cmd(&scenario, depth, budget)?, out)),
        Command::Simulate {
            scenario,
            seed,
            steps,
            audit,
            out,
        } => Ok((commands::simulate_cmd(&scenario, seed, steps, audit)?, out)),
        Command::Replay { scenario, log, out } => {
            let text = std::fs::read_to_string(&log)
                .map_err(|e| ConfigError(format!("replay: cannot read {}: {e}", log.display())))?;
            Ok((commands::replay_cmd(&scenario, &text)?, out))
        }
        Command::DumpIospec {
            scenario,
            component,
            out,
        } => Ok((
            commands::dump_iospec_cmd(&scenario, component.as_deref())?,
            out,
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok((report, out)) => {
            // Rendered text payloads are the point of their command; show
            // them before the summary.
            if let Some(text) = report.data.get("text").and_then(|t| t.as_str()) {
                print!("{text}");
                println!();
            }
            print!("{}", report.human_summary());
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, report.to_json()) {
                        eprintln!("cannot write {}: {e}", path.display());
                        return ExitCode::from(EXIT_CONFIG as u8);
                    }
                }
                None => print!("{}", report.to_json()),
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
