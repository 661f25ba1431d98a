use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tcosim::cli::{self, CliError, ReportKind};

#[derive(Parser)]
#[command(
    name = "tcosim",
    version,
    about = "Cloud site cost and operations simulator"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Run scenarios and write ledger, metrics, jobs, transfers and summary.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed (falls back to TCOSIM_SEED).
        #[arg(long)]
        seed: Option<u64>,
        /// Run several scenarios in parallel, each into OUT/<name>.
        #[arg(long)]
        sweep: bool,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Build a report (monthly, fractions, ratio, subscription) from a run directory.
    Report {
        run_dir: PathBuf,
        kind: String,
        /// Inclusive day window FIRST:LAST.
        #[arg(long)]
        window: Option<String>,
    },
    /// Monthly volume above which a circuit beats internet egress.
    Breakeven {
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
    },
}

fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Validate { scenario } => {
            cli::validate(&scenario)?;
            Ok(format!("{}: ok\n", scenario.display()))
        }
        Command::Run {
            scenarios,
            out,
            seed,
            sweep,
            workers,
        } => {
            if scenarios.len() > 1 && !sweep {
                return Err(CliError::Usage("several scenarios need --sweep".into()));
            }
            if !sweep {
                let s = cli::run(&scenarios[0], &out, seed)?;
                return Ok(format!(
                    "{} events completed, list price ${:.2}, written to {}\n",
                    s.events_completed,
                    s.list_total_usd,
                    out.display()
                ));
            }
            let mut text = String::new();
            let mut first_err = None;
            for (path, r) in cli::sweep(&scenarios, &out, seed, workers) {
                match r {
                    Ok(s) => {
                        text += &format!(
                            "{}: ok, list price ${:.2}\n",
                            path.display(),
                            s.list_total_usd
                        )
                    }
                    Err(e) => {
                        text += &format!("{}: {e}\n", path.display());
                        first_err.get_or_insert(e);
                    }
                }
            }
            match first_err {
                Some(e) => {
                    print!("{text}");
                    Err(e)
                }
                None => Ok(text),
            }
        }
        Command::Report {
            run_dir,
            kind,
            window,
        } => {
            let kind: ReportKind = kind.parse()?;
            let window = window.as_deref().map(cli::parse_window).transpose()?;
            cli::report(&run_dir, kind, window)
        }
        Command::Breakeven { catalog, ratio } => cli::breakeven(catalog.as_deref(), ratio),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::from(cli::EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
