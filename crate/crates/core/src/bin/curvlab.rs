//! `curvlab run <scenario.toml> --out <dir>` and `curvlab list`.
//!
//! Exit codes: 0 when every assertion passes, 1 on an assertion failure or
//! i/o error, 2 on a configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use curvlab::scenario::{list_builtins, Overrides, Scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "curvlab", version, about = "Distances and curvature of singular conformal metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write `<kind>.csv` and `<kind>.json`.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Neighbour stencil: 8, 16 or 32.
        #[arg(long)]
        stencil: Option<usize>,
        /// Lattice cells per unit length (h = 1/N).
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, env = "CURVLAB_THREADS")]
        threads: Option<usize>,
    },
    /// Print the builtin metric catalog.
    List,
}

fn run(scenario: PathBuf, out: PathBuf, overrides: Overrides, threads: Option<usize>) -> Result<bool, ScenarioError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| curvlab::scenario::ConfigError::new("--threads", e))?;
    }
    let sc = Scenario::load(&scenario)?;
    let outcome = sc.run(&overrides)?;
    outcome.write(&out)?;
    for a in &outcome.report.assertions {
        println!("{} {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    Ok(outcome.report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", list_builtins());
            ExitCode::SUCCESS
        }
        Command::Run { scenario, out, stencil, grid, threads } => {
            let label = scenario.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            match run(scenario, out, Overrides { grid, stencil }, threads) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err(e) => {
                    let code = e.exit_code() as u8;
                    eprintln!("error: {:#}", anyhow::Error::new(e).context(format!("scenario {label}")));
                    ExitCode::from(code)
                }
            }
        }
    }
}
