//! Command-line driver: run a config file, run a built-in scenario, or
//! validate a config without running it.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on solver failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use bergfast_core::driver::run_scenario;
use bergfast_core::scenario::{builtin_scenario, ScenarioConfig, ScenarioName};
use bergfast_core::SimError;

#[derive(Parser)]
#[command(name = "bergfast", version, about = "Coupled iceberg / viscous-plastic sea-ice simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML config file.
    Run {
        /// Path to the scenario config (see docs/config.md).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the run.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in scenario: stability, refinement, radius, or dynamic.
    Scenario {
        name: String,
        /// Override the mesh resolution (m).
        #[arg(long)]
        resolution: Option<f64>,
        /// Override every iceberg radius (m).
        #[arg(long)]
        radius: Option<f64>,
        /// Override the simulated duration (s).
        #[arg(long)]
        duration: Option<f64>,
        /// Output directory for the run.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-flight checks on a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<ScenarioConfig, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml(&text)
}

fn execute(config: &ScenarioConfig, out: &PathBuf) -> Result<(), SimError> {
    let summary = run_scenario(config, out)?;
    let last = summary.records.last().expect("at least the initial record");
    println!(
        "completed {} steps to t = {:.0} s on a {}x{} mesh",
        summary.records.len() - 1,
        last.t,
        summary.mesh.n_cells_x(),
        summary.mesh.n_cells_y()
    );
    println!(
        "phi_cumulative = {:.6e}, bound_rhs = {:.6e}",
        last.phi_cumulative, last.bound_rhs
    );
    let grounded = summary.bergs.iter().filter(|b| b.grounded && !b.exited).count();
    let exited = summary.bergs.iter().filter(|b| b.exited).count();
    if !summary.bergs.is_empty() {
        println!(
            "icebergs: {} total, {} grounded, {} exited",
            summary.bergs.len(),
            grounded,
            exited
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result: Result<(), SimError> = match &cli.command {
        Command::Run { config, out } => load_config(config).and_then(|cfg| execute(&cfg, out)),
        Command::Scenario { name, resolution, radius, duration, out } => {
            ScenarioName::from_str(name).and_then(|scenario| {
                let mut cfg = builtin_scenario(scenario);
                if let Some(res) = resolution {
                    cfg.domain.resolution_m = *res;
                }
                if let Some(r) = radius {
                    for berg in &mut cfg.bergs {
                        berg.radius_m = *r;
                    }
                }
                if let Some(d) = duration {
                    cfg.time.duration_s = *d;
                }
                execute(&cfg, out)
            })
        }
        Command::Validate { config } => load_config(config).and_then(|cfg| {
            let warnings = cfg.validate()?;
            for w in &warnings {
                println!("warning: {w}");
            }
            println!("config ok: {} steps of dt = {} s", cfg.n_steps(), cfg.dt());
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ SimError::SolverFailure { .. }) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
