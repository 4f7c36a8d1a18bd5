use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qhd_cli::config::resolve_output;
use qhd_cli::lifting_options;
use qhd_cli::{analyze, artifacts, run, sweep, CliError, RunConfig, RunStatus};
use qhd_core::lifting::PhaseMatching;
use qhd_core::{Execution, GammaLaw};

#[derive(Parser)]
#[command(name = "qhd", version, about = "1D quantum hydrodynamics runs and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and write its artifacts.
    Run { config: PathBuf },
    /// Run every *.toml in a directory.
    Sweep {
        config_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Where to write the sweep summary (relative paths honour QHD_OUTPUT_ROOT).
        #[arg(long, default_value = "sweep_summary.json")]
        summary: PathBuf,
    },
    /// Lift a hydrodynamic CSV (x, sqrt_rho, Lambda[, dx_sqrt_rho]) to a wave function.
    Lift {
        hydro_csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = qhd_core::polar::DEFAULT_TAU_REL)]
        tau_rel: f64,
        /// Keep theta = 0 on every component instead of matching phases.
        #[arg(long)]
        naive: bool,
    },
    /// Recompute diagnostics from the fields files of a run directory.
    Analyze { run_dir: PathBuf },
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let a = run(&cfg, Execution::default_mode())?;
            println!("{}", a.dir.display());
            Ok(match a.status {
                RunStatus::Ok => 0,
                RunStatus::Aborted => {
                    if let Some(e) = &a.summary.error {
                        eprintln!("error: {}", e.message);
                    }
                    3
                }
            })
        }
        Command::Sweep {
            config_dir,
            workers,
            summary,
        } => {
            let configs = sweep::load_dir(&config_dir)?;
            let s = sweep::sweep(&configs, workers)?;
            let path = resolve_output(&summary);
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            artifacts::write_json(&path, &s)?;
            for f in &s.failures {
                eprintln!("failed: {}", f.display());
            }
            println!("{} runs, {} failures", s.runs.len(), s.failures.len());
            Ok(s.exit_code())
        }
        Command::Lift {
            hydro_csv,
            out,
            gamma,
            delta,
            tau_rel,
            naive,
        } => {
            let law = GammaLaw::new(gamma)?;
            let matching = if naive {
                PhaseMatching::Naive
            } else {
                PhaseMatching::Aligned
            };
            let opts = lifting_options(delta, tau_rel, matching)?;
            let report = qhd_cli::lift::lift_file(&hydro_csv, &out, law, &opts)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(0)
        }
        Command::Analyze { run_dir } => {
            analyze::analyze(&run_dir, Execution::default_mode())?;
            println!("{}", run_dir.join(analyze::REANALYSIS_DIR).display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
