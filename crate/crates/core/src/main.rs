use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ac_thermo::driver::{RunStatus, SystemState};
use ac_thermo::driver_io::{execute, summarize_run, write_snapshot, LoadedConfig, RunOutcome};
use ac_thermo::initial_data::validate;
use ac_thermo::Error;

#[derive(Parser)]
#[command(name = "ac-thermo", version, about = "Temperature-dependent Allen-Cahn simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the initial data, run to the horizon and write snapshots.
    Run { config: PathBuf },
    /// Check the configured initial data and print one line per condition.
    Validate { config: PathBuf },
    /// Write the configured initial triple to `<output.dir>/init.csv`.
    MakeInit { config: PathBuf },
    /// Print invariant and residual summaries of a finished run.
    Report { rundir: PathBuf },
}

const EXIT_REJECTED: u8 = 2;
const EXIT_UNDERFLOW: u8 = 3;

fn run(config: PathBuf) -> Result<ExitCode, Error> {
    let loaded = LoadedConfig::load(&config)?;
    match execute(&loaded)? {
        RunOutcome::Rejected(report) => {
            eprintln!("{report}");
            eprintln!("initial data rejected: {}", report.failed().join(", "));
            Ok(ExitCode::from(EXIT_REJECTED))
        }
        RunOutcome::Finished(result, manifest) => {
            let dir = loaded.output_dir();
            println!("status {}", manifest.status);
            println!("final time {:.6} after {} windows", manifest.final_time, manifest.windows.len());
            println!("{} snapshots in {}", manifest.snapshots.len(), dir.display());
            if result.status == RunStatus::WindowUnderflow {
                let err = Error::WindowUnderflow {
                    window: manifest.shrink_events.last().map_or(0.0, |e| e.steps as f64) * loaded.config.driver.dt,
                    limit: 16.0 * loaded.config.driver.dt,
                };
                eprintln!("{err}");
                return Ok(ExitCode::from(EXIT_UNDERFLOW));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn validate_cmd(config: PathBuf) -> Result<ExitCode, Error> {
    let loaded = LoadedConfig::load(&config)?;
    let params = loaded.config.params()?;
    let report = validate(&loaded.initial_triple(&params)?, &params);
    println!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_REJECTED)
    })
}

fn make_init(config: PathBuf) -> Result<ExitCode, Error> {
    let loaded = LoadedConfig::load(&config)?;
    let params = loaded.config.params()?;
    let triple = loaded.initial_triple(&params)?;
    let dir = loaded.output_dir();
    fs::create_dir_all(&dir)?;
    let path = dir.join("init.csv");
    write_snapshot(&path, &SystemState::from_initial(&triple), &params)?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn report(rundir: PathBuf) -> Result<ExitCode, Error> {
    let (manifest, snaps) = summarize_run(&rundir)?;
    println!("status {} version {} config {}", manifest.status, manifest.version, manifest.config_hash);
    for (i, w) in manifest.windows.iter().enumerate() {
        println!(
            "window {i}: t0 {:.6} T {:.6} outer {} residual {:.3e} eps0 {:.3e} min margin {:.3e} max|dtheta| {:.3e} bound {:.3e} shrinks {}",
            w.t_start, w.length, w.outer_iters, w.theta_residual, w.eps0, w.min_margin, w.max_dt_theta, w.rate_bound, w.shrinks
        );
    }
    println!("max neglected term {:.3e}", manifest.max_neglected_term);
    println!("snapshot rho_min rho_max xi_min theta_min theta_max residual branch_gap upper_excess margin_min");
    for s in &snaps {
        println!(
            "{} {:.6e} {:.6e} {:.6e} {:.6e} {:.6e} {:.3e} {:.3e} {:.3e} {:.6e}",
            s.name,
            s.min_rho,
            s.max_rho,
            s.min_xi,
            s.min_theta,
            s.max_theta,
            s.max_residual,
            s.min_branch_gap,
            s.max_upper_excess,
            s.min_margin
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run(config),
        Command::Validate { config } => validate_cmd(config),
        Command::MakeInit { config } => make_init(config),
        Command::Report { rundir } => report(rundir),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
