//! `noonsim`: runs one experiment from a TOML config and writes CSV results
//! plus `manifest.json` into the output directory.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical error, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use noon_core::config::{parse_config_as, ExperimentKind, LoadedConfig};
use noon_core::{output, ErrorClass};

#[derive(Parser)]
#[command(name = "noonsim", version, about = "Multimode N00N correlation simulator")]
struct Cli {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the configured permittivity map and dump its spectrum.
    Modes,
    /// One-dimensional phase sweep of the N-fold coincidence rate.
    PhaseSweep,
    /// Two-dimensional ghost-imaging scan with slit perturbations.
    GhostScan,
    /// Closed form versus Wick-contraction oracle on random inputs.
    OracleCheck,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Modes => ExperimentKind::Modes,
            Command::PhaseSweep => ExperimentKind::PhaseSweep,
            Command::GhostScan => ExperimentKind::GhostScan,
            Command::OracleCheck => ExperimentKind::OracleCheck,
        }
    }
}

fn load(cli: &Cli) -> anyhow::Result<LoadedConfig> {
    let kind = cli.command.kind();
    let Some(path) = &cli.config else {
        return Ok(LoadedConfig::defaults(kind)?);
    };
    parse_config_as(path, Some(kind)).with_context(|| format!("config {}", path.display()))
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let started = Instant::now();
    let loaded = load(cli)?;
    let parse_seconds = started.elapsed().as_secs_f64();
    let out = cli.out.clone().unwrap_or_else(|| loaded.resolve(&loaded.config.output_dir));
    let kind = loaded.config.experiment.as_str();
    let outcome = output::run(&loaded, &out, parse_seconds).with_context(|| format!("{kind} run"))?;
    for f in &outcome.manifest.outputs {
        log::info!("wrote {}", out.join(f).display());
    }
    if let Some(rep) = &outcome.oracle {
        println!("oracle max relative deviation {:e} (tolerance {:e})", rep.max_relative_deviation, rep.tolerance);
    }
    println!("{}", out.join("manifest.json").display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<noon_core::Error>() {
            return match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Io => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
