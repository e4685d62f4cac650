use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rtebd::runner::{
    apply_override, exit_code, parse_pairs, run_experiment, run_gamma_sweep, ExperimentConfig, SweepConfig,
};
use rtebd::{Error, Result};

#[derive(Parser)]
#[command(name = "rtebd", version, about = "Run TEBD / rTEBD experiments from key = value configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write a CSV time series plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace a config entry, e.g. `--override chi_max=32`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        measure_every: Option<usize>,
    },
    /// Run a (gamma, chi) grid and write the sweep table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &PathBuf, overrides: &[String], output: &Option<PathBuf>) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut pairs = parse_pairs(&text)?;
    for o in overrides {
        apply_override(&mut pairs, o)?;
    }
    if let Some(out) = output {
        apply_override(&mut pairs, &format!("output_path={}", out.display()))?;
    }
    Ok(pairs)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides, output, measure_every } => {
            let mut pairs = load(&config, &overrides, &output)?;
            if let Some(m) = measure_every {
                apply_override(&mut pairs, &format!("measure_every={m}"))?;
            }
            let cfg = ExperimentConfig::from_pairs(pairs)?;
            if cfg.output_path.is_none() {
                return Err(Error::Config("no output path (set output_path or pass --output)".into()));
            }
            let r = run_experiment(&cfg)?;
            eprintln!("{} rows, final bond dimension {}, {:.2} s", r.series.len(), r.final_max_bond_dim, r.wall_time_s);
        }
        Command::Sweep { config, overrides, output } => {
            let sweep = SweepConfig::from_pairs(load(&config, &overrides, &output)?)?;
            if sweep.base.output_path.is_none() {
                return Err(Error::Config("no output path (set output_path or pass --output)".into()));
            }
            let rows = run_gamma_sweep(&sweep)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            eprintln!("{} cells, {failed} failed", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
