use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pex_core::experiment::{
    load_config, run_experiment, sweep_lowerbound, sweep_to_string, write_outcome, write_sweep,
    SweepSpec,
};
use pex_core::presets::all_presets;
use pex_core::PexError;

#[derive(Parser, Debug)]
#[command(name = "pex", version, about = "Pure exploration under unknown linear constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every (algorithm, seed) pair of a config and write CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Characteristic time along a grid of one arm's mean.
    SweepLb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        arm: usize,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        steps: usize,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the embedded environments.
    Presets,
}

fn execute(cli: Cli) -> Result<(), PexError> {
    match cli.command {
        Command::Run {
            config,
            out,
            parallel,
        } => {
            if parallel == Some(0) {
                return Err(PexError::config("parallel", "must be at least 1"));
            }
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            let outcome = run_experiment(&cfg, parallel)?;
            for path in write_outcome(&outcome, &dir)? {
                eprintln!("wrote {}", path.display());
            }
            println!(
                "{:<10} {:>6} {:>12} {:>12} {:>12} {:>8} {:>8}",
                "algorithm", "seeds", "median_tau", "std_tau", "violation", "error", "censored"
            );
            for s in &outcome.summaries {
                println!(
                    "{:<10} {:>6} {:>12.1} {:>12.1} {:>12.4} {:>8.3} {:>8}",
                    s.algorithm.name(),
                    s.n_seeds,
                    s.median_tau,
                    s.std_tau,
                    s.mean_violation,
                    s.error_rate,
                    s.censored
                );
            }
            Ok(())
        }
        Command::SweepLb {
            config,
            arm,
            lo,
            hi,
            steps,
            out,
        } => {
            let cfg = load_config(&config)?;
            let rows = sweep_lowerbound(&cfg, SweepSpec { arm, lo, hi, steps })?;
            match out {
                Some(path) => {
                    write_sweep(&rows, &path)?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{}", sweep_to_string(&rows)?),
            }
            Ok(())
        }
        Command::Presets => {
            for p in all_presets() {
                println!(
                    "{:<12} K={:<3} delta={:<5} {}",
                    p.name,
                    p.environment.means.len(),
                    p.delta,
                    p.description
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
