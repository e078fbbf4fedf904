use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use nbrw_core::run::{run, Experiment, RunConfig};
use nbrw_core::Error;

/// Batch experiments for branching random walks with selection.
#[derive(Parser)]
#[command(name = "nbrw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate a raw law to the boundary case, or report the boundary moments of a named one.
    Calibrate(Common),
    /// Run the identity and bound checks; exits 1 if any check fails.
    Verify(Common),
    /// Speed of the N-BRW over a grid of population sizes.
    SpeedSweep(Common),
    /// Survival probability below a linear barrier on a (theta, n) grid.
    RhoScaling(Common),
    /// Small-deviation corridor probabilities against the predicted rate.
    Corridor(Common),
    /// Deterministic speed and survival predictions from a scaling bundle.
    Predict(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn load(experiment: Experiment, common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
            let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
            if cfg.experiment != experiment {
                return Err(Error::ConfigInvalid(format!(
                    "experiment: config is for '{}' but the subcommand is '{}'",
                    cfg.experiment.name(),
                    experiment.name()
                )));
            }
            cfg
        }
        None => serde_json::from_value(serde_json::json!({ "experiment": experiment }))
            .expect("minimal config parses"),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match &cli.command {
        Command::Calibrate(c) => (Experiment::Calibrate, c),
        Command::Verify(c) => (Experiment::Verify, c),
        Command::SpeedSweep(c) => (Experiment::SpeedSweep, c),
        Command::RhoScaling(c) => (Experiment::RhoScaling, c),
        Command::Corridor(c) => (Experiment::Corridor, c),
        Command::Predict(c) => (Experiment::Predict, c),
    };
    if let Some(k) = common.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().expect("pool built once");
    }
    let result = load(experiment, common).and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("checks failed: {}", outcome.summary["failed"]);
                ExitCode::from(1)
            }
        }
        Err(e @ Error::ConfigInvalid(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
