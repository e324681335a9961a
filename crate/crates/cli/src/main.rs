use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dp_ocp::config::{KeyValues, SyntheticSpec};
use dp_ocp::experiment::write_trace_file;
use dp_ocp::{gen_synthetic, run_experiment, sensitivity_probe, ExperimentConfig, HarnessError};
use dp_ocp_core::LearnerKind;

#[derive(Parser)]
#[command(name = "dp-ocp", version, about = "Differentially private online convex programming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic regression dataset.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write its trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Trace CSV; overrides the config's `output` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Worst normalised sensitivity over random neighbouring streams.
    Probe {
        #[arg(long)]
        algo: LearnerKind,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long = "T", default_value_t = 32)]
        horizon: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Gen { spec, seed, out } => {
            let spec = SyntheticSpec::from_keys(&KeyValues::read(&spec)?)?;
            gen_synthetic(&spec, seed)?.data.write_csv(&out)?;
        }
        Command::Run { config, out } => {
            let config = ExperimentConfig::read(&config)?;
            let out = out
                .or_else(|| config.output.clone())
                .ok_or_else(|| HarnessError::Validation("no output path: pass --out or set 'output'".into()))?;
            let result = run_experiment(&config)?;
            write_trace_file(&result.rows, &out)?;
            println!("{}", result.summary);
        }
        Command::Probe { algo, dim, horizon, trials, seed } => {
            if algo == LearnerKind::Qftl {
                return Err(HarnessError::Validation("probe supports igd, giga and ftl".into()));
            }
            let ratio = sensitivity_probe(algo, dim, horizon, trials, seed)?;
            println!("max_ratio={ratio:.9}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
