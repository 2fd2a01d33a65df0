use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prism_core::harness::{
    self, parse_config, run_experiment, sweep_sparsity, verify::verify, write_outputs, ConfigError, RunOutput,
};

#[derive(Parser)]
#[command(name = "prism", about = "Sparse-reward multi-objective RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one variant over the configured seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the configured seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured variant.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the baseline at several release probabilities.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "p-rel", value_delimiter = ',', required = true)]
        p_rel: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite and print a JSON report.
    Verify,
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("error[{}]: {e}", e.code());
    ExitCode::from(harness::EXIT_CONFIG_ERROR as u8)
}

fn run_failure(e: prism_core::PrismError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(harness::exit_code(&e) as u8)
}

fn finish(runs: &[RunOutput], out: &std::path::Path, save: bool) -> ExitCode {
    if let Err(e) = write_outputs(out, runs, save) {
        return run_failure(e);
    }
    for run in runs {
        for row in &run.rows {
            println!(
                "{} seed={} p_rel={} {}={}",
                row.variant, row.seed, row.p_rel, row.metric, row.value
            );
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            variant,
            out,
        } => {
            let mut cfg = match parse_config(&config) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(v) = variant {
                cfg.variant = match v.parse() {
                    Ok(v) => v,
                    Err(e) => return config_failure(e),
                };
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            if let Err(e) = cfg.validate() {
                return config_failure(e);
            }
            match run_experiment(&cfg) {
                Ok(run) => finish(&[run], &cfg.out_dir, cfg.save_artifacts),
                Err(e) => run_failure(e),
            }
        }
        Command::Sweep { config, p_rel, out } => {
            let mut cfg = match parse_config(&config) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            match sweep_sparsity(&cfg, &p_rel) {
                Ok(runs) => finish(&runs, &cfg.out_dir, cfg.save_artifacts),
                Err(e) => run_failure(e),
            }
        }
        Command::Verify => match verify() {
            Ok(report) => {
                println!("{}", report.to_json());
                if report.passed {
                    ExitCode::SUCCESS
                } else {
                    eprintln!("failed properties: {}", report.failed_ids().join(", "));
                    ExitCode::from(harness::EXIT_PROPERTY_FAILURE as u8)
                }
            }
            Err(e) => run_failure(e),
        },
    }
}
