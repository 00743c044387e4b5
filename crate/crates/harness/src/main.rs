use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sfn_harness::aggregate::{aggregate_runs, write_aggregate};
use sfn_harness::config::load_config;
use sfn_harness::experiment::{
    accelerator_comparison, run_experiment, truncation_sweep, write_accel_report, AcceleratorSpec,
};
use sfn_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "sfn", about = "Saddle-free Newton series optimiser harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to a JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dot-path config overrides, e.g. `optimizer.lr=0.5`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<sfn_harness::RunConfig> {
        load_config(
            &self.config,
            self.seed,
            self.out.as_deref(),
            &self.overrides,
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one training experiment and write its logs.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Re-run the experiment across several series truncation lengths.
    SweepK {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated series lengths, e.g. `3,5,10`.
        #[arg(long = "k-list", value_name = "K,K,...")]
        k_list: String,
        /// Comma-separated seeds or an inclusive range `a..b`.
        #[arg(long, default_value = "0..9")]
        seeds: String,
    },
    /// Compare series accelerators against the exact dense update.
    CompareAccel {
        /// Problem dimensionality.
        #[arg(long, default_value_t = 100)]
        dim: usize,
        /// Number of series terms to compute.
        #[arg(long, default_value_t = 40)]
        terms: usize,
        /// Comma-separated accelerators: raw, sablonniere:N, wynn:N.
        #[arg(long, default_value = "raw,sablonniere:2,wynn:2")]
        accel: String,
        /// Number of random problems.
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        /// Base seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate summaries from several run directories.
    Aggregate {
        /// Run directories (each containing a summary.json).
        runs: Vec<PathBuf>,
        /// Where to write the aggregate report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bootstrap seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_list(text: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("bad range start '{a}'")))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("bad range end '{b}'")))?;
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad list entry '{s}'")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config } => {
            let cfg = config.load()?;
            let out = run_experiment(&cfg)?;
            println!(
                "run complete: {} steps in {} ms -> {}",
                out.summary.steps,
                out.summary.wall_ms,
                cfg.out_dir.display()
            );
            println!(
                "train {:.6e}  val {:.6e}  test {:.6e}",
                out.summary.final_losses.train,
                out.summary.final_losses.val,
                out.summary.final_losses.test
            );
        }
        Command::SweepK {
            config,
            k_list,
            seeds,
        } => {
            let cfg = config.load()?;
            let k_list: Vec<usize> = parse_list(&k_list)?.into_iter().map(|k| k as usize).collect();
            let seeds = parse_list(&seeds)?;
            let report = truncation_sweep(&cfg, &k_list, &seeds)?;
            for entry in &report.entries {
                println!(
                    "K = {:3}: median final train loss {:.6e} over {} seeds",
                    entry.terms,
                    entry.median_final_train,
                    entry.seeds.len()
                );
            }
        }
        Command::CompareAccel {
            dim,
            terms,
            accel,
            seeds,
            seed,
            out,
        } => {
            let accelerators = accel
                .split(',')
                .map(AcceleratorSpec::parse)
                .collect::<Result<Vec<_>>>()?;
            let report = accelerator_comparison(dim, terms, &accelerators, seeds, seed)?;
            write_accel_report(&out, &report)?;
            for (label, cosine) in &report.median_final_cosine {
                println!("{label}: median cosine {cosine:.4} at {terms} terms");
            }
        }
        Command::Aggregate { runs, out, seed } => {
            let report = aggregate_runs(&runs, seed)?;
            println!(
                "final train {:.6e} +- {:.1e} | final test {:.6e} +- {:.1e} ({} runs)",
                report.final_train.median,
                report.final_train.std_error,
                report.final_test.median,
                report.final_test.std_error,
                report.final_train.n
            );
            if let Some(path) = out {
                write_aggregate(&path, &report)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
