use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use kgrl::baselines::Strategy;
use kgrl::env::Variant;
use kgrl::harness::{execute, rerun, Command, Config, RunManifest};

/// Knowledge-guided RL answer selection: data generation, training,
/// evaluation and reporting.
#[derive(Debug, Parser)]
#[command(name = "kgrl", version)]
struct Cli {
    /// Run seed; overrides `seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// TOML config; missing keys take their default values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run directory for outputs and manifest.json.
    #[arg(long, global = true, default_value = "kgrl-run")]
    out: PathBuf,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset into --out.
    GenData,
    /// Train one agent and evaluate it on the test split.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "RL-KG")]
        variant: Variant,
    },
    /// Evaluate one strategy on the test split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        strategy: Strategy,
        /// Required for RL strategies.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate RL-KG across KG-availability fractions.
    Sweep {
        #[arg(long)]
        data: PathBuf,
    },
    /// Train every RL variant and evaluate every strategy.
    Compare {
        #[arg(long)]
        data: PathBuf,
    },
    /// Re-execute a run from its manifest into --out.
    Rerun { manifest: PathBuf },
}

/// `None` for `rerun`, which takes its command from a manifest.
fn command(cmd: Cmd) -> Option<Command> {
    Some(match cmd {
        Cmd::Rerun { .. } => return None,
        Cmd::GenData => Command::GenData,
        Cmd::Train { data, variant } => Command::Train { data, variant },
        Cmd::Eval {
            data,
            strategy,
            checkpoint,
        } => Command::Eval {
            data,
            strategy,
            checkpoint,
        },
        Cmd::Sweep { data } => Command::Sweep { data },
        Cmd::Compare { data } => Command::Compare { data },
    })
}

fn run(cli: Cli) -> Result<()> {
    let manifest = match cli.command {
        Cmd::Rerun { manifest } => {
            let m = RunManifest::load(&manifest)
                .with_context(|| format!("reading {}", manifest.display()))?;
            rerun(&m, &cli.out)?
        }
        cmd => {
            let command = command(cmd).expect("rerun handled above");
            let mut config = match &cli.config {
                Some(path) => Config::load(path)
                    .with_context(|| format!("loading config {}", path.display()))?,
                None => Config::default(),
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            execute(&command, &config, &cli.out)?
        }
    };

    for row in manifest.summary.iter().filter(|r| r.field == "All") {
        println!(
            "{:<10} {:.4} ± {:.4}  (n={}, seeds={})",
            row.strategy.name(),
            row.mean_similarity,
            row.std_error,
            row.n,
            row.seeds
        );
    }
    if let Some(rho) = manifest.sweep_spearman {
        println!("spearman(kg availability, score) = {rho:.3}");
    }
    if manifest.skipped_episodes > 0 {
        eprintln!(
            "skipped {} episodes with no candidate answers",
            manifest.skipped_episodes
        );
    }
    println!("wrote {}", cli.out.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
