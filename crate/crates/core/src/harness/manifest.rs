//! Run directories. Every command writes its outputs plus `config.toml` and
//! `manifest.json`; the manifest alone is enough to run it again.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::Strategy;
use crate::dqn::{load_for_variant, save_checkpoint, write_log_csv};
use crate::env::Variant;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::synth::generate_dataset;

use super::config::Config;
use super::data::{dataset_ref, DatasetRef, LoadedData};
use super::experiment::{compare, evaluate, run_sweep, train_variant, SweepMask};
use super::report::{self, summarize, SummaryRow};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const RESULTS: &str = "results.csv";
pub const SUMMARY: &str = "summary.csv";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const TRAINING_LOG: &str = "training_log.csv";
pub const SWEEP: &str = "sweep.csv";
pub const SWEEP_PLOT: &str = "sweep_plot.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    GenData,
    Train {
        data: PathBuf,
        variant: Variant,
    },
    Eval {
        data: PathBuf,
        strategy: Strategy,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checkpoint: Option<PathBuf>,
    },
    Sweep {
        data: PathBuf,
    },
    Compare {
        data: PathBuf,
    },
}

impl Command {
    pub fn data(&self) -> Option<&Path> {
        match self {
            Command::GenData => None,
            Command::Train { data, .. }
            | Command::Eval { data, .. }
            | Command::Sweep { data }
            | Command::Compare { data } => Some(data),
        }
    }

    /// Same command with its paths made absolute, so the manifest can be
    /// replayed from any working directory.
    fn absolute(&self) -> Result<Command> {
        let abs = |p: &Path| std::fs::canonicalize(p).map_err(|e| Error::io(p, e));
        Ok(match self {
            Command::GenData => Command::GenData,
            Command::Train { data, variant } => Command::Train {
                data: abs(data)?,
                variant: *variant,
            },
            Command::Eval {
                data,
                strategy,
                checkpoint,
            } => Command::Eval {
                data: abs(data)?,
                strategy: *strategy,
                checkpoint: checkpoint.as_deref().map(abs).transpose()?,
            },
            Command::Sweep { data } => Command::Sweep { data: abs(data)? },
            Command::Compare { data } => Command::Compare { data: abs(data)? },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    #[serde(flatten)]
    pub command: Command,
    pub seed: u64,
    pub config: Config,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetRef>,
    /// Files written to the run directory, relative to it.
    pub outputs: Vec<String>,
    #[serde(default)]
    pub summary: Vec<SummaryRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep_masks: Vec<SweepMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_spearman: Option<f64>,
    #[serde(default)]
    pub skipped_episodes: usize,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn code_version() -> String {
    format!("kgrl {}", env!("CARGO_PKG_VERSION"))
}

struct RunDir<'a> {
    root: &'a Path,
    outputs: Vec<String>,
}

impl RunDir<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(name.to_string());
        Ok(path)
    }
}

fn checkpoint_name(variant: Variant, seed: u64) -> String {
    format!("checkpoints/{}-seed{seed}.bin", variant.name())
}

fn log_name(variant: Variant, seed: u64) -> String {
    format!("logs/{}-seed{seed}.csv", variant.name())
}

/// Runs `command` with `config` (whose `seed` is the run seed), writing
/// everything into `out`.
pub fn execute(command: &Command, config: &Config, out: &Path) -> Result<RunManifest> {
    config.validate()?;
    let command = command.absolute()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut dir = RunDir {
        root: out,
        outputs: Vec::new(),
    };
    let mut manifest = RunManifest {
        code_version: code_version(),
        command: command.clone(),
        seed: config.seed,
        config: config.clone(),
        dataset: None,
        outputs: Vec::new(),
        summary: Vec::new(),
        sweep_masks: Vec::new(),
        sweep_spearman: None,
        skipped_episodes: 0,
    };

    let load = |data: &Path| LoadedData::load(data, config.max_answers);
    match &command {
        Command::GenData => {
            let ds = generate_dataset(&config.dataset_spec()?, &config.noise(), config.seed)?;
            ds.write(out)?;
            for name in [
                crate::synth::TRAIN_FILE,
                crate::synth::TEST_FILE,
                crate::synth::KG_FILE,
                crate::synth::CATEGORY_FILE,
                crate::synth::MANIFEST_FILE,
            ] {
                dir.outputs.push(name.to_string());
            }
            // the dataset is the run directory itself
            let mut reference = dataset_ref(out)?;
            reference.path = PathBuf::from(".");
            manifest.dataset = Some(reference);
        }
        Command::Train { data, variant } => {
            let data = load(data)?;
            let trained = train_variant(config, *variant, config.seed, &data.train)?;
            let ckpt = dir.root.join(CHECKPOINT);
            save_checkpoint(&trained.network, *variant, &ckpt)?;
            dir.outputs.push(CHECKPOINT.to_string());
            let mut log = Vec::new();
            write_log_csv(&trained.log, &mut log)?;
            dir.write(TRAINING_LOG, &log)?;
            let ev = evaluate(
                Strategy::Rl(*variant),
                &data.test,
                Some(&trained.network),
                config.seed,
            )?;
            dir.write(RESULTS, &report::to_csv(&ev.rows)?)?;
            manifest.summary = summarize(&ev.rows);
            manifest.skipped_episodes = ev.skipped;
            manifest.dataset = data.reference;
        }
        Command::Eval {
            data,
            strategy,
            checkpoint,
        } => {
            let network = match (strategy.variant(), checkpoint) {
                (Some(v), Some(path)) => Some(load_for_variant(path, v)?),
                (Some(_), None) => {
                    return Err(Error::usage(format!("{strategy} needs --checkpoint")));
                }
                (None, _) => None,
            };
            let data = load(data)?;
            let ev = evaluate(*strategy, &data.test, network.as_ref(), config.seed)?;
            dir.write(RESULTS, &report::to_csv(&ev.rows)?)?;
            manifest.summary = summarize(&ev.rows);
            manifest.skipped_episodes = ev.skipped;
            manifest.dataset = data.reference;
        }
        Command::Sweep { data } => {
            let data = load(data)?;
            let sweep = run_sweep(
                config,
                &config.sweep_fractions,
                &config.seed_list(),
                &data.train,
                &data.test,
            )?;
            dir.write(SWEEP, &report::to_csv(&sweep.rows)?)?;
            dir.write(SWEEP_PLOT, &report::to_csv(&sweep.plot_points())?)?;
            manifest.sweep_spearman = sweep.spearman();
            manifest.sweep_masks = sweep.masks;
            manifest.dataset = data.reference;
        }
        Command::Compare { data } => {
            let data = load(data)?;
            let cmp = compare(config, &data.train, &data.test)?;
            for cell in &cmp.trained {
                let name = checkpoint_name(cell.variant, cell.seed);
                save_checkpoint(&cell.network, cell.variant, &dir.root.join(&name))?;
                dir.outputs.push(name);
                let mut log = Vec::new();
                write_log_csv(&cell.log, &mut log)?;
                dir.write(&log_name(cell.variant, cell.seed), &log)?;
            }
            dir.write(RESULTS, &report::to_csv(&cmp.rows)?)?;
            dir.write(SUMMARY, &report::to_csv(&cmp.summary)?)?;
            manifest.summary = cmp.summary;
            manifest.skipped_episodes = cmp.skipped;
            manifest.dataset = data.reference;
        }
    }

    dir.write(CONFIG_SNAPSHOT, config.to_toml()?.as_bytes())?;
    dir.outputs.push(MANIFEST.to_string());
    manifest.outputs = dir.outputs;
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_atomic(&out.join(MANIFEST), json.as_bytes())?;
    Ok(manifest)
}

/// Replays the run recorded in `manifest` into `out`. Refuses if the input
/// data no longer matches its recorded fingerprint.
pub fn rerun(manifest: &RunManifest, out: &Path) -> Result<RunManifest> {
    if let (Some(data), Some(recorded)) = (manifest.command.data(), &manifest.dataset) {
        let now = dataset_ref(data)?;
        if now.fingerprint != recorded.fingerprint {
            return Err(Error::usage(format!(
                "dataset at {} changed since the run (fingerprint {} != {})",
                data.display(),
                now.fingerprint,
                recorded.fingerprint
            )));
        }
    }
    let config = Config {
        seed: manifest.seed,
        ..manifest.config.clone()
    };
    execute(&manifest.command, &config, out)
}
