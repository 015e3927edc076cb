//! Training, evaluation, the all-strategy comparison and the KG-availability
//! sweep. Independent cells (variant × seed, fraction × seed) run through
//! [`parallel::try_map`]; each training run is itself sequential.

use serde::{Deserialize, Serialize};

use crate::baselines::{episode_seed, run_strategy, Strategy};
use crate::dqn::{train, EpochLog, QNetwork, Trained};
use crate::env::{PreparedEpisode, Variant};
use crate::error::{Error, Result};
use crate::parallel;
use crate::synth::apply_kg_availability;

use super::config::Config;
use super::report::{self, score, sort_rows, Evaluation, ResultRow, SummaryRow};

pub fn train_variant(
    config: &Config,
    variant: Variant,
    seed: u64,
    episodes: &[PreparedEpisode],
) -> Result<Trained> {
    train(&config.train_config(seed)?, variant, episodes)
}

/// Scores one strategy on `episodes`. RL strategies need `network`.
pub fn evaluate(
    strategy: Strategy,
    episodes: &[PreparedEpisode],
    network: Option<&QNetwork>,
    seed: u64,
) -> Result<Evaluation> {
    if strategy.variant().is_some() && network.is_none() {
        return Err(Error::usage(format!("{strategy} needs a checkpoint")));
    }
    let rollouts = run_strategy(strategy, episodes, network, seed)?;
    score(strategy, episodes, &rollouts, seed)
}

#[derive(Debug, Clone)]
pub struct TrainedCell {
    pub variant: Variant,
    pub seed: u64,
    pub network: QNetwork,
    pub log: Vec<EpochLog>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    /// Every strategy × seed × field, in report order.
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    /// Ordered by seed, then variant.
    pub trained: Vec<TrainedCell>,
    pub skipped: usize,
}

/// Trains all four variants for every seed and evaluates all strategies on
/// the test split.
pub fn compare(
    config: &Config,
    train_set: &[PreparedEpisode],
    test_set: &[PreparedEpisode],
) -> Result<Comparison> {
    let cells: Vec<(u64, Variant)> = config
        .seed_list()
        .into_iter()
        .flat_map(|s| Variant::ALL.into_iter().map(move |v| (s, v)))
        .collect();
    let trained = parallel::try_map(&cells, |&(seed, variant)| {
        let t = train_variant(config, variant, seed, train_set)?;
        Ok::<_, Error>(TrainedCell {
            variant,
            seed,
            network: t.network,
            log: t.log,
        })
    })?;

    let mut rows = Vec::new();
    let mut skipped = 0;
    for seed in config.seed_list() {
        for strategy in Strategy::ALL {
            let net = strategy.variant().map(|v| {
                &trained
                    .iter()
                    .find(|c| c.seed == seed && c.variant == v)
                    .expect("every variant trained")
                    .network
            });
            let ev = evaluate(strategy, test_set, net, seed)?;
            skipped = ev.skipped;
            rows.extend(ev.rows);
        }
    }
    sort_rows(&mut rows);
    let summary = report::summarize(&rows);
    Ok(Comparison {
        rows,
        summary,
        trained,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub seed: u64,
    pub mean_similarity: f64,
}

/// One line of the plot-ready long table: a series value at one KG
/// availability level, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub series: String,
    pub fraction: f64,
    pub kg_availability: f64,
    pub mean_similarity: f64,
    pub std_error: f64,
    pub seeds: usize,
}

/// Episodes whose reference sets were emptied in one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMask {
    pub fraction: f64,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// RL-NK on the unmasked data, one entry per seed.
    pub reference: Vec<SweepRow>,
    pub masks: Vec<SweepMask>,
}

impl Sweep {
    pub fn fractions(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.fraction) {
                out.push(r.fraction);
            }
        }
        out
    }

    fn cell_scores(&self, fraction: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.fraction == fraction)
            .map(|r| r.mean_similarity)
            .collect()
    }

    pub fn plot_points(&self) -> Vec<PlotPoint> {
        let refs: Vec<f64> = self.reference.iter().map(|r| r.mean_similarity).collect();
        let mut out = Vec::new();
        for f in self.fractions() {
            let xs = self.cell_scores(f);
            out.push(PlotPoint {
                series: Variant::Kg.name().to_string(),
                fraction: f,
                kg_availability: availability(f),
                mean_similarity: report::mean(&xs),
                std_error: report::std_error(&xs),
                seeds: xs.len(),
            });
        }
        if !refs.is_empty() {
            for f in self.fractions() {
                out.push(PlotPoint {
                    series: Variant::NoKg.name().to_string(),
                    fraction: f,
                    kg_availability: availability(f),
                    mean_similarity: report::mean(&refs),
                    std_error: report::std_error(&refs),
                    seeds: refs.len(),
                });
            }
        }
        out
    }

    /// Rank correlation between KG availability and the seed-mean score.
    pub fn spearman(&self) -> Option<f64> {
        let fractions = self.fractions();
        let availability: Vec<f64> = fractions.iter().map(|&f| availability(f)).collect();
        let means: Vec<f64> = fractions
            .iter()
            .map(|&f| report::mean(&self.cell_scores(f)))
            .collect();
        report::spearman(&availability, &means)
    }
}

/// `1 - fraction`, rounded so 0.3 reads as 0.7 rather than 0.7000000000000001.
pub fn availability(fraction: f64) -> f64 {
    ((1.0 - fraction) * 1e12).round() / 1e12
}

const TRAIN_MASK_SALT: u64 = 0x5452_4149_4E00_0000;
const TEST_MASK_SALT: u64 = 0x5445_5354_0000_0000;

/// Seed for the availability mask of one sweep cell and split. Subsets are
/// drawn afresh for every seed and fraction.
pub fn mask_seed(seed: u64, fraction_index: usize, test: bool) -> u64 {
    let salt = if test {
        TEST_MASK_SALT
    } else {
        TRAIN_MASK_SALT
    };
    episode_seed(seed ^ salt, fraction_index)
}

/// Trains and evaluates RL-KG with a `fraction` of reference sets emptied in
/// both splits, for every fraction and seed, plus an RL-NK reference per
/// seed on the unmasked data.
pub fn run_sweep(
    config: &Config,
    fractions: &[f64],
    seeds: &[u64],
    train_set: &[PreparedEpisode],
    test_set: &[PreparedEpisode],
) -> Result<Sweep> {
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::usage(format!("sweep fraction {f} outside [0, 1]")));
    }
    if fractions.is_empty() || seeds.is_empty() {
        return Err(Error::usage(
            "sweep needs at least one fraction and one seed",
        ));
    }

    // None marks the RL-NK reference cell
    let mut cells: Vec<(Option<usize>, u64)> = Vec::new();
    for fi in 0..fractions.len() {
        cells.extend(seeds.iter().map(|&s| (Some(fi), s)));
    }
    cells.extend(seeds.iter().map(|&s| (None, s)));

    let results = parallel::try_map(&cells, |&(fi, seed)| {
        let Some(fi) = fi else {
            let t = train_variant(config, Variant::NoKg, seed, train_set)?;
            let ev = evaluate(
                Strategy::Rl(Variant::NoKg),
                test_set,
                Some(&t.network),
                seed,
            )?;
            return Ok::<_, Error>((all_score(&ev), None));
        };
        let fraction = fractions[fi];
        let mut tr = train_set.to_vec();
        let mut te = test_set.to_vec();
        let train_masked = apply_kg_availability(&mut tr, fraction, mask_seed(seed, fi, false))?;
        let test_masked = apply_kg_availability(&mut te, fraction, mask_seed(seed, fi, true))?;
        let t = train_variant(config, Variant::Kg, seed, &tr)?;
        let ev = evaluate(Strategy::Rl(Variant::Kg), &te, Some(&t.network), seed)?;
        let mask = SweepMask {
            fraction,
            seed,
            train: train_masked,
            test: test_masked,
        };
        Ok((all_score(&ev), Some(mask)))
    })?;

    let mut sweep = Sweep {
        rows: Vec::new(),
        reference: Vec::new(),
        masks: Vec::new(),
    };
    for (&(fi, seed), (score, mask)) in cells.iter().zip(results) {
        match (fi, mask) {
            (Some(fi), Some(mask)) => {
                sweep.rows.push(SweepRow {
                    fraction: fractions[fi],
                    seed,
                    mean_similarity: score,
                });
                sweep.masks.push(mask);
            }
            _ => sweep.reference.push(SweepRow {
                fraction: 0.0,
                seed,
                mean_similarity: score,
            }),
        }
    }
    Ok(sweep)
}

fn all_score(ev: &Evaluation) -> f64 {
    ev.rows.last().map_or(0.0, |r| r.mean_similarity)
}
