//! Result rows, seed summaries and the small amount of statistics the
//! reports need.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baselines::Strategy;
use crate::dqn::Rollout;
use crate::env::PreparedEpisode;
use crate::error::{Error, Result};

pub const ALL_FIELDS: &str = "All";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub strategy: Strategy,
    pub field: String,
    /// Mean Levenshtein similarity of final answer to truth.
    pub mean_similarity: f64,
    /// Not a published metric; reported alongside for reference.
    pub exact_match_rate: f64,
    pub n: usize,
    pub mean_answers_consumed: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<ResultRow>,
    /// Episodes with no candidate answers; left out of every row.
    pub skipped: usize,
}

#[derive(Default)]
struct Acc {
    n: usize,
    sim: f64,
    exact: usize,
    consumed: usize,
}

/// Per-field rows (alphabetical) followed by the episode-weighted `All` row.
pub fn score(
    strategy: Strategy,
    episodes: &[PreparedEpisode],
    rollouts: &[Rollout],
    seed: u64,
) -> Result<Evaluation> {
    if episodes.len() != rollouts.len() {
        return Err(Error::usage("one rollout per episode expected"));
    }
    let mut fields: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut skipped = 0;
    for (e, r) in episodes.iter().zip(rollouts) {
        let truth = e.truth().ok_or_else(|| {
            Error::usage(format!(
                "episode for {:?} has no ground truth",
                e.record.entity
            ))
        })?;
        let Some(answer) = &r.final_answer else {
            skipped += 1;
            continue;
        };
        let acc = fields.entry(e.field()).or_default();
        acc.n += 1;
        acc.sim += r.reward;
        acc.exact += usize::from(answer == truth);
        acc.consumed += r.answers_consumed;
    }

    let mut rows: Vec<ResultRow> = fields
        .into_iter()
        .map(|(field, a)| ResultRow {
            strategy,
            field: field.to_string(),
            mean_similarity: a.sim / a.n as f64,
            exact_match_rate: a.exact as f64 / a.n as f64,
            n: a.n,
            mean_answers_consumed: a.consumed as f64 / a.n as f64,
            seed,
        })
        .collect();
    rows.push(combine(strategy, &rows, seed));
    Ok(Evaluation { rows, skipped })
}

fn combine(strategy: Strategy, rows: &[ResultRow], seed: u64) -> ResultRow {
    let n: usize = rows.iter().map(|r| r.n).sum();
    let weighted = |f: fn(&ResultRow) -> f64| {
        if n == 0 {
            0.0
        } else {
            rows.iter().map(|r| r.n as f64 * f(r)).sum::<f64>() / n as f64
        }
    };
    ResultRow {
        strategy,
        field: ALL_FIELDS.to_string(),
        mean_similarity: weighted(|r| r.mean_similarity),
        exact_match_rate: weighted(|r| r.exact_match_rate),
        n,
        mean_answers_consumed: weighted(|r| r.mean_answers_consumed),
        seed,
    }
}

/// Stable report order: strategy rank, then seed, then fields
/// alphabetically with `All` last.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.strategy
            .rank()
            .cmp(&b.strategy.rank())
            .then(a.seed.cmp(&b.seed))
            .then((a.field == ALL_FIELDS).cmp(&(b.field == ALL_FIELDS)))
            .then(a.field.cmp(&b.field))
    });
}

/// Mean and standard error of a strategy/field cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub field: String,
    pub mean_similarity: f64,
    pub std_error: f64,
    pub exact_match_rate: f64,
    pub mean_answers_consumed: f64,
    pub n: usize,
    pub seeds: usize,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(usize, bool, &str), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((r.strategy.rank(), r.field == ALL_FIELDS, &r.field))
            .or_default()
            .push(r);
    }
    cells
        .into_values()
        .map(|group| {
            let sims: Vec<f64> = group.iter().map(|r| r.mean_similarity).collect();
            let exact: Vec<f64> = group.iter().map(|r| r.exact_match_rate).collect();
            let consumed: Vec<f64> = group.iter().map(|r| r.mean_answers_consumed).collect();
            SummaryRow {
                strategy: group[0].strategy,
                field: group[0].field.clone(),
                mean_similarity: mean(&sims),
                std_error: std_error(&sims),
                exact_match_rate: mean(&exact),
                mean_answers_consumed: mean(&consumed),
                n: group[0].n,
                seeds: group.len(),
            }
        })
        .collect()
}

pub fn find<'a>(
    summary: &'a [SummaryRow],
    strategy: Strategy,
    field: &str,
) -> Option<&'a SummaryRow> {
    summary
        .iter()
        .find(|r| r.strategy == strategy && r.field == field)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation over `sqrt(n)`; zero below two samples.
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("csv buffer", e.into_error()))
}

pub fn from_csv<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(bytes);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
