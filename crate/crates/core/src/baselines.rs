//! Answer-aggregation baselines, the RL variants and the oracle, all producing
//! per-episode [`Rollout`]s over the same prepared episodes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dqn::{rollout_greedy, QNetwork, Rollout};
use crate::env::{oracle_answer, PreparedEpisode, Variant};
use crate::error::{Error, Result};
use crate::parallel;
use crate::similarity::l_sim;
use crate::state::CandidateAnswer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    Random,
    First,
    Majority,
    Confidence,
    Rl(Variant),
    Oracle,
}

impl Strategy {
    /// Reporting order.
    pub const ALL: [Strategy; 9] = [
        Strategy::Random,
        Strategy::First,
        Strategy::Majority,
        Strategy::Confidence,
        Strategy::Rl(Variant::NoKg),
        Strategy::Rl(Variant::NoRetainReplace),
        Strategy::Rl(Variant::NoStop),
        Strategy::Rl(Variant::Kg),
        Strategy::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "Random",
            Strategy::First => "First",
            Strategy::Majority => "Majority",
            Strategy::Confidence => "Confidence",
            Strategy::Rl(v) => v.name(),
            Strategy::Oracle => "Oracle",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Strategy::Rl(v) => Some(v),
            _ => None,
        }
    }

    pub fn rank(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).expect("listed")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::usage(format!("unknown strategy {s:?}")))
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.name().to_string()
    }
}

fn nonempty(answers: &[CandidateAnswer]) -> Result<()> {
    if answers.is_empty() {
        Err(Error::usage("no candidate answers to aggregate"))
    } else {
        Ok(())
    }
}

/// Uniformly random answer, reproducible from `seed`.
pub fn aggregate_random(answers: &[CandidateAnswer], seed: u64) -> Result<&str> {
    nonempty(answers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(&answers[rng.random_range(0..answers.len())].text)
}

pub fn aggregate_first(answers: &[CandidateAnswer]) -> Result<&str> {
    nonempty(answers)?;
    Ok(&answers[0].text)
}

/// Most frequent exact text; ties go to the one that appeared first.
pub fn aggregate_majority(answers: &[CandidateAnswer]) -> Result<&str> {
    nonempty(answers)?;
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (i, a) in answers.iter().enumerate() {
        counts.entry(&a.text).or_insert((0, i)).0 += 1;
    }
    let (text, _) = counts
        .into_iter()
        .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then(fb.cmp(fa)))
        .expect("nonempty");
    Ok(text)
}

/// Highest confidence; ties go to the earliest.
pub fn aggregate_confidence(answers: &[CandidateAnswer]) -> Result<&str> {
    nonempty(answers)?;
    let mut best = 0;
    for (i, a) in answers.iter().enumerate().skip(1) {
        if a.confidence > answers[best].confidence {
            best = i;
        }
    }
    Ok(&answers[best].text)
}

/// Seed for the random baseline on episode `index`.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 over (seed, index)
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn scored(episode: &PreparedEpisode, text: &str, consumed: usize) -> Rollout {
    Rollout {
        final_answer: Some(text.to_string()),
        reward: episode.truth().map_or(0.0, |t| l_sim(text, t)),
        answers_consumed: consumed,
        steps: 0,
    }
}

fn skipped() -> Rollout {
    Rollout {
        final_answer: None,
        reward: 0.0,
        answers_consumed: 0,
        steps: 0,
    }
}

/// Runs a greedy RL agent; the network must match the variant's action count.
pub fn run_rl_variant(
    variant: Variant,
    network: &QNetwork,
    episodes: &[PreparedEpisode],
) -> Result<Vec<Rollout>> {
    if network.output_dim() != variant.space().len() {
        return Err(Error::usage(format!(
            "{variant} expects a network with {} outputs, got {}",
            variant.space().len(),
            network.output_dim()
        )));
    }
    parallel::try_map(episodes, |e| rollout_greedy(network, variant, e))
}

pub fn run_oracle(episodes: &[PreparedEpisode]) -> Result<Vec<Rollout>> {
    parallel::try_map(episodes, |e| {
        let truth = e.truth().ok_or_else(|| {
            Error::usage(format!(
                "episode for {:?} has no ground truth",
                e.record.entity
            ))
        })?;
        if e.answers().is_empty() {
            return Ok(skipped());
        }
        let (text, sim) = oracle_answer(e.answers(), truth)?;
        Ok(Rollout {
            final_answer: Some(text),
            reward: sim,
            answers_consumed: e.answers().len(),
            steps: 0,
        })
    })
}

/// Runs any strategy. RL strategies need `network`; `seed` drives Random.
pub fn run_strategy(
    strategy: Strategy,
    episodes: &[PreparedEpisode],
    network: Option<&QNetwork>,
    seed: u64,
) -> Result<Vec<Rollout>> {
    let aggregate = |f: fn(&[CandidateAnswer]) -> Result<&str>, all: bool| {
        parallel::try_map(episodes, |e| {
            if e.answers().is_empty() {
                return Ok(skipped());
            }
            let consumed = if all { e.answers().len() } else { 1 };
            Ok(scored(e, f(e.answers())?, consumed))
        })
    };
    match strategy {
        Strategy::Random => {
            let indexed: Vec<(usize, &PreparedEpisode)> = episodes.iter().enumerate().collect();
            parallel::try_map(&indexed, |&(i, e)| {
                if e.answers().is_empty() {
                    return Ok(skipped());
                }
                let text = aggregate_random(e.answers(), episode_seed(seed, i))?;
                Ok(scored(e, text, e.answers().len()))
            })
        }
        Strategy::First => aggregate(aggregate_first, false),
        Strategy::Majority => aggregate(aggregate_majority, true),
        Strategy::Confidence => aggregate(aggregate_confidence, true),
        Strategy::Oracle => run_oracle(episodes),
        Strategy::Rl(v) => {
            let net =
                network.ok_or_else(|| Error::usage(format!("{v} needs a trained network")))?;
            run_rl_variant(v, net, episodes)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EpisodeRecord;
    use crate::kg::ReferenceSet;

    fn answers(items: &[(&str, f64)]) -> Vec<CandidateAnswer> {
        items
            .iter()
            .map(|&(t, c)| CandidateAnswer::new(t, c))
            .collect()
    }

    #[test]
    fn first() {
        let a = answers(&[("a", 0.1), ("b", 0.2), ("c", 0.3)]);
        assert_eq!(aggregate_first(&a).unwrap(), "a");
        assert_eq!(aggregate_first(&a[..1]).unwrap(), "a");
        let mut rev = a.clone();
        rev.reverse();
        assert_eq!(aggregate_first(&rev).unwrap(), "c");
        assert!(aggregate_first(&[]).is_err());
    }

    #[test]
    fn majority() {
        let t = |xs: &[&str]| {
            let a: Vec<_> = xs.iter().map(|&x| CandidateAnswer::new(x, 0.0)).collect();
            aggregate_majority(&a).unwrap().to_string()
        };
        assert_eq!(t(&["A", "A", "B"]), "A");
        assert_eq!(t(&["A", "B"]), "A");
        assert_eq!(t(&["A", "B", "B", "A", "B"]), "B");
        assert_eq!(t(&["C", "A", "B", "A", "B"]), "A");
        assert!(aggregate_majority(&[]).is_err());
    }

    #[test]
    fn confidence() {
        assert_eq!(
            aggregate_confidence(&answers(&[("A", 0.3), ("B", 0.9)])).unwrap(),
            "B"
        );
        assert_eq!(
            aggregate_confidence(&answers(&[("A", 0.5), ("B", 0.5)])).unwrap(),
            "A"
        );
        assert_eq!(aggregate_confidence(&answers(&[("A", 0.0)])).unwrap(), "A");
        assert!(aggregate_confidence(&[]).is_err());
    }

    #[test]
    fn random_is_seeded() {
        let a = answers(&[("a", 0.1), ("b", 0.2), ("c", 0.3), ("d", 0.3)]);
        assert_eq!(aggregate_random(&a[..1], 5).unwrap(), "a");
        assert_eq!(
            aggregate_random(&a, 42).unwrap(),
            aggregate_random(&a, 42).unwrap()
        );
        assert!(aggregate_random(&[], 1).is_err());
    }

    #[test]
    fn random_is_uniform() {
        // chi-square with 3 degrees of freedom; 16.27 is the 0.999 quantile
        let a = answers(&[("a", 0.1), ("b", 0.2), ("c", 0.3), ("d", 0.3)]);
        let mut counts = [0f64; 4];
        let n = 10_000;
        for i in 0..n {
            let pick = aggregate_random(&a, episode_seed(7, i)).unwrap();
            counts[(pick.as_bytes()[0] - b'a') as usize] += 1.0;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|c| (c - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!(
            "rl-kg".parse::<Strategy>().unwrap(),
            Strategy::Rl(Variant::Kg)
        );
        assert!("Best".parse::<Strategy>().is_err());
        assert_eq!(
            Strategy::ALL.iter().map(|s| s.rank()).collect::<Vec<_>>(),
            (0..9).collect::<Vec<_>>()
        );
    }

    fn episode(items: &[(&str, f64)], truth: &str) -> PreparedEpisode {
        PreparedEpisode::new(
            EpisodeRecord {
                entity: "e".into(),
                attribute: "r".into(),
                truth: Some(truth.into()),
                field: "f".into(),
                answers: answers(items),
            },
            ReferenceSet::empty("r"),
            10,
        )
    }

    #[test]
    fn oracle_bounds_every_baseline() {
        let eps = vec![
            episode(&[("GV104", 0.3), ("GP104", 0.9), ("xx", 0.1)], "GP104"),
            episode(&[("T2410", 0.9), ("GV104", 0.2), ("DOS", 0.4)], "DOS"),
            episode(&[("a", 0.5), ("a", 0.1), ("b", 0.9)], "c"),
        ];
        let oracle = run_oracle(&eps).unwrap();
        for s in [
            Strategy::Random,
            Strategy::First,
            Strategy::Majority,
            Strategy::Confidence,
        ] {
            let got = run_strategy(s, &eps, None, 3).unwrap();
            for (g, o) in got.iter().zip(&oracle) {
                assert!(g.reward <= o.reward);
            }
        }
        assert_eq!(oracle[1].final_answer.as_deref(), Some("DOS"));
        assert_eq!(oracle[1].reward, 1.0);
    }

    #[test]
    fn rl_strategy_needs_matching_network() {
        let eps = vec![episode(&[("a", 0.5), ("b", 0.1)], "a")];
        assert!(run_strategy(Strategy::Rl(Variant::Kg), &eps, None, 0).is_err());
        let two = QNetwork::zeros(&QNetwork::standard_dims(2)).unwrap();
        assert!(run_rl_variant(Variant::Kg, &two, &eps).is_err());
        let three = QNetwork::zeros(&QNetwork::standard_dims(3)).unwrap();
        // all-zero Q ties resolve to Retain, so the agent walks to the end
        let out = run_rl_variant(Variant::Kg, &three, &eps).unwrap();
        assert_eq!(out[0].final_answer.as_deref(), Some("a"));
    }

    #[test]
    fn oracle_requires_truth() {
        let mut e = episode(&[("a", 0.5)], "a");
        e.record.truth = None;
        assert!(run_oracle(&[e]).is_err());
    }
}
