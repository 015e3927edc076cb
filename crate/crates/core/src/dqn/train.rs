//! Experience-replay Q-learning over recorded episodes.
//!
//! Each epoch is a budget of environment transitions. Episodes are drawn from
//! the training set in order, wrapping around, and the cursor carries over
//! between epochs; an episode that straddles the budget is finished before
//! the epoch closes. Every transition is stored and followed by one SGD step
//! on a uniformly sampled mini-batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Episode, PreparedEpisode, Start, Variant};
use crate::error::{Error, Result};

use super::network::QNetwork;
use super::policy::{select_action, td_target};
use super::replay::{ReplayMemory, Transition, DEFAULT_CAPACITY};
use super::schedule::{EpsilonSchedule, LearningRateSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub transitions_per_epoch: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub learning_rate: LearningRateSchedule,
    pub replay_capacity: usize,
    /// Copy the online network into a frozen bootstrap network every this
    /// many transitions; 0 bootstraps from the online network.
    pub target_sync_period: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            transitions_per_epoch: 1_000,
            batch_size: 32,
            gamma: 1.0,
            epsilon: EpsilonSchedule::default(),
            learning_rate: LearningRateSchedule::default(),
            replay_capacity: DEFAULT_CAPACITY,
            target_sync_period: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.transitions_per_epoch == 0 || self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(Error::Config(
                "transitions_per_epoch, batch_size and replay_capacity must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        self.epsilon.validate()?;
        self.learning_rate.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean terminal reward of the episodes finished in this epoch.
    pub mean_reward: f64,
    /// ε at the end of the epoch.
    pub epsilon: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub network: QNetwork,
    pub log: Vec<EpochLog>,
    pub transitions: usize,
}

pub fn train(
    config: &TrainConfig,
    variant: Variant,
    episodes: &[PreparedEpisode],
) -> Result<Trained> {
    config.validate()?;
    if episodes.is_empty() {
        return Err(Error::usage("training set is empty"));
    }
    if !episodes.iter().any(|e| e.answers().len() >= 2) {
        return Err(Error::usage(
            "training set has no episode with at least two answers",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = QNetwork::new(variant.space().len(), &mut rng);
    let mut target = (config.target_sync_period > 0).then(|| net.clone());
    let mut memory = ReplayMemory::new(config.replay_capacity);
    let mut grads = net.zero_gradients();
    let mut log = Vec::with_capacity(config.epochs);
    let mut transitions = 0usize;
    let mut cursor = 0usize;

    for epoch in 0..config.epochs {
        let rate = config.learning_rate.at(epoch);
        let mut in_epoch = 0usize;
        let mut rewards = Vec::new();

        while in_epoch < config.transitions_per_epoch {
            let data = &episodes[cursor % episodes.len()];
            cursor += 1;
            let mut env = Episode::new(data, variant);
            let mut state = match env.reset() {
                Start::Skipped => continue,
                Start::Finished(out) => {
                    rewards.push(out.reward);
                    continue;
                }
                Start::State(s) => s,
            };
            loop {
                let legal = env.legal_actions();
                let eps = config.epsilon.at(transitions);
                let action = select_action(&net, state.as_slice(), eps, legal, &mut rng)?;
                let out = env.step(action)?;
                let next = out.state.map(|s| (s, env.legal_actions()));
                memory.push(Transition {
                    state,
                    action,
                    reward: out.reward,
                    next,
                });
                transitions += 1;
                in_epoch += 1;

                grads.reset();
                let batch = memory.sample(config.batch_size, &mut rng);
                let bootstrap = target.as_ref().unwrap_or(&net);
                for t in &batch {
                    let y = td_target(t, bootstrap, config.gamma)?;
                    net.accumulate_gradient(t.state.as_slice(), t.action, y, &mut grads)?;
                }
                net.apply_gradients(&grads, rate, 1.0 / batch.len() as f64);

                if let Some(tn) = target.as_mut() {
                    if transitions.is_multiple_of(config.target_sync_period) {
                        tn.clone_from(&net);
                    }
                }

                match next {
                    Some((s, _)) => state = s,
                    None => {
                        rewards.push(out.reward);
                        break;
                    }
                }
            }
        }

        let mean_reward = if rewards.is_empty() {
            0.0
        } else {
            rewards.iter().sum::<f64>() / rewards.len() as f64
        };
        log.push(EpochLog {
            epoch,
            mean_reward,
            epsilon: config.epsilon.at(transitions),
            learning_rate: rate,
        });
    }

    Ok(Trained {
        network: net,
        log,
        transitions,
    })
}

/// Training log as CSV: `epoch,mean_reward,epsilon,learning_rate`.
pub fn write_log_csv<W: std::io::Write>(log: &[EpochLog], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in log {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("training log", e))?;
    Ok(())
}
