use rand::Rng;

use crate::env::{Episode, LegalActions, PreparedEpisode, Start, Variant};
use crate::error::{Error, Result};

use super::network::QNetwork;
use super::replay::Transition;

/// Highest-Q legal action; ties go to the lowest index.
pub fn greedy_action(q: &[f64], legal: LegalActions) -> Result<usize> {
    let mut best: Option<usize> = None;
    for i in legal.iter() {
        if best.is_none_or(|b| q[i] > q[b]) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| Error::usage("no legal action to choose from"))
}

/// ε-greedy over the legal actions.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    state: &[f64],
    epsilon: f64,
    legal: LegalActions,
    rng: &mut R,
) -> Result<usize> {
    if legal.is_empty() {
        return Err(Error::usage("no legal action to choose from"));
    }
    if legal.space_len() != net.output_dim() {
        return Err(Error::usage(format!(
            "action mask over {} actions, network has {} outputs",
            legal.space_len(),
            net.output_dim()
        )));
    }
    if rng.random::<f64>() < epsilon {
        let pick = rng.random_range(0..legal.count());
        return Ok(legal.iter().nth(pick).expect("pick < count"));
    }
    greedy_action(&net.forward(state)?, legal)
}

/// `r` for terminal transitions, else `r + γ · max_{legal a'} Q(s', a')`.
pub fn td_target(transition: &Transition, net: &QNetwork, gamma: f64) -> Result<f64> {
    match &transition.next {
        None => Ok(transition.reward),
        Some((next, legal)) => {
            let q = net.forward(next.as_slice())?;
            let best = greedy_action(&q, *legal)?;
            Ok(transition.reward + gamma * q[best])
        }
    }
}

/// Result of running one episode to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// `None` when the queue was empty.
    pub final_answer: Option<String>,
    pub reward: f64,
    pub answers_consumed: usize,
    pub steps: usize,
}

/// Runs the greedy policy of `net` on one episode.
pub fn rollout_greedy(
    net: &QNetwork,
    variant: Variant,
    episode: &PreparedEpisode,
) -> Result<Rollout> {
    let space = variant.space();
    if net.output_dim() != space.len() {
        return Err(Error::usage(format!(
            "{variant} needs {} outputs, network has {}",
            space.len(),
            net.output_dim()
        )));
    }
    let mut env = Episode::new(episode, variant);
    let mut state = match env.reset() {
        Start::Skipped => {
            return Ok(Rollout {
                final_answer: None,
                reward: 0.0,
                answers_consumed: 0,
                steps: 0,
            })
        }
        Start::Finished(out) => {
            return Ok(Rollout {
                final_answer: out.final_answer,
                reward: out.reward,
                answers_consumed: env.answers_consumed(),
                steps: 0,
            })
        }
        Start::State(s) => s,
    };
    loop {
        let action = greedy_action(&net.forward(state.as_slice())?, env.legal_actions())?;
        let out = env.step(action)?;
        if out.done {
            return Ok(Rollout {
                final_answer: out.final_answer,
                reward: out.reward,
                answers_consumed: env.answers_consumed(),
                steps: env.steps(),
            });
        }
        state = out.state.expect("non-terminal step carries a state");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::StateVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Network whose Q-values equal its output biases.
    fn constant_net(q: &[f64]) -> QNetwork {
        let mut net = QNetwork::zeros(&QNetwork::standard_dims(q.len())).unwrap();
        net.layers_mut()[2].biases.copy_from_slice(q);
        net
    }

    #[test]
    fn greedy_picks_argmax() {
        let net = constant_net(&[0.1, 0.9, 0.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = select_action(&net, &[0.0; 31], 0.0, LegalActions::all(3), &mut rng).unwrap();
        assert_eq!(a, 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(
            greedy_action(&[0.5, 0.5, 0.5], LegalActions::all(3)).unwrap(),
            0
        );
    }

    #[test]
    fn masked_actions_are_never_chosen() {
        let net = constant_net(&[0.1, 0.9, 0.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for eps in [0.0, 0.5, 1.0] {
            for _ in 0..100 {
                let a = select_action(&net, &[0.0; 31], eps, LegalActions::only(2, 3), &mut rng)
                    .unwrap();
                assert_eq!(a, 2);
            }
        }
        let empty = LegalActions::from_indices(&[], 3);
        assert!(select_action(&net, &[0.0; 31], 0.0, empty, &mut rng).is_err());
    }

    #[test]
    fn td_targets() {
        let net = constant_net(&[0.1, 0.4, 0.2]);
        let terminal = Transition {
            state: StateVector([0.0; 31]),
            action: 2,
            reward: 0.6,
            next: None,
        };
        assert_eq!(td_target(&terminal, &net, 1.0).unwrap(), 0.6);

        let open = Transition {
            state: StateVector([0.0; 31]),
            action: 0,
            reward: 0.0,
            next: Some((StateVector([0.0; 31]), LegalActions::all(3))),
        };
        assert!((td_target(&open, &net, 1.0).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(td_target(&open, &net, 0.0).unwrap(), 0.0);

        // bootstrap max respects the legal mask
        let only_stop = Transition {
            next: Some((StateVector([0.0; 31]), LegalActions::only(2, 3))),
            ..open
        };
        assert!((td_target(&only_stop, &net, 1.0).unwrap() - 0.2).abs() < 1e-12);
    }
}
