use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgrl::baselines::{run_rl_variant, run_strategy, Strategy};
use kgrl::dqn::{train, QNetwork, TrainConfig};
use kgrl::env::{Episode, PreparedEpisode, Start, Variant};
use kgrl::harness::LoadedData;
use kgrl::synth::{generate_dataset, DatasetSpec, NoiseModel};

fn data() -> LoadedData {
    let mut spec = DatasetSpec::default();
    for f in &mut spec.fields {
        f.train_entities = 30;
        f.test_entities = 10;
        f.categories = 2;
    }
    spec.background_per_category = 4;
    let ds = generate_dataset(&spec, &NoiseModel::default(), 12).unwrap();
    LoadedData::from_dataset(&ds, 10).unwrap()
}

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 3,
        transitions_per_epoch: 300,
        seed,
        ..TrainConfig::default()
    }
}

fn emptied(episodes: &[PreparedEpisode]) -> Vec<PreparedEpisode> {
    let mut out = episodes.to_vec();
    for e in &mut out {
        e.clear_refs();
    }
    out
}

#[test]
fn no_kg_equals_kg_without_references() {
    let d = data();
    assert!(d.train.iter().all(|e| !e.refs.is_empty()));
    for seed in [0, 1] {
        let nk = train(&cfg(seed), Variant::NoKg, &d.train).unwrap();
        let kg = train(&cfg(seed), Variant::Kg, &emptied(&d.train)).unwrap();
        assert_eq!(nk.network, kg.network);
        assert_eq!(nk.log, kg.log);
        let a = run_rl_variant(Variant::NoKg, &nk.network, &d.test).unwrap();
        let b = run_rl_variant(Variant::Kg, &kg.network, &emptied(&d.test)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn no_retain_replace_returns_most_confident_prefix_answer() {
    let d = data();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let net = QNetwork::new(2, &mut rng);
        let rolls = run_rl_variant(Variant::NoRetainReplace, &net, &d.test).unwrap();
        for (e, r) in d.test.iter().zip(&rolls) {
            let seen = &e.answers()[..r.answers_consumed];
            let mut best = 0;
            for (i, a) in seen.iter().enumerate() {
                if a.confidence > seen[best].confidence {
                    best = i;
                }
            }
            assert_eq!(r.final_answer.as_deref(), Some(seen[best].text.as_str()));
            // a stop at step t has seen t + 1 answers
            assert_eq!(r.answers_consumed, r.steps + 1);
        }
    }
}

#[test]
fn consumption_bounds() {
    let d = data();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let ns = run_rl_variant(Variant::NoStop, &QNetwork::new(2, &mut rng), &d.test).unwrap();
        let kg = run_rl_variant(Variant::Kg, &QNetwork::new(3, &mut rng), &d.test).unwrap();
        for ((e, a), b) in d.test.iter().zip(&ns).zip(&kg) {
            let m = e.answers().len();
            assert_eq!(a.answers_consumed, m);
            assert_eq!(a.steps, m - 1);
            assert!((2..=m).contains(&b.answers_consumed));
        }
    }
}

#[test]
fn every_strategy_is_bounded_by_the_oracle() {
    let d = data();
    let oracle = run_strategy(Strategy::Oracle, &d.test, None, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for s in Strategy::ALL {
        let net = s
            .variant()
            .map(|v| QNetwork::new(v.space().len(), &mut rng));
        let got = run_strategy(s, &d.test, net.as_ref(), rng.random()).unwrap();
        for (g, o) in got.iter().zip(&oracle) {
            assert!(g.reward <= o.reward, "{s}");
        }
    }
}

#[test]
fn environment_is_deterministic_for_a_fixed_action_sequence() {
    let d = data();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for e in d.test.iter().take(10) {
        let plan: Vec<usize> = (0..12).map(|_| rng.random_range(0..3)).collect();
        let run = || {
            let mut env = Episode::new(e, Variant::Kg);
            let Start::State(_) = env.reset() else {
                panic!("queue too short")
            };
            let mut trace = Vec::new();
            for &want in &plan {
                let legal = env.legal_actions();
                let a = if legal.contains(want) {
                    want
                } else {
                    legal.iter().next().unwrap()
                };
                let out = env.step(a).unwrap();
                trace.push((a, out.reward, out.final_answer.clone()));
                if out.done {
                    break;
                }
            }
            trace
        };
        assert_eq!(run(), run());
    }
}
