//! Parallel vs sequential map over the two data-parallel hot paths: episode
//! preparation (reference profiles) and greedy evaluation of a fixed network.
//! Build with `--no-default-features` to make `parallel::map` sequential too.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kgrl::dqn::{rollout_greedy, QNetwork};
use kgrl::env::{PreparedEpisode, Variant};
use kgrl::harness::data::label_mask;
use kgrl::kg::KnowledgeStore;
use kgrl::parallel;
use kgrl::synth::{generate_dataset, DatasetSpec, NoiseModel};

fn bench(c: &mut Criterion) {
    let ds = generate_dataset(&DatasetSpec::default(), &NoiseModel::default(), 0).unwrap();
    let store = KnowledgeStore::new(ds.triplets.clone(), ds.categories.clone()).unwrap();
    let mask = label_mask(ds.train.iter().chain(&ds.test));
    let records = ds.train.clone();
    let prepare =
        |r: &kgrl::env::EpisodeRecord| PreparedEpisode::from_store(r.clone(), &store, &mask, 10);

    let mut group = c.benchmark_group("prepare_episodes");
    group.bench_function(BenchmarkId::new("parallel", records.len()), |b| {
        b.iter(|| parallel::map(black_box(&records), prepare))
    });
    group.bench_function(BenchmarkId::new("sequential", records.len()), |b| {
        b.iter(|| parallel::map_sequential(black_box(&records), prepare))
    });
    group.finish();

    let episodes = parallel::map(&records, prepare);
    let net = QNetwork::new(3, &mut ChaCha8Rng::seed_from_u64(1));
    let rollout = |e: &PreparedEpisode| rollout_greedy(&net, Variant::Kg, e).unwrap().reward;

    let mut group = c.benchmark_group("greedy_evaluation");
    group.bench_function(BenchmarkId::new("parallel", episodes.len()), |b| {
        b.iter(|| parallel::map(black_box(&episodes), rollout))
    });
    group.bench_function(BenchmarkId::new("sequential", episodes.len()), |b| {
        b.iter(|| parallel::map_sequential(black_box(&episodes), rollout))
    });
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
