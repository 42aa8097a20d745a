use cdqn_core::agent::{Agent, AgentConfig, AgentKind, Transition};
use cdqn_core::cartpole::{self, EnvSpec, EnvState};
use cdqn_core::nn::NetworkParams;
use cdqn_core::rng;
use cdqn_core::{peace_from_samples, ObservationTriple};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

fn estimator(c: &mut Criterion) {
    let mut r = rng::seeded(1);
    let batch: Vec<ObservationTriple> = (0..64)
        .map(|_| {
            ObservationTriple::new(
                rng::below(&mut r, 2) as i64,
                rng::below(&mut r, 16) as u64,
                rng::standard_normal(&mut r),
            )
        })
        .collect();
    c.bench_function("peace_from_samples/64", |b| {
        b.iter(|| peace_from_samples(black_box(&batch)).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let net = NetworkParams::init(&[4, 64, 64, 2], 3).unwrap();
    let x = [0.01, -0.2, 0.03, 0.4];
    c.bench_function("forward/4-64-64-2", |b| {
        b.iter(|| net.predict(black_box(&x)).unwrap())
    });
    c.bench_function("forward_backward/4-64-64-2", |b| {
        b.iter(|| {
            let (_, trace) = net.forward(black_box(&x)).unwrap();
            net.backward(&trace, &[1.0, -1.0]).unwrap()
        })
    });
}

fn environment(c: &mut Criterion) {
    let spec = EnvSpec::default();
    let state = EnvState::new(0.01, 0.1, -0.02, 0.05);
    c.bench_function("cartpole/step", |b| {
        b.iter(|| cartpole::step(&spec, black_box(&state), 1).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let mut r = rng::seeded(5);
    let batch: Vec<Transition> = (0..64)
        .map(|_| {
            let mut s = [0.0; 4];
            let mut s2 = [0.0; 4];
            for v in s.iter_mut().chain(s2.iter_mut()) {
                *v = rng::uniform_range(&mut r, -0.5, 0.5);
            }
            Transition::new(s, rng::below(&mut r, 2), 1.0, s2, false)
        })
        .collect();
    let mut group = c.benchmark_group("train_on_batch/64");
    for kind in [AgentKind::Dqn, AgentKind::Causal] {
        let config = AgentConfig {
            kind,
            ..AgentConfig::default()
        };
        let agent = Agent::new(config, &mut rng::seeded(9)).unwrap();
        group.bench_function(kind.to_string(), |b| {
            b.iter_batched_ref(
                || agent.clone(),
                |a| a.train_on_batch(&batch).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, estimator, network, environment, training);
criterion_main!(benches);
