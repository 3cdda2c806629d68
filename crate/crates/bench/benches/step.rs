use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use selfmod_bench::{default_network, filled_buffer};
use selfmod_core::env::Cartpole;
use selfmod_core::net::NetScratch;
use selfmod_core::{
    evaluate_execute, flatten_params, memory_step, stream_rng, Environment, InputSpec, MemoryState, SamplingMode,
    Solution, UpdateRule,
};

fn network(c: &mut Criterion) {
    let x = [0.1, -0.2, 0.05, 0.3, 1.0];
    for (name, rule) in [("net_step/self_modify", UpdateRule::SelfModify), ("net_step/frozen", UpdateRule::Frozen)] {
        let mut params = default_network(5, 1);
        let mut scratch = NetScratch::default();
        c.bench_function(name, |b| b.iter(|| black_box(params.step(black_box(&x), &mut scratch, rule).unwrap()[0])));
    }

    let state = MemoryState::from_params(&default_network(5, 1));
    c.bench_function("memory_step", |b| b.iter(|| memory_step(black_box(&state), &x).unwrap()));
    c.bench_function("flatten", |b| b.iter(|| flatten_params(black_box(&default_network(5, 1)))));
}

fn buffer(c: &mut Criterion) {
    let full = filled_buffer(5000, SamplingMode::Exponential);
    let mut rng = stream_rng(0, 0);
    c.bench_function("buffer/sample", |b| b.iter(|| full.sample(&mut rng).unwrap().fitness));
    let greedy = filled_buffer(5000, SamplingMode::Greedy);
    c.bench_function("buffer/sample_greedy", |b| b.iter(|| greedy.sample(&mut rng).unwrap().fitness));
    let params = default_network(1, 0);
    c.bench_function("buffer/insert", |b| {
        b.iter_batched(
            || full.clone(),
            |mut buf| buf.insert(Solution::new(params.clone(), 0.5, 1000)),
            BatchSize::LargeInput,
        )
    });
}

fn execution(c: &mut Criterion) {
    let input = InputSpec::new(4, 2);
    let params = default_network(input.width(), 2);
    let mut group = c.benchmark_group("cartpole_window");
    group.sample_size(10);
    group.bench_function("1000_steps", |b| {
        b.iter(|| {
            let mut env = Cartpole::new();
            let mut rng = stream_rng(3, 1);
            evaluate_execute(
                params.clone(),
                &mut env as &mut dyn Environment,
                &input,
                1000,
                UpdateRule::SelfModify,
                &mut rng,
            )
            .unwrap()
            .total_reward
        })
    });
    group.finish();
}

criterion_group!(benches, network, buffer, execution);
criterion_main!(benches);
