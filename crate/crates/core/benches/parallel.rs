use airpid::episode::evaluate;
use airpid::neural::{forward, sample_action, NetworkParams};
use airpid::ppo::{minibatch_loss_and_grad, LossCoeffs, Sample};
use airpid::rng::seeded_rng;
use airpid::{ControllerMode, Exec, GainBounds, SimConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use std::hint::black_box;

fn samples(params: &NetworkParams, n: usize) -> Vec<Sample> {
    let mut rng = seeded_rng(1);
    (0..n)
        .map(|_| {
            let obs = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0)];
            let f = forward(params, &obs);
            let (a, lp) = sample_action(&f.mean, &f.log_std, &mut rng);
            Sample { obs, raw_action: a, old_log_prob: lp, advantage: rng.random_range(-1.0..1.0), value_target: 0.0 }
        })
        .collect()
}

fn gradients(c: &mut Criterion) {
    let params = NetworkParams::init(&mut seeded_rng(0));
    let k = LossCoeffs { epsilon: 0.2, c1: 0.5, c2: 0.01 };
    let mut group = c.benchmark_group("minibatch_grad");
    for n in [64, 1024] {
        let batch = samples(&params, n);
        for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n), &batch, |b, batch| {
                b.iter(|| black_box(minibatch_loss_and_grad(&params, batch, &k, exec)))
            });
        }
    }
    group.finish();
}

fn episodes(c: &mut Criterion) {
    let params = NetworkParams::init(&mut seeded_rng(0));
    let mode = ControllerMode::adaptive(params);
    let cfg = SimConfig::default();
    let bounds = GainBounds::default();
    let mut group = c.benchmark_group("evaluate_8_episodes");
    group.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        group.bench_function(name, |b| b.iter(|| black_box(evaluate(&mode, &cfg, &bounds, 8, 0, exec).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, gradients, episodes);
criterion_main!(benches);
