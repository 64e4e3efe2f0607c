use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use paraqnn_bench::{batch_inputs, default_net, regime_times};
use paraqnn_core::dyngen::{self, DensityMatrix2, Regime, DEFAULT_DT};
use paraqnn_core::noise::{self, NoiseStack, SeededRng};
use paraqnn_core::training::{paraconsistent_loss, LossWeights};

fn integrator(c: &mut Criterion) {
    let mut g = c.benchmark_group("integrate");
    g.sample_size(10);
    for regime in Regime::ALL {
        let schedule = dyngen::make_regime_schedule(regime);
        let times = regime_times(regime, 2_000);
        g.bench_with_input(BenchmarkId::from_parameter(regime), &times, |b, t| {
            b.iter(|| dyngen::integrate(&schedule, &DensityMatrix2::ground(), black_box(t), DEFAULT_DT).unwrap())
        });
    }
    g.finish();
}

fn noise_samplers(c: &mut Criterion) {
    let n = 1 << 14;
    c.bench_function("noise/gaussian", |b| {
        b.iter(|| noise::gaussian_noise(&mut SeededRng::new(1, "bench"), black_box(n), 0.08))
    });
    c.bench_function("noise/telegraph", |b| {
        b.iter(|| noise::telegraph_noise(&mut SeededRng::new(1, "bench"), black_box(n), 0.1, 0.02))
    });
    c.bench_function("noise/pink", |b| {
        b.iter(|| noise::pink_noise(&mut SeededRng::new(1, "bench"), black_box(n), 0.05).unwrap())
    });
    let clean = vec![0.5; n];
    let stack = NoiseStack::for_regime(Regime::Mixed);
    c.bench_function("noise/corrupt_mixed", |b| {
        b.iter(|| noise::corrupt(black_box(&clean), &stack, 3).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let net = default_net();
    let mut g = c.benchmark_group("paranet");
    for batch in [256usize, 512] {
        let tau = batch_inputs(batch);
        let y = vec![0.5; batch];
        g.bench_with_input(BenchmarkId::new("forward", batch), &tau, |b, tau| {
            b.iter(|| net.forward(black_box(tau)))
        });
        g.bench_with_input(BenchmarkId::new("forward_backward", batch), &tau, |b, tau| {
            b.iter(|| {
                let out = net.forward(black_box(tau));
                let (loss, _) =
                    paraconsistent_loss(&out.t_hat, &out.f_hat, &y, &y, &LossWeights::default()).unwrap();
                net.backward(&out.cache, &loss.d_t, &loss.d_f).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, integrator, noise_samplers, network);
criterion_main!(benches);
