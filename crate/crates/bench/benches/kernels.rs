use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use issvd::rng;
use issvd::stability::{find_lambda_pointwise, FnScores};
use issvd::{fit, soft_threshold, FitConfig, PointwiseRule, Scenario};
use ndarray::Array1;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(len: usize, seed: u64) -> Array1<f64> {
    let mut r = rng::stream(seed, &[]);
    Array1::from_shape_simple_fn(len, || StandardNormal.sample(&mut r))
}

fn bench_soft_threshold(c: &mut Criterion) {
    let x = gaussian(100_000, 1);
    c.bench_function("soft_threshold_100k", |b| {
        b.iter(|| soft_threshold(black_box(x.view()), black_box(1.3)).unwrap())
    });
}

fn bench_pointwise(c: &mut Criterion) {
    // Scores of a 2000-variable vector with 100 signal coordinates; each
    // subsample keeps half of 200 additive contributions.
    let m = 2000;
    let parts: Vec<Array1<f64>> = (0..200)
        .map(|k| {
            let mut g = gaussian(m, 10 + k);
            g.slice_mut(ndarray::s![..100]).mapv_inplace(|v| v + 0.8);
            g
        })
        .collect();
    let full = || parts.iter().fold(Array1::zeros(m), |acc, p| acc + p);
    let sub = |r: &mut ChaCha8Rng| {
        sample(r, parts.len(), parts.len() / 2)
            .into_iter()
            .fold(Array1::zeros(m), |acc, i| acc + &parts[i])
    };
    let source = FnScores { dim: m, full, sub };
    let mut group = c.benchmark_group("pointwise_search");
    for rule in [PointwiseRule::FirstInRange, PointwiseRule::SmallestInRange] {
        group.bench_function(format!("{rule:?}"), |b| {
            b.iter(|| find_lambda_pointwise(&source, 200.0, (0.6, 0.8), 100, rule, 7).unwrap())
        });
    }
    group.finish();
}

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("scenario2_sigma0.1", |b| {
        b.iter_batched(
            || Scenario::Two { sigma: 0.1 }.generate(0).unwrap().0,
            |data| fit(&data, &FitConfig::default()).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_soft_threshold, bench_pointwise, bench_fit);
criterion_main!(benches);
