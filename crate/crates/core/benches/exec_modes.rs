use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use softsense_core::align::{align_dataset, AlignConfig};
use softsense_core::exec::Execution;
use softsense_core::ingest::{generate_synthetic, SynthSpec, Synthetic};
use softsense_core::lab_prep::{clean_lab, TUKEY_MULTIPLIER};
use softsense_core::mlp::init_network;
use softsense_core::sarima::{stepwise_search, StepwiseConfig};
use softsense_core::sensor_prep::{clean_sensors, fit_pca, SensorPrepConfig};
use softsense_core::shap::{explain_instances, ShapConfig};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn synthetic(n_days: usize) -> Synthetic {
    generate_synthetic(&SynthSpec {
        n_days,
        long_periods: vec![(5, 6)],
        ..SynthSpec::default()
    })
    .expect("valid spec")
}

fn normal_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn sensor_prep(c: &mut Criterion) {
    let syn = synthetic(20);
    let mut group = c.benchmark_group("sensor_prep");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = SensorPrepConfig {
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| clean_sensors(black_box(&syn.sensors), &cfg).unwrap())
        });
    }
    group.finish();
}

fn pca(c: &mut Criterion) {
    let data = normal_matrix(50_000, 31, 1);
    let names: Vec<String> = (0..31).map(|j| format!("s{j}")).collect();
    let mut group = c.benchmark_group("pca");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit_pca(black_box(data.view()), &names, 0.9, exec).unwrap())
        });
    }
    group.finish();
}

fn window_average(c: &mut Criterion) {
    let syn = synthetic(60);
    let (lab, _, _) = clean_lab(&syn.lab, TUKEY_MULTIPLIER).unwrap();
    let mut group = c.benchmark_group("window_average");
    for (name, exec) in MODES {
        let cfg = AlignConfig {
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| align_dataset(black_box(&syn.sensors), &lab, &cfg).unwrap())
        });
    }
    group.finish();
}

fn stepwise(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut x = 0.0;
    let series: Vec<f64> = (0..300)
        .map(|t| {
            x = 0.6 * x + rng.sample::<f64, _>(StandardNormal);
            x + 2.0 * ((t % 7) as f64 - 3.0)
        })
        .collect();
    let mut group = c.benchmark_group("stepwise");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = StepwiseConfig {
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| stepwise_search(black_box(&series), &cfg).unwrap())
        });
    }
    group.finish();
}

fn shapley(c: &mut Criterion) {
    let net = init_network(31, 4).unwrap();
    let instances = normal_matrix(16, 31, 5);
    let background = normal_matrix(100, 31, 6);
    let mut group = c.benchmark_group("shapley");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = ShapConfig {
            n_permutations: 16,
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                explain_instances(&net, black_box(instances.view()), background.view(), &cfg)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sensor_prep, pca, window_average, stepwise, shapley);
criterion_main!(benches);
