use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use econformal::simulation::synthetic_dataset;
use econformal::{
    empirical_mean, evaluate, parse_dataset, run_simulation, write_dataset, CalibrationSummary,
    ScoreDistribution, SimulationConfig,
};

fn calibration(c: &mut Criterion) {
    let data = synthetic_dataset(5000, 10, 12.0, 1).unwrap();
    let scores: Vec<f64> = data.records().iter().map(econformal::score_true).collect();
    c.bench_function("empirical_mean/5000", |b| {
        b.iter(|| empirical_mean(black_box(&scores)))
    });
    c.bench_function("calibrate/5000", |b| {
        b.iter(|| CalibrationSummary::from_dataset(black_box(&data), 0.02))
    });
}

fn prediction(c: &mut Criterion) {
    let calib = synthetic_dataset(5000, 10, 12.0, 2).unwrap();
    let test = synthetic_dataset(5000, 10, 12.0, 3).unwrap();
    let summary = CalibrationSummary::from_dataset(&calib, 0.02).unwrap();
    let probs = test.records()[0].probs().to_vec();
    c.bench_function("predict_set/k10", |b| {
        b.iter(|| summary.predict_set(black_box(&probs), 0.2))
    });
    c.bench_function("evaluate/5000", |b| {
        b.iter(|| evaluate(black_box(&test), &summary, 0.2))
    });
}

fn ingest(c: &mut Criterion) {
    let data = synthetic_dataset(10_000, 10, 12.0, 4).unwrap();
    let mut bytes = Vec::new();
    write_dataset(&data, &mut bytes).unwrap();
    c.bench_function("parse_dataset/10000x10", |b| {
        b.iter_batched(
            || bytes.clone(),
            |buf| parse_dataset(buf.as_slice()),
            BatchSize::LargeInput,
        )
    });
}

fn simulation(c: &mut Criterion) {
    let config = SimulationConfig {
        n: 5000,
        t: 0.02,
        alpha_tilde: 0.2,
        num_trials: 100,
        distribution: ScoreDistribution::beta(2.0, 8.0).unwrap(),
        seed: 1,
    };
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("beta_n5000_100_trials", |b| {
        b.iter(|| run_simulation(black_box(&config)))
    });
    group.finish();
}

criterion_group!(benches, calibration, prediction, ingest, simulation);
criterion_main!(benches);
