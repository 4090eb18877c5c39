use std::hint::black_box;
use std::sync::Arc;

use archscale_core::autoscaler::StrategyKind;
use archscale_core::classifier::train_pipeline;
use archscale_core::experiment::{self, ExperimentConfig};
use archscale_core::features::compute_features;
use archscale_core::trace::{generate_synthetic, SyntheticSpec};
use archscale_core::weaklabel::{label_window, Archetype};
use criterion::{criterion_group, criterion_main, Criterion};

fn window(archetype: Archetype) -> Vec<f64> {
    let mut spec = SyntheticSpec::new(archetype, 60, 200.0);
    spec.amplitude = 0.5;
    spec.period_minutes = Some(20.0);
    spec.noise_std = 10.0;
    generate_synthetic("bench", &spec).unwrap().as_f64()
}

fn features(c: &mut Criterion) {
    let values = window(Archetype::Periodic);
    c.bench_function("compute_features/60", |b| b.iter(|| compute_features(black_box(&values)).unwrap()));
}

fn labeling(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let windows = experiment::corpus_windows(&cfg).unwrap();
    let w = &windows[windows.len() / 2];
    c.bench_function("label_window", |b| {
        b.iter(|| label_window(black_box(w), &cfg.labeling).unwrap())
    });
}

fn classify_and_simulate(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let rows = experiment::label_corpus(&cfg).unwrap();
    let model = Arc::new(train_pipeline(&rows, &cfg.classifier.params, cfg.classifier.seed).unwrap().bundle);
    let fv = compute_features(&window(Archetype::Spike)).unwrap();
    c.bench_function("predict", |b| b.iter(|| model.predict(black_box(&fv))));

    let mut short = cfg.clone();
    for s in &mut short.scenarios {
        if let Some(spec) = s.synthetic.as_mut() {
            spec.duration_minutes = 120;
        }
    }
    let scenario = short.scenarios[0].clone();
    let mut group = c.benchmark_group("simulate/spike-120min");
    group.sample_size(10);
    for kind in [StrategyKind::Hpa, StrategyKind::Predictive, StrategyKind::Aapa] {
        group.bench_function(kind.to_string(), |b| {
            b.iter(|| experiment::simulate_one(&short, &scenario, kind, 0, Some(&model)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, features, labeling, classify_and_simulate);
criterion_main!(benches);
