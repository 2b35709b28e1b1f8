use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use footlab_core::forest::Classifier;
use footlab_core::pipeline::har_train;
use footlab_core::synth::{activity_training_set, DEMO_CLASSES};
use footlab_core::ForestParams;

fn forest(c: &mut Criterion) {
    let training = activity_training_set(&DEMO_CLASSES, 4, 20, 1).unwrap();
    let params = ForestParams::default();
    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("train_320x234", |b| b.iter(|| har_train(black_box(&training), 30, &params).unwrap()));
    let model = har_train(&training, 30, &params).unwrap();
    group.bench_function("predict_320", |b| {
        b.iter(|| training.iter().map(|v| model.predict(black_box(v)).unwrap()).count())
    });
    group.finish();
}

criterion_group!(benches, forest);
criterion_main!(benches);
