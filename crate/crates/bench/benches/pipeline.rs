use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use cuechord_bench::{cut_times, synthetic_score};
use cuechord_core::boundary::{offsets_for_sequence, BoundaryList, SchedulerParams};
use cuechord_core::codec::{decode_events, encode_events};
use cuechord_core::emotion::VaPoint;
use cuechord_core::generate::{generate, ReferenceModel, SamplingParams};

fn codec(c: &mut Criterion) {
    let score = synthetic_score(180, 1);
    let tokens = encode_events(&score);
    c.bench_function("encode_3min", |b| b.iter(|| encode_events(black_box(&score))));
    c.bench_function("decode_3min", |b| b.iter(|| decode_events(black_box(&tokens))));
}

fn offsets(c: &mut Criterion) {
    let tokens = encode_events(&synthetic_score(180, 2));
    let boundaries = BoundaryList::from_seconds(&cut_times(180, 4.5)).unwrap();
    let params = SchedulerParams::default();
    c.bench_function("offsets_3min", |b| {
        b.iter(|| offsets_for_sequence(black_box(&tokens), &boundaries, &params))
    });
}

fn generation(c: &mut Criterion) {
    let boundaries = BoundaryList::from_seconds(&cut_times(60, 5.0)).unwrap();
    let sampling = SamplingParams::default();
    let params = SchedulerParams::default();
    let va = VaPoint::new(Some(0.5), Some(0.3));
    c.bench_function("generate_reference_60s", |b| {
        b.iter(|| {
            let mut model = ReferenceModel::default();
            generate(&mut model, va, boundaries.clone(), 60.0, &sampling, &params).unwrap()
        })
    });
}

criterion_group!(benches, codec, offsets, generation);
criterion_main!(benches);
