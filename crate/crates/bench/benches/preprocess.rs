use criterion::{criterion_group, criterion_main, Criterion};
use segkit::volume::{normalize, Resample};
use segkit_bench::ct_volume;

fn preprocess(c: &mut Criterion) {
    let v = ct_volume([96, 96, 40], [0.8, 0.8, 5.0], 7);
    c.bench_function("resample_96x96x40_to_1x1x3", |b| b.iter(|| v.resample([1.0, 1.0, 3.0]).unwrap()));
    c.bench_function("normalize_ct_96x96x40", |b| b.iter(|| normalize(&v)));
}

criterion_group!(benches, preprocess);
criterion_main!(benches);
