use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tdf_bench::{codebook, descriptors, gmm, sequence, signal};
use tdf_core::{
    average_pool, dft_magnitude, fisher_encode, llc_pool, naive_dft_reference,
    spectrum_of_sequence, vlad_encode, LlcParams, Normalization,
};

fn spectra(c: &mut Criterion) {
    let mut group = c.benchmark_group("dft_magnitude");
    // a power of two and a prime length
    for n in [256usize, 257, 4096] {
        let x = signal(n, 1);
        group.bench_with_input(BenchmarkId::new("fft", n), &x, |b, x| {
            b.iter(|| dft_magnitude(black_box(x)).unwrap())
        });
    }
    let x = signal(257, 1);
    group.bench_function("naive/257", |b| {
        b.iter(|| naive_dft_reference(black_box(&x)).unwrap())
    });
    group.finish();

    let seq = sequence(300, 64, 2);
    c.bench_function("spectrum_of_sequence/300x64/L500", |b| {
        b.iter(|| spectrum_of_sequence(black_box(&seq), 500).unwrap())
    });
}

fn encoders(c: &mut Criterion) {
    let d = 64;
    let set = descriptors(500, d, 3);
    let mut group = c.benchmark_group("encode/500x64");
    group.bench_function("average", |b| {
        b.iter(|| average_pool(black_box(&set)).unwrap())
    });
    let cb = codebook(256, d, 4);
    group.bench_function("llc/K256", |b| {
        b.iter(|| llc_pool(&cb, &LlcParams::default(), black_box(&set)).unwrap())
    });
    let mixture = gmm(16, d, 5);
    group.bench_function("fv/K16", |b| {
        b.iter(|| fisher_encode(&mixture, black_box(&set), Normalization::SignedSqrtL2).unwrap())
    });
    let words = codebook(16, d, 6);
    group.bench_function("vlad/K16", |b| {
        b.iter(|| vlad_encode(&words, black_box(&set), Normalization::SignedSqrtL2).unwrap())
    });
    group.finish();
}

criterion_group!(benches, spectra, encoders);
criterion_main!(benches);
