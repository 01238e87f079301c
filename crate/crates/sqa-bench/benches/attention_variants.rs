//! Criterion microbenchmarks comparing attention variants at fixed width.
//!
//! Quick-turnaround complement to the CLI sweep: small sequence lengths,
//! f32 kernels. Run with `cargo bench -p sqa-bench`.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sqa_bench::{seeded_input_f32, seeded_params_f32, variant_configs, D_MODEL, H};
use sqa_core::{build_mask, sqa_forward, AttentionConfig, MaskMode};

fn bench_forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_f32");
    group.sample_size(10);
    for n in [256usize, 1024] {
        let x = seeded_input_f32(n, 7);
        for (name, cfg) in variant_configs() {
            let params = seeded_params_f32(&cfg, 11);
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| black_box(sqa_forward(&x, &params, &cfg).unwrap()));
            });
        }
    }
    group.finish();
}

fn bench_masks(c: &mut Criterion) {
    let mut group = c.benchmark_group("masked_forward_f32");
    group.sample_size(10);
    let n = 1024usize;
    let x = seeded_input_f32(n, 7);
    let masks = [
        ("none", MaskMode::None),
        ("causal", MaskMode::Causal),
        ("sliding128", MaskMode::Sliding(128)),
    ];
    for (name, mask) in masks {
        let cfg = AttentionConfig::new(D_MODEL, H, 8, 4)
            .unwrap()
            .with_mask(mask)
            .unwrap();
        let params = seeded_params_f32(&cfg, 11);
        group.bench_function(name, |b| {
            b.iter(|| black_box(sqa_forward(&x, &params, &cfg).unwrap()));
        });
    }
    group.finish();
}

fn bench_mask_build(c: &mut Criterion) {
    c.bench_function("build_mask_causal_2048", |b| {
        b.iter(|| black_box(build_mask::<f32>(MaskMode::Causal, 2048).unwrap()));
    });
}

criterion_group!(benches, bench_forward, bench_masks, bench_mask_build);
criterion_main!(benches);
