use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use entv_core::entropy::{
    correlation_sum, covering_count, separated_count, CountMode, RecordMeta, SegmentFamily,
    TrajectoryRecord, WindowNorm,
};
use entv_core::kernels::{eval_kernel, CutoffProfile, KernelVariant};
use entv_core::linalg::Mat;
use entv_core::surrogate::tent_map_series;

fn scalar_record(len: usize) -> TrajectoryRecord {
    TrajectoryRecord::from_scalar_series(&tent_map_series(len, 1), 1.0, RecordMeta::default())
}

fn bench_pair_counting(c: &mut Criterion) {
    let mut group = c.benchmark_group("correlation_sum");
    let epsilons: Vec<f64> = (0..16).map(|i| 0.01 * 1.5f64.powi(i)).collect();
    for len in [256usize, 1024, 4096] {
        let record = scalar_record(len);
        group.bench_with_input(BenchmarkId::from_parameter(len), &record, |b, rec| {
            b.iter(|| correlation_sum(rec, &epsilons, 12, WindowNorm::Grid).unwrap())
        });
    }
    group.finish();
}

fn bench_kernel_quadrature(c: &mut Criterion) {
    let profile = CutoffProfile::SmoothExp;
    let cgl = Mat::from_rows(&[vec![1.0, -2.0], vec![2.0, 1.0]]).unwrap();
    let mut group = c.benchmark_group("eval_kernel");
    group.bench_function("full_1d_scalar", |b| {
        let d = Mat::from_rows(&[vec![1.0]]).unwrap();
        b.iter(|| eval_kernel(&d, 0.3, &[1.1], KernelVariant::Full, None, &profile).unwrap())
    });
    group.bench_function("high_1d_cgl", |b| {
        b.iter(|| {
            eval_kernel(&cgl, 0.05, &[0.7], KernelVariant::High, Some(4.0), &profile).unwrap()
        })
    });
    group.bench_function("full_2d_scalar", |b| {
        let d = Mat::from_rows(&[vec![1.0]]).unwrap();
        b.iter(|| {
            eval_kernel(&d, 0.3, &[0.8, 0.0], KernelVariant::Full, None, &profile).unwrap()
        })
    });
    group.finish();
}

fn bench_exact_counters(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Vec<f64>> = (0..20)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let family = SegmentFamily::from_points(1, points);
    let mut group = c.benchmark_group("exact_counters");
    group.bench_function("separated_20pts", |b| {
        b.iter(|| separated_count(&family, 0.4, CountMode::Exact).unwrap())
    });
    group.bench_function("covering_20pts", |b| {
        b.iter(|| covering_count(&family, 0.4, CountMode::Exact).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_pair_counting, bench_kernel_quadrature, bench_exact_counters);
criterion_main!(benches);
