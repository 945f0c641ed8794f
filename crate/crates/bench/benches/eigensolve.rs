use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use groupsync::{generate_od, generate_pm, top_d_eigenpairs, EigenOptions};

fn eigensolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("top_d_eigenpairs");
    group.sample_size(10);
    let opts = EigenOptions::default();
    for n in [100, 300, 600] {
        let od = generate_od(n, 3, 0.2 * (n as f64 / 3.0).sqrt(), 1, false).unwrap();
        group.bench_with_input(BenchmarkId::new("od_d3", n), &od.observed, |b, a| {
            b.iter(|| top_d_eigenpairs(a, &opts).unwrap())
        });
        let pm = generate_pm(n, 5, 0.5, 1, false).unwrap();
        group.bench_with_input(BenchmarkId::new("pm_d5", n), &pm.observed, |b, a| {
            b.iter(|| top_d_eigenpairs(a, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigensolve);
criterion_main!(benches);
