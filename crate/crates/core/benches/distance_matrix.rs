use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use randers_core::boundary::{distance_matrix, sample_boundary, MatrixOptions};
use randers_core::expr::Expr;
use randers_core::parallel::Execution;
use randers_core::{Domain, MetricField, OneForm, RandersSpec, ScalarField};
use std::hint::black_box;

fn bench(c: &mut Criterion) {
    let d = Domain::unit_disk();
    let speed = ScalarField::Expr(Expr::parse("2 - r").unwrap());
    let spec = RandersSpec::new(
        d,
        MetricField::Conformal { speed },
        OneForm::Gradient(ScalarField::Bump {
            amplitude: 0.1,
            radius: 1.0,
        }),
    )
    .unwrap();
    let mut group = c.benchmark_group("distance_matrix");
    group.sample_size(10);
    for n in [8, 16] {
        let pts = sample_boundary(&d, n).unwrap();
        for (name, exec) in [("serial", Execution::Serial), ("parallel", Execution::Parallel)] {
            let opts = MatrixOptions::for_radius(1.0).with_execution(exec);
            group.bench_with_input(BenchmarkId::new(name, n), &pts, |b, pts| {
                b.iter(|| distance_matrix(black_box(&spec), pts, &opts).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
