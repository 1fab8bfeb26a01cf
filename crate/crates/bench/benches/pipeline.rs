use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::Vector3;
use shellvk::functional::a_squared_tan;
use shellvk::gammacheck::{build_ansatz, energy_3d};
use shellvk::geometry::Profile;
use shellvk::isometry::{bending_gram, extend_a, isometry_basis, Threshold};
use shellvk::membrane::solve_revolution_membrane;
use shellvk::{ElasticModuli, SurfaceChart, VectorField3};

fn ovalization(chart: &SurfaceChart) -> VectorField3 {
    VectorField3::from_fn(&chart.coords(), |u| {
        let (s, c) = u[1].sin_cos();
        let (s2, c2) = (2.0 * u[1]).sin_cos();
        Vector3::new(c, s, 0.0) * c2 - Vector3::new(-s, c, 0.0) * (0.5 * s2)
    })
}

fn isometries(c: &mut Criterion) {
    let mut g = c.benchmark_group("isometry_basis");
    g.sample_size(10);
    for n in [10usize, 14] {
        let chart = SurfaceChart::cylinder(1.0, 1.0, n, n + 1).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &chart, |b, chart| {
            b.iter(|| isometry_basis(black_box(chart), 24, Threshold::default()).unwrap())
        });
    }
    g.finish();
}

fn gram(c: &mut Criterion) {
    let chart = SurfaceChart::cylinder(1.0, 1.0, 14, 15).unwrap();
    let basis = isometry_basis(&chart, 24, Threshold::default()).unwrap();
    let m = ElasticModuli::new(1.0, 0.5).unwrap();
    c.bench_function("bending_gram/24", |b| b.iter(|| bending_gram(black_box(&chart), &basis.modes, &m).unwrap()));
}

fn membrane(c: &mut Criterion) {
    let mut g = c.benchmark_group("revolution_membrane");
    for n in [32usize, 64] {
        let chart = SurfaceChart::revolution(Profile::polynomial(vec![1.0, 0.0, 0.3]), [0.0, 1.0], n, n + 1).unwrap();
        let (a, _) = extend_a(&chart, &ovalization(&chart)).unwrap();
        let target = a_squared_tan(&chart, &a).unwrap().scaled(0.5);
        g.bench_with_input(BenchmarkId::from_parameter(n), &target, |b, t| {
            b.iter(|| solve_revolution_membrane(&chart, black_box(t), None).unwrap())
        });
    }
    g.finish();
}

fn recovery(c: &mut Criterion) {
    let m = ElasticModuli::new(1.0, 0.7).unwrap();
    let chart = SurfaceChart::cylinder(1.0, 1.0, 24, 17).unwrap();
    let v = ovalization(&chart);
    let w = VectorField3::zeros(chart.len());
    let ansatz = build_ansatz(&chart, &v, &w, 1.0, &m).unwrap();
    c.bench_function("energy_3d/cylinder_24x17", |b| b.iter(|| energy_3d(&ansatz, black_box(0.05), &m, 6).unwrap()));
}

criterion_group!(benches, isometries, gram, membrane, recovery);
criterion_main!(benches);
