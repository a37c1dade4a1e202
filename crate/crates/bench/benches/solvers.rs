use std::f64::consts::FRAC_1_SQRT_2;
use std::hint::black_box;
use std::sync::Arc;

use calderon_core::analytic::{error_sweep, logspace, SpanSelection};
use calderon_core::fem::{BoundaryBasis, CmBackend, Conductivity, FemSystem};
use calderon_core::mesh::{build_pixel_partition, generate_disk_mesh, CoefficientField, ElementDegree};
use calderon_core::reversion::reconstruct;
use calderon_core::ReversionConfig;
use criterion::{criterion_group, criterion_main, Criterion};

fn assembly(c: &mut Criterion) {
    let mesh = Arc::new(generate_disk_mesh(1.0, 0.05, ElementDegree::Quadratic).unwrap());
    c.bench_function("assemble_and_factor_h0.05_p2", |b| {
        b.iter(|| FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0)).unwrap())
    });
    let sys = FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0)).unwrap();
    let basis = BoundaryBasis::trigonometric(&mesh, 20).unwrap();
    c.bench_function("nd_matrix_J20", |b| {
        b.iter(|| sys.nd_matrix(black_box(&basis)).unwrap())
    });
}

fn reversion(c: &mut Criterion) {
    let mesh = Arc::new(generate_disk_mesh(1.0, 0.08, ElementDegree::Quadratic).unwrap());
    let part = Arc::new(build_pixel_partition(&mesh, 0.85, 40).unwrap());
    let sys = Arc::new(FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0)).unwrap());
    let basis = Arc::new(BoundaryBasis::trigonometric(&mesh, 12).unwrap());
    let backend = CmBackend::new(sys, basis.clone(), part.clone()).unwrap();
    let values: Vec<f64> = (0..part.count()).map(|i| 0.2 * ((i as f64) * 0.7).sin()).collect();
    let field = CoefficientField::from_real(part, &values).unwrap();
    let datum = FemSystem::assemble(mesh, &Conductivity::perturbed(1.0, &field))
        .unwrap()
        .nd_matrix(&basis)
        .unwrap();
    let config = ReversionConfig::with_order(4);
    c.bench_function("reversion_K4_cm", |b| {
        b.iter(|| reconstruct(&backend, black_box(&datum), &config).unwrap())
    });
}

fn analytic(c: &mut Criterion) {
    let deltas = logspace(1e-3, 1e-1, 12);
    let span = SpanSelection::new(vec![1, 2]).unwrap();
    c.bench_function("error_sweep_12x64", |b| {
        b.iter(|| error_sweep(FRAC_1_SQRT_2, &span, 4, black_box(&deltas), 64).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = assembly, reversion, analytic
}
criterion_main!(benches);
