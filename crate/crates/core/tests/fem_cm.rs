use std::sync::Arc;

use calderon_core::analytic::{dlambda_eigenvalue, nd_eigenvalue, ConcentricPerturbation};
use calderon_core::fem::{BoundaryBasis, Conductivity, FemSystem};
use calderon_core::mesh::{
    build_pixel_partition, concentric_partition, generate_disk_mesh, CoefficientField, DiskMeshBuilder, ElementDegree,
    Mesh, PixelPartition,
};
use calderon_core::{Error, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn concentric_mesh(h: f64, rho: f64) -> Arc<Mesh> {
    Arc::new(
        DiskMeshBuilder::new(1.0, h)
            .degree(ElementDegree::Quadratic)
            .constrain_circle(rho)
            .build()
            .unwrap(),
    )
}

fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn unit_disk_spectrum() {
    let mesh = Arc::new(generate_disk_mesh(1.0, 0.05, ElementDegree::Quadratic).unwrap());
    let sys = FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0)).unwrap();
    let basis = BoundaryBasis::trigonometric(&mesh, 6).unwrap();
    let nd = sys.nd_matrix(&basis).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            let z = nd.entries[(i, j)];
            if i == j {
                let expect = 1.0 / (i / 2 + 1) as f64;
                assert!((z.re - expect).abs() < 0.01 * expect, "({i},{i}) = {z}");
            } else {
                assert!(z.norm() <= 1e-3, "({i},{j}) = {z}");
            }
        }
    }
    assert!(nd.asymmetry() < 1e-10);
}

#[test]
fn zero_concentric_perturbation_changes_nothing() {
    let mesh = concentric_mesh(0.08, 0.3);
    let part = Arc::new(concentric_partition(&mesh, 0.3).unwrap());
    let basis = BoundaryBasis::trigonometric(&mesh, 4).unwrap();
    let field = CoefficientField::from_real(part, &[0.0, 0.0]).unwrap();
    let a = FemSystem::assemble(mesh.clone(), &Conductivity::perturbed(1.0, &field)).unwrap();
    let b = FemSystem::assemble(mesh, &Conductivity::Uniform(1.0)).unwrap();
    assert_eq!(a.nd_matrix(&basis).unwrap(), b.nd_matrix(&basis).unwrap());
}

#[test]
fn concentric_eigenvalue_and_derivative_entries() {
    let rho = 0.3;
    let mesh = concentric_mesh(0.04, rho);
    let part = Arc::new(concentric_partition(&mesh, rho).unwrap());
    let basis = BoundaryBasis::trigonometric(&mesh, 4).unwrap();

    let field = CoefficientField::from_real(part.clone(), &[0.0, 1.0]).unwrap();
    let sys = FemSystem::assemble(mesh.clone(), &Conductivity::perturbed(1.0, &field)).unwrap();
    let nd = sys.nd_matrix(&basis).unwrap();
    let exact = nd_eigenvalue(&ConcentricPerturbation::new(0.0, 1.0, rho).unwrap(), 1).unwrap();
    assert!((exact - 2.91 / 3.09).abs() < 1e-15);
    for k in 0..2 {
        assert!((nd.entries[(k, k)].re - exact).abs() < 0.005 * exact);
    }

    let sys = FemSystem::assemble(mesh, &Conductivity::Uniform(1.0)).unwrap();
    let dl = sys.dlambda_matrix(&basis, &part).unwrap();
    let disk = dl.block(1);
    let annulus = dl.block(0);
    let d_disk = dlambda_eigenvalue([c(0.0), c(1.0)], rho, 1).unwrap().re;
    let d_ann = dlambda_eigenvalue([c(1.0), c(0.0)], rho, 2).unwrap().re;
    assert!((d_disk + 0.09).abs() < 1e-15);
    assert!((d_ann + 0.49595).abs() < 1e-12);
    assert!((disk[(0, 0)].re - d_disk).abs() < 0.02 * d_disk.abs());
    assert!((annulus[(2, 2)].re - d_ann).abs() < 0.02 * d_ann.abs());
}

#[test]
fn empty_partition_is_rejected() {
    let mesh = generate_disk_mesh(1.0, 0.3, ElementDegree::Linear).unwrap();
    let none = vec![None; mesh.triangle_count()];
    let part = PixelPartition::new(&mesh, none.clone(), 0).unwrap();
    let mesh = Arc::new(mesh);
    let sys = FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0)).unwrap();
    let basis = BoundaryBasis::trigonometric(&mesh, 2).unwrap();
    assert!(matches!(
        sys.dlambda_matrix(&basis, &part),
        Err(Error::InvalidArgument(_))
    ));
}

struct Fixture {
    mesh: Arc<Mesh>,
    part: Arc<PixelPartition>,
    basis: BoundaryBasis,
    sys: FemSystem,
}

fn fixture() -> Fixture {
    let mesh = Arc::new(generate_disk_mesh(1.0, 0.1, ElementDegree::Quadratic).unwrap());
    let part = Arc::new(build_pixel_partition(&mesh, 0.85, 12).unwrap());
    let basis = BoundaryBasis::trigonometric(&mesh, 6).unwrap();
    let sys = FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0)).unwrap();
    Fixture { mesh, part, basis, sys }
}

#[test]
fn derivative_blocks_are_negative_semidefinite() {
    let f = fixture();
    let dl = f.sys.dlambda_matrix(&f.basis, &f.part).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let b: Vec<C64> = (0..f.part.count()).map(|_| c(rng.random::<f64>())).collect();
        let m = dl.apply(&b).unwrap();
        let herm = (&m + m.adjoint()) * c(0.5);
        let top = herm.symmetric_eigenvalues().max();
        assert!(top <= 1e-8, "largest eigenvalue {top}");
        let asym = frobenius(&(&m - m.transpose()));
        assert!(asym <= 1e-10 * frobenius(&m));
    }
}

#[test]
fn derivative_matches_difference_quotients() {
    let f = fixture();
    let dl = f.sys.dlambda_matrix(&f.basis, &f.part).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b: Vec<f64> = (0..f.part.count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let db = dl.apply(&b.iter().map(|&x| c(x)).collect::<Vec<_>>()).unwrap();
    let base = f.sys.nd_matrix(&f.basis).unwrap().entries;
    let errors: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&t| {
            let scaled: Vec<f64> = b.iter().map(|x| t * x).collect();
            let field = CoefficientField::from_real(f.part.clone(), &scaled).unwrap();
            let sys = FemSystem::assemble(f.mesh.clone(), &Conductivity::perturbed(1.0, &field)).unwrap();
            let fd = (sys.nd_matrix(&f.basis).unwrap().entries - &base) / c(t);
            frobenius(&(fd - &db))
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.8..=2.2).contains(&ratio), "ratio {ratio} from {errors:?}");
    }
}

#[test]
fn perturbation_operator_bound() {
    let f = fixture();
    let u = f.sys.basis_solutions(&f.basis).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for sample in 0..20 {
        let values: Vec<C64> = (0..f.part.count())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let field = CoefficientField::new(f.part.clone(), values).unwrap();
        let y = &u[sample % u.len()];
        let w = f.sys.apply_p_field(&field, std::slice::from_ref(y)).unwrap().remove(0);
        let bound = field.max_abs() / f.sys.coercivity() * f.sys.dirichlet_norm(y);
        assert!(f.sys.dirichlet_norm(&w) <= bound * (1.0 + 1e-10));
        assert!(f.sys.trace_mean(&w).norm() <= 1e-10);
        assert!(f.sys.p_residual(&field.per_triangle(), y, &w) < 1e-10);
    }
    for s in &u {
        assert!(f.sys.trace_mean(s).norm() <= 1e-10);
    }
}
