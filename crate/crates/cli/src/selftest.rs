//! Reduced invariant suite over all modules. Every check is seeded and sized
//! to run in seconds; the report text is deterministic.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use calderon_core::analytic::{
    apply_p_eta, error_sweep, linspace, loglog_slope, logspace, measured_mode, nd_eigenvalue, nd_increment,
    neumann_mode, single_parameter_curves, ActiveParameters, ConcentricBackend, ConcentricPerturbation, ModeTriple,
    SpanSelection,
};
use calderon_core::fem::{BoundaryBasis, Conductivity, FemSystem};
use calderon_core::mesh::{build_pixel_partition, generate_disk_mesh, CoefficientField};
use calderon_core::reversion::{apply_contrast_cutoff, reconstruct_from_increment, HigherOrderMethod};
use calderon_core::scem::{ElectrodeLayout, ScemSystem};
use calderon_core::{ElementDegree, ReversionConfig, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
        }
        out.push_str(&format!(
            "{} of {} checks passed\n",
            self.checks.len() - self.failures(),
            self.checks.len()
        ));
        out
    }
}

type Outcome = Result<(bool, String), calderon_core::Error>;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `P(η)` on a mode, with the sign of the `β` output flipped under `fault`.
fn p_eta(eta: [C64; 2], rho: f64, m: &ModeTriple, fault: bool) -> ModeTriple {
    let mut out = apply_p_eta(eta, rho, m);
    if fault {
        out.beta = -out.beta;
    }
    out
}

fn transmission(rng: &mut ChaCha8Rng, fault: bool) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let j: i32 = rng.random_range(1..=6) * if rng.random_bool(0.5) { 1 } else { -1 };
        let rho: f64 = rng.random_range(0.1..0.95);
        let eta = [c(rng.random_range(-3.0..3.0)), c(rng.random_range(-3.0..3.0))];
        let alpha = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let beta = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * rho.powi(2 * j.abs());
        let m = ModeTriple {
            j,
            alpha,
            beta,
            gamma: alpha + beta * rho.powi(-2 * j.abs()),
        };
        let out = p_eta(eta, rho, &m, fault);
        let scale = (out.alpha.norm() + out.beta.norm() * rho.powi(-2 * j.abs()) + out.gamma.norm()).max(1.0);
        worst = worst.max(out.transmission_defect(rho) / scale);
    }
    Ok((
        worst <= 1e-12,
        format!("max relative defect {worst:.3e} over 200 modes"),
    ))
}

fn neumann_series(fault: bool) -> Outcome {
    let mut worst: f64 = 0.0;
    for (k1, k2, rho, j) in [(0.2, -0.1, 0.3, 1), (-0.25, 0.2, 0.6, 2), (0.1, 0.25, 0.5, 3)] {
        let mut m = neumann_mode(j)?;
        let mut total = measured_mode(&m);
        for _ in 0..40 {
            m = p_eta([c(k1), c(k2)], rho, &m, fault);
            total += measured_mode(&m);
        }
        let p = ConcentricPerturbation::new(k1, k2, rho)?;
        worst = worst.max((total.re - nd_eigenvalue(&p, j)?).abs());
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.3e}")))
}

fn increment_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k1, k2, rho) in [(0.3, -0.2, 0.4), (1e-6, 2e-6, 0.7), (-0.5, 1.0, FRAC_1_SQRT_2)] {
        let p = ConcentricPerturbation::new(k1, k2, rho)?;
        for j in 1..=4 {
            let diff = nd_eigenvalue(&p, j)? - 1.0 / j as f64;
            worst = worst.max((nd_increment(&p, j)? - diff).abs());
        }
    }
    Ok((worst <= 1e-14, format!("max |increment − difference| {worst:.3e}")))
}

fn reversion_routes() -> Outcome {
    let rho = FRAC_1_SQRT_2;
    let backend = ConcentricBackend::new(rho, SpanSelection::first(2)?, ActiveParameters::Both)?;
    let inc = backend.datum_increment(&ConcentricPerturbation::new(-0.2, 0.3, rho)?)?;
    let run = |m: HigherOrderMethod| {
        let cfg = ReversionConfig {
            method: m,
            experimental_general_recursion: m == HigherOrderMethod::Recursion,
            ..ReversionConfig::default()
        };
        reconstruct_from_increment(&backend, &inc, &cfg)
    };
    let p = run(HigherOrderMethod::Pipeline)?;
    let mut worst: f64 = 0.0;
    for other in [run(HigherOrderMethod::ClosedForm)?, run(HigherOrderMethod::Recursion)?] {
        for (a, b) in p.terms.iter().zip(&other.terms) {
            let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            worst = worst.max(norm(&d) / norm(a).max(1e-300));
        }
    }
    Ok((worst <= 1e-12, format!("max relative gap {worst:.3e}")))
}

fn cutoff() -> Outcome {
    let prev = [c(0.2), c(0.0), c(0.3)];
    let sum = [c(0.25), c(0.05), c(-0.5)];
    let out = apply_contrast_cutoff(&sum, &prev, 0.1);
    let expect = [c(0.05), c(0.0), c(-0.8)];
    let err = out.iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok((err <= 1e-15, format!("max deviation {err:.3e}")))
}

fn sweep_slopes() -> Outcome {
    let deltas = logspace(1e-3, 1e-1, 6);
    let rows = error_sweep(FRAC_1_SQRT_2, &SpanSelection::first(2)?, 4, &deltas, 16)?;
    let mut slopes = Vec::new();
    for k in 1..=4 {
        let e: Vec<f64> = rows.iter().filter(|r| r.order == k).map(|r| r.err).collect();
        slopes.push(loglog_slope(&deltas, &e)?);
    }
    let ok = slopes
        .iter()
        .enumerate()
        .all(|(k, s)| (k as f64 + 1.75..=k as f64 + 2.25).contains(s));
    let text: Vec<String> = slopes.iter().map(|s| format!("{s:.3}")).collect();
    Ok((ok, format!("slopes [{}]", text.join(", "))))
}

fn single_parameter() -> Outcome {
    let grid = linspace(-0.5, 1.0, 31);
    let mut ok = true;
    let mut parts = Vec::new();
    for active in [ActiveParameters::AnnulusOnly, ActiveParameters::DiskOnly] {
        let curves = single_parameter_curves(0.3, active, &grid, 4)?;
        let worst: Vec<f64> = (0..4)
            .map(|k| curves.iter().map(|(_, e)| e[k].abs()).fold(0.0, f64::max))
            .collect();
        ok &= worst.windows(2).all(|w| w[1] < w[0]);
        parts.push(format!("{:.3e}..{:.3e}", worst[0], worst[3]));
    }
    Ok((ok, format!("max error K=1..4: annulus {}, disk {}", parts[0], parts[1])))
}

fn mesh_partition() -> Outcome {
    let mesh = generate_disk_mesh(1.0, 0.1, ElementDegree::Quadratic)?;
    let part = build_pixel_partition(&mesh, 0.85, 100)?;
    let claimed: f64 = part
        .pixel_of_triangle()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_some())
        .map(|(t, _)| mesh.triangle_area(t))
        .sum();
    let areas: f64 = part.pixel_areas().iter().sum();
    let (fine, _) = mesh.refine_uniform(1)?;
    let total: f64 = mesh.triangle_areas().iter().sum();
    let refined: f64 = fine.triangle_areas().iter().sum();
    let gap = (claimed - areas).abs();
    let ok = gap <= 1e-12 && refined >= total && (refined - PI).abs() < (total - PI).abs();
    Ok((ok, format!("{} pixels, area gap {gap:.3e}", part.count())))
}

fn unit_disk_spectrum() -> Outcome {
    let mesh = Arc::new(generate_disk_mesh(1.0, 0.1, ElementDegree::Quadratic)?);
    let sys = FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0))?;
    let nd = sys.nd_matrix(&BoundaryBasis::trigonometric(&mesh, 6)?)?;
    let mut diag: f64 = 0.0;
    let mut off: f64 = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            let z = nd.entries[(i, j)];
            if i == j {
                let f = (i / 2 + 1) as f64;
                diag = diag.max((z.re * f - 1.0).abs());
            } else {
                off = off.max(z.norm());
            }
        }
    }
    Ok((
        diag <= 0.02 && off <= 1e-3,
        format!("max |j·λ − 1| {diag:.3e}, max off-diagonal {off:.3e}"),
    ))
}

fn cm_derivative(rng: &mut ChaCha8Rng) -> Outcome {
    let mesh = Arc::new(generate_disk_mesh(1.0, 0.15, ElementDegree::Quadratic)?);
    let part = Arc::new(build_pixel_partition(&mesh, 0.85, 8)?);
    let basis = BoundaryBasis::trigonometric(&mesh, 4)?;
    let sys = FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0))?;
    let dl = sys.dlambda_matrix(&basis, &part)?;
    let b: Vec<f64> = (0..part.count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let db = dl.apply(&b.iter().map(|&x| c(x)).collect::<Vec<_>>())?;
    let base = sys.nd_matrix(&basis)?.entries;
    let mut errors = Vec::new();
    for t in [1e-2, 5e-3, 2.5e-3] {
        let scaled: Vec<f64> = b.iter().map(|x| t * x).collect();
        let field = CoefficientField::from_real(part.clone(), &scaled)?;
        let nd = FemSystem::assemble(mesh.clone(), &Conductivity::perturbed(1.0, &field))?.nd_matrix(&basis)?;
        errors.push(frobenius(&((nd.entries - &base) / c(t) - &db)));
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|r| (1.8..=2.2).contains(r));
    Ok((ok, format!("ratios {:.3}, {:.3}", ratios[0], ratios[1])))
}

fn cm_bound(rng: &mut ChaCha8Rng) -> Outcome {
    let mesh = Arc::new(generate_disk_mesh(1.0, 0.15, ElementDegree::Quadratic)?);
    let sys = FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0))?;
    let u = sys.basis_solutions(&BoundaryBasis::trigonometric(&mesh, 4)?)?;
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let b: Vec<C64> = (0..mesh.triangle_count())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let y = &u[k % u.len()];
        let w = sys.apply_p(&b, std::slice::from_ref(y))?.remove(0);
        let max_b = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(sys.dirichlet_norm(&w) / (max_b / sys.coercivity() * sys.dirichlet_norm(y)));
    }
    Ok((worst <= 1.0 + 1e-10, format!("max ‖P(b)y‖ / bound {worst:.4}")))
}

fn scem_checks(rng: &mut ChaCha8Rng) -> Result<[(&'static str, bool, String); 2], calderon_core::Error> {
    let mesh = Arc::new(generate_disk_mesh(1.0, 0.15, ElementDegree::Quadratic)?);
    let layout = ElectrodeLayout::equally_spaced(6, 0.5, 0.5, 2.0 * PI)?;
    let sys = ScemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0), layout)?;
    let e = sys.electrode_matrix()?;
    let asym = e.asymmetry();
    let y = sys.basis_solutions()?;
    let mut worst: f64 = 0.0;
    let mut gauge: f64 = 0.0;
    for k in 0..5 {
        let b: Vec<C64> = (0..mesh.triangle_count())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let yk = &y[k % y.len()];
        let w = sys.apply_p_e(&b, std::slice::from_ref(yk))?.remove(0);
        let max_b = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(sys.h_norm(&w) / (max_b / sys.coercivity() * sys.h_norm(yk)));
        gauge = gauge.max(w.potentials.iter().sum::<C64>().norm());
    }
    Ok([
        ("scem-symmetry", asym <= 1e-8, format!("asymmetry {asym:.3e}")),
        (
            "scem-p-bound",
            worst <= 1.0 + 1e-10 && gauge <= 1e-12,
            format!("max ‖P_E(b)y‖ / bound {worst:.4}, gauge {gauge:.3e}"),
        ),
    ])
}

fn determinism() -> Outcome {
    let run = || -> calderon_core::Result<_> {
        let mesh = Arc::new(generate_disk_mesh(1.0, 0.15, ElementDegree::Quadratic)?);
        let part = Arc::new(build_pixel_partition(&mesh, 0.85, 6)?);
        let field = CoefficientField::from_real(part, &[0.1, -0.2, 0.3, 0.0, 0.2, 0.1])?;
        let sys = FemSystem::assemble(mesh.clone(), &Conductivity::perturbed(1.0, &field))?;
        sys.nd_matrix(&BoundaryBasis::trigonometric(&mesh, 4)?)
    };
    let (a, b) = (run()?, run()?);
    Ok((a == b, "repeated assembly and solve are bitwise equal".to_string()))
}

pub fn run_selftest(seed: u64, fault: bool) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut push = |name: &'static str, outcome: Outcome| {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        checks.push(CheckResult { name, passed, detail });
    };
    push("transmission", transmission(&mut rng, fault));
    push("neumann-series", neumann_series(fault));
    push("increment-consistency", increment_consistency());
    push("reversion-routes", reversion_routes());
    push("contrast-cutoff", cutoff());
    push("sweep-slopes", sweep_slopes());
    push("single-parameter-improvement", single_parameter());
    push("mesh-partition", mesh_partition());
    push("cm-unit-disk-spectrum", unit_disk_spectrum());
    push("cm-derivative-fd", cm_derivative(&mut rng));
    push("cm-p-bound", cm_bound(&mut rng));
    match scem_checks(&mut rng) {
        Ok(results) => {
            for (name, passed, detail) in results {
                push(name, Ok((passed, detail)));
            }
        }
        Err(e) => push("scem", Err(e)),
    }
    push("determinism", determinism());
    SelftestReport { checks }
}
