//! The two-inclusion experiment: data simulated on a fine mesh resolving the
//! inclusions, reconstructions on aligned and non-aligned pixel meshes.

use std::sync::Arc;
use std::time::Instant;

use calderon_core::fem::{BoundaryBasis, CmBackend, Conductivity, FemSystem};
use calderon_core::reversion::reconstruct_from_increment;
use serde::Serialize;

use crate::descriptor::{MeshVariant, RunDescriptor};
use crate::error::CliResult;
use crate::geometry::{Geometry, Phantom};
use crate::output::{csv, OutDir};
use crate::pipeline::{pixel_mesh, simulate_cm, write_reconstruction, ReconstructionReport};

#[derive(Debug, Clone, Serialize)]
pub struct VariantReport {
    pub variant: MeshVariant,
    #[serde(flatten)]
    pub reconstruction: ReconstructionReport,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhantomReport {
    pub geometry: Geometry,
    pub data_h: f64,
    pub data_triangles: usize,
    pub data_dofs: usize,
    #[serde(skip)]
    pub simulation_seconds: f64,
    pub variants: Vec<VariantReport>,
}

impl PhantomReport {
    pub fn variant(&self, v: MeshVariant) -> Option<&VariantReport> {
        self.variants.iter().find(|r| r.variant == v)
    }
}

pub fn run_phantom(desc: &RunDescriptor, out: &OutDir) -> CliResult<PhantomReport> {
    let geometry = Geometry::Phantom(Phantom::from_kind(desc.phantom));
    let degree = desc.element_degree()?;
    let start = Instant::now();
    let data = simulate_cm(&geometry, desc.mesh_h, degree, desc.basis_size)?;
    let increment = data.increment();
    let simulation_seconds = start.elapsed().as_secs_f64();

    let mut variants = Vec::new();
    for &variant in &desc.variants {
        let start = Instant::now();
        let pixels = pixel_mesh(
            &geometry,
            variant,
            desc.recon_h,
            desc.refine_levels,
            degree,
            desc.omega_radius,
        )?;
        let system = Arc::new(FemSystem::assemble(pixels.fine.clone(), &Conductivity::Uniform(1.0))?);
        let basis = Arc::new(BoundaryBasis::trigonometric(&pixels.fine, desc.basis_size)?);
        let backend = CmBackend::new(system, basis, pixels.partition.clone())?;
        let result = reconstruct_from_increment(&backend, &increment, &desc.reversion)?;
        let dir = out.subdir(variant.dir_name())?;
        let reconstruction = write_reconstruction(&dir, Some(&geometry), &pixels, &result)?;
        variants.push(VariantReport {
            variant,
            reconstruction,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let mut rows = Vec::new();
    for v in &variants {
        let r = &v.reconstruction;
        for (k, e) in r.l2_errors.iter().enumerate() {
            let rel = r.relative_errors.as_ref().map_or(f64::NAN, |x| x[k]);
            let flag = f64::from(u8::from(v.variant == MeshVariant::NonAligned));
            rows.push(vec![flag, (k + 1) as f64, *e, rel]);
        }
    }
    out.write(
        "errors.csv",
        csv(&["non_aligned", "K", "l2_error", "relative_l2_error"], rows),
    )?;
    let report = PhantomReport {
        geometry,
        data_h: data.mesh.max_edge_length(),
        data_triangles: data.mesh.triangle_count(),
        data_dofs: data.mesh.dof_count(),
        simulation_seconds,
        variants,
    };
    out.write_json("summary.json", &report)?;
    Ok(report)
}
