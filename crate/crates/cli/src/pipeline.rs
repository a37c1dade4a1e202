//! Shared steps of the FEM commands: data simulation on a fine mesh, pixel
//! meshes, reconstruction error and output files.

use std::sync::Arc;

use calderon_core::fem::{BoundaryBasis, Conductivity, FemSystem};
use calderon_core::mesh::{build_pixel_partition, concentric_partition, DiskMeshBuilder};
use calderon_core::scem::{ElectrodeLayout, ScemSystem};
use calderon_core::{ElementDegree, Mesh, NdMatrix, PixelPartition, ReversionResult, C64};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::descriptor::MeshVariant;
use crate::error::CliResult;
use crate::geometry::Geometry;
use crate::output::{csv, OutDir};
use crate::svg;

/// Background and perturbed matrices computed on one interface-resolving mesh.
pub struct SimulatedData {
    pub mesh: Arc<Mesh>,
    pub background: NdMatrix,
    pub perturbed: NdMatrix,
}

impl SimulatedData {
    /// `Λ(1 + B) − Λ(1)`; exactly zero when `B` vanishes.
    pub fn increment(&self) -> DMatrix<C64> {
        &self.perturbed.entries - &self.background.entries
    }
}

pub fn data_mesh(geometry: &Geometry, h: f64, degree: ElementDegree) -> CliResult<Arc<Mesh>> {
    Ok(Arc::new(
        geometry
            .constrain(DiskMeshBuilder::new(1.0, h).degree(degree))
            .build()?,
    ))
}

fn perturbed_conductivity(geometry: &Geometry, mesh: &Mesh) -> Conductivity {
    Conductivity::PerTriangle(geometry.per_triangle(mesh).iter().map(|b| 1.0 + b).collect())
}

/// Continuum-model matrices in the first `basis_size` trigonometric functions.
pub fn simulate_cm(geometry: &Geometry, h: f64, degree: ElementDegree, basis_size: usize) -> CliResult<SimulatedData> {
    let mesh = data_mesh(geometry, h, degree)?;
    let basis = BoundaryBasis::trigonometric(&mesh, basis_size)?;
    let background = FemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0))?.nd_matrix(&basis)?;
    let perturbed = FemSystem::assemble(mesh.clone(), &perturbed_conductivity(geometry, &mesh))?.nd_matrix(&basis)?;
    Ok(SimulatedData {
        mesh,
        background,
        perturbed,
    })
}

/// Electrode-model matrices for `layout`.
pub fn simulate_scem(
    geometry: &Geometry,
    h: f64,
    degree: ElementDegree,
    layout: &ElectrodeLayout,
) -> CliResult<SimulatedData> {
    let mesh = data_mesh(geometry, h, degree)?;
    let background =
        ScemSystem::assemble(mesh.clone(), &Conductivity::Uniform(1.0), layout.clone())?.electrode_matrix()?;
    let perturbed = ScemSystem::assemble(mesh.clone(), &perturbed_conductivity(geometry, &mesh), layout.clone())?
        .electrode_matrix()?;
    Ok(SimulatedData {
        mesh,
        background,
        perturbed,
    })
}

/// Pixels (coarse triangles) and the refined mesh the reconstruction solver
/// runs on.
pub struct PixelMesh {
    pub coarse: Mesh,
    pub coarse_partition: PixelPartition,
    pub fine: Arc<Mesh>,
    pub partition: Arc<PixelPartition>,
}

/// Phantom geometry: every coarse triangle with barycentre inside
/// `omega_radius` is a pixel, and the coarse mesh resolves the inclusions only
/// for [`MeshVariant::Aligned`]. Concentric geometry: the two concentric
/// pixels on a mesh of size `h / 2^refine_levels` resolving the circle.
pub fn pixel_mesh(
    geometry: &Geometry,
    variant: MeshVariant,
    h: f64,
    refine_levels: usize,
    degree: ElementDegree,
    omega_radius: f64,
) -> CliResult<PixelMesh> {
    if let Geometry::Concentric { rho, .. } = geometry {
        let fine_h = h / 2f64.powi(refine_levels as i32);
        let mesh = DiskMeshBuilder::new(1.0, fine_h)
            .degree(degree)
            .constrain_circle(*rho)
            .build()?;
        let partition = concentric_partition(&mesh, *rho)?;
        return Ok(PixelMesh {
            coarse: mesh.clone(),
            coarse_partition: partition.clone(),
            fine: Arc::new(mesh),
            partition: Arc::new(partition),
        });
    }
    let builder = DiskMeshBuilder::new(1.0, h).degree(degree);
    let builder = match variant {
        MeshVariant::Aligned => geometry.constrain(builder),
        MeshVariant::NonAligned => builder,
    };
    let coarse = builder.build()?;
    let coarse_partition = build_pixel_partition(&coarse, omega_radius, usize::MAX)?;
    let (fine, parent) = coarse.refine_uniform(refine_levels)?;
    let partition = Arc::new(PixelPartition::from_parent(&fine, &parent, &coarse_partition)?);
    Ok(PixelMesh {
        coarse,
        coarse_partition,
        fine: Arc::new(fine),
        partition,
    })
}

/// `‖B − Σ_{k≤K} F_k‖_{L²}` over the pixel region for each `K`, with `B`
/// sampled on `levels` further refinements of the coarse mesh. Also returns
/// `‖B‖_{L²}` on the same region.
pub fn region_errors(
    geometry: &Geometry,
    pixels: &PixelMesh,
    partial_sums: &[Vec<C64>],
    levels: usize,
) -> CliResult<(Vec<f64>, f64)> {
    let linear = pixels.coarse.with_degree(ElementDegree::Linear)?;
    let (eval, parent) = linear.refine_uniform(levels)?;
    let owner = pixels.coarse_partition.pixel_of_triangle();
    let mut err2 = vec![0.0; partial_sums.len()];
    let mut truth2 = 0.0;
    for t in 0..eval.triangle_count() {
        let Some(p) = owner[parent[t]] else { continue };
        let area = eval.triangle_area(t);
        let b = geometry.value_at(eval.barycentre(t));
        truth2 += area * b * b;
        for (k, s) in partial_sums.iter().enumerate() {
            err2[k] += area * (C64::new(b, 0.0) - s[p]).norm_sqr();
        }
    }
    Ok((err2.into_iter().map(f64::sqrt).collect(), truth2.sqrt()))
}

/// Per-pixel table of one term: centroid, area and value.
pub fn pixel_field_csv(pixels: &PixelMesh, values: &[C64]) -> String {
    let part = &pixels.coarse_partition;
    let mut centroid = vec![[0.0f64; 2]; part.count()];
    for (t, p) in part.pixel_of_triangle().iter().enumerate() {
        if let Some(p) = p {
            let a = pixels.coarse.triangle_area(t);
            let [x, y] = pixels.coarse.barycentre(t);
            centroid[*p][0] += a * x;
            centroid[*p][1] += a * y;
        }
    }
    let rows = (0..part.count()).map(|p| {
        let area = part.pixel_areas()[p];
        vec![
            p as f64,
            centroid[p][0] / area,
            centroid[p][1] / area,
            area,
            values[p].re,
            values[p].im,
        ]
    });
    csv(&["pixel", "x", "y", "area", "re", "im"], rows)
}

fn per_coarse_triangle(pixels: &PixelMesh, values: &[C64]) -> Vec<Option<f64>> {
    pixels
        .coarse_partition
        .pixel_of_triangle()
        .iter()
        .map(|p| p.map(|p| values[p].re))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub pixels: usize,
    pub coarse_h: f64,
    pub fe_triangles: usize,
    pub fe_dofs: usize,
    /// Empty when the truth is unknown (external datum).
    pub l2_errors: Vec<f64>,
    /// `None` when the truth is unknown or vanishes.
    pub relative_errors: Option<Vec<f64>>,
}

/// Writes terms, diagnostics, `F{k}.csv`, `sum_K{k}.svg` and, if the truth is
/// known, `truth.svg` and `errors.csv`.
pub fn write_reconstruction(
    dir: &OutDir,
    truth: Option<&Geometry>,
    pixels: &PixelMesh,
    result: &ReversionResult,
) -> CliResult<ReconstructionReport> {
    result.write_dir(dir.path())?;
    dir.write("mesh.txt", pixels.coarse.to_text())?;
    dir.write("pixels.txt", pixels.coarse_partition.to_text())?;

    let (mut lo, mut hi) = truth.map_or((0.0, 0.0), Geometry::value_range);
    for z in result.partial_sums.iter().flatten() {
        lo = lo.min(z.re);
        hi = hi.max(z.re);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let draw = |title: &str, values: &[Option<f64>]| {
        svg::triangle_map(
            title,
            pixels.coarse.vertices(),
            pixels.coarse.triangles(),
            values,
            (lo, hi),
        )
    };
    for (k, (term, sum)) in result.terms.iter().zip(&result.partial_sums).enumerate() {
        let k = k + 1;
        dir.write(&format!("F{k}.csv"), pixel_field_csv(pixels, term))?;
        let title = format!("F_1 + .. + F_{k}");
        dir.write(
            &format!("sum_K{k}.svg"),
            draw(&title, &per_coarse_triangle(pixels, sum)),
        )?;
    }

    let mut report = ReconstructionReport {
        pixels: pixels.partition.count(),
        coarse_h: pixels.coarse.max_edge_length(),
        fe_triangles: pixels.fine.triangle_count(),
        fe_dofs: pixels.fine.dof_count(),
        l2_errors: Vec::new(),
        relative_errors: None,
    };
    if let Some(geometry) = truth {
        let truth_values: Vec<Option<f64>> = pixels
            .coarse_partition
            .pixel_of_triangle()
            .iter()
            .enumerate()
            .map(|(t, p)| p.map(|_| geometry.value_at(pixels.coarse.barycentre(t))))
            .collect();
        dir.write("truth.svg", draw("B", &truth_values))?;
        let (l2, norm) = region_errors(geometry, pixels, &result.partial_sums, 1)?;
        let relative: Option<Vec<f64>> = (norm > 0.0).then(|| l2.iter().map(|e| e / norm).collect());
        let rows = l2.iter().enumerate().map(|(k, e)| {
            let rel = relative.as_ref().map_or(f64::NAN, |r| r[k]);
            vec![(k + 1) as f64, *e, rel]
        });
        dir.write("errors.csv", csv(&["K", "l2_error", "relative_l2_error"], rows))?;
        report.l2_errors = l2;
        report.relative_errors = relative;
    }
    Ok(report)
}
