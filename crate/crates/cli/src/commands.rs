//! `forward` and `reconstruct` for the three backends.

use std::sync::Arc;

use calderon_core::analytic::{
    nd_eigenvalue, real_basis_nd_matrix, ActiveParameters, ConcentricBackend, ConcentricPerturbation, SpanSelection,
};
use calderon_core::fem::{BoundaryBasis, CmBackend, Conductivity, FemSystem};
use calderon_core::reversion::{reconstruct, reconstruct_from_increment};
use calderon_core::scem::{ScemBackend, ScemSystem};
use calderon_core::{ForwardBackend, NdMatrix, ReversionResult};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::descriptor::{Backend, RunDescriptor};
use crate::error::{CliError, CliResult};
use crate::geometry::Geometry;
use crate::output::{csv, OutDir};
use crate::pipeline::{pixel_mesh, simulate_cm, simulate_scem, write_reconstruction, PixelMesh, ReconstructionReport};

#[derive(Debug, Clone, Serialize)]
pub struct ForwardReport {
    pub geometry: Geometry,
    pub matrix_size: usize,
    pub asymmetry: f64,
    pub triangles: Option<usize>,
    pub dofs: Option<usize>,
    pub mesh_h: Option<f64>,
}

fn concentric(geometry: &Geometry) -> CliResult<ConcentricPerturbation> {
    match geometry {
        Geometry::Concentric { rho, kappa } => Ok(ConcentricPerturbation::new(kappa[0], kappa[1], *rho)?),
        Geometry::Phantom(_) => Err(CliError::Usage(
            "the analytic backend needs the concentric geometry".into(),
        )),
    }
}

fn span(desc: &RunDescriptor) -> CliResult<SpanSelection> {
    SpanSelection::new(desc.span.clone()).map_err(|e| CliError::Usage(e.to_string()))
}

/// Writes the forward matrix: `nd.csv` (continuum and analytic backends) or
/// `electrode.csv` with `electrodes.json` (electrode backend). The analytic
/// backend also writes `datum.csv`, the span-restricted matrix accepted by
/// `reconstruct`.
pub fn run_forward(desc: &RunDescriptor, out: &OutDir) -> CliResult<ForwardReport> {
    let geometry = Geometry::from_descriptor(desc);
    let degree = desc.element_degree()?;
    let (matrix, mesh) = match desc.backend {
        Backend::Analytic => {
            let p = concentric(&geometry)?;
            let pairs = desc.basis_size.div_ceil(2);
            let rows = (1..=pairs as i32).map(|j| -> CliResult<Vec<f64>> { Ok(vec![j as f64, nd_eigenvalue(&p, j)?]) });
            out.write(
                "eigenvalues.csv",
                csv(&["j", "lambda"], rows.collect::<CliResult<Vec<_>>>()?),
            )?;
            let backend = ConcentricBackend::new(p.rho, span(desc)?, ActiveParameters::Both)?;
            out.write("datum.csv", backend.datum(&p)?.to_csv())?;
            (NdMatrix::new(real_basis_nd_matrix(&p, desc.basis_size)?)?, None)
        }
        Backend::Cm => {
            let data = simulate_cm(&geometry, desc.mesh_h, degree, desc.basis_size)?;
            (data.perturbed, Some(data.mesh))
        }
        Backend::Scem => {
            let layout = desc.electrode_layout()?;
            out.write("electrodes.json", layout.to_json()?)?;
            let data = simulate_scem(&geometry, desc.mesh_h, degree, &layout)?;
            (data.perturbed, Some(data.mesh))
        }
    };
    let name = if desc.backend == Backend::Scem {
        "electrode.csv"
    } else {
        "nd.csv"
    };
    out.write(name, matrix.to_csv())?;
    let report = ForwardReport {
        geometry,
        matrix_size: matrix.size(),
        asymmetry: matrix.asymmetry(),
        triangles: mesh.as_ref().map(|m| m.triangle_count()),
        dofs: mesh.as_ref().map(|m| m.dof_count()),
        mesh_h: mesh.as_ref().map(|m| m.max_edge_length()),
    };
    out.write_json("forward.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructReport {
    pub geometry: Geometry,
    /// Whether the datum was read from a file (truth unknown).
    pub external_datum: bool,
    pub reconstruction: Option<ReconstructionReport>,
    /// Real parts of `Σ_{k≤K} F_k` for the analytic backend.
    pub kappa_estimates: Option<Vec<Vec<f64>>>,
}

fn read_datum(desc: &RunDescriptor) -> CliResult<Option<NdMatrix>> {
    let Some(path) = &desc.datum else { return Ok(None) };
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    Ok(Some(NdMatrix::from_csv(&text)?))
}

/// An absolute datum is compared with the reconstruction backend's own
/// background; a simulated one is passed as the fine-mesh increment.
enum Datum {
    Absolute(NdMatrix),
    Increment(DMatrix<calderon_core::C64>),
}

fn invert<B: ForwardBackend>(backend: &B, datum: &Datum, desc: &RunDescriptor) -> CliResult<ReversionResult> {
    let config = desc.reversion_config();
    Ok(match datum {
        Datum::Absolute(m) => reconstruct(backend, m, &config)?,
        Datum::Increment(d) => reconstruct_from_increment(backend, d, &config)?,
    })
}

pub fn run_reconstruct(desc: &RunDescriptor, out: &OutDir) -> CliResult<ReconstructReport> {
    let geometry = Geometry::from_descriptor(desc);
    let external = read_datum(desc)?;
    let external_datum = external.is_some();
    let truth = (!external_datum).then_some(&geometry);

    if desc.backend == Backend::Analytic {
        let p = concentric(&geometry)?;
        let backend = ConcentricBackend::new(p.rho, span(desc)?, ActiveParameters::Both)?;
        let datum = match external {
            Some(m) => Datum::Absolute(m),
            None => Datum::Increment(backend.datum_increment(&p)?),
        };
        let result = invert(&backend, &datum, desc)?;
        result.write_dir(out.path())?;
        let estimates: Vec<Vec<f64>> = result
            .partial_sums
            .iter()
            .map(|s| s.iter().map(|z| z.re).collect())
            .collect();
        let rows = estimates
            .iter()
            .enumerate()
            .map(|(k, e)| vec![(k + 1) as f64, e[0], e[1], p.kappa1 - e[0], p.kappa2 - e[1]]);
        out.write(
            "kappa.csv",
            csv(&["K", "kappa1", "kappa2", "err_kappa1", "err_kappa2"], rows),
        )?;
        let report = ReconstructReport {
            geometry,
            external_datum,
            reconstruction: None,
            kappa_estimates: Some(estimates),
        };
        out.write_json("reconstruct.json", &report)?;
        return Ok(report);
    }

    let degree = desc.element_degree()?;
    let variant = desc
        .variants
        .first()
        .copied()
        .unwrap_or(crate::descriptor::MeshVariant::Aligned);
    let pixels: PixelMesh = pixel_mesh(
        &geometry,
        variant,
        desc.recon_h,
        desc.refine_levels,
        degree,
        desc.omega_radius,
    )?;
    let result = match desc.backend {
        Backend::Cm => {
            let system = Arc::new(FemSystem::assemble(pixels.fine.clone(), &Conductivity::Uniform(1.0))?);
            let basis = Arc::new(BoundaryBasis::trigonometric(&pixels.fine, desc.basis_size)?);
            let backend = CmBackend::new(system, basis, pixels.partition.clone())?;
            let datum = match external {
                Some(m) => Datum::Absolute(m),
                None => Datum::Increment(simulate_cm(&geometry, desc.mesh_h, degree, desc.basis_size)?.increment()),
            };
            invert(&backend, &datum, desc)?
        }
        _ => {
            let layout = desc.electrode_layout()?;
            out.write("electrodes.json", layout.to_json()?)?;
            let system = Arc::new(ScemSystem::assemble(
                pixels.fine.clone(),
                &Conductivity::Uniform(1.0),
                layout.clone(),
            )?);
            let backend = ScemBackend::new(system, pixels.partition.clone())?;
            let datum = match external {
                Some(m) => Datum::Absolute(m),
                None => Datum::Increment(simulate_scem(&geometry, desc.mesh_h, degree, &layout)?.increment()),
            };
            invert(&backend, &datum, desc)?
        }
    };
    let reconstruction = write_reconstruction(out, truth, &pixels, &result)?;
    let report = ReconstructReport {
        geometry,
        external_datum,
        reconstruction: Some(reconstruction),
        kappa_estimates: None,
    };
    out.write_json("reconstruct.json", &report)?;
    Ok(report)
}
