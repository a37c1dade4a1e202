//! Boundary quadrature and orthonormal boundary current bases.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::space::edge_shape_values;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::gauss_legendre;

/// Gauss points per boundary panel.
pub const BOUNDARY_GAUSS_POINTS: usize = 8;

/// Composite Gauss rule on the boundary loop, integrating in the boundary
/// parameter `t`.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    /// Boundary edge of each node.
    pub edge: Vec<usize>,
    /// Local edge coordinate in `[0, 1]`.
    pub s: Vec<f64>,
    /// Boundary parameter of each node.
    pub t: Vec<f64>,
    /// Weights in units of `dt`.
    pub weight: Vec<f64>,
    pub points_per_panel: usize,
}

impl BoundaryQuadrature {
    /// Splits every edge into panels short enough that `panel · max_frequency ≤ 1`
    /// (in radians of the highest boundary oscillation) and places an 8-point
    /// Gauss rule on each.
    pub fn new(mesh: &Mesh, max_angular_frequency: f64) -> Self {
        let (x, w) = gauss_legendre(BOUNDARY_GAUSS_POINTS);
        let mut q = Self {
            edge: Vec::new(),
            s: Vec::new(),
            t: Vec::new(),
            weight: Vec::new(),
            points_per_panel: BOUNDARY_GAUSS_POINTS,
        };
        for (e, edge) in mesh.boundary_edges().iter().enumerate() {
            let len = edge.param_length();
            let panels = ((len * max_angular_frequency).ceil() as usize).max(1);
            for p in 0..panels {
                for (xi, wi) in x.iter().zip(&w) {
                    let s = (p as f64 + xi) / panels as f64;
                    q.edge.push(e);
                    q.s.push(s);
                    q.t.push(edge.t_start + s * len);
                    q.weight.push(wi * len / panels as f64);
                }
            }
        }
        q
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// `∫_Γ g dt` for node values `g`.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.weight).map(|(a, b)| a * b).sum()
    }
}

/// Origin of the basis functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// `cos(kθ), sin(kθ)` pairs normalised in `L²(Γ)`, ordered `cos 1, sin 1, cos 2, ...`.
    Trigonometric,
    /// Functions supplied by the caller.
    Custom,
}

/// Orthonormal basis `f_1..f_J` of a subspace of `L²_⋄(Γ)`.
///
/// Besides the node values, each function is stored as its load vector
/// `∫_Γ f_j φ_k dt` on the boundary dofs, so that `⟨Tu, f_j⟩ = Σ_k u_k load_jk`.
#[derive(Debug, Clone)]
pub struct BoundaryBasis {
    kind: BasisKind,
    quadrature: BoundaryQuadrature,
    /// Node values, `len(quadrature) × J`.
    values: DMatrix<f64>,
    /// Distinct boundary dofs, increasing.
    boundary_dofs: Vec<usize>,
    /// Loads on `boundary_dofs`, `len(boundary_dofs) × J`.
    loads: DMatrix<f64>,
    /// `∫_Γ φ_k dt` on `boundary_dofs`.
    trace_weights: Vec<f64>,
}

impl BoundaryBasis {
    /// The first `j` real trigonometric functions on the boundary loop.
    pub fn trigonometric(mesh: &Mesh, j: usize) -> Result<Self> {
        if j == 0 {
            return Err(Error::InvalidArgument("basis size must be at least 1".into()));
        }
        let length = mesh.boundary_length();
        let t0 = mesh.boundary_edges()[0].t_start;
        let top = j.div_ceil(2) as f64;
        let omega = 2.0 * PI / length;
        let quadrature = BoundaryQuadrature::new(mesh, top * omega);
        let norm = (2.0 / length).sqrt();
        let values = DMatrix::from_fn(quadrature.len(), j, |q, k| {
            let freq = (k / 2 + 1) as f64;
            let arg = freq * omega * (quadrature.t[q] - t0);
            norm * if k % 2 == 0 { arg.cos() } else { arg.sin() }
        });
        Self::assemble(mesh, BasisKind::Trigonometric, quadrature, values)
    }

    /// Basis from caller-supplied functions `f(k, t)`, `k < j`, of the boundary
    /// parameter. They must be mean free and orthonormal under the boundary
    /// quadrature (tolerances `1e-12` and `1e-10`).
    pub fn custom(mesh: &Mesh, j: usize, max_angular_frequency: f64, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        if j == 0 {
            return Err(Error::InvalidArgument("basis size must be at least 1".into()));
        }
        let quadrature = BoundaryQuadrature::new(mesh, max_angular_frequency);
        let values = DMatrix::from_fn(quadrature.len(), j, |q, k| f(k, quadrature.t[q]));
        Self::assemble(mesh, BasisKind::Custom, quadrature, values)
    }

    fn assemble(mesh: &Mesh, kind: BasisKind, quadrature: BoundaryQuadrature, values: DMatrix<f64>) -> Result<Self> {
        let j = values.ncols();
        for k in 0..j {
            let mean = quadrature.integrate(values.column(k).as_slice());
            if mean.abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "boundary function {k} is not mean free (integral {mean:e})"
                )));
            }
        }
        let weighted = DMatrix::from_fn(values.nrows(), j, |q, k| values[(q, k)] * quadrature.weight[q]);
        let gram = values.transpose() * &weighted;
        let defect = (gram - DMatrix::identity(j, j)).amax();
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "boundary functions are not orthonormal (Gram defect {defect:e})"
            )));
        }

        let mut boundary_dofs: Vec<usize> = (0..mesh.boundary_edges().len())
            .flat_map(|e| mesh.boundary_edge_dofs(e).to_vec())
            .collect();
        boundary_dofs.sort_unstable();
        boundary_dofs.dedup();
        let position = |dof: usize| boundary_dofs.binary_search(&dof).expect("boundary dof");

        let mut loads = DMatrix::zeros(boundary_dofs.len(), j);
        let mut trace_weights = vec![0.0; boundary_dofs.len()];
        for q in 0..quadrature.len() {
            let shapes = edge_shape_values(mesh.degree(), quadrature.s[q]);
            let dofs = mesh.boundary_edge_dofs(quadrature.edge[q]);
            for (phi, &dof) in shapes.iter().zip(dofs) {
                let r = position(dof);
                trace_weights[r] += quadrature.weight[q] * phi;
                for k in 0..j {
                    loads[(r, k)] += weighted[(q, k)] * phi;
                }
            }
        }
        Ok(Self {
            kind,
            quadrature,
            values,
            boundary_dofs,
            loads,
            trace_weights,
        })
    }

    pub fn size(&self) -> usize {
        self.values.ncols()
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn quadrature(&self) -> &BoundaryQuadrature {
        &self.quadrature
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn loads(&self) -> &DMatrix<f64> {
        &self.loads
    }

    /// `∫_Γ φ_k dt` for each entry of [`Self::boundary_dofs`].
    pub fn trace_weights(&self) -> &[f64] {
        &self.trace_weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_disk_mesh, ElementDegree};

    #[test]
    fn trigonometric_basis_is_orthonormal_and_mean_free() {
        let m = generate_disk_mesh(1.0, 0.3, ElementDegree::Quadratic).unwrap();
        let b = BoundaryBasis::trigonometric(&m, 20).unwrap();
        assert_eq!(b.size(), 20);
        // coarse mesh, frequency 10: panels must still resolve the oscillation
        let total: f64 = b.quadrature().weight.iter().sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
        let tw: f64 = b.trace_weights().iter().sum();
        assert!((tw - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn custom_basis_is_validated() {
        let m = generate_disk_mesh(1.0, 0.3, ElementDegree::Linear).unwrap();
        assert!(BoundaryBasis::custom(&m, 1, 1.0, |_, t| t.cos()).is_err());
        let ok = BoundaryBasis::custom(&m, 1, 1.0, |_, t| t.cos() / PI.sqrt()).unwrap();
        assert_eq!(ok.kind(), BasisKind::Custom);
        assert!(BoundaryBasis::custom(&m, 1, 1.0, |_, t| 1.0 + t.cos()).is_err());
    }
}
