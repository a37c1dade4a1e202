//! Continuum-model Neumann problem, perturbation operator and derivative.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::basis::BoundaryBasis;
use super::space::ElementStiffness;
use crate::error::{check_len, Error, Result};
use crate::matrix::{DerivativeMatrix, NdMatrix};
use crate::mesh::{CoefficientField, Mesh, PixelPartition};
use crate::reversion::{ForwardBackend, StateOps};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Real isotropic background conductivity `a`.
#[derive(Debug, Clone, PartialEq)]
pub enum Conductivity {
    Uniform(f64),
    PerTriangle(Vec<f64>),
}

impl Conductivity {
    /// `a₀ + Re b` on every triangle, where `b` is a pixel field.
    pub fn perturbed(background: f64, field: &CoefficientField) -> Self {
        Conductivity::PerTriangle(field.per_triangle().iter().map(|b| background + b.re).collect())
    }

    pub(crate) fn per_triangle(&self, n: usize) -> Result<Vec<f64>> {
        let values = match self {
            Conductivity::Uniform(a) => vec![*a; n],
            Conductivity::PerTriangle(v) => {
                check_len("conductivity", n, v.len())?;
                v.clone()
            }
        };
        if let Some(t) = values.iter().position(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::NonCoercive(format!(
                "conductivity {} on triangle {t} is not positive",
                values[t]
            )));
        }
        Ok(values)
    }
}

/// Nodal coefficients of a finite element function.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    pub values: Vec<C64>,
}

impl FeFunction {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![ZERO; n] }
    }
}

impl StateOps for FeFunction {
    fn add(&self, other: &Self) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Assembled and factorised continuum-model system for a background `a`.
///
/// The Neumann problem is posed on the full Lagrange space with the gauge
/// `∫_Γ Tu dt = 0` enforced by one Lagrange multiplier, giving the bordered
/// system `[K c; cᵀ 0]`.
pub struct FemSystem {
    mesh: Arc<Mesh>,
    stiffness: Arc<ElementStiffness>,
    conductivity: Vec<f64>,
    constraint: Vec<(usize, f64)>,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for FemSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemSystem")
            .field("dofs", &self.mesh.dof_count())
            .field("triangles", &self.mesh.triangle_count())
            .finish()
    }
}

impl FemSystem {
    pub fn assemble(mesh: Arc<Mesh>, conductivity: &Conductivity) -> Result<Self> {
        let stiffness = Arc::new(ElementStiffness::assemble(&mesh));
        Self::assemble_with(mesh, stiffness, conductivity)
    }

    /// Reuses precomputed unit element matrices of the same mesh.
    pub fn assemble_with(
        mesh: Arc<Mesh>,
        stiffness: Arc<ElementStiffness>,
        conductivity: &Conductivity,
    ) -> Result<Self> {
        let a = conductivity.per_triangle(mesh.triangle_count())?;
        let n = mesh.dof_count();
        let k = stiffness.local_size();
        check_len("element stiffness", mesh.degree().local_dofs(), k)?;

        let constraint = boundary_integrals(&mesh);
        let mut triplets = Vec::with_capacity(mesh.triangle_count() * k * k + 2 * constraint.len());
        for (t, &at) in a.iter().enumerate() {
            let dofs = mesh.triangle_dofs(t);
            let block = stiffness.block(t);
            for r in 0..k {
                for c in 0..k {
                    triplets.push(Triplet::new(dofs[r], dofs[c], at * block[r * k + c]));
                }
            }
        }
        for &(dof, w) in &constraint {
            triplets.push(Triplet::new(dof, n, w));
            triplets.push(Triplet::new(n, dof, w));
        }
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n + 1, n + 1, &triplets)
            .map_err(|e| Error::Factorization(format!("sparse assembly failed: {e:?}")))?;
        let lu = matrix.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self {
            mesh,
            stiffness,
            conductivity: a,
            constraint,
            lu,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element_stiffness(&self) -> &Arc<ElementStiffness> {
        &self.stiffness
    }

    pub fn conductivity(&self) -> &[f64] {
        &self.conductivity
    }

    /// `ess inf a`.
    pub fn coercivity(&self) -> f64 {
        self.conductivity.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn dof_count(&self) -> usize {
        self.mesh.dof_count()
    }

    /// Solves `⟨u, v⟩_A + λ ∫_Γ Tv = rhs(v)`, `∫_Γ Tu = 0` for each right-hand side.
    pub fn solve_many(&self, rhs: &[Vec<C64>]) -> Result<Vec<FeFunction>> {
        let n = self.dof_count();
        for r in rhs {
            check_len("right-hand side", n, r.len())?;
        }
        // real and imaginary parts go in separate columns; all-real inputs skip the latter
        let complex: Vec<bool> = rhs.iter().map(|r| r.iter().any(|z| z.im != 0.0)).collect();
        let mut col_of = Vec::with_capacity(rhs.len());
        let mut cols = 0;
        for &c in &complex {
            col_of.push(cols);
            cols += if c { 2 } else { 1 };
        }
        let mut b = Mat::<f64>::zeros(n + 1, cols);
        for (j, r) in rhs.iter().enumerate() {
            for (i, z) in r.iter().enumerate() {
                b[(i, col_of[j])] = z.re;
                if complex[j] {
                    b[(i, col_of[j] + 1)] = z.im;
                }
            }
        }
        if cols > 0 {
            self.lu.solve_in_place(b.as_mut());
        }
        Ok((0..rhs.len())
            .map(|j| FeFunction {
                values: (0..n)
                    .map(|i| {
                        let im = if complex[j] { b[(i, col_of[j] + 1)] } else { 0.0 };
                        C64::new(b[(i, col_of[j])], im)
                    })
                    .collect(),
            })
            .collect())
    }

    /// Neumann solutions `u_j = N(A) f_j` for the given coefficient vectors
    /// (one row per basis function of `basis`).
    pub fn solve_neumann(&self, basis: &BoundaryBasis, f: &[Vec<C64>]) -> Result<Vec<FeFunction>> {
        let rhs = f
            .iter()
            .map(|coeffs| {
                check_len("boundary coefficients", basis.size(), coeffs.len())?;
                let mut r = vec![ZERO; self.dof_count()];
                for (row, &dof) in basis.boundary_dofs().iter().enumerate() {
                    r[dof] = (0..basis.size()).map(|k| coeffs[k] * basis.loads()[(row, k)]).sum();
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        self.solve_many(&rhs)
    }

    /// Solutions for each basis function in turn.
    pub fn basis_solutions(&self, basis: &BoundaryBasis) -> Result<Vec<FeFunction>> {
        let j = basis.size();
        let unit: Vec<Vec<C64>> = (0..j)
            .map(|k| (0..j).map(|i| if i == k { C64::new(1.0, 0.0) } else { ZERO }).collect())
            .collect();
        self.solve_neumann(basis, &unit)
    }

    fn perturbation_load(&self, b: &[C64], y: &FeFunction) -> Vec<C64> {
        perturbation_load(&self.mesh, &self.stiffness, b, &y.values)
    }

    /// `P_A(b) y`: the solution `w` of `⟨w, v⟩_A = −⟨y, v⟩_b` with zero
    /// boundary mean, for each `y`. `b` has one value per triangle.
    pub fn apply_p(&self, b: &[C64], ys: &[FeFunction]) -> Result<Vec<FeFunction>> {
        check_len("perturbation", self.mesh.triangle_count(), b.len())?;
        let rhs: Vec<Vec<C64>> = ys
            .iter()
            .map(|y| {
                check_len("FE function", self.dof_count(), y.values.len())?;
                Ok(self.perturbation_load(b, y).into_iter().map(|z| -z).collect())
            })
            .collect::<Result<_>>()?;
        self.solve_many(&rhs)
    }

    /// [`Self::apply_p`] for a pixel field.
    pub fn apply_p_field(&self, b: &CoefficientField, ys: &[FeFunction]) -> Result<Vec<FeFunction>> {
        check_len(
            "partition triangles",
            self.mesh.triangle_count(),
            b.partition().triangle_count(),
        )?;
        self.apply_p(&b.per_triangle(), ys)
    }

    /// `[⟨T s_j, f_i⟩]` for states `s_j`.
    pub fn measure(&self, basis: &BoundaryBasis, states: &[FeFunction]) -> DMatrix<C64> {
        DMatrix::from_fn(basis.size(), states.len(), |i, j| {
            basis
                .boundary_dofs()
                .iter()
                .enumerate()
                .map(|(row, &dof)| states[j].values[dof] * basis.loads()[(row, i)])
                .sum()
        })
    }

    pub fn nd_matrix(&self, basis: &BoundaryBasis) -> Result<NdMatrix> {
        let u = self.basis_solutions(basis)?;
        NdMatrix::new(self.measure(basis, &u))
    }

    /// Column `n` holds `−∫_{Ω_n} ∇u_j · conj(∇u_i)` for all `i, j`.
    pub fn dlambda_matrix(&self, basis: &BoundaryBasis, partition: &PixelPartition) -> Result<DerivativeMatrix> {
        let u = self.basis_solutions(basis)?;
        self.dlambda_from_states(&u, partition)
    }

    /// Derivative matrix from precomputed states `u_j`.
    pub fn dlambda_from_states(&self, u: &[FeFunction], partition: &PixelPartition) -> Result<DerivativeMatrix> {
        check_len(
            "partition triangles",
            self.mesh.triangle_count(),
            partition.triangle_count(),
        )?;
        let values: Vec<&[C64]> = u.iter().map(|f| f.values.as_slice()).collect();
        pixel_gram_blocks(&self.mesh, &self.stiffness, &values, partition)
    }

    /// `sqrt(∫_Ω |∇v|²)`, the norm of `H¹_⋄(Ω)`.
    pub fn dirichlet_norm(&self, v: &FeFunction) -> f64 {
        dirichlet_norm(&self.mesh, &self.stiffness, &v.values)
    }

    /// `∫_Γ Tv dt`.
    pub fn trace_mean(&self, v: &FeFunction) -> C64 {
        self.constraint.iter().map(|&(dof, w)| v.values[dof] * w).sum()
    }

    /// Largest modulus of `⟨w, v⟩_A + ⟨y, v⟩_b` over test functions, relative
    /// to the largest term, for `w = P_A(b) y`.
    pub fn p_residual(&self, b: &[C64], y: &FeFunction, w: &FeFunction) -> f64 {
        let a: Vec<C64> = self.conductivity.iter().map(|&x| C64::new(x, 0.0)).collect();
        let lhs = self.perturbation_load(&a, w);
        let rhs = self.perturbation_load(b, y);
        // the multiplier absorbs a multiple of the constraint row, which vanishes here
        let scale = lhs.iter().chain(&rhs).map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        lhs.iter().zip(&rhs).map(|(l, r)| (l + r).norm()).fold(0.0, f64::max) / scale
    }
}

/// `⟨y, v⟩_b` load for every test function, with `b` given per triangle.
pub(crate) fn perturbation_load(mesh: &Mesh, stiffness: &ElementStiffness, b: &[C64], y: &[C64]) -> Vec<C64> {
    let k = stiffness.local_size();
    let mut load = vec![ZERO; mesh.dof_count()];
    for (t, &bt) in b.iter().enumerate() {
        if bt == ZERO {
            continue;
        }
        let dofs = mesh.triangle_dofs(t);
        let block = stiffness.block(t);
        for r in 0..k {
            let mut acc = ZERO;
            for c in 0..k {
                acc += y[dofs[c]] * block[r * k + c];
            }
            load[dofs[r]] += bt * acc;
        }
    }
    load
}

/// Column `n` holds `−∫_{Ω_n} ∇u_j · conj(∇u_i)` for all `i, j`.
pub(crate) fn pixel_gram_blocks(
    mesh: &Mesh,
    stiffness: &ElementStiffness,
    u: &[&[C64]],
    partition: &PixelPartition,
) -> Result<DerivativeMatrix> {
    if partition.count() == 0 {
        return Err(Error::InvalidArgument("partition has no pixels".into()));
    }
    let j = u.len();
    let k = stiffness.local_size();
    let blocks: Vec<DMatrix<C64>> = partition
        .triangles_by_pixel()
        .par_iter()
        .map(|tris| {
            let mut block = DMatrix::<C64>::zeros(j, j);
            for &t in tris {
                let dofs = mesh.triangle_dofs(t);
                let local = DMatrix::from_fn(k, j, |r, c| u[c][dofs[r]]);
                let kmat = DMatrix::from_row_slice(k, k, stiffness.block(t)).map(|x| C64::new(x, 0.0));
                block -= local.adjoint() * kmat * local;
            }
            block
        })
        .collect();
    DerivativeMatrix::from_blocks(j, &blocks)
}

/// `sqrt(∫_Ω |∇v|²)`.
pub(crate) fn dirichlet_norm(mesh: &Mesh, stiffness: &ElementStiffness, v: &[C64]) -> f64 {
    let k = stiffness.local_size();
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let dofs = mesh.triangle_dofs(t);
        let block = stiffness.block(t);
        for r in 0..k {
            for c in 0..k {
                acc += (v[dofs[r]].conj() * v[dofs[c]]).re * block[r * k + c];
            }
        }
    }
    acc.max(0.0).sqrt()
}

/// `∫_Γ φ_k dt` for every boundary dof (exact for the trace polynomials).
fn boundary_integrals(mesh: &Mesh) -> Vec<(usize, f64)> {
    let weights: &[f64] = match mesh.degree() {
        crate::mesh::ElementDegree::Linear => &[0.5, 0.5],
        crate::mesh::ElementDegree::Quadratic => &[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    };
    let mut acc = std::collections::BTreeMap::new();
    for (e, edge) in mesh.boundary_edges().iter().enumerate() {
        for (&dof, w) in mesh.boundary_edge_dofs(e).iter().zip(weights) {
            *acc.entry(dof).or_insert(0.0) += w * edge.param_length();
        }
    }
    acc.into_iter().collect()
}

/// Continuum-model forward backend: a factorised background system, a
/// boundary basis and a pixel partition.
pub struct CmBackend {
    system: Arc<FemSystem>,
    basis: Arc<BoundaryBasis>,
    partition: Arc<PixelPartition>,
    solutions: Vec<FeFunction>,
}

impl CmBackend {
    pub fn new(system: Arc<FemSystem>, basis: Arc<BoundaryBasis>, partition: Arc<PixelPartition>) -> Result<Self> {
        check_len(
            "partition triangles",
            system.mesh().triangle_count(),
            partition.triangle_count(),
        )?;
        let solutions = system.basis_solutions(&basis)?;
        Ok(Self {
            system,
            basis,
            partition,
            solutions,
        })
    }

    pub fn system(&self) -> &Arc<FemSystem> {
        &self.system
    }

    pub fn basis(&self) -> &Arc<BoundaryBasis> {
        &self.basis
    }

    pub fn partition(&self) -> &Arc<PixelPartition> {
        &self.partition
    }

    fn per_triangle(&self, b: &[C64]) -> Result<Vec<C64>> {
        check_len("pixel values", self.partition.count(), b.len())?;
        Ok(self
            .partition
            .pixel_of_triangle()
            .iter()
            .map(|p| p.map_or(ZERO, |p| b[p]))
            .collect())
    }
}

impl ForwardBackend for CmBackend {
    type State = FeFunction;

    fn basis_size(&self) -> usize {
        self.basis.size()
    }

    fn parameter_count(&self) -> usize {
        self.partition.count()
    }

    fn basis_solutions(&self) -> Result<Vec<FeFunction>> {
        Ok(self.solutions.clone())
    }

    fn apply_perturbation(&self, b: &[C64], states: &[FeFunction]) -> Result<Vec<FeFunction>> {
        self.system.apply_p(&self.per_triangle(b)?, states)
    }

    fn measure(&self, states: &[FeFunction]) -> Result<DMatrix<C64>> {
        Ok(self.system.measure(&self.basis, states))
    }

    fn nd_matrix(&self) -> Result<NdMatrix> {
        NdMatrix::new(self.system.measure(&self.basis, &self.solutions))
    }

    fn derivative_matrix(&self) -> Result<DerivativeMatrix> {
        self.system.dlambda_from_states(&self.solutions, &self.partition)
    }
}
