//! Complete electrode model with piecewise-constant contact admittance.
//!
//! Unknowns are the interior potential `u` and the electrode potentials `U`,
//! with the form
//!
//! ```text
//! a[(u, U), (v, V)] = ⟨u, v⟩_A + Σ_j ζ_j ∫_{E_j} (Tu − U_j) conj(Tv − V_j) dt
//! ```
//!
//! and the gauge `Σ_j U_j = 0` enforced by a Lagrange multiplier.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fem::space::{edge_shape_values, ElementStiffness};
use crate::fem::{dirichlet_norm, perturbation_load, pixel_gram_blocks, Conductivity, FeFunction};
use crate::matrix::{DerivativeMatrix, NdMatrix};
use crate::mesh::{Mesh, PixelPartition};
use crate::quadrature::gauss_legendre;
use crate::reversion::{ForwardBackend, StateOps};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
/// Gauss points per boundary piece under an electrode.
pub const ELECTRODE_GAUSS_POINTS: usize = 4;

/// Electrode arcs `[start, end)` in the boundary parameter and contact
/// impedances `z_j` (admittance `ζ_j = 1/z_j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeLayout {
    pub m: usize,
    pub arcs: Vec<[f64; 2]>,
    pub z: Vec<f64>,
}

impl ElectrodeLayout {
    /// `m` electrodes of equal width centred at `(k + ½)·length/m`, covering
    /// the fraction `coverage` of a boundary of length `length`.
    pub fn equally_spaced(m: usize, coverage: f64, z: f64, length: f64) -> Result<Self> {
        if m < 2 || !(coverage > 0.0 && coverage < 1.0) {
            return Err(Error::InvalidLayout(format!(
                "need m ≥ 2 and coverage in (0, 1), got m = {m}, coverage = {coverage}"
            )));
        }
        let pitch = length / m as f64;
        let half = 0.5 * coverage * pitch;
        let arcs = (0..m)
            .map(|k| {
                let c = (k as f64 + 0.5) * pitch;
                [c - half, c + half]
            })
            .collect();
        let layout = Self { m, arcs, z: vec![z; m] };
        layout.validate(length)?;
        Ok(layout)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Checks counts, positivity and that the arc closures are disjoint on a
    /// boundary of length `length`.
    pub fn validate(&self, length: f64) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidLayout("at least two electrodes are needed".into()));
        }
        if self.arcs.len() != self.m || self.z.len() != self.m {
            return Err(Error::InvalidLayout(format!(
                "m = {} but {} arcs and {} contact values",
                self.m,
                self.arcs.len(),
                self.z.len()
            )));
        }
        if let Some(z) = self.z.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
            return Err(Error::InvalidLayout(format!("contact impedance {z} is not positive")));
        }
        let mut sorted = self.arcs.clone();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for a in &sorted {
            if !(a[0] >= 0.0 && a[1] > a[0] && a[1] <= length) {
                return Err(Error::InvalidLayout(format!(
                    "arc [{}, {}] is empty or leaves [0, {length}]",
                    a[0], a[1]
                )));
            }
        }
        for w in sorted.windows(2) {
            if w[1][0] <= w[0][1] {
                return Err(Error::InvalidLayout(format!(
                    "arcs [{}, {}] and [{}, {}] overlap or touch",
                    w[0][0], w[0][1], w[1][0], w[1][1]
                )));
            }
        }
        let (first, last) = (sorted[0], sorted[sorted.len() - 1]);
        if last[1] - length >= first[0] {
            return Err(Error::InvalidLayout("first and last arcs touch across t = 0".into()));
        }
        Ok(())
    }

    /// `ζ_j = 1/z_j`.
    pub fn admittances(&self) -> Vec<f64> {
        self.z.iter().map(|z| 1.0 / z).collect()
    }

    pub fn arc_lengths(&self) -> Vec<f64> {
        self.arcs.iter().map(|a| a[1] - a[0]).collect()
    }
}

/// Orthonormal basis of mean-free vectors in `ℂ^m`: the normalised Helmert
/// vectors `(1, .., 1, −k, 0, ..)/√(k(k+1))`, `k = 1..m−1`.
pub fn current_basis(m: usize) -> Vec<Vec<C64>> {
    (1..m)
        .map(|k| {
            let s = 1.0 / ((k * (k + 1)) as f64).sqrt();
            (0..m)
                .map(|i| {
                    let v = match i.cmp(&k) {
                        std::cmp::Ordering::Less => s,
                        std::cmp::Ordering::Equal => -(k as f64) * s,
                        std::cmp::Ordering::Greater => 0.0,
                    };
                    C64::new(v, 0.0)
                })
                .collect()
        })
        .collect()
}

/// Trace quadrature point on an electrode.
#[derive(Debug, Clone)]
struct ElectrodePoint {
    dofs: Vec<usize>,
    shape: Vec<f64>,
    weight: f64,
}

fn electrode_points(mesh: &Mesh, layout: &ElectrodeLayout) -> Vec<Vec<ElectrodePoint>> {
    let (nodes, weights) = gauss_legendre(ELECTRODE_GAUSS_POINTS);
    layout
        .arcs
        .iter()
        .map(|arc| {
            let mut points = Vec::new();
            for (e, edge) in mesh.boundary_edges().iter().enumerate() {
                let lo = arc[0].max(edge.t_start);
                let hi = arc[1].min(edge.t_end);
                if hi <= lo {
                    continue;
                }
                let len = edge.param_length();
                let dofs = mesh.boundary_edge_dofs(e).to_vec();
                for (x, w) in nodes.iter().zip(&weights) {
                    let t = lo + (hi - lo) * x;
                    points.push(ElectrodePoint {
                        dofs: dofs.clone(),
                        shape: edge_shape_values(mesh.degree(), (t - edge.t_start) / len),
                        weight: w * (hi - lo),
                    });
                }
            }
            points
        })
        .collect()
}

/// Interior and electrode potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ScemState {
    pub u: FeFunction,
    pub potentials: Vec<C64>,
}

impl StateOps for ScemState {
    fn add(&self, other: &Self) -> Self {
        Self {
            u: self.u.add(&other.u),
            potentials: self
                .potentials
                .iter()
                .zip(&other.potentials)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Assembled and factorised electrode-model system.
pub struct ScemSystem {
    mesh: Arc<Mesh>,
    stiffness: Arc<ElementStiffness>,
    conductivity: Vec<f64>,
    layout: ElectrodeLayout,
    points: Vec<Vec<ElectrodePoint>>,
    triplets: Vec<Triplet<usize, usize, f64>>,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for ScemSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScemSystem")
            .field("dofs", &self.mesh.dof_count())
            .field("electrodes", &self.layout.m)
            .finish()
    }
}

impl ScemSystem {
    pub fn assemble(mesh: Arc<Mesh>, conductivity: &Conductivity, layout: ElectrodeLayout) -> Result<Self> {
        let stiffness = Arc::new(ElementStiffness::assemble(&mesh));
        Self::assemble_with(mesh, stiffness, conductivity, layout)
    }

    pub fn assemble_with(
        mesh: Arc<Mesh>,
        stiffness: Arc<ElementStiffness>,
        conductivity: &Conductivity,
        layout: ElectrodeLayout,
    ) -> Result<Self> {
        layout.validate(mesh.boundary_length())?;
        let a = conductivity.per_triangle(mesh.triangle_count())?;
        let n = mesh.dof_count();
        let m = layout.m;
        let k = stiffness.local_size();
        let zeta = layout.admittances();
        let points = electrode_points(&mesh, &layout);

        let mut triplets = Vec::new();
        for (t, &at) in a.iter().enumerate() {
            let dofs = mesh.triangle_dofs(t);
            let block = stiffness.block(t);
            for r in 0..k {
                for c in 0..k {
                    triplets.push(Triplet::new(dofs[r], dofs[c], at * block[r * k + c]));
                }
            }
        }
        for (j, pts) in points.iter().enumerate() {
            let big = n + j;
            let mut area = 0.0;
            for p in pts {
                area += p.weight;
                for (r, &dr) in p.dofs.iter().enumerate() {
                    let cross = -zeta[j] * p.weight * p.shape[r];
                    triplets.push(Triplet::new(dr, big, cross));
                    triplets.push(Triplet::new(big, dr, cross));
                    for (c, &dc) in p.dofs.iter().enumerate() {
                        triplets.push(Triplet::new(dr, dc, zeta[j] * p.weight * p.shape[r] * p.shape[c]));
                    }
                }
            }
            triplets.push(Triplet::new(big, big, zeta[j] * area));
            triplets.push(Triplet::new(big, n + m, 1.0));
            triplets.push(Triplet::new(n + m, big, 1.0));
        }
        let size = n + m + 1;
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(size, size, &triplets)
            .map_err(|e| Error::Factorization(format!("sparse assembly failed: {e:?}")))?;
        let lu = matrix.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self {
            mesh,
            stiffness,
            conductivity: a,
            layout,
            points,
            triplets,
            lu,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    pub fn electrode_count(&self) -> usize {
        self.layout.m
    }

    /// `min(ess inf a, min ζ)`.
    pub fn coercivity(&self) -> f64 {
        let ca = self.conductivity.iter().copied().fold(f64::INFINITY, f64::min);
        let cz = self.layout.admittances().into_iter().fold(f64::INFINITY, f64::min);
        ca.min(cz)
    }

    fn system_size(&self) -> usize {
        self.mesh.dof_count() + self.layout.m + 1
    }

    fn solve_many(&self, rhs: &[Vec<C64>]) -> Result<Vec<ScemState>> {
        let size = self.system_size();
        let n = self.mesh.dof_count();
        let complex: Vec<bool> = rhs.iter().map(|r| r.iter().any(|z| z.im != 0.0)).collect();
        let mut col_of = Vec::with_capacity(rhs.len());
        let mut cols = 0;
        for &c in &complex {
            col_of.push(cols);
            cols += if c { 2 } else { 1 };
        }
        let mut b = Mat::<f64>::zeros(size, cols);
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
        let value = |j: usize, i: usize| {
            let im = if complex[j] { b[(i, col_of[j] + 1)] } else { 0.0 };
            C64::new(b[(i, col_of[j])], im)
        };
        Ok((0..rhs.len())
            .map(|j| ScemState {
                u: FeFunction {
                    values: (0..n).map(|i| value(j, i)).collect(),
                },
                potentials: (n..n + self.layout.m).map(|i| value(j, i)).collect(),
            })
            .collect())
    }

    fn current_rhs(&self, current: &[C64]) -> Result<Vec<C64>> {
        check_len("electrode currents", self.layout.m, current.len())?;
        let sum: C64 = current.iter().sum();
        let scale = current.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if sum.norm() > 1e-12 * scale.max(1.0) {
            return Err(Error::CurrentNotMeanFree(sum.norm()));
        }
        let n = self.mesh.dof_count();
        let mut rhs = vec![ZERO; self.system_size()];
        rhs[n..n + self.layout.m].copy_from_slice(current);
        Ok(rhs)
    }

    /// `(u, U)` for a mean-free current pattern `I`.
    pub fn solve_current(&self, current: &[C64]) -> Result<ScemState> {
        let rhs = self.current_rhs(current)?;
        Ok(self.solve_many(&[rhs])?.remove(0))
    }

    /// Solutions for the orthonormal current basis.
    pub fn basis_solutions(&self) -> Result<Vec<ScemState>> {
        let rhs = current_basis(self.layout.m)
            .iter()
            .map(|i| self.current_rhs(i))
            .collect::<Result<Vec<_>>>()?;
        self.solve_many(&rhs)
    }

    /// `[I_iᴴ U_j]` for states `(u_j, U_j)` and the current basis `I_i`.
    pub fn measure(&self, states: &[ScemState]) -> DMatrix<C64> {
        let basis = current_basis(self.layout.m);
        DMatrix::from_fn(basis.len(), states.len(), |i, j| {
            basis[i]
                .iter()
                .zip(&states[j].potentials)
                .map(|(a, b)| a.conj() * b)
                .sum()
        })
    }

    /// Current-to-voltage map on the current basis.
    pub fn electrode_matrix(&self) -> Result<NdMatrix> {
        NdMatrix::new(self.measure(&self.basis_solutions()?))
    }

    fn perturbation_rhs(&self, b: &[C64], y: &ScemState) -> Result<Vec<C64>> {
        check_len("FE function", self.mesh.dof_count(), y.u.values.len())?;
        check_len("electrode potentials", self.layout.m, y.potentials.len())?;
        let mut rhs: Vec<C64> = perturbation_load(&self.mesh, &self.stiffness, b, &y.u.values)
            .into_iter()
            .map(|z| -z)
            .collect();
        rhs.resize(self.system_size(), ZERO);
        Ok(rhs)
    }

    /// `P_E(b)(y, Y)`: solves `a[(w, W), (v, V)] = −⟨y, v⟩_b` with `b` given
    /// per triangle.
    pub fn apply_p_e(&self, b: &[C64], ys: &[ScemState]) -> Result<Vec<ScemState>> {
        check_len("perturbation", self.mesh.triangle_count(), b.len())?;
        let rhs = ys
            .iter()
            .map(|y| self.perturbation_rhs(b, y))
            .collect::<Result<Vec<_>>>()?;
        self.solve_many(&rhs)
    }

    /// Column `n` holds `−∫_{Ω_n} ∇u_j · conj(∇u_i)` over the current basis.
    pub fn dlambda_e_matrix(&self, partition: &PixelPartition) -> Result<DerivativeMatrix> {
        self.dlambda_from_states(&self.basis_solutions()?, partition)
    }

    pub fn dlambda_from_states(&self, states: &[ScemState], partition: &PixelPartition) -> Result<DerivativeMatrix> {
        check_len(
            "partition triangles",
            self.mesh.triangle_count(),
            partition.triangle_count(),
        )?;
        let values: Vec<&[C64]> = states.iter().map(|s| s.u.values.as_slice()).collect();
        pixel_gram_blocks(&self.mesh, &self.stiffness, &values, partition)
    }

    /// `‖(v, V)‖²_ℋ = ∫_Ω |∇v|² + Σ_j ∫_{E_j} |Tv − V_j|² dt`, square-rooted.
    pub fn h_norm(&self, s: &ScemState) -> f64 {
        let interior = dirichlet_norm(&self.mesh, &self.stiffness, &s.u.values).powi(2);
        let mut contact = 0.0;
        for (j, pts) in self.points.iter().enumerate() {
            for p in pts {
                let trace: C64 = p.dofs.iter().zip(&p.shape).map(|(&d, &phi)| s.u.values[d] * phi).sum();
                contact += p.weight * (trace - s.potentials[j]).norm_sqr();
            }
        }
        (interior + contact).sqrt()
    }

    /// `max |Ax − rhs| / max (|A||x| + |rhs|)` over the rows of the bordered
    /// system, with the multiplier fitted to the electrode rows.
    fn relative_residual(&self, x: &ScemState, rhs: &[C64]) -> f64 {
        let n = self.mesh.dof_count();
        let m = self.layout.m;
        let size = self.system_size();
        let mut full = x.u.values.clone();
        full.extend_from_slice(&x.potentials);
        full.push(ZERO);
        let mut ax = vec![ZERO; size];
        let mut mag = vec![0.0; size];
        for t in &self.triplets {
            ax[t.row] += full[t.col] * t.val;
            mag[t.row] += (full[t.col] * t.val).norm();
        }
        // the multiplier only enters the electrode rows, each with coefficient one
        let lambda: C64 = (n..n + m).map(|i| rhs[i] - ax[i]).sum::<C64>() / m as f64;
        for v in &mut ax[n..n + m] {
            *v += lambda;
        }
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..size {
            worst = worst.max((ax[i] - rhs[i]).norm());
            scale = scale.max(mag[i] + rhs[i].norm());
        }
        worst / scale.max(1e-300)
    }

    /// Relative residual of `(u, U)` in the current problem with pattern `I`.
    pub fn current_residual(&self, current: &[C64], x: &ScemState) -> Result<f64> {
        Ok(self.relative_residual(x, &self.current_rhs(current)?))
    }

    /// Relative residual of `w = P_E(b) y` in its defining problem.
    pub fn p_residual(&self, b: &[C64], y: &ScemState, w: &ScemState) -> Result<f64> {
        Ok(self.relative_residual(w, &self.perturbation_rhs(b, y)?))
    }
}

/// Electrode-model forward backend.
pub struct ScemBackend {
    system: Arc<ScemSystem>,
    partition: Arc<PixelPartition>,
    solutions: Vec<ScemState>,
}

impl ScemBackend {
    pub fn new(system: Arc<ScemSystem>, partition: Arc<PixelPartition>) -> Result<Self> {
        check_len(
            "partition triangles",
            system.mesh().triangle_count(),
            partition.triangle_count(),
        )?;
        let solutions = system.basis_solutions()?;
        Ok(Self {
            system,
            partition,
            solutions,
        })
    }

    pub fn system(&self) -> &Arc<ScemSystem> {
        &self.system
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

impl ForwardBackend for ScemBackend {
    type State = ScemState;

    fn basis_size(&self) -> usize {
        self.system.electrode_count() - 1
    }

    fn parameter_count(&self) -> usize {
        self.partition.count()
    }

    fn basis_solutions(&self) -> Result<Vec<ScemState>> {
        Ok(self.solutions.clone())
    }

    fn apply_perturbation(&self, b: &[C64], states: &[ScemState]) -> Result<Vec<ScemState>> {
        self.system.apply_p_e(&self.per_triangle(b)?, states)
    }

    fn measure(&self, states: &[ScemState]) -> Result<DMatrix<C64>> {
        Ok(self.system.measure(states))
    }

    fn nd_matrix(&self) -> Result<NdMatrix> {
        NdMatrix::new(self.system.measure(&self.solutions))
    }

    fn derivative_matrix(&self) -> Result<DerivativeMatrix> {
        self.system.dlambda_from_states(&self.solutions, &self.partition)
    }
}
