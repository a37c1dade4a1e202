//! Exact spectral calculus for the unit disk with a concentric inclusion.
//!
//! The background is `A = I` and perturbations are `κ₁` on the annulus
//! `ρ < r < 1` and `κ₂` on the disk `r < ρ`. In the complex Fourier basis
//! `f_j = e^{ijθ}/√(2π)` every operator involved is diagonal in `j`, and
//! harmonic functions of the form
//!
//! ```text
//! (α r^|j| + β r^−|j|) e^{ijθ}  on the annulus,   γ r^|j| e^{ijθ}  on the disk
//! ```
//!
//! are tracked through their coefficient triples `(α, β, γ)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DerivativeMatrix, NdMatrix};
use crate::reversion::{reconstruct_from_increment, ForwardBackend, ReversionConfig, ReversionResult, StateOps};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `B = κ₁χ_annulus + κ₂χ_disk` with inner radius `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentricPerturbation {
    pub kappa1: f64,
    pub kappa2: f64,
    pub rho: f64,
}

impl ConcentricPerturbation {
    pub fn new(kappa1: f64, kappa2: f64, rho: f64) -> Result<Self> {
        validate_rho(rho)?;
        if !(kappa1 > -1.0 && kappa2 > -1.0) || !kappa1.is_finite() || !kappa2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "contrasts must exceed -1, got ({kappa1}, {kappa2})"
            )));
        }
        Ok(Self { kappa1, kappa2, rho })
    }
}

fn validate_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "inner radius must lie in (0, 1), got {rho}"
        )));
    }
    Ok(())
}

fn check_frequency(j: i32) -> Result<u32> {
    if j == 0 {
        return Err(Error::InvalidArgument("frequency 0 is not in L²_⋄".into()));
    }
    Ok(j.unsigned_abs())
}

/// Coefficients `(α, β, γ)` of one harmonic mode of frequency `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeTriple {
    pub j: i32,
    pub alpha: C64,
    pub beta: C64,
    pub gamma: C64,
}

impl ModeTriple {
    /// `|α + ρ^{−2|j|} β − γ|`, zero when the potential is continuous at `r = ρ`.
    pub fn transmission_defect(&self, rho: f64) -> f64 {
        let q = rho.powi(-2 * self.j.abs());
        (self.alpha + self.beta * q - self.gamma).norm()
    }
}

impl StateOps for ModeTriple {
    fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.j, other.j, "modes of different frequency");
        Self {
            j: self.j,
            alpha: self.alpha + other.alpha,
            beta: self.beta + other.beta,
            gamma: self.gamma + other.gamma,
        }
    }
}

/// Eigenvalue of `Λ(I + B)` for `f_j`.
pub fn nd_eigenvalue(p: &ConcentricPerturbation, j: i32) -> Result<f64> {
    let n = check_frequency(j)? as f64;
    let (s, dq) = spectral_parts(p, j);
    Ok((s - dq) / ((p.kappa1 + 1.0) * n * (s + dq)))
}

/// `λ_j(I + B) − 1/|j|` without cancellation for small `B`.
pub fn nd_increment(p: &ConcentricPerturbation, j: i32) -> Result<f64> {
    let n = check_frequency(j)? as f64;
    let (s, dq) = spectral_parts(p, j);
    Ok((-p.kappa1 * s - (p.kappa1 + 2.0) * dq) / (n * (p.kappa1 + 1.0) * (s + dq)))
}

fn spectral_parts(p: &ConcentricPerturbation, j: i32) -> (f64, f64) {
    let s = p.kappa1 + p.kappa2 + 2.0;
    let dq = (p.kappa2 - p.kappa1) * p.rho.powi(2 * j.abs());
    (s, dq)
}

/// Eigenvalue of `DΛ(I; η)` for `f_j`.
pub fn dlambda_eigenvalue(eta: [C64; 2], rho: f64, j: i32) -> Result<C64> {
    let n = check_frequency(j)? as f64;
    let q = rho.powi(2 * j.abs());
    Ok((eta[0] * (q - 1.0) - eta[1] * q) / n)
}

/// Triple of `N(I) f_j = r^|j| e^{ijθ} / (√(2π)|j|)`.
pub fn neumann_mode(j: i32) -> Result<ModeTriple> {
    let n = check_frequency(j)? as f64;
    let a = C64::new(1.0 / ((2.0 * PI).sqrt() * n), 0.0);
    Ok(ModeTriple {
        j,
        alpha: a,
        beta: ZERO,
        gamma: a,
    })
}

/// `P(η)` on one mode.
pub fn apply_p_eta(eta: [C64; 2], rho: f64, m: &ModeTriple) -> ModeTriple {
    let q = rho.powi(2 * m.j.abs());
    let qi = 1.0 / q;
    let (a, b, g) = (m.alpha, m.beta, m.gamma);
    let e2q = eta[1] * q;
    ModeTriple {
        j: m.j,
        alpha: (eta[0] * (a * (q - 2.0) + b) - e2q * g) * 0.5,
        beta: (eta[0] * (a * q - b) - e2q * g) * 0.5,
        gamma: (eta[0] * (a * (q - 1.0) + b * (1.0 - qi)) - e2q * g * (1.0 + qi)) * 0.5,
    }
}

/// Boundary Fourier coefficient `α + β` of `e^{ijθ}` in the trace of a mode.
pub fn trace_mode(m: &ModeTriple) -> C64 {
    m.alpha + m.beta
}

/// `⟨T v, f_j⟩ = √(2π)(α + β)` for a mode of frequency `j`.
pub fn measured_mode(m: &ModeTriple) -> C64 {
    trace_mode(m) * (2.0 * PI).sqrt()
}

/// `k`-th Taylor term of the ND eigenvalue in the direction `η`,
/// `⟨T P(η)^k N f_j, f_j⟩`.
pub fn taylor_term(eta: [C64; 2], rho: f64, j: i32, k: usize) -> Result<C64> {
    let mut m = neumann_mode(j)?;
    for _ in 0..k {
        m = apply_p_eta(eta, rho, &m);
    }
    Ok(measured_mode(&m))
}

/// Positive frequencies spanning the measurement subspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanSelection {
    frequencies: Vec<u32>,
}

impl SpanSelection {
    pub fn new(frequencies: Vec<u32>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::InvalidArgument("span needs at least one frequency".into()));
        }
        if frequencies.contains(&0) {
            return Err(Error::InvalidArgument("frequency 0 is not allowed".into()));
        }
        let mut sorted = frequencies.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != frequencies.len() {
            return Err(Error::InvalidArgument("span frequencies must be distinct".into()));
        }
        Ok(Self { frequencies })
    }

    /// `{1, ..., n}`.
    pub fn first(n: u32) -> Result<Self> {
        Self::new((1..=n).collect())
    }

    pub fn frequencies(&self) -> &[u32] {
        &self.frequencies
    }
}

/// Which of `(κ₁, κ₂)` are unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveParameters {
    #[default]
    Both,
    /// `κ₂ = 0` is known.
    AnnulusOnly,
    /// `κ₁ = 0` is known.
    DiskOnly,
}

impl ActiveParameters {
    pub fn count(self) -> usize {
        match self {
            ActiveParameters::Both => 2,
            _ => 1,
        }
    }

    /// Embeds the active parameter values into `(η₁, η₂)`.
    pub fn expand(self, b: &[C64]) -> [C64; 2] {
        match self {
            ActiveParameters::Both => [b[0], b[1]],
            ActiveParameters::AnnulusOnly => [b[0], ZERO],
            ActiveParameters::DiskOnly => [ZERO, b[0]],
        }
    }

    /// Active components of `(κ₁, κ₂)`.
    pub fn restrict(self, kappa: [f64; 2]) -> Vec<f64> {
        match self {
            ActiveParameters::Both => kappa.to_vec(),
            ActiveParameters::AnnulusOnly => vec![kappa[0]],
            ActiveParameters::DiskOnly => vec![kappa[1]],
        }
    }
}

/// Forward backend on the concentric geometry: states are single modes, one
/// per span frequency.
#[derive(Debug, Clone)]
pub struct ConcentricBackend {
    rho: f64,
    span: SpanSelection,
    active: ActiveParameters,
}

impl ConcentricBackend {
    pub fn new(rho: f64, span: SpanSelection, active: ActiveParameters) -> Result<Self> {
        validate_rho(rho)?;
        Ok(Self { rho, span, active })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `Λ(I + B) − Λ(I)` on the span, diagonal.
    pub fn datum_increment(&self, p: &ConcentricPerturbation) -> Result<DMatrix<C64>> {
        let f = self.span.frequencies();
        let mut m = DMatrix::zeros(f.len(), f.len());
        for (k, &j) in f.iter().enumerate() {
            m[(k, k)] = C64::new(nd_increment(p, j as i32)?, 0.0);
        }
        Ok(m)
    }

    /// `Λ(I + B)` on the span.
    pub fn datum(&self, p: &ConcentricPerturbation) -> Result<NdMatrix> {
        let f = self.span.frequencies();
        let mut m = DMatrix::zeros(f.len(), f.len());
        for (k, &j) in f.iter().enumerate() {
            m[(k, k)] = C64::new(nd_eigenvalue(p, j as i32)?, 0.0);
        }
        NdMatrix::new(m)
    }
}

impl ForwardBackend for ConcentricBackend {
    type State = ModeTriple;

    fn basis_size(&self) -> usize {
        self.span.frequencies().len()
    }

    fn parameter_count(&self) -> usize {
        self.active.count()
    }

    fn basis_solutions(&self) -> Result<Vec<ModeTriple>> {
        self.span
            .frequencies()
            .iter()
            .map(|&j| neumann_mode(j as i32))
            .collect()
    }

    fn apply_perturbation(&self, b: &[C64], states: &[ModeTriple]) -> Result<Vec<ModeTriple>> {
        crate::error::check_len("concentric parameters", self.active.count(), b.len())?;
        let eta = self.active.expand(b);
        Ok(states.iter().map(|m| apply_p_eta(eta, self.rho, m)).collect())
    }

    fn measure(&self, states: &[ModeTriple]) -> Result<DMatrix<C64>> {
        let f = self.span.frequencies();
        Ok(DMatrix::from_fn(f.len(), states.len(), |i, k| {
            if states[k].j == f[i] as i32 {
                measured_mode(&states[k])
            } else {
                ZERO
            }
        }))
    }

    fn derivative_matrix(&self) -> Result<DerivativeMatrix> {
        let f = self.span.frequencies();
        let blocks = (0..self.active.count())
            .map(|n| {
                let mut e = vec![ZERO; self.active.count()];
                e[n] = C64::new(1.0, 0.0);
                let eta = self.active.expand(&e);
                let mut block = DMatrix::zeros(f.len(), f.len());
                for (k, &j) in f.iter().enumerate() {
                    block[(k, k)] = dlambda_eigenvalue(eta, self.rho, j as i32)?;
                }
                Ok(block)
            })
            .collect::<Result<Vec<_>>>()?;
        DerivativeMatrix::from_blocks(f.len(), &blocks)
    }
}

/// Estimates and signed errors of a concentric reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReconstruction {
    /// Active components of the true `(κ₁, κ₂)`.
    pub truth: Vec<f64>,
    /// `Σ_{k≤K} F_k` for `K = 1..`, real parts.
    pub estimates_per_order: Vec<Vec<f64>>,
    /// `truth − estimate` per order.
    pub signed_errors: Vec<Vec<f64>>,
}

/// Runs the reversion on exact spectral data for `p` and reports the partial
/// sums against the truth.
pub fn reconstruct_kappa(
    p: &ConcentricPerturbation,
    span: &SpanSelection,
    active: ActiveParameters,
    order: usize,
) -> Result<KappaReconstruction> {
    let (_, rec) = reconstruct_kappa_full(p, span, active, &ReversionConfig::with_order(order))?;
    Ok(rec)
}

/// [`reconstruct_kappa`] returning the raw reversion result as well.
pub fn reconstruct_kappa_full(
    p: &ConcentricPerturbation,
    span: &SpanSelection,
    active: ActiveParameters,
    config: &ReversionConfig,
) -> Result<(ReversionResult, KappaReconstruction)> {
    let backend = ConcentricBackend::new(p.rho, span.clone(), active)?;
    check_injective(&backend.derivative_matrix()?)?;
    let increment = backend.datum_increment(p)?;
    let result = reconstruct_from_increment(&backend, &increment, config)?;
    let truth = active.restrict([p.kappa1, p.kappa2]);
    let estimates: Vec<Vec<f64>> = result
        .partial_sums
        .iter()
        .map(|s| s.iter().map(|z| z.re).collect())
        .collect();
    let errors = estimates
        .iter()
        .map(|e| truth.iter().zip(e).map(|(t, x)| t - x).collect())
        .collect();
    Ok((
        result,
        KappaReconstruction {
            truth,
            estimates_per_order: estimates,
            signed_errors: errors,
        },
    ))
}

fn check_injective(d: &DerivativeMatrix) -> Result<()> {
    let sv = d.entries.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if sv.len() < d.parameter_count() || min.is_nan() || min <= 1e-12 * max {
        return Err(Error::SingularDerivative(format!(
            "span-restricted derivative is not injective (σ_min = {min:e}, σ_max = {max:e})"
        )));
    }
    Ok(())
}

/// One row of the `err_K(δ)` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub order: usize,
    pub err: f64,
}

/// `err_K(δ) = √(π/2) · max_{|κ|=δ} |κ − Σ_{k≤K} F_k|` with `κ` sampled at
/// `samples` equally spaced angles, for `K = 1..=max_order`.
///
/// Rows are ordered by `δ`, then `K`.
pub fn error_sweep(
    rho: f64,
    span: &SpanSelection,
    max_order: usize,
    deltas: &[f64],
    samples: usize,
) -> Result<Vec<SweepRow>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample per circle".into()));
    }
    let config = ReversionConfig {
        order: max_order,
        experimental_general_recursion: max_order > crate::reversion::PROVEN_ORDER,
        ..ReversionConfig::default()
    };
    let points: Vec<(usize, f64, f64)> = deltas
        .iter()
        .enumerate()
        .flat_map(|(d, &delta)| (0..samples).map(move |s| (d, delta, 2.0 * PI * s as f64 / samples as f64)))
        .collect();
    let errors: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(_, delta, phi)| {
            let p = ConcentricPerturbation::new(delta * phi.cos(), delta * phi.sin(), rho)?;
            let (result, _) = reconstruct_kappa_full(&p, span, ActiveParameters::Both, &config)?;
            Ok(result
                .partial_sums
                .iter()
                .map(|s| {
                    let e1 = C64::new(p.kappa1, 0.0) - s[0];
                    let e2 = C64::new(p.kappa2, 0.0) - s[1];
                    (e1.norm_sqr() + e2.norm_sqr()).sqrt()
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let scale = (PI / 2.0).sqrt();
    let mut rows = Vec::with_capacity(deltas.len() * max_order);
    for (d, &delta) in deltas.iter().enumerate() {
        let block = &errors[d * samples..(d + 1) * samples];
        for k in 0..max_order {
            let worst = block.iter().map(|e| e[k]).fold(0.0, f64::max);
            rows.push(SweepRow {
                delta,
                order: k + 1,
                err: scale * worst,
            });
        }
    }
    Ok(rows)
}

/// `n` logarithmically spaced points from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("slope fit needs two or more points".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::InvalidArgument("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Signed errors over a grid of one contrast while the other is known to vanish.
///
/// Each row is `(κ, [error for K = 1..=max_order])`.
pub fn single_parameter_curves(
    rho: f64,
    active: ActiveParameters,
    grid: &[f64],
    max_order: usize,
) -> Result<Vec<(f64, Vec<f64>)>> {
    if active == ActiveParameters::Both {
        return Err(Error::InvalidArgument("choose the annulus or the disk contrast".into()));
    }
    let span = SpanSelection::first(1)?;
    grid.iter()
        .map(|&kappa| {
            let p = match active {
                ActiveParameters::AnnulusOnly => ConcentricPerturbation::new(kappa, 0.0, rho)?,
                _ => ConcentricPerturbation::new(0.0, kappa, rho)?,
            };
            let rec = reconstruct_kappa(&p, &span, active, max_order)?;
            Ok((kappa, rec.signed_errors.iter().map(|e| e[0]).collect()))
        })
        .collect()
}

/// Unitary map from the complex pair `(f_j, f_−j)` to the real pair
/// `(cos jθ/√π, sin jθ/√π)`: `c = (f_j + f_−j)/√2`, `s = (f_j − f_−j)/(i√2)`.
///
/// Rows index `(c, s)`, columns `(f_j, f_−j)`.
pub fn complex_to_real_pair() -> DMatrix<C64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(
        2,
        2,
        &[C64::new(r, 0.0), C64::new(r, 0.0), C64::new(0.0, -r), C64::new(0.0, r)],
    )
}

/// `𝒫Λ(I + B)𝒫` in the real trigonometric basis `cos 1, sin 1, cos 2, ...`
/// of size `basis_size`, obtained from the spectral eigenvalues by the
/// unitary change of basis.
pub fn real_basis_nd_matrix(p: &ConcentricPerturbation, basis_size: usize) -> Result<DMatrix<C64>> {
    let pairs = basis_size.div_ceil(2);
    let u = complex_to_real_pair();
    let mut out = DMatrix::zeros(2 * pairs, 2 * pairs);
    for k in 0..pairs {
        let j = (k + 1) as i32;
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(nd_eigenvalue(p, j)?, 0.0),
            C64::new(nd_eigenvalue(p, -j)?, 0.0),
        ]));
        let block = &u * d * u.adjoint();
        out.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&block);
    }
    Ok(out.view((0, 0), (basis_size, basis_size)).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn eigenvalue_special_cases() {
        for j in [1, -2, 5] {
            let p = ConcentricPerturbation::new(0.0, 0.0, 0.4).unwrap();
            assert!((nd_eigenvalue(&p, j).unwrap() - 1.0 / j.abs() as f64).abs() < 1e-15);
            let p = ConcentricPerturbation::new(0.7, 0.7, 0.4).unwrap();
            let expect = 1.0 / (1.7 * j.abs() as f64);
            assert!((nd_eigenvalue(&p, j).unwrap() - expect).abs() < 1e-15);
        }
        let p = ConcentricPerturbation::new(0.0, 1.0, 0.3).unwrap();
        assert!((nd_eigenvalue(&p, 1).unwrap() - 2.91 / 3.09).abs() < 1e-15);
        assert!(nd_eigenvalue(&p, 0).is_err());
    }

    #[test]
    fn derivative_eigenvalue_examples() {
        assert_eq!(dlambda_eigenvalue([c(0.0), c(0.0)], 0.3, 1).unwrap(), c(0.0));
        let v = dlambda_eigenvalue([c(1.0), c(0.0)], 0.3, 2).unwrap();
        assert!((v.re - (0.3f64.powi(4) - 1.0) / 2.0).abs() < 1e-15);
        assert!(dlambda_eigenvalue([c(1.0), c(0.0)], 0.3, 0).is_err());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let eta = [0.4, -0.7];
        let rho = 0.6;
        let mut prev = f64::NAN;
        for k in 0..4 {
            let t = 1e-2 / 2f64.powi(k);
            let p = ConcentricPerturbation::new(t * eta[0], t * eta[1], rho).unwrap();
            let fd = nd_increment(&p, 2).unwrap() / t;
            let d = dlambda_eigenvalue([c(eta[0]), c(eta[1])], rho, 2).unwrap().re;
            let err = (fd - d).abs();
            if k > 0 {
                let ratio = prev / err;
                assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
            }
            prev = err;
        }
    }

    #[test]
    fn neumann_modes() {
        let m = neumann_mode(1).unwrap();
        assert!((m.alpha.re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
        assert_eq!(m.alpha, m.gamma);
        assert_eq!(m.beta, c(0.0));
        let m = neumann_mode(-3).unwrap();
        assert!((m.alpha.re - 1.0 / (3.0 * (2.0 * PI).sqrt())).abs() < 1e-16);
        assert_eq!(m.transmission_defect(0.3), 0.0);
        assert!((trace_mode(&neumann_mode(1).unwrap()).re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
        assert!(neumann_mode(0).is_err());
    }

    #[test]
    fn p_eta_worked_example() {
        let m = ModeTriple {
            j: 1,
            alpha: c(0.0),
            beta: c(0.0),
            gamma: c(1.0),
        };
        let out = apply_p_eta([c(0.0), c(1.0)], 0.5, &m);
        assert!((out.alpha - c(-0.125)).norm() < 1e-15);
        assert!((out.beta - c(-0.125)).norm() < 1e-15);
        assert!((out.gamma - c(-0.625)).norm() < 1e-15);
        assert!((trace_mode(&out) - c(-0.25)).norm() < 1e-15);
        let zero = apply_p_eta([c(0.0), c(0.0)], 0.5, &m);
        assert_eq!(trace_mode(&zero), c(0.0));
        let m = ModeTriple {
            j: 1,
            alpha: c(1.0),
            beta: c(-1.0),
            gamma: c(1.0 - 4.0),
        };
        assert_eq!(trace_mode(&m), c(0.0));
    }

    #[test]
    fn neumann_series_resums_to_the_eigenvalue() {
        let (cc, rho) = (0.2, 0.3);
        let mut m = neumann_mode(1).unwrap();
        let mut total = measured_mode(&m);
        for _ in 0..30 {
            m = apply_p_eta([c(cc), c(cc)], rho, &m);
            total += measured_mode(&m);
        }
        let p = ConcentricPerturbation::new(cc, cc, rho).unwrap();
        assert!((total.re - nd_eigenvalue(&p, 1).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn one_mode_first_term_has_closed_form() {
        let p = ConcentricPerturbation::new(0.0, 1.0, 0.3).unwrap();
        let span = SpanSelection::first(1).unwrap();
        let rec = reconstruct_kappa(&p, &span, ActiveParameters::DiskOnly, 1).unwrap();
        let f1 = rec.estimates_per_order[0][0];
        assert!((f1 - 2.0 / 3.09).abs() < 1e-12);
        assert!((f1 - 0.647249).abs() < 1e-6);
        assert!((rec.signed_errors[0][0] - 0.352751).abs() < 1e-6);
    }

    #[test]
    fn zero_perturbation_gives_zero_terms() {
        let p = ConcentricPerturbation::new(0.0, 0.0, 0.5).unwrap();
        let rec = reconstruct_kappa(&p, &SpanSelection::first(2).unwrap(), ActiveParameters::Both, 4).unwrap();
        assert!(rec.estimates_per_order.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn real_basis_matrix_is_diagonal_and_real() {
        let p = ConcentricPerturbation::new(0.3, -0.2, 0.5).unwrap();
        let m = real_basis_nd_matrix(&p, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j {
                    nd_eigenvalue(&p, (i / 2 + 1) as i32).unwrap()
                } else {
                    0.0
                };
                assert!((m[(i, j)] - c(expect)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let x = logspace(1e-3, 1e-1, 12);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powi(3)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(linspace(-0.5, 1.0, 151).len(), 151);
    }

    #[test]
    fn singular_span_is_rejected() {
        // two unknowns from a single measurement
        let p = ConcentricPerturbation::new(0.1, 0.1, 0.5).unwrap();
        let err = reconstruct_kappa(&p, &SpanSelection::first(1).unwrap(), ActiveParameters::Both, 1);
        assert!(matches!(err, Err(Error::SingularDerivative(_))));
    }

    proptest! {
        #[test]
        fn transmission_is_preserved(
            j in 1i32..6, rho in 0.1f64..0.95,
            e1 in -2.0f64..2.0, e2 in -2.0f64..2.0,
            a in -1.0f64..1.0, b in -1.0f64..1.0, im in -1.0f64..1.0,
        ) {
            let q = rho.powi(-2 * j);
            let m = ModeTriple { j, alpha: C64::new(a, im), beta: c(b), gamma: C64::new(a, im) + c(b * q) };
            let out = apply_p_eta([c(e1), C64::new(e2, -e1)], rho, &m);
            let scale = 1.0 + out.gamma.norm() + out.alpha.norm() + out.beta.norm() * q;
            prop_assert!(out.transmission_defect(rho) <= 1e-12 * scale);
        }
    }
}
