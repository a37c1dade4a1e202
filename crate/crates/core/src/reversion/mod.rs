//! Series reversion of the forward map's Taylor expansion.
//!
//! With `u_j = N f_j` the basis solutions, `P(b)` the perturbation operator
//! and `M` the (truncated) pseudoinverse of the projected derivative applied
//! to the matrix `[⟨T s_j, f_i⟩]` of a family of states `s_j`, the terms are
//!
//! ```text
//! F_1 = M(Λ_datum − Λ(A))
//! F_2 = M[v],            h = −P(F_1)u, v = P(F_1)h
//! F_3 = M[p + q],        w = −P(F_2)u, p = P(F_2)h, q = P(F_1)(v + w)
//! F_4 = M[x + y + z],    r = −P(F_3)u, x = P(F_3)h, y = P(F_2)(v + w),
//!                        z = P(F_1)(p + q + r)
//! ```
//!
//! [`closed_form_terms`] evaluates the same terms from the expanded
//! formulas in `G_k`, `L`, `R`, `C`, `V`, `H`, and [`general_recursion_step`]
//! from the recursion `P̃_j = Σ_n P(F_{j−n})(P̃_n − P(F_n))`, which is only
//! conjectured beyond order four.

mod closed_form;
mod io;
mod pinv;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::matrix::{DerivativeMatrix, NdMatrix};

pub use closed_form::closed_form_terms;
pub use pinv::{TruncatedPinv, TruncationMode};

/// Highest order covered by proven formulas.
pub const PROVEN_ORDER: usize = 4;

/// Linear structure needed on backend states.
pub trait StateOps: Clone + Send + Sync {
    fn add(&self, other: &Self) -> Self;
}

/// A forward model supplying everything the reversion needs.
///
/// States represent elements of the solution space (FE functions, electrode
/// pairs, harmonic mode triples); perturbation values are given per pixel.
pub trait ForwardBackend: Sync {
    type State: StateOps;

    /// Number of boundary basis functions (or current patterns), `J`.
    fn basis_size(&self) -> usize;

    /// Dimension of the reconstruction space, `N`.
    fn parameter_count(&self) -> usize;

    /// `u_j = N f_j` for `j = 1..J`.
    fn basis_solutions(&self) -> Result<Vec<Self::State>>;

    /// `P(b) s` for each state.
    fn apply_perturbation(&self, b: &[C64], states: &[Self::State]) -> Result<Vec<Self::State>>;

    /// `[⟨T s_j, f_i⟩]_{ij}`.
    fn measure(&self, states: &[Self::State]) -> Result<DMatrix<C64>>;

    /// `𝒫Λ(A)𝒫` for the background.
    fn nd_matrix(&self) -> Result<NdMatrix> {
        NdMatrix::new(self.measure(&self.basis_solutions()?)?)
    }

    /// `ℱ = 𝒫DΛ(A;·)𝒫` on the pixel space.
    fn derivative_matrix(&self) -> Result<DerivativeMatrix>;
}

/// Route used for the terms of order two and higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HigherOrderMethod {
    /// Intermediate sequences `h, v, w, p, q, r, x, y, z`.
    #[default]
    Pipeline,
    /// Expanded formulas in `G_k`, `L`, `R`, `C`, `V`, `H` (orders ≤ 4, no cutoff).
    ClosedForm,
    /// The general recursion (requires the experimental flag).
    Recursion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversionConfig {
    /// Number of terms `K`.
    pub order: usize,
    /// Singular value threshold `α`.
    pub svd_threshold: f64,
    #[serde(default)]
    pub truncation: TruncationMode,
    /// Contrast cutoff `β`; zero disables it.
    #[serde(default)]
    pub contrast_cutoff: f64,
    #[serde(default)]
    pub experimental_general_recursion: bool,
    #[serde(default)]
    pub method: HigherOrderMethod,
}

impl Default for ReversionConfig {
    fn default() -> Self {
        Self {
            order: PROVEN_ORDER,
            svd_threshold: 0.0,
            truncation: TruncationMode::Absolute,
            contrast_cutoff: 0.0,
            experimental_general_recursion: false,
            method: HigherOrderMethod::Pipeline,
        }
    }
}

impl ReversionConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidArgument("order K must be at least 1".into()));
        }
        if [self.svd_threshold, self.contrast_cutoff]
            .iter()
            .any(|v| v.is_nan() || *v < 0.0)
        {
            return Err(Error::InvalidArgument("thresholds α and β must be non-negative".into()));
        }
        let needs_flag = self.order > PROVEN_ORDER || self.method == HigherOrderMethod::Recursion;
        if needs_flag && !self.experimental_general_recursion {
            return Err(Error::ExperimentalDisabled);
        }
        if self.method == HigherOrderMethod::ClosedForm {
            if self.order > PROVEN_ORDER {
                return Err(Error::InvalidArgument(
                    "closed-form terms exist only up to order 4".into(),
                ));
            }
            if self.contrast_cutoff > 0.0 {
                return Err(Error::InvalidArgument(
                    "closed-form terms do not support the contrast cutoff".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-order diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderDiagnostics {
    pub order: usize,
    /// Frobenius norm of the data matrix fed to the pseudoinverse (absent for
    /// closed-form terms, which combine several inversions).
    pub rhs_norm: Option<f64>,
    /// `‖ℱF_j − rhs‖ / ‖rhs‖` before the cutoff: the part of the data outside
    /// the range of the derivative.
    pub projection_residual: Option<f64>,
    /// `max_n |F_j[n]|` after the cutoff.
    pub term_sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub kept_singular_values: Vec<f64>,
    pub dropped_singular_values: Vec<f64>,
    pub effective_threshold: f64,
    pub orders: Vec<OrderDiagnostics>,
    /// Set when terms beyond order four came from the unproven recursion.
    pub conjectural: bool,
    pub warnings: Vec<String>,
    pub config: ReversionConfig,
}

/// Terms `F_1..F_K` as pixel vectors and their partial sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversionResult {
    pub terms: Vec<Vec<C64>>,
    /// `partial_sums[j] = partial_sums[j-1] + terms[j]`.
    pub partial_sums: Vec<Vec<C64>>,
    pub diagnostics: Diagnostics,
}

/// `F_1 = M(datum − Λ(A))`.
pub fn compute_f1(datum: &NdMatrix, background: &NdMatrix, pinv: &TruncatedPinv) -> Result<Vec<C64>> {
    check_len("datum size", background.size(), datum.size())?;
    pinv.apply(&(&datum.entries - &background.entries))
}

/// `τ_β(partial_sum) − previous_sum`, with `τ_β` zeroing pixel values of
/// modulus below `β`.
pub fn apply_contrast_cutoff(partial_sum: &[C64], previous_sum: &[C64], beta: f64) -> Vec<C64> {
    partial_sum
        .iter()
        .zip(previous_sum)
        .map(|(s, p)| {
            let kept = if s.norm() < beta { C64::new(0.0, 0.0) } else { *s };
            kept - p
        })
        .collect()
}

pub(crate) fn add_states<S: StateOps>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

pub(crate) fn negate(b: &[C64]) -> Vec<C64> {
    b.iter().map(|z| -z).collect()
}

fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Bookkeeping shared by the term routes: applies `M`, the cutoff and
/// records diagnostics.
struct Accumulator<'a> {
    derivative: &'a DerivativeMatrix,
    pinv: &'a TruncatedPinv,
    beta: f64,
    terms: Vec<Vec<C64>>,
    sums: Vec<Vec<C64>>,
    orders: Vec<OrderDiagnostics>,
}

impl<'a> Accumulator<'a> {
    fn new(derivative: &'a DerivativeMatrix, pinv: &'a TruncatedPinv, beta: f64) -> Self {
        Self {
            derivative,
            pinv,
            beta,
            terms: Vec::new(),
            sums: Vec::new(),
            orders: Vec::new(),
        }
    }

    /// Inverts `rhs`, applies the cutoff and stores the term.
    fn push(&mut self, rhs: &DMatrix<C64>) -> Result<&[C64]> {
        let raw = self.pinv.apply(rhs)?;
        let rhs_norm = frobenius(rhs);
        let fitted = self.derivative.apply(&raw)?;
        let residual = if rhs_norm > 0.0 {
            frobenius(&(fitted - rhs)) / rhs_norm
        } else {
            0.0
        };
        let previous = self.previous(raw.len());
        let term = if self.beta > 0.0 {
            let candidate: Vec<C64> = previous.iter().zip(&raw).map(|(p, f)| p + f).collect();
            apply_contrast_cutoff(&candidate, &previous, self.beta)
        } else {
            raw
        };
        Ok(self.store(term, Some(rhs_norm), Some(residual)))
    }

    fn previous(&self, n: usize) -> Vec<C64> {
        self.sums.last().cloned().unwrap_or_else(|| vec![C64::new(0.0, 0.0); n])
    }

    fn store(&mut self, term: Vec<C64>, rhs_norm: Option<f64>, residual: Option<f64>) -> &[C64] {
        let sum = self
            .previous(term.len())
            .iter()
            .zip(&term)
            .map(|(p, f)| p + f)
            .collect();
        self.orders.push(OrderDiagnostics {
            order: self.terms.len() + 1,
            rhs_norm,
            projection_residual: residual,
            term_sup_norm: term.iter().map(|z| z.norm()).fold(0.0, f64::max),
        });
        self.terms.push(term);
        self.sums.push(sum);
        self.terms.last().expect("just pushed")
    }

    fn finish(self, config: &ReversionConfig) -> ReversionResult {
        let mut warnings = Vec::new();
        if let Some(w) = self.pinv.warning() {
            warnings.push(w.to_string());
        }
        ReversionResult {
            terms: self.terms,
            partial_sums: self.sums,
            diagnostics: Diagnostics {
                kept_singular_values: self.pinv.kept_singular_values().to_vec(),
                dropped_singular_values: self.pinv.dropped_singular_values().to_vec(),
                effective_threshold: self.pinv.cutoff(),
                orders: self.orders,
                conjectural: config.order > PROVEN_ORDER,
                warnings,
                config: config.clone(),
            },
        }
    }
}

/// Full reversion from a datum: builds the derivative and its truncated
/// pseudoinverse, computes `F_1` and the higher terms.
pub fn reconstruct<B: ForwardBackend>(
    backend: &B,
    datum: &NdMatrix,
    config: &ReversionConfig,
) -> Result<ReversionResult> {
    config.validate()?;
    let background = backend.nd_matrix()?;
    check_len("datum size", background.size(), datum.size())?;
    let increment = &datum.entries - &background.entries;
    reconstruct_from_increment(backend, &increment, config)
}

/// As [`reconstruct`] but from `Λ_datum − Λ(A)` directly, which avoids
/// cancellation when the difference is known in closed form.
pub fn reconstruct_from_increment<B: ForwardBackend>(
    backend: &B,
    increment: &DMatrix<C64>,
    config: &ReversionConfig,
) -> Result<ReversionResult> {
    config.validate()?;
    let derivative = backend.derivative_matrix()?;
    check_len(
        "derivative columns",
        backend.parameter_count(),
        derivative.parameter_count(),
    )?;
    let pinv = TruncatedPinv::new(&derivative, config.svd_threshold, config.truncation);
    compute_higher_terms(backend, &derivative, &pinv, increment, config)
}

/// Computes `F_1..F_K` from the data increment `Λ_datum − Λ(A)` with the
/// configured route.
pub fn compute_higher_terms<B: ForwardBackend>(
    backend: &B,
    derivative: &DerivativeMatrix,
    pinv: &TruncatedPinv,
    increment: &DMatrix<C64>,
    config: &ReversionConfig,
) -> Result<ReversionResult> {
    config.validate()?;
    check_len("data increment", backend.basis_size(), increment.nrows())?;
    let u = backend.basis_solutions()?;
    let mut acc = Accumulator::new(derivative, pinv, config.contrast_cutoff);
    acc.push(increment)?;
    match config.method {
        HigherOrderMethod::Pipeline => pipeline(backend, &u, &mut acc, config.order)?,
        HigherOrderMethod::ClosedForm => {
            let f1 = acc.terms[0].clone();
            let closed = closed_form_terms(backend, &u, pinv, &f1, config.order)?;
            for term in closed.into_iter().skip(1) {
                acc.store(term, None, None);
            }
        }
        HigherOrderMethod::Recursion => recursion(backend, &u, &mut acc, config.order)?,
    }
    if config.order > PROVEN_ORDER && config.method != HigherOrderMethod::Recursion {
        recursion_tail(backend, &u, &mut acc, config.order)?;
    }
    Ok(acc.finish(config))
}

fn pipeline<B: ForwardBackend>(backend: &B, u: &[B::State], acc: &mut Accumulator<'_>, order: usize) -> Result<()> {
    let order = order.min(PROVEN_ORDER);
    if order < 2 {
        return Ok(());
    }
    let f1 = acc.terms[0].clone();
    let h = backend.apply_perturbation(&negate(&f1), u)?;
    let v = backend.apply_perturbation(&f1, &h)?;
    let f2 = acc.push(&backend.measure(&v)?)?.to_vec();
    if order < 3 {
        return Ok(());
    }
    let w = backend.apply_perturbation(&negate(&f2), u)?;
    let p = backend.apply_perturbation(&f2, &h)?;
    let vw = add_states(&v, &w);
    let q = backend.apply_perturbation(&f1, &vw)?;
    let pq = add_states(&p, &q);
    let f3 = acc.push(&backend.measure(&pq)?)?.to_vec();
    if order < 4 {
        return Ok(());
    }
    let r = backend.apply_perturbation(&negate(&f3), u)?;
    let x = backend.apply_perturbation(&f3, &h)?;
    let y = backend.apply_perturbation(&f2, &vw)?;
    let z = backend.apply_perturbation(&f1, &add_states(&pq, &r))?;
    acc.push(&backend.measure(&add_states(&add_states(&x, &y), &z))?)?;
    Ok(())
}

/// State of the recursion: `P̃_n u` and `−P(F_n) u` for all computed orders.
struct RecursionState<S> {
    tilde: Vec<Vec<S>>,
    neg_direct: Vec<Vec<S>>,
}

impl<S: StateOps> RecursionState<S> {
    fn start<B: ForwardBackend<State = S>>(backend: &B, u: &[S], f1: &[C64]) -> Result<Self> {
        let zero = backend.apply_perturbation(&vec![C64::new(0.0, 0.0); f1.len()], u)?;
        Ok(Self {
            tilde: vec![zero],
            neg_direct: vec![backend.apply_perturbation(&negate(f1), u)?],
        })
    }

    fn record<B: ForwardBackend<State = S>>(&mut self, backend: &B, u: &[S], f: &[C64], tilde: Vec<S>) -> Result<()> {
        self.neg_direct.push(backend.apply_perturbation(&negate(f), u)?);
        self.tilde.push(tilde);
        Ok(())
    }
}

/// `P̃_j u = Σ_{n<j} P(F_{j−n})(P̃_n u − P(F_n) u)` from `F_1..F_{j−1}` and
/// the matching recursion state.
fn recursion_states<B: ForwardBackend>(
    backend: &B,
    terms: &[Vec<C64>],
    state: &RecursionState<B::State>,
) -> Result<Vec<B::State>> {
    let j = terms.len() + 1;
    let mut total: Option<Vec<B::State>> = None;
    for n in 1..j {
        let diff = add_states(&state.tilde[n - 1], &state.neg_direct[n - 1]);
        let contribution = backend.apply_perturbation(&terms[j - n - 1], &diff)?;
        total = Some(match total {
            None => contribution,
            Some(t) => add_states(&t, &contribution),
        });
    }
    Ok(total.expect("j ≥ 2"))
}

fn recursion<B: ForwardBackend>(backend: &B, u: &[B::State], acc: &mut Accumulator<'_>, order: usize) -> Result<()> {
    let mut state = RecursionState::start(backend, u, &acc.terms[0])?;
    for _ in 2..=order {
        let tilde = recursion_states(backend, &acc.terms, &state)?;
        let f = acc.push(&backend.measure(&tilde)?)?.to_vec();
        state.record(backend, u, &f, tilde)?;
    }
    Ok(())
}

fn recursion_tail<B: ForwardBackend>(
    backend: &B,
    u: &[B::State],
    acc: &mut Accumulator<'_>,
    order: usize,
) -> Result<()> {
    let mut state = RecursionState::start(backend, u, &acc.terms[0])?;
    // rebuild P̃_n for the proven orders from the terms already computed
    for n in 2..=acc.terms.len() {
        let tilde = recursion_states(backend, &acc.terms[..n - 1], &state)?;
        state.record(backend, u, &acc.terms[n - 1], tilde)?;
    }
    for _ in acc.terms.len() + 1..=order {
        let tilde = recursion_states(backend, &acc.terms, &state)?;
        let f = acc.push(&backend.measure(&tilde)?)?.to_vec();
        state.record(backend, u, &f, tilde)?;
    }
    Ok(())
}

/// `F_j` from the recursion, given `F_1..F_{j−1}`.
///
/// The recursion is proven for `j ≤ 4` and conjectured beyond, so it is only
/// available with the experimental flag.
pub fn general_recursion_step<B: ForwardBackend>(
    backend: &B,
    terms: &[Vec<C64>],
    pinv: &TruncatedPinv,
    experimental: bool,
) -> Result<Vec<C64>> {
    if !experimental {
        return Err(Error::ExperimentalDisabled);
    }
    if terms.is_empty() {
        return Err(Error::InvalidArgument("the recursion starts from F_1".into()));
    }
    let u = backend.basis_solutions()?;
    let mut state = RecursionState::start(backend, &u, &terms[0])?;
    for n in 2..=terms.len() {
        let tilde = recursion_states(backend, &terms[..n - 1], &state)?;
        state.record(backend, &u, &terms[n - 1], tilde)?;
    }
    let tilde = recursion_states(backend, terms, &state)?;
    pinv.apply(&backend.measure(&tilde)?)
}
