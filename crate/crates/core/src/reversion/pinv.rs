use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::matrix::DerivativeMatrix;

/// How the singular value threshold `α` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    /// Drop `σ < α`.
    #[default]
    Absolute,
    /// Drop `σ < α · σ_max`.
    Relative,
}

/// Moore–Penrose inverse of a derivative matrix after truncating small
/// singular values.
///
/// Besides the requested threshold, singular values at or below the
/// numerical rank tolerance `ε · max(m, n) · σ_max` are always dropped.
#[derive(Debug, Clone)]
pub struct TruncatedPinv {
    inverse: DMatrix<C64>,
    basis_size: usize,
    singular_values: Vec<f64>,
    kept: usize,
    cutoff: f64,
    warning: Option<String>,
}

impl TruncatedPinv {
    pub fn new(d: &DerivativeMatrix, alpha: f64, mode: TruncationMode) -> Self {
        let a = &d.entries;
        let (m, n) = a.shape();
        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("left singular vectors");
        let v_t = svd.v_t.expect("right singular vectors");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let sigma: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
        let sigma_max = sigma.first().copied().unwrap_or(0.0);

        let requested = match mode {
            TruncationMode::Absolute => alpha,
            TruncationMode::Relative => alpha * sigma_max,
        };
        let rank_tol = f64::EPSILON * m.max(n) as f64 * sigma_max;
        let keep = |s: f64| s >= requested && s > rank_tol;

        let mut inverse = DMatrix::<C64>::zeros(n, m);
        let mut kept = 0;
        for &k in &order {
            let s = svd.singular_values[k];
            if !keep(s) {
                continue;
            }
            kept += 1;
            // V Σ⁺ Uᴴ, one rank-one term per kept value
            let vk = v_t.row(k).adjoint();
            let uk = u.column(k).adjoint();
            inverse += (vk * uk) * C64::new(1.0 / s, 0.0);
        }
        let warning = (kept == 0).then(|| {
            format!("threshold {requested:e} removes every singular value (largest {sigma_max:e}); the inverse is zero")
        });
        Self {
            inverse,
            basis_size: d.basis_size(),
            singular_values: sigma,
            kept,
            cutoff: requested.max(rank_tol),
            warning,
        }
    }

    /// Applies the inverse to a `J×J` matrix (vectorised row index fastest).
    pub fn apply(&self, m: &DMatrix<C64>) -> Result<Vec<C64>> {
        check_len("data matrix rows", self.basis_size, m.nrows())?;
        check_len("data matrix columns", self.basis_size, m.ncols())?;
        Ok((&self.inverse * DVector::from_column_slice(m.as_slice()))
            .as_slice()
            .to_vec())
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.inverse
    }

    /// All singular values, largest first.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn kept_singular_values(&self) -> &[f64] {
        &self.singular_values[..self.kept]
    }

    pub fn dropped_singular_values(&self) -> &[f64] {
        &self.singular_values[self.kept..]
    }

    /// Effective threshold below which values were dropped.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }
}
