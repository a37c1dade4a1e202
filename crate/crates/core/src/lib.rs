//! Series-reversion reconstruction of conductivity perturbations.
//!
//! The forward map `A -> Λ(A)` (Neumann-to-Dirichlet map, or the electrode
//! current-to-voltage map) is analytic, and its Taylor series can be reverted
//! term by term. Given the projected datum `PΛ(A+B)P` and a pseudoinverse of
//! the projected Fréchet derivative, [`reversion`] produces terms `F_1..F_K`
//! with `B = F_1 + .. + F_K + O(|B|^{K+1})`.
//!
//! Three forward backends implement [`reversion::ForwardBackend`]:
//!
//! * [`fem::CmBackend`]: finite elements for the continuum model,
//! * [`scem::ScemBackend`]: finite elements for the complete electrode model,
//! * [`analytic::ConcentricBackend`]: exact spectral calculus on a disk with a
//!   concentric inclusion, used as the oracle for the other two.

pub mod analytic;
pub mod error;
pub mod fem;
pub mod matrix;
pub mod mesh;
pub mod quadrature;
pub mod reversion;
pub mod scem;

pub use error::{Error, Result};
pub use matrix::{DerivativeMatrix, NdMatrix};
pub use mesh::{CoefficientField, ElementDegree, Mesh, PixelPartition};
pub use num_complex::Complex64 as C64;
pub use reversion::{ForwardBackend, ReversionConfig, ReversionResult};

/// Library version recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
