//! Finite element realisation of the continuum model.

mod basis;
mod cm;
pub mod space;

pub use basis::{BasisKind, BoundaryBasis, BoundaryQuadrature, BOUNDARY_GAUSS_POINTS};
pub(crate) use cm::{dirichlet_norm, perturbation_load, pixel_gram_blocks};
pub use cm::{CmBackend, Conductivity, FeFunction, FemSystem};
