//! Test conductivities: the two-inclusion phantom and the concentric disk.

use std::f64::consts::PI;

use calderon_core::mesh::DiskMeshBuilder;
use calderon_core::Mesh;
use serde::Serialize;

use crate::descriptor::{Backend, PhantomKind, RunDescriptor, SWEEP_RHO};

/// A polygonal inclusion with a constant contrast.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inclusion {
    pub polygon: Vec<[f64; 2]>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phantom {
    pub inclusions: Vec<Inclusion>,
}

pub fn square(center: [f64; 2], half_width: f64) -> Vec<[f64; 2]> {
    [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
        .map(|[sx, sy]| [center[0] + sx * half_width, center[1] + sy * half_width])
        .to_vec()
}

/// Regular polygon with a vertex straight up.
pub fn regular_polygon(center: [f64; 2], circumradius: f64, sides: usize) -> Vec<[f64; 2]> {
    (0..sides)
        .map(|k| {
            let theta = PI / 2.0 + 2.0 * PI * k as f64 / sides as f64;
            [
                center[0] + circumradius * theta.cos(),
                center[1] + circumradius * theta.sin(),
            ]
        })
        .collect()
}

pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + n - 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

impl Phantom {
    /// Square of half-width 0.2 at (−0.35, 0.3) with contrast 0.3 and a
    /// regular pentagon of circumradius 0.3 at (0.35, −0.25) with contrast 0.8.
    pub fn two_inclusion() -> Self {
        Self {
            inclusions: vec![
                Inclusion {
                    polygon: square([-0.35, 0.3], 0.2),
                    value: 0.3,
                },
                Inclusion {
                    polygon: regular_polygon([0.35, -0.25], 0.3, 5),
                    value: 0.8,
                },
            ],
        }
    }

    pub fn zero() -> Self {
        Self { inclusions: Vec::new() }
    }

    pub fn from_kind(kind: PhantomKind) -> Self {
        match kind {
            PhantomKind::TwoInclusion => Self::two_inclusion(),
            PhantomKind::Zero => Self::zero(),
        }
    }

    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        self.inclusions
            .iter()
            .find(|inc| point_in_polygon(p, &inc.polygon))
            .map_or(0.0, |inc| inc.value)
    }
}

/// Contrast `B = A − 1` of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Phantom(Phantom),
    /// `κ₁` on `ρ < r < 1`, `κ₂` on `r < ρ`.
    Concentric {
        rho: f64,
        kappa: [f64; 2],
    },
}

impl Geometry {
    pub fn from_descriptor(desc: &RunDescriptor) -> Self {
        match (desc.backend, desc.rho) {
            (Backend::Analytic, rho) => Geometry::Concentric {
                rho: rho.unwrap_or(SWEEP_RHO),
                kappa: desc.kappa,
            },
            (_, Some(rho)) => Geometry::Concentric { rho, kappa: desc.kappa },
            (_, None) => Geometry::Phantom(Phantom::from_kind(desc.phantom)),
        }
    }

    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        match self {
            Geometry::Phantom(ph) => ph.value_at(p),
            Geometry::Concentric { rho, kappa } => {
                if p[0].hypot(p[1]) < *rho {
                    kappa[1]
                } else {
                    kappa[0]
                }
            }
        }
    }

    /// Contrast at triangle barycentres; exact on meshes that resolve the
    /// interfaces.
    pub fn per_triangle(&self, mesh: &Mesh) -> Vec<f64> {
        (0..mesh.triangle_count())
            .map(|t| self.value_at(mesh.barycentre(t)))
            .collect()
    }

    /// Adds the interfaces as mesh constraints.
    pub fn constrain(&self, mut builder: DiskMeshBuilder) -> DiskMeshBuilder {
        match self {
            Geometry::Phantom(ph) => {
                for inc in &ph.inclusions {
                    builder = builder.constrain_polygon(inc.polygon.clone());
                }
                builder
            }
            Geometry::Concentric { rho, .. } => builder.constrain_circle(*rho),
        }
    }

    /// Range of contrast values, including zero.
    pub fn value_range(&self) -> (f64, f64) {
        let values: Vec<f64> = match self {
            Geometry::Phantom(ph) => ph.inclusions.iter().map(|i| i.value).collect(),
            Geometry::Concentric { kappa, .. } => kappa.to_vec(),
        };
        values
            .iter()
            .fold((0.0, 0.0), |(lo, hi), v| (f64::min(lo, *v), f64::max(hi, *v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygons_and_membership() {
        let p = Phantom::two_inclusion();
        assert_eq!(p.value_at([-0.35, 0.3]), 0.3);
        assert_eq!(p.value_at([0.35, -0.25]), 0.8);
        assert_eq!(p.value_at([0.0, 0.0]), 0.0);
        assert_eq!(p.value_at([-0.35, 0.51]), 0.0);
        let pent = &p.inclusions[1].polygon;
        assert_eq!(pent.len(), 5);
        for v in pent {
            assert!(((v[0] - 0.35).hypot(v[1] + 0.25) - 0.3).abs() < 1e-15);
        }
        assert_eq!(Phantom::zero().value_at([0.1, 0.1]), 0.0);
    }

    #[test]
    fn concentric_values() {
        let g = Geometry::Concentric {
            rho: 0.5,
            kappa: [-0.5, 1.0],
        };
        assert_eq!(g.value_at([0.1, 0.2]), 1.0);
        assert_eq!(g.value_at([0.6, 0.2]), -0.5);
        assert_eq!(g.value_range(), (-0.5, 1.0));
    }

    #[test]
    fn analytic_backend_always_uses_the_concentric_geometry() {
        let desc = RunDescriptor {
            backend: Backend::Analytic,
            ..RunDescriptor::default()
        };
        assert!(matches!(Geometry::from_descriptor(&desc), Geometry::Concentric { rho, .. } if rho == SWEEP_RHO));
        assert!(matches!(
            Geometry::from_descriptor(&RunDescriptor::default()),
            Geometry::Phantom(_)
        ));
    }
}
