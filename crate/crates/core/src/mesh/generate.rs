use std::f64::consts::PI;

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{BoundaryEdge, ElementDegree, Mesh};
use crate::error::{Error, Result};

/// Builder for triangulations of an origin-centred disk.
///
/// Interior points are seeded on concentric rings of spacing `h`, optional
/// internal circles and polygons are inserted as constraint edges (so that
/// no triangle crosses them), and the result is refined to a minimum angle.
/// The output depends only on the builder parameters.
#[derive(Debug, Clone)]
pub struct DiskMeshBuilder {
    radius: f64,
    h: f64,
    degree: ElementDegree,
    boundary_segments: Option<usize>,
    circles: Vec<f64>,
    polygons: Vec<Vec<[f64; 2]>>,
}

impl DiskMeshBuilder {
    pub fn new(radius: f64, h: f64) -> Self {
        Self {
            radius,
            h,
            degree: ElementDegree::Linear,
            boundary_segments: None,
            circles: Vec::new(),
            polygons: Vec::new(),
        }
    }

    pub fn degree(mut self, degree: ElementDegree) -> Self {
        self.degree = degree;
        self
    }

    /// Fixes the number of boundary edges instead of deriving it from `h`.
    pub fn boundary_segments(mut self, n: usize) -> Self {
        self.boundary_segments = Some(n);
        self
    }

    /// Forces triangle edges along the origin-centred circle of radius `r`.
    pub fn constrain_circle(mut self, r: f64) -> Self {
        self.circles.push(r);
        self
    }

    /// Forces triangle edges along a closed polygon (vertices in order).
    pub fn constrain_polygon(mut self, vertices: Vec<[f64; 2]>) -> Self {
        self.polygons.push(vertices);
        self
    }

    pub fn build(&self) -> Result<Mesh> {
        let (radius, h) = (self.radius, self.h);
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        if !(h > 0.0 && h < radius) {
            return Err(Error::InvalidArgument(format!(
                "target h must lie in (0, radius), got {h}"
            )));
        }
        for &r in &self.circles {
            if !(r > 0.0 && r < radius) {
                return Err(Error::InvalidArgument(format!(
                    "constraint circle radius {r} outside (0, {radius})"
                )));
            }
        }
        for poly in &self.polygons {
            if poly.len() < 3 {
                return Err(Error::InvalidArgument("constraint polygon needs 3 vertices".into()));
            }
            if poly.iter().any(|p| p[0].hypot(p[1]) >= radius) {
                return Err(Error::InvalidArgument(
                    "constraint polygon must lie inside the disk".into(),
                ));
            }
        }

        let n_boundary = self.boundary_segments.unwrap_or_else(|| ring_count(radius, h)).max(8);

        let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
        let insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: [f64; 2]| {
            cdt.insert(Point2::new(p[0], p[1]))
                .map_err(|e| Error::MeshGeneration(format!("point insertion failed: {e:?}")))
        };

        let boundary_handles = (0..n_boundary)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / n_boundary as f64;
                insert(&mut cdt, [radius * theta.cos(), radius * theta.sin()])
            })
            .collect::<Result<Vec<_>>>()?;

        // curves that interior seeds must keep clear of
        let mut curves: Vec<Vec<[f64; 2]>> = Vec::new();
        let mut loops = Vec::new();
        for &r in &self.circles {
            let n = ring_count(r, h).max(8);
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|k| {
                    let theta = 2.0 * PI * k as f64 / n as f64;
                    [r * theta.cos(), r * theta.sin()]
                })
                .collect();
            curves.push(pts.clone());
            loops.push(pts);
        }
        for poly in &self.polygons {
            let mut pts = Vec::new();
            for k in 0..poly.len() {
                let p = poly[k];
                let q = poly[(k + 1) % poly.len()];
                let len = (q[0] - p[0]).hypot(q[1] - p[1]);
                let n = (len / h).ceil().max(1.0) as usize;
                for s in 0..n {
                    let t = s as f64 / n as f64;
                    pts.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                }
            }
            curves.push(pts.clone());
            loops.push(pts);
        }

        for pts in &loops {
            let handles = pts.iter().map(|&p| insert(&mut cdt, p)).collect::<Result<Vec<_>>>()?;
            for k in 0..handles.len() {
                let (a, b) = (handles[k], handles[(k + 1) % handles.len()]);
                if !cdt.can_add_constraint(a, b) {
                    return Err(Error::MeshGeneration("constraint curves intersect".into()));
                }
                cdt.add_constraint(a, b);
            }
        }
        for k in 0..n_boundary {
            cdt.add_constraint(boundary_handles[k], boundary_handles[(k + 1) % n_boundary]);
        }

        // structured seeding on concentric rings
        let clearance = 0.5 * h;
        let n_rings = (radius / h).round() as usize;
        for ring in 1..n_rings {
            let r = radius - ring as f64 * radius / n_rings as f64;
            let n = ring_count(r, h).max(6);
            let phase = if ring % 2 == 1 { 0.5 } else { 0.0 };
            for k in 0..n {
                let theta = 2.0 * PI * (k as f64 + phase) / n as f64;
                let p = [r * theta.cos(), r * theta.sin()];
                if curves.iter().any(|c| distance_to_loop(p, c) < clearance) {
                    continue;
                }
                insert(&mut cdt, p)?;
            }
        }
        if curves.iter().all(|c| distance_to_loop([0.0, 0.0], c) >= clearance) {
            insert(&mut cdt, [0.0, 0.0])?;
        }

        let initial = cdt.num_vertices();
        let budget = (8.0 * PI * radius * radius / (h * h)) as usize + 10 * initial;
        let params = RefinementParameters::<f64>::new()
            .exclude_outer_faces(false)
            .keep_constraint_edges()
            .with_angle_limit(AngleLimit::from_deg(28.0))
            .with_max_allowed_area(0.35 * h * h)
            .with_max_additional_vertices(budget);
        let result = cdt.refine(params);
        if !result.refinement_complete {
            return Err(Error::MeshGeneration("refinement did not converge".into()));
        }

        let vertices: Vec<[f64; 2]> = cdt
            .vertices()
            .map(|v| {
                let p = v.position();
                [p.x, p.y]
            })
            .collect();
        let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
        for face in cdt.inner_faces() {
            let [a, b, c] = face.vertices().map(|v| v.fix().index());
            let area = (vertices[b][0] - vertices[a][0]) * (vertices[c][1] - vertices[a][1])
                - (vertices[c][0] - vertices[a][0]) * (vertices[b][1] - vertices[a][1]);
            triangles.push(if area > 0.0 { [a, b, c] } else { [a, c, b] });
        }

        let dt = 2.0 * PI * radius / n_boundary as f64;
        let boundary = (0..n_boundary)
            .map(|k| BoundaryEdge {
                start: boundary_handles[k].index(),
                end: boundary_handles[(k + 1) % n_boundary].index(),
                t_start: k as f64 * dt,
                t_end: if k + 1 == n_boundary {
                    2.0 * PI * radius
                } else {
                    (k + 1) as f64 * dt
                },
            })
            .collect();
        Mesh::new(vertices, triangles, boundary, self.degree)
    }
}

/// Conforming triangulation of the disk of the given radius with maximum
/// edge length close to `target_h`.
pub fn generate_disk_mesh(radius: f64, target_h: f64, degree: ElementDegree) -> Result<Mesh> {
    DiskMeshBuilder::new(radius, target_h).degree(degree).build()
}

fn ring_count(r: f64, h: f64) -> usize {
    (2.0 * PI * r / h).ceil() as usize
}

fn distance_to_loop(p: [f64; 2], pts: &[[f64; 2]]) -> f64 {
    (0..pts.len())
        .map(|k| segment_distance(p, pts[k], pts[(k + 1) % pts.len()]))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_disk_is_valid() {
        let m = generate_disk_mesh(1.0, 0.5, ElementDegree::Linear).unwrap();
        assert!(m.triangle_count() >= 4);
        assert!(m.triangle_areas().iter().all(|&a| a > 0.0));
        assert_eq!(m.circle_radius().map(|r| (r - 1.0).abs() < 1e-12), Some(true));
    }

    #[test]
    fn fine_disk_area_close_to_pi() {
        let m = generate_disk_mesh(1.0, 0.05, ElementDegree::Linear).unwrap();
        let area: f64 = m.triangle_areas().iter().sum();
        // inscribed polygon deficit is bounded by half a squared chord per edge
        let n = m.boundary_edges().len() as f64;
        let chord = 2.0 * (PI / n).sin();
        assert!(PI - area >= 0.0 && PI - area <= n * chord * chord / 2.0);
        assert!((area - PI).abs() / PI < 0.01);
        assert!(m.max_edge_length() <= 1.5 * 0.05, "max edge {}", m.max_edge_length());
    }

    #[test]
    fn degree_elevation_keeps_geometry() {
        let p1 = generate_disk_mesh(1.0, 0.05, ElementDegree::Linear).unwrap();
        let p2 = generate_disk_mesh(1.0, 0.05, ElementDegree::Quadratic).unwrap();
        assert_eq!(p1.vertices(), p2.vertices());
        assert_eq!(p1.triangles(), p2.triangles());
        assert!(p2.dof_count() > p1.dof_count());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = DiskMeshBuilder::new(1.0, 0.1).constrain_circle(0.3).build().unwrap();
        let b = DiskMeshBuilder::new(1.0, 0.1).constrain_circle(0.3).build().unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.triangles(), b.triangles());
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(generate_disk_mesh(-1.0, 0.1, ElementDegree::Linear).is_err());
        assert!(generate_disk_mesh(1.0, 0.0, ElementDegree::Linear).is_err());
        assert!(generate_disk_mesh(1.0, 2.0, ElementDegree::Linear).is_err());
    }

    #[test]
    fn constrained_circle_is_resolved_by_edges() {
        let m = DiskMeshBuilder::new(1.0, 0.1).constrain_circle(0.3).build().unwrap();
        let area: f64 = m.triangle_areas().iter().sum();
        assert!((area - PI).abs() < 0.02);
        for tri in m.triangles() {
            let r: Vec<f64> = tri
                .iter()
                .map(|&v| m.vertices()[v][0].hypot(m.vertices()[v][1]))
                .collect();
            let inside = r.iter().all(|&x| x <= 0.3 + 1e-12);
            let outside = r.iter().all(|&x| x >= 0.3 - 1e-12);
            assert!(inside || outside);
        }
    }
}
