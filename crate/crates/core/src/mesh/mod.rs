//! Triangulations, boundary parametrisation and pixel partitions.

mod generate;
mod io;
mod partition;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate_disk_mesh, DiskMeshBuilder};
pub use partition::{
    build_pixel_partition, concentric_partition, CoefficientField, PixelPartition, ALIGNMENT_TOLERANCE,
};

/// Polynomial degree of the Lagrange finite element space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ElementDegree {
    Linear,
    Quadratic,
}

impl ElementDegree {
    pub fn order(self) -> usize {
        match self {
            ElementDegree::Linear => 1,
            ElementDegree::Quadratic => 2,
        }
    }

    /// Local degrees of freedom per triangle.
    pub fn local_dofs(self) -> usize {
        match self {
            ElementDegree::Linear => 3,
            ElementDegree::Quadratic => 6,
        }
    }

    /// Trace degrees of freedom per boundary edge.
    pub fn edge_dofs(self) -> usize {
        self.order() + 1
    }
}

impl TryFrom<u8> for ElementDegree {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(ElementDegree::Linear),
            2 => Ok(ElementDegree::Quadratic),
            other => Err(Error::InvalidArgument(format!(
                "element degree must be 1 or 2, got {other}"
            ))),
        }
    }
}

impl From<ElementDegree> for u8 {
    fn from(d: ElementDegree) -> u8 {
        d.order() as u8
    }
}

/// One edge of the outer boundary loop.
///
/// `t_start < t_end` are boundary (arc-length) parameters of the two end
/// vertices; the closing edge of the loop ends at the total boundary length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub start: usize,
    pub end: usize,
    pub t_start: f64,
    pub t_end: f64,
}

impl BoundaryEdge {
    pub fn param_length(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Degree-of-freedom numbering for the Lagrange space on a mesh.
///
/// Vertex dofs come first (same index as the vertex), followed by one dof per
/// mesh edge for quadratic elements. Local order per triangle is
/// `[v0, v1, v2, e01, e12, e20]`; per boundary edge `[start, end, mid]`.
#[derive(Debug, Clone)]
struct DofMap {
    n_dofs: usize,
    triangle_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
}

/// A conforming triangulation with an ordered outer boundary loop.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    degree: ElementDegree,
    circle_radius: Option<f64>,
    dofs: DofMap,
}

impl Mesh {
    /// Builds a mesh after checking its invariants: indices in range,
    /// positive triangle areas, and a single closed boundary loop whose
    /// parameters strictly increase.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
        degree: ElementDegree,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let nv = vertices.len();
        for (k, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {k} references a missing vertex")));
            }
            let area = signed_area(&vertices, tri);
            if area.is_nan() || area <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {k} has non-positive signed area {area:e}"
                )));
            }
        }
        validate_boundary(&boundary, nv)?;

        let dofs = DofMap::build(nv, &triangles, &boundary, degree)?;
        let circle_radius = detect_circle(&vertices, &boundary);
        Ok(Self {
            vertices,
            triangles,
            boundary,
            degree,
            circle_radius,
            dofs,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn degree(&self) -> ElementDegree {
        self.degree
    }

    /// Radius of the circle on which all boundary vertices lie, if any.
    pub fn circle_radius(&self) -> Option<f64> {
        self.circle_radius
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Total length of the boundary parameter range.
    pub fn boundary_length(&self) -> f64 {
        let first = self.boundary[0].t_start;
        let last = self.boundary[self.boundary.len() - 1].t_end;
        last - first
    }

    pub fn dof_count(&self) -> usize {
        self.dofs.n_dofs
    }

    /// Global dofs of triangle `t` in local order.
    pub fn triangle_dofs(&self, t: usize) -> &[usize] {
        let k = self.degree.local_dofs();
        &self.dofs.triangle_dofs[t * k..(t + 1) * k]
    }

    /// Global trace dofs of boundary edge `e` in local order `[start, end, (mid)]`.
    pub fn boundary_edge_dofs(&self, e: usize) -> &[usize] {
        let k = self.degree.edge_dofs();
        &self.dofs.boundary_dofs[e * k..(e + 1) * k]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn triangle_areas(&self) -> Vec<f64> {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).collect()
    }

    pub fn barycentre(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Longest edge over all triangles.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|tri| {
                (0..3).map(move |k| {
                    let p = self.vertices[tri[k]];
                    let q = self.vertices[tri[(k + 1) % 3]];
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                })
            })
            .fold(0.0, f64::max)
    }

    /// Same geometry with a different element degree.
    pub fn with_degree(&self, degree: ElementDegree) -> Result<Self> {
        Self::new(
            self.vertices.clone(),
            self.triangles.clone(),
            self.boundary.clone(),
            degree,
        )
    }

    /// Position of boundary edge `e` at local parameter `s` in `[0, 1]`.
    pub fn boundary_point(&self, e: usize, s: f64) -> [f64; 2] {
        let edge = &self.boundary[e];
        let p = self.vertices[edge.start];
        let q = self.vertices[edge.end];
        [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
    }

    /// Splits every triangle into four `levels` times.
    ///
    /// New boundary vertices are placed at the parameter midpoint; on a
    /// circular boundary they are put on the circle. Returns the refined mesh
    /// and, for each new triangle, the index of its ancestor in `self`.
    pub fn refine_uniform(&self, levels: usize) -> Result<(Mesh, Vec<usize>)> {
        let mut mesh = self.clone();
        let mut parent: Vec<usize> = (0..self.triangles.len()).collect();
        for _ in 0..levels {
            let (next, local_parent) = mesh.refine_once()?;
            parent = local_parent.iter().map(|&p| parent[p]).collect();
            mesh = next;
        }
        Ok((mesh, parent))
    }

    fn refine_once(&self) -> Result<(Mesh, Vec<usize>)> {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let boundary_mid: HashMap<(usize, usize), usize> = self
            .boundary
            .iter()
            .enumerate()
            .map(|(k, e)| (edge_key(e.start, e.end), k))
            .collect();

        let mut boundary_vertex = vec![0usize; self.boundary.len()];
        let mut mid_of = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
            let key = edge_key(a, b);
            if let Some(&m) = midpoint.get(&key) {
                return m;
            }
            let p = vertices[a];
            let q = vertices[b];
            let mut pos = [(p[0] + q[0]) * 0.5, (p[1] + q[1]) * 0.5];
            if let Some(&k) = boundary_mid.get(&key) {
                let e = &self.boundary[k];
                if let Some(r) = self.circle_radius {
                    let theta = 0.5 * (e.t_start + e.t_end) / r;
                    pos = [r * theta.cos(), r * theta.sin()];
                }
            }
            vertices.push(pos);
            let m = vertices.len() - 1;
            midpoint.insert(key, m);
            m
        };

        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);
        let mut parent = Vec::with_capacity(self.triangles.len() * 4);
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let ab = mid_of(a, b, &mut vertices);
            let bc = mid_of(b, c, &mut vertices);
            let ca = mid_of(c, a, &mut vertices);
            for tri in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
                triangles.push(tri);
                parent.push(t);
            }
        }
        for (k, e) in self.boundary.iter().enumerate() {
            boundary_vertex[k] = midpoint[&edge_key(e.start, e.end)];
        }
        let mut boundary = Vec::with_capacity(self.boundary.len() * 2);
        for (k, e) in self.boundary.iter().enumerate() {
            let m = boundary_vertex[k];
            let tm = 0.5 * (e.t_start + e.t_end);
            boundary.push(BoundaryEdge {
                start: e.start,
                end: m,
                t_start: e.t_start,
                t_end: tm,
            });
            boundary.push(BoundaryEdge {
                start: m,
                end: e.end,
                t_start: tm,
                t_end: e.t_end,
            });
        }
        let mesh = Mesh::new(vertices, triangles, boundary, self.degree)?;
        Ok((mesh, parent))
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = *tri;
    let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
    0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
}

fn validate_boundary(boundary: &[BoundaryEdge], nv: usize) -> Result<()> {
    if boundary.len() < 3 {
        return Err(Error::InvalidMesh("boundary loop needs at least 3 edges".into()));
    }
    for (k, e) in boundary.iter().enumerate() {
        if e.start >= nv || e.end >= nv {
            return Err(Error::InvalidMesh(format!(
                "boundary edge {k} references a missing vertex"
            )));
        }
        if e.t_start.is_nan() || e.t_end.is_nan() || e.t_end <= e.t_start {
            return Err(Error::InvalidMesh(format!(
                "boundary parameters must strictly increase along edge {k}"
            )));
        }
        let next = &boundary[(k + 1) % boundary.len()];
        if e.end != next.start {
            return Err(Error::InvalidMesh(format!(
                "boundary edges {k} and {} are not consecutive",
                (k + 1) % boundary.len()
            )));
        }
        if k + 1 < boundary.len() {
            let gap = (next.t_start - e.t_end).abs();
            if gap > 1e-12 * (1.0 + e.t_end.abs()) {
                return Err(Error::InvalidMesh(format!(
                    "boundary parameter jumps between edges {k} and {}",
                    k + 1
                )));
            }
        }
    }
    Ok(())
}

fn detect_circle(vertices: &[[f64; 2]], boundary: &[BoundaryEdge]) -> Option<f64> {
    let radii: Vec<f64> = boundary
        .iter()
        .map(|e| vertices[e.start][0].hypot(vertices[e.start][1]))
        .collect();
    let mean = radii.iter().sum::<f64>() / radii.len() as f64;
    if mean > 0.0 && radii.iter().all(|r| (r - mean).abs() <= 1e-9 * mean) {
        Some(mean)
    } else {
        None
    }
}

impl DofMap {
    fn build(nv: usize, triangles: &[[usize; 3]], boundary: &[BoundaryEdge], degree: ElementDegree) -> Result<Self> {
        // every boundary edge must be an edge of exactly one triangle
        let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in triangles {
            for k in 0..3 {
                *edge_use.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (k, e) in boundary.iter().enumerate() {
            if edge_use.get(&edge_key(e.start, e.end)) != Some(&1) {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge {k} is not an edge of exactly one triangle"
                )));
            }
        }

        match degree {
            ElementDegree::Linear => Ok(Self {
                n_dofs: nv,
                triangle_dofs: triangles.iter().flatten().copied().collect(),
                boundary_dofs: boundary.iter().flat_map(|e| [e.start, e.end]).collect(),
            }),
            ElementDegree::Quadratic => {
                let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
                let mut triangle_dofs = Vec::with_capacity(triangles.len() * 6);
                for tri in triangles {
                    triangle_dofs.extend_from_slice(tri);
                    for k in 0..3 {
                        let key = edge_key(tri[k], tri[(k + 1) % 3]);
                        let next = nv + edge_index.len();
                        let idx = *edge_index.entry(key).or_insert(next);
                        triangle_dofs.push(idx);
                    }
                }
                let boundary_dofs = boundary
                    .iter()
                    .flat_map(|e| [e.start, e.end, edge_index[&edge_key(e.start, e.end)]])
                    .collect();
                Ok(Self {
                    n_dofs: nv + edge_index.len(),
                    triangle_dofs,
                    boundary_dofs,
                })
            }
        }
    }
}
