//! Lagrange shape functions on triangles and boundary edges.

use crate::mesh::{ElementDegree, Mesh};
use crate::quadrature::TriangleRule;

/// Values of the local shape functions at barycentric point `l`.
pub fn shape_values(degree: ElementDegree, l: [f64; 3]) -> Vec<f64> {
    match degree {
        ElementDegree::Linear => l.to_vec(),
        ElementDegree::Quadratic => vec![
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ],
    }
}

/// Gradients of the local shape functions at barycentric point `l`, given
/// the (constant) barycentric gradients `g`.
pub fn shape_gradients(degree: ElementDegree, l: [f64; 3], g: &[[f64; 2]; 3]) -> Vec<[f64; 2]> {
    match degree {
        ElementDegree::Linear => g.to_vec(),
        ElementDegree::Quadratic => {
            let vertex = |i: usize| {
                let c = 4.0 * l[i] - 1.0;
                [c * g[i][0], c * g[i][1]]
            };
            let edge = |a: usize, b: usize| {
                [
                    4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
                    4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
                ]
            };
            vec![vertex(0), vertex(1), vertex(2), edge(0, 1), edge(1, 2), edge(2, 0)]
        }
    }
}

/// Trace shape functions on a boundary edge at local parameter `s`, in the
/// order `[start, end, (mid)]`.
pub fn edge_shape_values(degree: ElementDegree, s: f64) -> Vec<f64> {
    match degree {
        ElementDegree::Linear => vec![1.0 - s, s],
        ElementDegree::Quadratic => vec![(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)],
    }
}

/// Area and barycentric gradients of triangle `t`.
pub fn barycentric_gradients(mesh: &Mesh, t: usize) -> (f64, [[f64; 2]; 3]) {
    let tri = mesh.triangles()[t];
    let p = tri.map(|v| mesh.vertices()[v]);
    let area = mesh.triangle_area(t);
    let g = std::array::from_fn(|i| {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
    });
    (area, g)
}

/// Polynomial degree integrated exactly by the element stiffness rule,
/// `2p` (gradient products only need `2p − 2`).
pub fn stiffness_rule_degree(degree: ElementDegree) -> usize {
    2 * degree.order()
}

/// Unit-coefficient element stiffness matrices `∫_t ∇φ_a·∇φ_b`, one dense
/// row-major `k×k` block per triangle.
#[derive(Debug, Clone)]
pub struct ElementStiffness {
    k: usize,
    data: Vec<f64>,
}

impl ElementStiffness {
    pub fn assemble(mesh: &Mesh) -> Self {
        let degree = mesh.degree();
        let k = degree.local_dofs();
        let rule = TriangleRule::exact_for(stiffness_rule_degree(degree));
        let mut data = Vec::with_capacity(mesh.triangle_count() * k * k);
        for t in 0..mesh.triangle_count() {
            let (area, g) = barycentric_gradients(mesh, t);
            let mut block = vec![0.0; k * k];
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let grads = shape_gradients(degree, *l, &g);
                for a in 0..k {
                    for b in 0..k {
                        block[a * k + b] += w * area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                    }
                }
            }
            data.extend_from_slice(&block);
        }
        Self { k, data }
    }

    pub fn local_size(&self) -> usize {
        self.k
    }

    pub fn block(&self, t: usize) -> &[f64] {
        &self.data[t * self.k * self.k..(t + 1) * self.k * self.k]
    }
}
