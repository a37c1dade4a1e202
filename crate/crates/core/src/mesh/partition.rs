use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::Mesh;
use crate::error::{check_len, Error, Result};

/// Radial tolerance used when classifying triangles against a circle.
pub const ALIGNMENT_TOLERANCE: f64 = 1e-10;

/// Grouping of mesh triangles into pixels `Ω_1..Ω_N` covering `Ω̃`.
///
/// Pixels are zero-based; `None` marks a triangle outside `Ω̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelPartition {
    pixel_of_triangle: Vec<Option<usize>>,
    count: usize,
    areas: Vec<f64>,
}

impl PixelPartition {
    /// Validates the assignment against `mesh`: every pixel index below
    /// `count` must own at least one triangle of positive area.
    pub fn new(mesh: &Mesh, pixel_of_triangle: Vec<Option<usize>>, count: usize) -> Result<Self> {
        check_len("pixel partition", mesh.triangle_count(), pixel_of_triangle.len())?;
        let mut areas = vec![0.0; count];
        for (t, p) in pixel_of_triangle.iter().enumerate() {
            if let Some(p) = *p {
                if p >= count {
                    return Err(Error::InvalidArgument(format!(
                        "triangle {t} assigned to pixel {p} but only {count} pixels exist"
                    )));
                }
                areas[p] += mesh.triangle_area(t);
            }
        }
        if let Some(p) = areas.iter().position(|&a| a <= 0.0) {
            return Err(Error::InvalidArgument(format!("pixel {p} is empty")));
        }
        Ok(Self {
            pixel_of_triangle,
            count,
            areas,
        })
    }

    /// Pixels inherited from a coarse mesh: fine triangle `t` joins the
    /// pixel of coarse triangle `parent[t]`.
    pub fn from_parent(fine: &Mesh, parent: &[usize], coarse: &PixelPartition) -> Result<Self> {
        check_len("parent map", fine.triangle_count(), parent.len())?;
        let assignment = parent
            .iter()
            .map(|&p| {
                coarse
                    .pixel_of_triangle
                    .get(p)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("parent {p} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(fine, assignment, coarse.count)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn pixel_of_triangle(&self) -> &[Option<usize>] {
        &self.pixel_of_triangle
    }

    pub fn pixel_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn triangle_count(&self) -> usize {
        self.pixel_of_triangle.len()
    }

    /// Triangles of each pixel, in increasing triangle order.
    pub fn triangles_by_pixel(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (t, p) in self.pixel_of_triangle.iter().enumerate() {
            if let Some(p) = *p {
                out[p].push(t);
            }
        }
        out
    }
}

/// Groups triangles whose barycentre lies in the disk of `inner_radius` into
/// roughly `target_pixels` cells of a polar grid with near-equal cell areas.
///
/// Empty grid cells are dropped. If `target_pixels` is at least the number of
/// claimed triangles, each of them becomes its own pixel.
pub fn build_pixel_partition(mesh: &Mesh, inner_radius: f64, target_pixels: usize) -> Result<PixelPartition> {
    if target_pixels < 1 {
        return Err(Error::InvalidArgument("target pixel count must be at least 1".into()));
    }
    if inner_radius.is_nan() || inner_radius <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "inner radius must be positive, got {inner_radius}"
        )));
    }
    if let Some(r) = mesh.circle_radius() {
        if inner_radius > r * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "inner radius {inner_radius} exceeds the domain radius {r}"
            )));
        }
    }

    let polar: Vec<Option<(f64, f64)>> = (0..mesh.triangle_count())
        .map(|t| {
            let [x, y] = mesh.barycentre(t);
            let r = x.hypot(y);
            (r < inner_radius).then(|| (r, y.atan2(x).rem_euclid(2.0 * PI)))
        })
        .collect();
    let inside = polar.iter().filter(|p| p.is_some()).count();
    if inside == 0 {
        return Err(Error::InvalidArgument(
            "no triangle lies inside the pixel region".into(),
        ));
    }

    if target_pixels >= inside {
        let mut next = 0;
        let assignment = polar
            .iter()
            .map(|p| {
                p.map(|_| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        return PixelPartition::new(mesh, assignment, inside);
    }

    let n_rings = ((target_pixels as f64 / PI).sqrt().round() as usize).max(1);
    let sectors: Vec<usize> = (0..n_rings)
        .map(|k| {
            let share = target_pixels as f64 * (2 * k + 1) as f64 / (n_rings * n_rings) as f64;
            (share.round() as usize).max(1)
        })
        .collect();
    let offsets: Vec<usize> = sectors
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let cell_of = |r: f64, theta: f64| -> usize {
        let ring = ((r / inner_radius * n_rings as f64) as usize).min(n_rings - 1);
        let s = sectors[ring];
        let sector = ((theta / (2.0 * PI) * s as f64) as usize).min(s - 1);
        offsets[ring] + sector
    };

    let n_cells = offsets[n_rings - 1] + sectors[n_rings - 1];
    let cells: Vec<Option<usize>> = polar.iter().map(|p| p.map(|(r, th)| cell_of(r, th))).collect();
    let mut used = vec![false; n_cells];
    for c in cells.iter().flatten() {
        used[*c] = true;
    }
    let mut renumber = vec![usize::MAX; n_cells];
    let mut count = 0;
    for (c, u) in used.iter().enumerate() {
        if *u {
            renumber[c] = count;
            count += 1;
        }
    }
    let assignment = cells.iter().map(|c| c.map(|c| renumber[c])).collect();
    PixelPartition::new(mesh, assignment, count)
}

/// Two-pixel partition for a mesh resolving the circle of radius `rho`:
/// pixel 0 is the annulus `rho < r`, pixel 1 the inner disk.
pub fn concentric_partition(mesh: &Mesh, rho: f64) -> Result<PixelPartition> {
    if !(rho > 0.0 && rho < mesh.circle_radius().unwrap_or(f64::INFINITY)) {
        return Err(Error::InvalidArgument(format!("inner radius {rho} out of range")));
    }
    let assignment = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let radii = tri.map(|v| mesh.vertices()[v][0].hypot(mesh.vertices()[v][1]));
            let inner = radii.iter().all(|&r| r <= rho + ALIGNMENT_TOLERANCE);
            let outer = radii.iter().all(|&r| r >= rho - ALIGNMENT_TOLERANCE);
            match (inner, outer) {
                (true, _) => Ok(Some(1)),
                (false, true) => Ok(Some(0)),
                _ => Err(Error::NotAligned { rho, triangle: t }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PixelPartition::new(mesh, assignment, 2)
}

/// Piecewise-constant complex field on a pixel partition, zero outside `Ω̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    values: Vec<C64>,
    partition: Arc<PixelPartition>,
}

impl CoefficientField {
    pub fn new(partition: Arc<PixelPartition>, values: Vec<C64>) -> Result<Self> {
        check_len("coefficient field", partition.count(), values.len())?;
        Ok(Self { values, partition })
    }

    pub fn from_real(partition: Arc<PixelPartition>, values: &[f64]) -> Result<Self> {
        Self::new(partition, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn zeros(partition: Arc<PixelPartition>) -> Self {
        let n = partition.count();
        Self {
            values: vec![C64::new(0.0, 0.0); n],
            partition,
        }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn partition(&self) -> &Arc<PixelPartition> {
        &self.partition
    }

    /// Value on every mesh triangle (zero outside `Ω̃`).
    pub fn per_triangle(&self) -> Vec<C64> {
        self.partition
            .pixel_of_triangle()
            .iter()
            .map(|p| p.map_or(C64::new(0.0, 0.0), |p| self.values[p]))
            .collect()
    }

    /// Largest pixel modulus, the sup-norm of the field.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `L²` norm using the pixel areas.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.partition.pixel_areas())
            .map(|(v, a)| v.norm_sqr() * a)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_disk_mesh, DiskMeshBuilder, ElementDegree};

    #[test]
    fn single_pixel_collects_interior_triangles() {
        let m = generate_disk_mesh(1.0, 0.2, ElementDegree::Linear).unwrap();
        let p = build_pixel_partition(&m, 0.85, 1).unwrap();
        assert_eq!(p.count(), 1);
        for t in 0..m.triangle_count() {
            let [x, y] = m.barycentre(t);
            assert_eq!(p.pixel_of_triangle()[t].is_some(), x.hypot(y) < 0.85);
        }
    }

    #[test]
    fn finest_partition_is_one_pixel_per_triangle() {
        let m = generate_disk_mesh(1.0, 0.2, ElementDegree::Linear).unwrap();
        let p = build_pixel_partition(&m, 1.0, m.triangle_count()).unwrap();
        assert_eq!(p.count(), m.triangle_count());
    }

    #[test]
    fn area_is_conserved() {
        let m = generate_disk_mesh(1.0, 0.05, ElementDegree::Linear).unwrap();
        let p = build_pixel_partition(&m, 0.85, 200).unwrap();
        assert!((150..=250).contains(&p.count()), "{} pixels", p.count());
        let outside: f64 = (0..m.triangle_count())
            .filter(|&t| p.pixel_of_triangle()[t].is_none())
            .map(|t| m.triangle_area(t))
            .sum();
        let total: f64 = m.triangle_areas().iter().sum();
        let pixels: f64 = p.pixel_areas().iter().sum();
        assert!((pixels + outside - total).abs() < 1e-12);
        assert!(p.pixel_areas().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn zero_target_is_rejected() {
        let m = generate_disk_mesh(1.0, 0.3, ElementDegree::Linear).unwrap();
        assert!(build_pixel_partition(&m, 0.85, 0).is_err());
    }

    #[test]
    fn concentric_areas_match_geometry() {
        let m = DiskMeshBuilder::new(1.0, 0.05).constrain_circle(0.3).build().unwrap();
        let p = concentric_partition(&m, 0.3).unwrap();
        assert_eq!(p.count(), 2);
        assert!((p.pixel_areas()[1] / (PI * 0.09) - 1.0).abs() < 0.01);

        let rho = 0.5f64.sqrt();
        let m = DiskMeshBuilder::new(1.0, 0.05).constrain_circle(rho).build().unwrap();
        let p = concentric_partition(&m, rho).unwrap();
        let [a, b] = [p.pixel_areas()[0], p.pixel_areas()[1]];
        assert!((a / b - 1.0).abs() < 0.01);
    }

    #[test]
    fn unaligned_mesh_is_rejected() {
        let m = generate_disk_mesh(1.0, 0.07, ElementDegree::Linear).unwrap();
        assert!(matches!(concentric_partition(&m, 0.3), Err(Error::NotAligned { .. })));
    }
}
