//! Line-oriented text formats for meshes and pixel partitions.
//!
//! Floats are written with the shortest representation that parses back to
//! the same value, so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::str::{FromStr, SplitWhitespace};

use super::{BoundaryEdge, ElementDegree, Mesh, PixelPartition};
use crate::error::{Error, Result};

impl Mesh {
    pub fn to_text(&self) -> String {
        let mut out = format!("MESH v1 degree={}\n", self.degree.order());
        for [x, y] in &self.vertices {
            let _ = writeln!(out, "V {x} {y}");
        }
        for [a, b, c] in &self.triangles {
            let _ = writeln!(out, "T {a} {b} {c}");
        }
        for e in &self.boundary {
            let _ = writeln!(out, "B {} {} {} {}", e.start, e.end, e.t_start, e.t_end);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty mesh file".into(),
        })?;
        let degree = header
            .trim()
            .strip_prefix("MESH v1 degree=")
            .and_then(|d| d.parse::<u8>().ok())
            .ok_or(Error::Parse {
                line: 1,
                message: format!("bad header {header:?}"),
            })
            .and_then(|d| {
                ElementDegree::try_from(d).map_err(|e| Error::Parse {
                    line: 1,
                    message: e.to_string(),
                })
            })?;

        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut boundary = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let mut fields = Fields {
                it: line.split_whitespace(),
                line: line_no,
            };
            match fields.it.next() {
                Some("V") => vertices.push([fields.next()?, fields.next()?]),
                Some("T") => triangles.push([fields.next()?, fields.next()?, fields.next()?]),
                Some("B") => boundary.push(BoundaryEdge {
                    start: fields.next()?,
                    end: fields.next()?,
                    t_start: fields.next()?,
                    t_end: fields.next()?,
                }),
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("unknown record {other:?}"),
                    })
                }
            }
            fields.finish()?;
        }
        Mesh::new(vertices, triangles, boundary, degree)
    }
}

impl PixelPartition {
    /// One line per triangle: zero-based pixel index, or `-1` outside `Ω̃`.
    pub fn to_text(&self) -> String {
        let mut out = format!("PART v1 N={}\n", self.count());
        for p in self.pixel_of_triangle() {
            match p {
                Some(p) => {
                    let _ = writeln!(out, "{p}");
                }
                None => out.push_str("-1\n"),
            }
        }
        out
    }

    pub fn from_text(mesh: &Mesh, text: &str) -> Result<PixelPartition> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty partition file".into(),
        })?;
        let count = header
            .trim()
            .strip_prefix("PART v1 N=")
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or(Error::Parse {
                line: 1,
                message: format!("bad header {header:?}"),
            })?;
        let assignment = lines
            .map(|(i, l)| match l.trim().parse::<i64>() {
                Ok(-1) => Ok(None),
                Ok(p) if p >= 0 => Ok(Some(p as usize)),
                _ => Err(Error::Parse {
                    line: i + 1,
                    message: format!("bad pixel index {l:?}"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        PixelPartition::new(mesh, assignment, count)
    }
}

struct Fields<'a> {
    it: SplitWhitespace<'a>,
    line: usize,
}

impl Fields<'_> {
    fn next<T: FromStr>(&mut self) -> Result<T> {
        let tok = self.it.next().ok_or(Error::Parse {
            line: self.line,
            message: "missing field".into(),
        })?;
        tok.parse().map_err(|_| Error::Parse {
            line: self.line,
            message: format!("cannot parse {tok:?}"),
        })
    }

    fn finish(mut self) -> Result<()> {
        match self.it.next() {
            None => Ok(()),
            Some(extra) => Err(Error::Parse {
                line: self.line,
                message: format!("unexpected trailing field {extra:?}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::mesh::{build_pixel_partition, DiskMeshBuilder, ElementDegree, Mesh, PixelPartition};

    #[test]
    fn mesh_round_trip_is_exact() {
        let m = DiskMeshBuilder::new(1.0, 0.2)
            .degree(ElementDegree::Quadratic)
            .constrain_circle(0.4)
            .build()
            .unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_edges(), m.boundary_edges());
        assert_eq!(back.degree(), m.degree());
    }

    #[test]
    fn partition_round_trip_is_exact() {
        let m = DiskMeshBuilder::new(1.0, 0.2).build().unwrap();
        let p = build_pixel_partition(&m, 0.85, 20).unwrap();
        assert_eq!(PixelPartition::from_text(&m, &p.to_text()).unwrap(), p);
    }

    #[test]
    fn malformed_lines_report_position() {
        let err = Mesh::from_text("MESH v1 degree=1\nV 0 0\nV 1 zero\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(Mesh::from_text("MESH v1 degree=3\n").is_err());
    }
}
