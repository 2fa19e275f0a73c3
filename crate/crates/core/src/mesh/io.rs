//! Plain-text mesh format:
//!
//! ```text
//! PRISMDG-MESH 1
//! <nv> <nt>
//! x y b        (nv lines)
//! i0 i1 i2     (nt lines, 0-based, counterclockwise)
//! ```

use super::{Mesh2D, Vertex};
use crate::error::{Error, Result};
use std::fmt::Write as _;

pub fn read_mesh(text: &str) -> Result<Mesh2D> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let err = |line: usize, msg: &str| Error::MeshParse { line: line + 1, msg: msg.to_string() };

    let (n, header) = lines.next().ok_or_else(|| err(0, "empty file"))?;
    if header.split_whitespace().collect::<Vec<_>>() != ["PRISMDG-MESH", "1"] {
        return Err(err(n, "expected header `PRISMDG-MESH 1`"));
    }
    let (n, counts) = lines.next().ok_or_else(|| err(n + 1, "missing counts line"))?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| err(n, "counts must be integers")))
        .collect::<Result<_>>()?;
    if counts.len() != 2 {
        return Err(err(n, "expected `<nv> <nt>`"));
    }
    let (nv, nt) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines.next().ok_or_else(|| err(usize::MAX - 1, "unexpected end of file in vertices"))?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| err(n, "vertex coordinates must be numbers")))
            .collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(err(n, "expected `x y b`"));
        }
        vertices.push(Vertex { x: v[0], y: v[1], b: v[2] });
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (n, l) = lines.next().ok_or_else(|| err(usize::MAX - 1, "unexpected end of file in triangles"))?;
        let t: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| err(n, "vertex ids must be non-negative integers")))
            .collect::<Result<_>>()?;
        if t.len() != 3 {
            return Err(err(n, "expected `i0 i1 i2`"));
        }
        triangles.push([t[0], t[1], t[2]]);
    }
    if let Some((n, _)) = lines.next() {
        return Err(err(n, "trailing content after triangles"));
    }
    Mesh2D::new(vertices, triangles)
}

pub fn write_mesh(mesh: &Mesh2D) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "PRISMDG-MESH 1");
    let _ = writeln!(s, "{} {}", mesh.vertices.len(), mesh.triangles.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.b);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}
