//! 2D triangular meshes, Hilbert reordering and extrusion into prism columns.

mod column;
mod hilbert;
mod io;

pub use column::{extrude, update_moving_mesh, ColumnGrid, LayerPolicy, PrismGeom};
pub use hilbert::{hilbert_index, hilbert_reorder, locality, Locality};
pub use io::{read_mesh, write_mesh};

use crate::error::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    /// Bed elevation, negative below datum.
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Impermeable wall.
    Wall,
    /// Prescribed elevation.
    Open,
}

/// What lies across local edge `j` (vertex `j` to vertex `j + 1`) of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Interior { tri: usize, edge: usize },
    Boundary(BoundaryTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSide {
    Triangle(usize),
    Boundary(BoundaryTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Vertex ids, ordered counterclockwise as seen from `left`.
    pub v: [usize; 2],
    pub left: usize,
    pub right: EdgeSide,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeom {
    /// Outward unit normal.
    pub normal: [f64; 2],
    pub length: f64,
    /// `length / 2` (parent edge is [-1, 1]).
    pub jedge: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriGeom {
    pub j2d: f64,
    pub area: f64,
    /// Physical gradients of the three `phi_h`.
    pub grad: [[f64; 2]; 3],
    pub edges: [EdgeGeom; 3],
    pub centroid: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Mesh2D {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// `hilbert_perm[i]` is the original id of the triangle now at index `i`.
    pub hilbert_perm: Vec<usize>,
    pub neighbors: Vec<[Neighbor; 3]>,
    pub geom: Vec<TriGeom>,
}

impl Mesh2D {
    /// Builds connectivity and geometry. Triangles must be counterclockwise.
    pub fn new(vertices: Vec<Vertex>, triangles: Vec<[usize; 3]>) -> Result<Mesh2D> {
        let perm = (0..triangles.len()).collect();
        Self::with_perm(vertices, triangles, perm)
    }

    fn with_perm(vertices: Vec<Vertex>, triangles: Vec<[usize; 3]>, perm: Vec<usize>) -> Result<Mesh2D> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let mut geom = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            geom.push(tri_geom(t, tri.map(|v| vertices[v]))?);
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut lookup: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut neighbors = vec![[Neighbor::Boundary(BoundaryTag::Wall); 3]; triangles.len()];
        let mut edge_of = vec![[usize::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for j in 0..3 {
                let (a, b) = (tri[j], tri[(j + 1) % 3]);
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, (t, j));
                        edge_of[t][j] = edges.len();
                        edges.push(Edge { v: [a, b], left: t, right: EdgeSide::Boundary(BoundaryTag::Wall) });
                    }
                    Some(&(t2, j2)) => {
                        let e = edge_of[t2][j2];
                        if edges[e].right != EdgeSide::Boundary(BoundaryTag::Wall) {
                            return Err(Error::InvalidMesh(format!("edge {a}-{b} has more than two triangles")));
                        }
                        if edges[e].v != [b, a] {
                            return Err(Error::InvalidMesh(format!(
                                "triangles {t2} and {t} traverse edge {a}-{b} in the same direction"
                            )));
                        }
                        edges[e].right = EdgeSide::Triangle(t);
                        edge_of[t][j] = e;
                        neighbors[t][j] = Neighbor::Interior { tri: t2, edge: j2 };
                        neighbors[t2][j2] = Neighbor::Interior { tri: t, edge: j };
                    }
                }
            }
        }
        Ok(Mesh2D { vertices, triangles, edges, hilbert_perm: perm, neighbors, geom })
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Bed elevation at the three vertices of triangle `t`.
    pub fn bed(&self, t: usize) -> [f64; 3] {
        self.triangles[t].map(|v| self.vertices[v].b)
    }

    pub fn interior_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| matches!(e.right, EdgeSide::Triangle(_))).count()
    }

    pub fn min_edge_length(&self) -> f64 {
        self.geom.iter().flat_map(|g| g.edges.iter().map(|e| e.length)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_depth(&self) -> f64 {
        self.vertices.iter().map(|v| v.b.abs()).fold(0.0, f64::max)
    }

    /// Retags boundary edges whose midpoint satisfies `pred`.
    pub fn tag_boundary(&mut self, tag: BoundaryTag, pred: impl Fn(f64, f64) -> bool) {
        for t in 0..self.triangles.len() {
            for j in 0..3 {
                if let Neighbor::Boundary(_) = self.neighbors[t][j] {
                    let a = self.vertices[self.triangles[t][j]];
                    let b = self.vertices[self.triangles[t][(j + 1) % 3]];
                    if pred(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)) {
                        self.neighbors[t][j] = Neighbor::Boundary(tag);
                    }
                }
            }
        }
        for e in &mut self.edges {
            if let EdgeSide::Boundary(_) = e.right {
                let (a, b) = (self.vertices[e.v[0]], self.vertices[e.v[1]]);
                if pred(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)) {
                    e.right = EdgeSide::Boundary(tag);
                }
            }
        }
    }
}

fn tri_geom(t: usize, v: [Vertex; 3]) -> Result<TriGeom> {
    let dx = [v[1].x - v[0].x, v[2].x - v[0].x];
    let dy = [v[1].y - v[0].y, v[2].y - v[0].y];
    let j2d = dx[0] * dy[1] - dx[1] * dy[0];
    if !(j2d > 0.0) {
        return Err(Error::NonPositiveArea(t));
    }
    // Inverse of [[dx0, dx1], [dy0, dy1]]: rows give d(xi)/dx and d(eta)/dx.
    let dxi = [dy[1] / j2d, -dx[1] / j2d];
    let deta = [-dy[0] / j2d, dx[0] / j2d];
    let grad = [
        [-dxi[0] - deta[0], -dxi[1] - deta[1]],
        [dxi[0], dxi[1]],
        [deta[0], deta[1]],
    ];
    let edges = std::array::from_fn(|j| {
        let (a, b) = (v[j], v[(j + 1) % 3]);
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let length = (ex * ex + ey * ey).sqrt();
        EdgeGeom { normal: [ey / length, -ex / length], length, jedge: 0.5 * length }
    });
    Ok(TriGeom {
        j2d,
        area: 0.5 * j2d,
        grad,
        edges,
        centroid: [(v[0].x + v[1].x + v[2].x) / 3.0, (v[0].y + v[1].y + v[2].y) / 3.0],
    })
}

/// Structured basin `[0, Lx] x [0, Ly]`, each cell split along its
/// south-west to north-east diagonal, boundary edges tagged as walls.
pub fn generate_basin_mesh(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    bed: impl Fn(f64, f64) -> f64,
) -> Result<Mesh2D> {
    if nx == 0 || ny == 0 || !(lx > 0.0) || !(ly > 0.0) {
        return Err(Error::NonPositiveArea(0));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = (lx * i as f64 / nx as f64, ly * j as f64 / ny as f64);
            let b = bed(x, y);
            if !(b < 0.0) {
                return Err(Error::InvalidMesh(format!("bed {b} at ({x}, {y}) is not submerged")));
            }
            vertices.push(Vertex { x, y, b });
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh2D::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_split_square() {
        let m = generate_basin_mesh(1, 1, 1.0, 1.0, |_, _| -1.0).unwrap();
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.edges.len(), 5);
        assert_eq!(m.interior_edge_count(), 1);
    }

    #[test]
    fn two_by_two_connectivity() {
        let m = generate_basin_mesh(2, 2, 1.0, 1.0, |_, _| -1.0).unwrap();
        assert_eq!(m.num_triangles(), 8);
        for e in &m.edges {
            if let EdgeSide::Triangle(r) = e.right {
                assert_ne!(r, e.left);
                let back = m.neighbors[r].iter().filter(|n| matches!(n, Neighbor::Interior { tri, .. } if *tri == e.left)).count();
                assert_eq!(back, 1);
            }
        }
        for t in 0..m.num_triangles() {
            for j in 0..3 {
                if let Neighbor::Interior { tri, edge } = m.neighbors[t][j] {
                    assert_eq!(m.neighbors[tri][edge], Neighbor::Interior { tri: t, edge: j });
                }
            }
        }
    }

    #[test]
    fn area_closure() {
        let (lx, ly) = (3000.0, 1700.0);
        let m = generate_basin_mesh(32, 32, lx, ly, |_, _| -10.0).unwrap();
        let area: f64 = m.geom.iter().map(|g| g.j2d / 2.0).sum();
        assert!((area - lx * ly).abs() <= 1e-12 * lx * ly);
    }

    #[test]
    fn normals_are_outward_and_opposite() {
        let m = generate_basin_mesh(3, 2, 2.0, 1.0, |x, _| -1.0 - x).unwrap();
        for t in 0..m.num_triangles() {
            let g = &m.geom[t];
            for j in 0..3 {
                let a = m.vertices[m.triangles[t][j]];
                let mid = [a.x - g.centroid[0], a.y - g.centroid[1]];
                assert!(mid[0] * g.edges[j].normal[0] + mid[1] * g.edges[j].normal[1] > 0.0);
                if let Neighbor::Interior { tri, edge } = m.neighbors[t][j] {
                    let n2 = m.geom[tri].edges[edge].normal;
                    assert_eq!(n2[0], -g.edges[j].normal[0]);
                    assert_eq!(n2[1], -g.edges[j].normal[1]);
                    assert_eq!(m.geom[tri].edges[edge].jedge, g.edges[j].jedge);
                }
            }
            // gradients of phi_h sum to zero and reproduce x and y
            let xs = m.triangles[t].map(|v| m.vertices[v].x);
            let gx: f64 = (0..3).map(|h| xs[h] * g.grad[h][0]).sum();
            assert!((gx - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(generate_basin_mesh(1, 1, 0.0, 1.0, |_, _| -1.0), Err(Error::NonPositiveArea(_))));
        let v = vec![
            Vertex { x: 0.0, y: 0.0, b: -1.0 },
            Vertex { x: 1.0, y: 0.0, b: -1.0 },
            Vertex { x: 0.0, y: 1.0, b: -1.0 },
        ];
        assert!(matches!(Mesh2D::new(v, vec![[0, 2, 1]]), Err(Error::NonPositiveArea(0))));
    }
}
