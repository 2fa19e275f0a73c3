use super::{Mesh2D, Neighbor};

const BITS: u32 = 16;

/// Position of `(x, y)` along the Hilbert curve filling a `2^bits` square grid.
pub fn hilbert_index(bits: u32, mut x: u64, mut y: u64) -> u64 {
    let n = 1u64 << bits;
    let mut d = 0;
    let mut s = n >> 1;
    while s > 0 {
        let rx = u64::from(x & s != 0);
        let ry = u64::from(y & s != 0);
        d += s * s * ((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s >>= 1;
    }
    d
}

/// Permutes triangles by the Hilbert index of their centroid over the
/// vertex bounding box. Ties keep the current order, so reapplying the
/// reorder is the identity.
pub fn hilbert_reorder(mesh: &Mesh2D) -> Mesh2D {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &mesh.vertices {
        x0 = x0.min(v.x);
        y0 = y0.min(v.y);
        x1 = x1.max(v.x);
        y1 = y1.max(v.y);
    }
    let top = ((1u64 << BITS) - 1) as f64;
    let quant = |v: f64, lo: f64, hi: f64| -> u64 {
        if hi > lo {
            (((v - lo) / (hi - lo)) * top).floor().clamp(0.0, top) as u64
        } else {
            0
        }
    };
    let mut order: Vec<(u64, usize)> = mesh
        .geom
        .iter()
        .enumerate()
        .map(|(t, g)| (hilbert_index(BITS, quant(g.centroid[0], x0, x1), quant(g.centroid[1], y0, y1)), t))
        .collect();
    order.sort();
    let triangles = order.iter().map(|&(_, t)| mesh.triangles[t]).collect();
    let perm = order.iter().map(|&(_, t)| mesh.hilbert_perm[t]).collect();
    let mut out = Mesh2D::with_perm(mesh.vertices.clone(), triangles, perm)
        .expect("reordering preserves a valid mesh");
    // carry boundary tags over
    for (new, &(_, old)) in order.iter().enumerate() {
        for j in 0..3 {
            if let Neighbor::Boundary(tag) = mesh.neighbors[old][j] {
                out.neighbors[new][j] = Neighbor::Boundary(tag);
            }
        }
    }
    for e in &mut out.edges {
        if let super::EdgeSide::Boundary(_) = e.right {
            let j = (0..3).find(|&j| out.triangles[e.left][j] == e.v[0]).expect("edge vertex");
            if let Neighbor::Boundary(tag) = out.neighbors[e.left][j] {
                e.right = super::EdgeSide::Boundary(tag);
            }
        }
    }
    out
}

/// Index-distance statistics over interior edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Locality {
    /// Arithmetic mean of `|i - j|`.
    pub mean_abs: f64,
    /// Mean of `log2(1 + |i - j|)`; the locality score used for ordering
    /// comparisons because it is not dominated by a few long jumps.
    pub mean_log2: f64,
    pub median: usize,
}

pub fn locality(mesh: &Mesh2D) -> Locality {
    let mut d: Vec<usize> = Vec::new();
    for e in &mesh.edges {
        if let super::EdgeSide::Triangle(r) = e.right {
            d.push(e.left.abs_diff(r));
        }
    }
    if d.is_empty() {
        return Locality { mean_abs: 0.0, mean_log2: 0.0, median: 0 };
    }
    let n = d.len() as f64;
    let mean_abs = d.iter().map(|&x| x as f64).sum::<f64>() / n;
    let mean_log2 = d.iter().map(|&x| (1.0 + x as f64).log2()).sum::<f64>() / n;
    d.sort_unstable();
    Locality { mean_abs, mean_log2, median: d[d.len() / 2] }
}
