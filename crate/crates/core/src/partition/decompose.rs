use crate::error::{Error, Result};
use crate::mesh::{Mesh2D, Neighbor};

/// One rank's view of the decomposition. All element lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub rank: usize,
    pub owned: Vec<usize>,
    /// Non-owned elements sharing an edge with an owned element.
    pub ghosts: Vec<usize>,
    /// `(neighbor rank, owned elements it holds as ghosts)`.
    pub send: Vec<(usize, Vec<usize>)>,
    /// `(neighbor rank, ghosts owned by it)`.
    pub recv: Vec<(usize, Vec<usize>)>,
    /// Owned elements that appear in some send map.
    pub boundary: Vec<usize>,
    /// Owned elements not in any send map.
    pub interior: Vec<usize>,
}

impl Partition {
    /// Owned elements followed by ghosts.
    pub fn local(&self) -> Vec<usize> {
        let mut v = self.owned.clone();
        v.extend_from_slice(&self.ghosts);
        v.sort_unstable();
        v
    }
}

/// Splits the (Hilbert-ordered) triangle range into `ranks` contiguous
/// chunks of about equal weight, where each triangle weighs its layer count.
pub fn decompose(mesh: &Mesh2D, weights: &[usize], ranks: usize) -> Result<Vec<Partition>> {
    let n = mesh.num_triangles();
    if ranks == 0 || ranks > n {
        return Err(Error::TooManyRanks { ranks, triangles: n });
    }
    if weights.len() != n {
        return Err(Error::MapMismatch(format!("{} weights for {} triangles", weights.len(), n)));
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &w in weights {
        prefix.push(prefix.last().unwrap() + w.max(1));
    }
    let total = prefix[n] as f64;
    let mut cuts = vec![0usize];
    for k in 1..ranks {
        let target = total * k as f64 / ranks as f64;
        let lo = cuts[k - 1] + 1;
        let hi = n - (ranks - k);
        let mut best = lo;
        for c in lo..=hi {
            if (prefix[c] as f64 - target).abs() < (prefix[best] as f64 - target).abs() {
                best = c;
            }
            if prefix[c] as f64 > target {
                break;
            }
        }
        cuts.push(best);
    }
    cuts.push(n);

    let mut owner = vec![0usize; n];
    for r in 0..ranks {
        owner[cuts[r]..cuts[r + 1]].iter_mut().for_each(|o| *o = r);
    }
    let mut parts = Vec::with_capacity(ranks);
    for r in 0..ranks {
        let owned: Vec<usize> = (cuts[r]..cuts[r + 1]).collect();
        let mut ghosts = Vec::new();
        let mut send: Vec<Vec<usize>> = vec![Vec::new(); ranks];
        for &t in &owned {
            for nb in &mesh.neighbors[t] {
                if let Neighbor::Interior { tri, .. } = *nb {
                    let q = owner[tri];
                    if q != r {
                        ghosts.push(tri);
                        send[q].push(t);
                    }
                }
            }
        }
        ghosts.sort_unstable();
        ghosts.dedup();
        let mut recv: Vec<Vec<usize>> = vec![Vec::new(); ranks];
        for &g in &ghosts {
            recv[owner[g]].push(g);
        }
        let send: Vec<(usize, Vec<usize>)> = send
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(q, mut v)| {
                v.sort_unstable();
                v.dedup();
                (q, v)
            })
            .collect();
        let recv: Vec<(usize, Vec<usize>)> = recv.into_iter().enumerate().filter(|(_, v)| !v.is_empty()).collect();
        let mut boundary: Vec<usize> = send.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        boundary.sort_unstable();
        boundary.dedup();
        let interior = owned.iter().copied().filter(|t| boundary.binary_search(t).is_err()).collect();
        parts.push(Partition { rank: r, owned, ghosts, send, recv, boundary, interior });
    }
    Ok(parts)
}
