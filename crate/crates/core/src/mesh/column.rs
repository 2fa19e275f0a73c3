use super::Mesh2D;
use crate::error::{Error, Result};

/// How many layers each column gets.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerPolicy {
    /// Same count everywhere, interfaces at equal sigma fractions.
    Uniform(usize),
    /// `(max_rest_depth, count)` bands in increasing depth order; a column
    /// takes the first band whose depth bound covers its mean rest depth,
    /// or the last band if none does.
    DepthThresholded(Vec<(f64, usize)>),
}

impl LayerPolicy {
    pub fn layers_for(&self, rest_depth: f64) -> Result<usize> {
        let n = match self {
            LayerPolicy::Uniform(n) => *n,
            LayerPolicy::DepthThresholded(bands) => {
                let last = bands.last().ok_or_else(|| Error::InvalidMesh("empty layer bands".into()))?;
                bands.iter().find(|(d, _)| rest_depth <= *d).unwrap_or(last).1
            }
        };
        if n == 0 {
            return Err(Error::InvalidMesh("layer count must be at least 1".into()));
        }
        Ok(n)
    }

    pub fn layer_counts(&self, mesh: &Mesh2D) -> Result<Vec<usize>> {
        (0..mesh.num_triangles())
            .map(|t| {
                let b = mesh.bed(t);
                self.layers_for(-(b[0] + b[1] + b[2]) / 3.0)
            })
            .collect()
    }
}

/// Vertical structure of every column: layer counts and the z coordinate of
/// each interface at the three column nodes. Interface 0 is the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnGrid {
    layers: Vec<usize>,
    prism_offset: Vec<usize>,
    iface_offset: Vec<usize>,
    z: Vec<[f64; 3]>,
    w_m: Vec<[f64; 3]>,
}

/// Geometry of one prism, gathered from the 2D triangle and the column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrismGeom {
    pub j2d: f64,
    pub grad: [[f64; 2]; 3],
    pub zt: [f64; 3],
    pub zb: [f64; 3],
    /// Horizontal gradients of the top and bottom interfaces.
    pub gzt: [f64; 2],
    pub gzb: [f64; 2],
}

impl PrismGeom {
    pub fn jz_nodal(&self) -> [f64; 3] {
        std::array::from_fn(|h| 0.5 * (self.zt[h] - self.zb[h]))
    }

    /// `Jz` at a horizontal point with basis values `phi`.
    pub fn jz(&self, phi: &[f64; 3]) -> f64 {
        0.5 * ((self.zt[0] - self.zb[0]) * phi[0] + (self.zt[1] - self.zb[1]) * phi[1] + (self.zt[2] - self.zb[2]) * phi[2])
    }

    /// `m = d(zeta)/d(x, y, z)` at horizontal basis `phi` and vertical basis `phiz`.
    pub fn m(&self, phi: &[f64; 3], phiz: &[f64; 2]) -> [f64; 3] {
        let jz = self.jz(phi);
        let gx = phiz[0] * self.gzt[0] + phiz[1] * self.gzb[0];
        let gy = phiz[0] * self.gzt[1] + phiz[1] * self.gzb[1];
        [-gx / jz, -gy / jz, 1.0 / jz]
    }

    /// `Jtb * n` on the top face: `J2D (-grad z_t, 1)`.
    pub fn top_flux_normal(&self) -> [f64; 3] {
        [-self.j2d * self.gzt[0], -self.j2d * self.gzt[1], self.j2d]
    }

    /// `Jtb * n` on the bottom face: `J2D (grad z_b, -1)`.
    pub fn bottom_flux_normal(&self) -> [f64; 3] {
        [self.j2d * self.gzb[0], self.j2d * self.gzb[1], -self.j2d]
    }

    pub fn top_normal(&self) -> [f64; 3] {
        unit(self.top_flux_normal())
    }

    pub fn bottom_normal(&self) -> [f64; 3] {
        unit(self.bottom_flux_normal())
    }

    /// Average prism height, the penalty length on horizontal faces.
    pub fn mean_height(&self) -> f64 {
        ((self.zt[0] - self.zb[0]) + (self.zt[1] - self.zb[1]) + (self.zt[2] - self.zb[2])) / 3.0
    }
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn grad_of(grad: &[[f64; 2]; 3], v: &[f64; 3]) -> [f64; 2] {
    [
        v[0] * grad[0][0] + v[1] * grad[1][0] + v[2] * grad[2][0],
        v[0] * grad[0][1] + v[1] * grad[1][1] + v[2] * grad[2][1],
    ]
}

impl ColumnGrid {
    pub fn num_columns(&self) -> usize {
        self.layers.len()
    }

    pub fn num_prisms(&self) -> usize {
        *self.prism_offset.last().expect("offsets")
    }

    pub fn layers(&self, col: usize) -> usize {
        self.layers[col]
    }

    pub fn layer_counts(&self) -> &[usize] {
        &self.layers
    }

    pub fn max_layers(&self) -> usize {
        self.layers.iter().copied().max().unwrap_or(0)
    }

    /// Global prism index of layer `k` (0 = top) in column `col`.
    pub fn prism(&self, col: usize, k: usize) -> usize {
        self.prism_offset[col] + k
    }

    pub fn prism_offsets(&self) -> &[usize] {
        &self.prism_offset
    }

    /// z at interface `j` (0 = surface, `layers` = bed) of column `col`.
    pub fn z(&self, col: usize, j: usize) -> [f64; 3] {
        self.z[self.iface_offset[col] + j]
    }

    /// Mesh velocity at interface `j`.
    pub fn w_m(&self, col: usize, j: usize) -> [f64; 3] {
        self.w_m[self.iface_offset[col] + j]
    }

    pub fn eta(&self, col: usize) -> [f64; 3] {
        self.z(col, 0)
    }

    /// Total depth `H = eta - b` at the column nodes.
    pub fn depth(&self, col: usize) -> [f64; 3] {
        let (s, b) = (self.z(col, 0), self.z(col, self.layers[col]));
        std::array::from_fn(|h| s[h] - b[h])
    }

    pub fn jz(&self, col: usize, k: usize) -> [f64; 3] {
        let (t, b) = (self.z(col, k), self.z(col, k + 1));
        std::array::from_fn(|h| 0.5 * (t[h] - b[h]))
    }

    pub fn prism_geom(&self, mesh: &Mesh2D, col: usize, k: usize) -> PrismGeom {
        let g = &mesh.geom[col];
        let (zt, zb) = (self.z(col, k), self.z(col, k + 1));
        PrismGeom { j2d: g.j2d, grad: g.grad, zt, zb, gzt: grad_of(&g.grad, &zt), gzb: grad_of(&g.grad, &zb) }
    }

    /// Copies interfaces and mesh velocity of the listed columns from `other`,
    /// which must share this grid's layer counts.
    pub fn copy_columns(&mut self, other: &ColumnGrid, cols: &[usize]) -> Result<()> {
        if other.layers != self.layers {
            return Err(Error::ShapeMismatch("grids have different layer counts".into()));
        }
        for &c in cols {
            let r = self.iface_offset[c]..self.iface_offset[c + 1];
            self.z[r.clone()].copy_from_slice(&other.z[r.clone()]);
            self.w_m[r.clone()].copy_from_slice(&other.w_m[r]);
        }
        Ok(())
    }

    /// Recomputes interfaces of the listed columns (all if `None`) from a new
    /// surface; `w_m = (z_new - z_old) / dt`. Other columns keep their
    /// geometry and get zero mesh velocity.
    pub fn updated(&self, eta_new: &[[f64; 3]], dt: f64, cols: Option<&[usize]>) -> Result<ColumnGrid> {
        let mut out = self.clone();
        out.w_m.iter_mut().for_each(|w| *w = [0.0; 3]);
        let mut apply = |c: usize| -> Result<()> {
            let l = self.layers[c];
            let bed = self.z(c, l);
            let zs = sigma_interfaces(c, l, eta_new[c], bed)?;
            for (j, z) in zs.into_iter().enumerate() {
                let i = self.iface_offset[c] + j;
                let old = self.z[i];
                out.z[i] = z;
                out.w_m[i] = std::array::from_fn(|h| (z[h] - old[h]) / dt);
            }
            Ok(())
        };
        match cols {
            None => (0..self.num_columns()).try_for_each(&mut apply)?,
            Some(list) => list.iter().try_for_each(|&c| apply(c))?,
        }
        Ok(out)
    }
}

fn sigma_interfaces(col: usize, layers: usize, eta: [f64; 3], bed: [f64; 3]) -> Result<Vec<[f64; 3]>> {
    let h: [f64; 3] = std::array::from_fn(|i| eta[i] - bed[i]);
    for d in h {
        if !(d > 0.0) {
            return Err(Error::DryColumn { col, depth: d });
        }
    }
    Ok((0..=layers)
        .map(|j| {
            if j == layers {
                bed
            } else {
                let s = j as f64 / layers as f64;
                std::array::from_fn(|i| eta[i] - s * h[i])
            }
        })
        .collect())
}

/// Builds columns under each triangle with sigma-fraction interfaces between
/// the bed and the nodal surface `eta` (one `[f64; 3]` per triangle).
pub fn extrude(mesh: &Mesh2D, policy: &LayerPolicy, eta: &[[f64; 3]]) -> Result<ColumnGrid> {
    let layers = policy.layer_counts(mesh)?;
    let n = mesh.num_triangles();
    let mut prism_offset = Vec::with_capacity(n + 1);
    let mut iface_offset = Vec::with_capacity(n + 1);
    prism_offset.push(0);
    iface_offset.push(0);
    let mut z = Vec::new();
    for (c, &l) in layers.iter().enumerate() {
        z.extend(sigma_interfaces(c, l, eta[c], mesh.bed(c))?);
        prism_offset.push(prism_offset[c] + l);
        iface_offset.push(iface_offset[c] + l + 1);
    }
    let w_m = vec![[0.0; 3]; z.len()];
    Ok(ColumnGrid { layers, prism_offset, iface_offset, z, w_m })
}

/// New geometry snapshot for surface `eta_new`, with mesh velocity over `dt`.
pub fn update_moving_mesh(grid: &ColumnGrid, eta_new: &[[f64; 3]], dt: f64) -> Result<ColumnGrid> {
    grid.updated(eta_new, dt, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg_core::{tri_rule, GAUSS2, EDGE_W};
    use crate::mesh::{generate_basin_mesh, Neighbor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_bed(x: f64, y: f64) -> f64 {
        -10.0 + 3.0 * (0.7 * x).sin() * (0.4 * y).cos()
    }

    #[test]
    fn flat_bed_uniform_layers() {
        let m = generate_basin_mesh(2, 2, 1.0, 1.0, |_, _| -10.0).unwrap();
        let eta = vec![[0.0; 3]; m.num_triangles()];
        let g = extrude(&m, &LayerPolicy::Uniform(5), &eta).unwrap();
        for c in 0..g.num_columns() {
            for k in 0..5 {
                assert_eq!(g.jz(c, k), [1.0; 3]);
                let pg = g.prism_geom(&m, c, k);
                assert_eq!(pg.m(&[1.0 / 3.0; 3], &[0.5, 0.5]), [0.0, 0.0, 1.0]);
            }
        }
    }

    #[test]
    fn sloped_bed_flat_surface() {
        let m = generate_basin_mesh(3, 3, 3.0, 3.0, |x, y| -5.0 - x - 0.5 * y).unwrap();
        let eta = vec![[0.0; 3]; m.num_triangles()];
        let g = extrude(&m, &LayerPolicy::Uniform(4), &eta).unwrap();
        for c in 0..g.num_columns() {
            assert_eq!(g.prism_geom(&m, c, 0).top_normal(), [0.0, 0.0, 1.0]);
            let below = g.prism_geom(&m, c, 2).bottom_normal();
            assert!(below[0] != 0.0);
        }
    }

    #[test]
    fn thickness_telescopes() {
        let m = generate_basin_mesh(6, 5, 6.0, 5.0, smooth_bed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eta: Vec<[f64; 3]> = (0..m.num_triangles()).map(|_| std::array::from_fn(|_| rng.gen_range(-0.5..0.5))).collect();
        let g = extrude(&m, &LayerPolicy::Uniform(7), &eta).unwrap();
        let eta2: Vec<[f64; 3]> = (0..m.num_triangles()).map(|_| std::array::from_fn(|_| rng.gen_range(-0.5..0.5))).collect();
        let g2 = update_moving_mesh(&g, &eta2, 3.0).unwrap();
        for (grid, eta) in [(&g, &eta), (&g2, &eta2)] {
            for c in 0..grid.num_columns() {
                let b = m.bed(c);
                for h in 0..3 {
                    let sum: f64 = (0..7).map(|k| 2.0 * grid.jz(c, k)[h]).sum();
                    let hh = eta[c][h] - b[h];
                    assert!((sum - hh).abs() <= 1e-12 * hh, "{sum} vs {hh}");
                }
            }
        }
    }

    #[test]
    fn moving_mesh_velocity() {
        let m = generate_basin_mesh(1, 1, 1.0, 1.0, |_, _| -10.0).unwrap();
        let eta = vec![[0.0; 3]; 2];
        let g = extrude(&m, &LayerPolicy::Uniform(1), &eta).unwrap();
        let same = update_moving_mesh(&g, &eta, 1.0).unwrap();
        for c in 0..2 {
            assert_eq!(same.w_m(c, 0), [0.0; 3]);
            assert_eq!(same.w_m(c, 1), [0.0; 3]);
        }
        let raised = update_moving_mesh(&g, &[[0.1; 3]; 2], 1.0).unwrap();
        for c in 0..2 {
            for h in 0..3 {
                assert!((raised.w_m(c, 0)[h] - 0.1).abs() < 1e-15);
            }
            assert_eq!(raised.w_m(c, 1), [0.0; 3]);
        }
    }

    #[test]
    fn dry_column_is_an_error() {
        let m = generate_basin_mesh(1, 1, 1.0, 1.0, |_, _| -1.0).unwrap();
        let eta = vec![[0.0, -1.5, 0.0], [0.0; 3]];
        assert!(matches!(extrude(&m, &LayerPolicy::Uniform(2), &eta), Err(Error::DryColumn { col: 0, .. })));
        let g = extrude(&m, &LayerPolicy::Uniform(2), &[[0.0; 3]; 2]).unwrap();
        assert!(matches!(update_moving_mesh(&g, &eta, 1.0), Err(Error::DryColumn { col: 0, .. })));
    }

    #[test]
    fn depth_thresholds() {
        let p = LayerPolicy::DepthThresholded(vec![(5.0, 3), (20.0, 8), (100.0, 12)]);
        assert_eq!(p.layers_for(2.0).unwrap(), 3);
        assert_eq!(p.layers_for(10.0).unwrap(), 8);
        assert_eq!(p.layers_for(500.0).unwrap(), 12);
        assert!(LayerPolicy::Uniform(0).layers_for(1.0).is_err());
    }

    /// Surface integral of the outward normal over each closed prism vanishes,
    /// and m is parallel to the normal on top and bottom faces.
    #[test]
    fn normal_closure_and_m_alignment() {
        let m = generate_basin_mesh(4, 4, 4.0, 4.0, smooth_bed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eta: Vec<[f64; 3]> = (0..m.num_triangles()).map(|_| std::array::from_fn(|_| rng.gen_range(-0.3..0.3))).collect();
        let g = extrude(&m, &LayerPolicy::Uniform(3), &eta).unwrap();
        for c in 0..g.num_columns() {
            for k in 0..3 {
                let pg = g.prism_geom(&m, c, k);
                let mut s = [0.0; 3];
                for q in tri_rule() {
                    let (t, b) = (pg.top_flux_normal(), pg.bottom_flux_normal());
                    for d in 0..3 {
                        s[d] += q.w * (t[d] + b[d]);
                    }
                }
                let jz = pg.jz_nodal();
                for (j, e) in m.geom[c].edges.iter().enumerate() {
                    for (gi, &(wa, wb)) in EDGE_W.iter().enumerate() {
                        let _ = GAUSS2[gi];
                        let jzq = wa * jz[j] + wb * jz[(j + 1) % 3];
                        for d in 0..2 {
                            s[d] += 2.0 * jzq * e.jedge * e.normal[d];
                        }
                    }
                }
                let scale = m.geom[c].area + pg.mean_height() * m.geom[c].edges[0].length;
                for d in 0..3 {
                    assert!(s[d].abs() <= 1e-12 * scale, "closure {d}: {}", s[d]);
                }
                for (zeta, n) in [(1.0, pg.top_normal()), (-1.0, pg.bottom_normal())] {
                    for q in tri_rule() {
                        let mv = pg.m(&q.phi, &crate::dg_core::phi_z(zeta));
                        let cross = [
                            mv[1] * n[2] - mv[2] * n[1],
                            mv[2] * n[0] - mv[0] * n[2],
                            mv[0] * n[1] - mv[1] * n[0],
                        ];
                        for v in cross {
                            assert!(v.abs() <= 1e-12 * mv[2].abs());
                        }
                    }
                }
            }
            for j in 0..3 {
                if let Neighbor::Interior { .. } = m.neighbors[c][j] {
                    assert!(m.geom[c].edges[j].normal[0].is_finite());
                }
            }
        }
    }
}
