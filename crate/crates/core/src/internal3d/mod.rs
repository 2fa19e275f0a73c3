//! The 3D internal mode.
//!
//! Diagnostic column solves for the baroclinic pressure gradient `r`, the
//! vertical velocity `w` and the mesh-relative `w~`; the linearized
//! transports `q` and `q-bar`; the horizontal operator `F3Dh` and the
//! vertical operator `A`; and the two-stage IMEX step that couples them to
//! the external mode.
//!
//! Per-column right-hand sides and results are stored in [`FieldSoA`] with
//! the same node numbering as the prisms: nodes 0..3 on the top face, 3..6 on
//! the bottom face. Momentum has two components, tracers two (temperature,
//! salinity).

mod continuity;
mod horizontal;
mod hpg;
mod solve;
mod step;
mod transport;
mod vertical;

pub use continuity::{compute_w_rhs, compute_wtilde_rhs, wtilde_column_sum};
pub use horizontal::{compute_f3dh, HorizontalTerms};
pub use hpg::compute_r_rhs;
pub use solve::{solve_banded_columns, solve_r, solve_w, Precision};
pub use step::{
    gather_states, relax_eddy_viscosity, run_partitioned, Budget, Model, ModelConfig, PartitionedRun, StageReport,
    State3D, StepReport,
};
pub use transport::{build_consistent_transport, consistent_stack, lateral_transport, project_transport};
pub use vertical::{
    add_bed_drag, apply_mass, apply_surface_bottom_stress, assemble_vertical, bottom_stress, mass_solve, prism_mass,
    Stresses, VerticalInputs,
};

use crate::dg_core::{tri_rule, DPHI_Z, EDGE_W, ZETA_PHI};
use crate::error::{Error, Result};
use crate::mesh::{ColumnGrid, Mesh2D, Neighbor, PrismGeom};

/// A volume quadrature point of a prism (6-point triangle rule times
/// 2-point Gauss in `zeta`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct VolPoint {
    /// Parent weight times `J2D`; multiply by `jz` for the volume weight.
    pub w: f64,
    pub jz: f64,
    pub z: f64,
    pub phi: [f64; 6],
    /// `d phi / d zeta`.
    pub dz: [f64; 6],
    /// Iso-zeta horizontal gradient `phi_z grad_h phi_h`.
    pub gt: [[f64; 2]; 6],
    pub m: [f64; 3],
}

impl VolPoint {
    #[inline]
    pub fn val(&self, v: &[f64; 6]) -> f64 {
        (0..6).map(|n| self.phi[n] * v[n]).sum()
    }

    /// Physical gradient of basis `n`.
    #[inline]
    pub fn grad(&self, n: usize) -> [f64; 3] {
        [self.gt[n][0] + self.m[0] * self.dz[n], self.gt[n][1] + self.m[1] * self.dz[n], self.m[2] * self.dz[n]]
    }

    /// Physical gradient of a nodal field.
    pub fn grad_of(&self, v: &[f64; 6]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (n, &x) in v.iter().enumerate() {
            let gn = self.grad(n);
            for d in 0..3 {
                g[d] += x * gn[d];
            }
        }
        g
    }

    /// `d/d zeta` of a nodal field.
    pub fn dzeta_of(&self, v: &[f64; 6]) -> f64 {
        (0..6).map(|n| self.dz[n] * v[n]).sum()
    }
}

pub(crate) fn volume_points(pg: &PrismGeom) -> [VolPoint; 12] {
    let rule = tri_rule();
    let mut out = [VolPoint { w: 0.0, jz: 0.0, z: 0.0, phi: [0.0; 6], dz: [0.0; 6], gt: [[0.0; 2]; 6], m: [0.0; 3] }; 12];
    let gh: [[f64; 2]; 3] = pg.grad;
    for (i, pt) in rule.iter().enumerate() {
        let jz = pg.jz(&pt.phi);
        let zt: f64 = (0..3).map(|h| pt.phi[h] * pg.zt[h]).sum();
        let zb: f64 = (0..3).map(|h| pt.phi[h] * pg.zb[h]).sum();
        for (gz, zp) in ZETA_PHI.iter().enumerate() {
            let p = &mut out[i * 2 + gz];
            p.w = pt.w * pg.j2d;
            p.jz = jz;
            p.z = zp[0] * zt + zp[1] * zb;
            p.m = pg.m(&pt.phi, zp);
            for n in 0..6 {
                let (h, v) = (n % 3, n / 3);
                p.phi[n] = pt.phi[h] * zp[v];
                p.dz[n] = pt.phi[h] * DPHI_Z[v];
                p.gt[n] = [zp[v] * gh[h][0], zp[v] * gh[h][1]];
            }
        }
    }
    out
}

/// Basis values of a prism at lateral-face point `(g, gz)` of edge `j`.
#[inline]
pub(crate) fn lat_phi(j: usize, g: usize, gz: usize) -> [f64; 6] {
    let (wa, wb) = EDGE_W[g];
    let zp = ZETA_PHI[gz];
    let mut phi = [0.0; 6];
    for v in 0..2 {
        phi[v * 3 + j] = wa * zp[v];
        phi[v * 3 + (j + 1) % 3] = wb * zp[v];
    }
    phi
}

#[inline]
pub(crate) fn dot6(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    (0..6).map(|n| a[n] * b[n]).sum()
}

/// Depth `H = eta - b` of a column, rejecting dry nodes.
pub(crate) fn column_depth(grid: &ColumnGrid, col: usize) -> Result<[f64; 3]> {
    let h = grid.depth(col);
    for d in h {
        if !(d > 0.0) {
            return Err(Error::DryColumn { col, depth: d });
        }
    }
    Ok(h)
}

/// Neighbor prism across edge `j` of column `col` at layer `k`, if any.
#[inline]
pub(crate) fn lateral_neighbor(mesh: &Mesh2D, col: usize, j: usize) -> Option<(usize, usize)> {
    match mesh.neighbors[col][j] {
        Neighbor::Interior { tri, edge } => Some((tri, edge)),
        Neighbor::Boundary(_) => None,
    }
}

/// Rejects grids where an interior edge joins columns with different layer counts.
pub fn check_conforming_layers(mesh: &Mesh2D, grid: &ColumnGrid) -> Result<()> {
    for e in &mesh.edges {
        if let crate::mesh::EdgeSide::Triangle(r) = e.right {
            let (la, lb) = (grid.layers(e.left), grid.layers(r));
            if la != lb {
                return Err(Error::NonConformingLayers { a: e.left, b: r, la, lb });
            }
        }
    }
    Ok(())
}

/// Nodal 6-vector with `v[h]` on both the top and bottom node of `h`.
#[inline]
pub(crate) fn extend_h(v: [f64; 3]) -> [f64; 6] {
    [v[0], v[1], v[2], v[0], v[1], v[2]]
}

#[cfg(test)]
pub(crate) mod testkit {
    use crate::external2d::Field2D;
    use crate::mesh::{extrude, generate_basin_mesh, ColumnGrid, LayerPolicy, Mesh2D};

    pub fn basin(n: usize, layers: usize, bed: impl Fn(f64, f64) -> f64) -> (Mesh2D, ColumnGrid) {
        let m = generate_basin_mesh(n, n, n as f64 * 100.0, n as f64 * 100.0, bed).unwrap();
        let eta = vec![[0.0; 3]; m.num_triangles()];
        let g = extrude(&m, &LayerPolicy::Uniform(layers), &eta).unwrap();
        (m, g)
    }

    pub fn eta_field(g: &ColumnGrid) -> Field2D {
        Field2D::from_fn(1, g.num_columns(), |t, h, _| g.eta(t)[h])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_basin_mesh, extrude, LayerPolicy};

    #[test]
    fn volume_rule_integrates_prism_volume() {
        let m = generate_basin_mesh(2, 2, 2.0, 2.0, |x, y| -3.0 - x + 0.5 * y).unwrap();
        let eta: Vec<[f64; 3]> = (0..m.num_triangles()).map(|t| [0.1 * t as f64, 0.0, -0.05]).collect();
        let g = extrude(&m, &LayerPolicy::Uniform(3), &eta).unwrap();
        for c in 0..g.num_columns() {
            let total: f64 = (0..3).map(|k| volume_points(&g.prism_geom(&m, c, k)).iter().map(|p| p.w * p.jz).sum::<f64>()).sum();
            let h = g.depth(c);
            let exact = m.geom[c].area * (h[0] + h[1] + h[2]) / 3.0;
            assert!((total - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn physical_gradient_of_z_is_vertical() {
        let m = generate_basin_mesh(2, 2, 2.0, 2.0, |x, y| -3.0 - x + 0.5 * y).unwrap();
        let eta: Vec<[f64; 3]> = (0..m.num_triangles()).map(|t| [0.1 * t as f64, 0.0, -0.05]).collect();
        let g = extrude(&m, &LayerPolicy::Uniform(2), &eta).unwrap();
        let pg = g.prism_geom(&m, 3, 1);
        let z = [pg.zt[0], pg.zt[1], pg.zt[2], pg.zb[0], pg.zb[1], pg.zb[2]];
        for p in volume_points(&pg) {
            let gz = p.grad_of(&z);
            assert!(gz[0].abs() < 1e-12 && gz[1].abs() < 1e-12 && (gz[2] - 1.0).abs() < 1e-12, "{gz:?}");
        }
    }

    #[test]
    fn lateral_basis_matches_neighbor_trace() {
        let m = generate_basin_mesh(2, 2, 1.0, 1.0, |_, _| -1.0).unwrap();
        for t in 0..m.num_triangles() {
            for j in 0..3 {
                if let Some((n, e)) = lateral_neighbor(&m, t, j) {
                    let vt = m.triangles[t];
                    let vn = m.triangles[n];
                    for g in 0..2 {
                        for gz in 0..2 {
                            let a = lat_phi(j, g, gz);
                            let b = lat_phi(e, 1 - g, gz);
                            let xa: f64 = (0..6).map(|k| a[k] * m.vertices[vt[k % 3]].x).sum();
                            let xb: f64 = (0..6).map(|k| b[k] * m.vertices[vn[k % 3]].x).sum();
                            assert!((xa - xb).abs() < 1e-15);
                        }
                    }
                }
            }
        }
    }
}
