//! Right-hand side of the baroclinic pressure-gradient column system.
//!
//! The column operator is `D_vu`, the weak form of `d r / d z` with the
//! upper value taken on every horizontal face. The volume term carries the
//! physical horizontal gradient of `rho'`; lateral faces add the jump of
//! `rho'` weighted by the mean `Jz`, so a constant `rho'` contributes nothing
//! however the layer thicknesses jump between columns. The surface value
//! `r(eta) = g rho'(eta) grad eta` enters through the top face of layer 0.

use super::{lat_phi, lateral_neighbor, volume_points, dot6};
use crate::dg_core::{mass_h, tri_rule, EDGE_W};
use crate::error::Result;
use crate::layout::FieldSoA;
use crate::mesh::{ColumnGrid, Mesh2D};
use crate::params::PhysParams;

/// Writes the 2-component `r` right-hand side of each listed column into `out`.
pub fn compute_r_rhs(
    mesh: &Mesh2D,
    grid: &ColumnGrid,
    p: &PhysParams,
    rho: &FieldSoA<f64>,
    cols: &[usize],
    out: &mut FieldSoA<f64>,
) -> Result<()> {
    let g = p.g;
    for &c in cols {
        super::column_depth(grid, c)?;
        let l = grid.layers(c);
        let geo = &mesh.geom[c];
        for k in 0..l {
            let pg = grid.prism_geom(mesh, c, k);
            let pr = grid.prism(c, k);
            let rn = rho.nodes(0, pr);
            let mut r = [[0.0; 2]; 6];
            for pt in volume_points(&pg) {
                let gr = pt.grad_of(&rn);
                let w = g * pt.w * pt.jz;
                for n in 0..6 {
                    r[n][0] -= w * pt.phi[n] * gr[0];
                    r[n][1] -= w * pt.phi[n] * gr[1];
                }
            }
            // Horizontal faces between layers: the full jump against the
            // neighbor in the column, weighted by the face normal.
            if k > 0 {
                let above = rho.nodes(0, grid.prism(c, k - 1));
                let fnrm = pg.top_flux_normal();
                for pt in tri_rule() {
                    let ri: f64 = (0..3).map(|h| pt.phi[h] * rn[h]).sum();
                    let re: f64 = (0..3).map(|h| pt.phi[h] * above[h + 3]).sum();
                    let a = g * pt.w * (ri - re);
                    for h in 0..3 {
                        r[h][0] += a * pt.phi[h] * fnrm[0];
                        r[h][1] += a * pt.phi[h] * fnrm[1];
                    }
                }
            }
            if k + 1 < l {
                let below = rho.nodes(0, grid.prism(c, k + 1));
                let fnrm = pg.bottom_flux_normal();
                for pt in tri_rule() {
                    let ri: f64 = (0..3).map(|h| pt.phi[h] * rn[h + 3]).sum();
                    let re: f64 = (0..3).map(|h| pt.phi[h] * below[h]).sum();
                    let a = g * pt.w * (ri - re);
                    for h in 0..3 {
                        r[h + 3][0] += a * pt.phi[h] * fnrm[0];
                        r[h + 3][1] += a * pt.phi[h] * fnrm[1];
                    }
                }
            }
            let jz = grid.jz(c, k);
            for j in 0..3 {
                let Some((tri, edge)) = lateral_neighbor(mesh, c, j) else { continue };
                let eg = &geo.edges[j];
                let re_nodes = rho.nodes(0, grid.prism(tri, k));
                let jze = grid.jz(tri, k);
                for gq in 0..2 {
                    let jz_i = EDGE_W[gq].0 * jz[j] + EDGE_W[gq].1 * jz[(j + 1) % 3];
                    let jz_e = EDGE_W[1 - gq].0 * jze[edge] + EDGE_W[1 - gq].1 * jze[(edge + 1) % 3];
                    for gz in 0..2 {
                        let phi = lat_phi(j, gq, gz);
                        let ri = dot6(&phi, &rn);
                        let re = dot6(&lat_phi(edge, 1 - gq, gz), &re_nodes);
                        let a = g * 0.5 * (ri - re) * 0.5 * (jz_i + jz_e) * eg.jedge;
                        for n in 0..6 {
                            r[n][0] += phi[n] * a * eg.normal[0];
                            r[n][1] += phi[n] * a * eg.normal[1];
                        }
                    }
                }
            }
            if k == 0 {
                let eta = grid.eta(c);
                let ge = [
                    eta[0] * geo.grad[0][0] + eta[1] * geo.grad[1][0] + eta[2] * geo.grad[2][0],
                    eta[0] * geo.grad[0][1] + eta[1] * geo.grad[1][1] + eta[2] * geo.grad[2][1],
                ];
                let mh = mass_h(geo.j2d);
                for i in 0..3 {
                    for h in 0..3 {
                        r[i][0] -= mh[i][h] * g * rn[h] * ge[0];
                        r[i][1] -= mh[i][h] * g * rn[h] * ge[1];
                    }
                }
            }
            for n in 0..6 {
                out.set(0, n, c, k, r[n][0]);
                out.set(1, n, c, k, r[n][1]);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::solve::{solve_r, Precision};
    use super::super::testkit::basin;
    use super::*;
    use crate::mesh::{extrude, generate_basin_mesh, LayerPolicy};

    fn rho_from(grid: &ColumnGrid, mesh: &Mesh2D, f: impl Fn(f64, f64, f64) -> f64) -> FieldSoA<f64> {
        let mut rho = FieldSoA::zeros(1, grid.layer_counts());
        for c in 0..grid.num_columns() {
            let tri = mesh.triangles[c];
            for k in 0..grid.layers(c) {
                let (zt, zb) = (grid.z(c, k), grid.z(c, k + 1));
                let v: [f64; 6] = std::array::from_fn(|n| {
                    let vx = &mesh.vertices[tri[n % 3]];
                    f(vx.x, vx.y, if n < 3 { zt[n % 3] } else { zb[n % 3] })
                });
                rho.set_nodes(0, grid.prism(c, k), v);
            }
        }
        rho
    }

    fn solved(mesh: &Mesh2D, grid: &ColumnGrid, rho: &FieldSoA<f64>, prec: Precision) -> FieldSoA<f64> {
        let p = PhysParams::default();
        let all: Vec<usize> = (0..grid.num_columns()).collect();
        let mut r = FieldSoA::zeros(2, grid.layer_counts());
        compute_r_rhs(mesh, grid, &p, rho, &all, &mut r).unwrap();
        solve_r(mesh, &mut r, &all, 4, prec).unwrap();
        r
    }

    #[test]
    fn linear_density_in_x_gives_hydrostatic_integral() {
        let m = generate_basin_mesh(1, 1, 100.0, 100.0, |x, _| -10.0 - 0.02 * x).unwrap();
        let eta = vec![[0.0; 3]; 2];
        let g = extrude(&m, &LayerPolicy::Uniform(4), &eta).unwrap();
        let gamma = 0.01;
        let rho = rho_from(&g, &m, |x, _, _| gamma * x);
        let r = solved(&m, &g, &rho, Precision::F64);
        let gg = PhysParams::default().g;
        for c in 0..2 {
            for k in 0..4 {
                for n in 0..6 {
                    let z = if n < 3 { g.z(c, k)[n % 3] } else { g.z(c, k + 1)[n % 3] };
                    let want = gg * gamma * (0.0 - z);
                    assert!((r.get(0, n, c, k) - want).abs() < 1e-10 * gg * gamma * 10.0, "{} vs {want}", r.get(0, n, c, k));
                    assert!(r.get(1, n, c, k).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn vertical_stratification_has_no_horizontal_gradient() {
        let (m, g) = basin(2, 5, |x, y| -20.0 + 0.01 * x - 0.02 * y);
        let rho = rho_from(&g, &m, |_, _, z| 0.3 * z);
        let r = solved(&m, &g, &rho, Precision::F64);
        assert!(r.data().iter().all(|v| v.abs() < 1e-10), "{:?}", r.data().iter().fold(0.0f64, |a, b| a.max(b.abs())));
    }

    /// Per-element constant surface elevations make `Jz` jump across every
    /// lateral face; a uniform density must still produce no pressure gradient.
    #[test]
    fn constant_density_with_nonconformal_jumps() {
        let m = generate_basin_mesh(4, 4, 400.0, 400.0, |x, y| -15.0 - 0.01 * x + 0.005 * y).unwrap();
        let eta: Vec<[f64; 3]> = (0..m.num_triangles()).map(|t| [0.3 * ((t * 7) as f64).sin(); 3]).collect();
        let g = extrude(&m, &LayerPolicy::Uniform(6), &eta).unwrap();
        let rho = rho_from(&g, &m, |_, _, _| 1.7);
        for prec in [Precision::F64, Precision::F32] {
            let r = solved(&m, &g, &rho, prec);
            let max = r.data().iter().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(max <= 1e-12, "{prec:?}: {max}");
        }
    }
}
