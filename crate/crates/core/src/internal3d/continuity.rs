//! Right-hand sides of the two continuity column systems.
//!
//! Both are solved with `D_vd`, the weak `d w / d z` operator with the top
//! face value from inside and the bottom face value from the layer below.
//! For `w` the horizontal divergence is integrated by parts with the physical
//! gradient, so horizontal faces carry `n_h . [mean](q / Jz)`. For `w~` the
//! divergence is taken along layers, so only lateral faces appear and the
//! column sum reproduces the 2D free-surface residual.

use super::transport::lateral_transport;
use super::{lat_phi, volume_points};
use crate::dg_core::tri_rule;
use crate::error::Result;
use crate::external2d::EdgeField;
use crate::layout::FieldSoA;
use crate::mesh::{ColumnGrid, Mesh2D};

fn lateral_terms(mesh: &Mesh2D, grid: &ColumnGrid, q: &FieldSoA<f64>, stab: &EdgeField, c: usize, k: usize, r: &mut [f64; 6]) {
    for j in 0..3 {
        let jedge = mesh.geom[c].edges[j].jedge;
        for g in 0..2 {
            for gz in 0..2 {
                let fl = lateral_transport(mesh, grid, q, stab, c, k, j, g, gz) * jedge;
                let phi = lat_phi(j, g, gz);
                for n in 0..6 {
                    r[n] -= phi[n] * fl;
                }
            }
        }
    }
}

/// `w` right-hand side for transport `q` and free-surface stabilization `stab`.
pub fn compute_w_rhs(
    mesh: &Mesh2D,
    grid: &ColumnGrid,
    q: &FieldSoA<f64>,
    stab: &EdgeField,
    cols: &[usize],
    out: &mut FieldSoA<f64>,
) -> Result<()> {
    for &c in cols {
        super::column_depth(grid, c)?;
        let l = grid.layers(c);
        for k in 0..l {
            let pg = grid.prism_geom(mesh, c, k);
            let pr = grid.prism(c, k);
            let (qx, qy) = (q.nodes(0, pr), q.nodes(1, pr));
            let mut r = [0.0; 6];
            for pt in volume_points(&pg) {
                let qv = [pt.val(&qx), pt.val(&qy)];
                for n in 0..6 {
                    let gr = pt.grad(n);
                    r[n] += pt.w * (qv[0] * gr[0] + qv[1] * gr[1]);
                }
            }
            let jz = pg.jz_nodal();
            // Top face, including the surface where the exterior is the interior.
            {
                let fnrm = pg.top_flux_normal();
                let (ax, ay, ajz) = if k > 0 {
                    let pa = grid.prism(c, k - 1);
                    (q.nodes(0, pa), q.nodes(1, pa), grid.jz(c, k - 1))
                } else {
                    (qx, qy, jz)
                };
                for pt in tri_rule() {
                    let ji: f64 = (0..3).map(|h| pt.phi[h] * jz[h]).sum();
                    let je: f64 = (0..3).map(|h| pt.phi[h] * ajz[h]).sum();
                    let off = if k > 0 { 3 } else { 0 };
                    let mut flux = 0.0;
                    for (d, (vi, ve)) in [(qx, ax), (qy, ay)].into_iter().enumerate() {
                        let qi: f64 = (0..3).map(|h| pt.phi[h] * vi[h]).sum();
                        let qe: f64 = (0..3).map(|h| pt.phi[h] * ve[h + off]).sum();
                        flux += fnrm[d] * 0.5 * (qi / ji + qe / je);
                    }
                    for h in 0..3 {
                        r[h] -= pt.w * pt.phi[h] * flux;
                    }
                }
            }
            // Bottom face; the bed is impermeable and closes the column.
            if k + 1 < l {
                let fnrm = pg.bottom_flux_normal();
                let pb = grid.prism(c, k + 1);
                let (bx, by, bjz) = (q.nodes(0, pb), q.nodes(1, pb), grid.jz(c, k + 1));
                for pt in tri_rule() {
                    let ji: f64 = (0..3).map(|h| pt.phi[h] * jz[h]).sum();
                    let je: f64 = (0..3).map(|h| pt.phi[h] * bjz[h]).sum();
                    let mut flux = 0.0;
                    for (d, (vi, ve)) in [(qx, bx), (qy, by)].into_iter().enumerate() {
                        let qi: f64 = (0..3).map(|h| pt.phi[h] * vi[h + 3]).sum();
                        let qe: f64 = (0..3).map(|h| pt.phi[h] * ve[h]).sum();
                        flux += fnrm[d] * 0.5 * (qi / ji + qe / je);
                    }
                    for h in 0..3 {
                        r[h + 3] -= pt.w * pt.phi[h] * flux;
                    }
                }
            }
            lateral_terms(mesh, grid, q, stab, c, k, &mut r);
            for n in 0..6 {
                out.set(0, n, c, k, r[n]);
            }
        }
    }
    Ok(())
}

/// `w~` right-hand side for the mean-matched transport `q_bar` and the mean
/// stabilization `s_bar`.
pub fn compute_wtilde_rhs(
    mesh: &Mesh2D,
    grid: &ColumnGrid,
    q_bar: &FieldSoA<f64>,
    s_bar: &EdgeField,
    cols: &[usize],
    out: &mut FieldSoA<f64>,
) -> Result<()> {
    for &c in cols {
        super::column_depth(grid, c)?;
        for k in 0..grid.layers(c) {
            let pg = grid.prism_geom(mesh, c, k);
            let pr = grid.prism(c, k);
            let (qx, qy) = (q_bar.nodes(0, pr), q_bar.nodes(1, pr));
            let mut r = [0.0; 6];
            for pt in volume_points(&pg) {
                let qv = [pt.val(&qx), pt.val(&qy)];
                for n in 0..6 {
                    r[n] += pt.w * (qv[0] * pt.gt[n][0] + qv[1] * pt.gt[n][1]);
                }
            }
            lateral_terms(mesh, grid, q_bar, s_bar, c, k, &mut r);
            for n in 0..6 {
                out.set(0, n, c, k, r[n]);
            }
        }
    }
    Ok(())
}

/// Sum of a `w~` right-hand side over the vertical degrees of freedom of a
/// column, one value per column node.
pub fn wtilde_column_sum(rhs: &FieldSoA<f64>, col: usize) -> [f64; 3] {
    let mut s = [0.0; 3];
    for k in 0..rhs.layers(col) {
        for h in 0..3 {
            s[h] += rhs.get(0, h, col, k) + rhs.get(0, h + 3, col, k);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::solve::{solve_w, Precision};
    use super::super::testkit::{basin, eta_field};
    use super::super::transport::project_transport;
    use super::*;
    use crate::external2d::{External2D, Field2D, Forcing2D};
    use crate::mesh::{extrude, generate_basin_mesh, BoundaryTag, LayerPolicy};
    use crate::params::PhysParams;

    fn stab_of(mesh: &Mesh2D, grid: &ColumnGrid) -> EdgeField {
        let p = PhysParams::default();
        let f = Forcing2D::default();
        let ctx = External2D::new(mesh, &p, &f);
        let eta = eta_field(grid);
        let q = Field2D::zeros(2, mesh.num_triangles());
        (0..mesh.num_triangles()).map(|t| ctx.stabilization(&eta, &q, t, 0.0)).collect()
    }

    fn velocity(grid: &ColumnGrid, mesh: &Mesh2D, f: impl Fn(f64, f64, f64) -> [f64; 2]) -> FieldSoA<f64> {
        let mut u = FieldSoA::zeros(2, grid.layer_counts());
        for c in 0..grid.num_columns() {
            let tri = mesh.triangles[c];
            for k in 0..grid.layers(c) {
                let (zt, zb) = (grid.z(c, k), grid.z(c, k + 1));
                for n in 0..6 {
                    let v = &mesh.vertices[tri[n % 3]];
                    let val = f(v.x, v.y, if n < 3 { zt[n % 3] } else { zb[n % 3] });
                    u.set(0, n, c, k, val[0]);
                    u.set(1, n, c, k, val[1]);
                }
            }
        }
        u
    }

    fn solve_for(mesh: &Mesh2D, grid: &ColumnGrid, q: &FieldSoA<f64>, tilde: bool) -> FieldSoA<f64> {
        let all: Vec<usize> = (0..grid.num_columns()).collect();
        let stab = stab_of(mesh, grid);
        let mut w = FieldSoA::zeros(1, grid.layer_counts());
        if tilde {
            compute_wtilde_rhs(mesh, grid, q, &stab, &all, &mut w).unwrap();
        } else {
            compute_w_rhs(mesh, grid, q, &stab, &all, &mut w).unwrap();
        }
        solve_w(mesh, &mut w, &all, 8, Precision::F64).unwrap();
        w
    }

    #[test]
    fn zero_transport_gives_zero_w() {
        let (m, g) = basin(3, 3, |x, _| -10.0 - 0.01 * x);
        let q = FieldSoA::zeros(2, g.layer_counts());
        assert!(solve_for(&m, &g, &q, false).data().iter().all(|&x| x == 0.0));
        assert!(solve_for(&m, &g, &q, true).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_transport_is_divergence_free() {
        let (mut m, g) = basin(4, 3, |_, _| -12.0);
        m.tag_boundary(BoundaryTag::Open, |_, _| true);
        let mut q = FieldSoA::zeros(2, g.layer_counts());
        for c in 0..g.num_columns() {
            for k in 0..3 {
                q.set_nodes(0, g.prism(c, k), [0.7; 6]);
                q.set_nodes(1, g.prism(c, k), [-0.4; 6]);
            }
        }
        for w in [solve_for(&m, &g, &q, false), solve_for(&m, &g, &q, true)] {
            assert!(w.data().iter().all(|x| x.abs() < 1e-12), "{:?}", w.data().iter().fold(0.0f64, |a, b| a.max(b.abs())));
        }
    }

    #[test]
    fn linear_divergence_gives_linear_w() {
        let (mut m, g) = basin(3, 4, |_, _| -10.0);
        m.tag_boundary(BoundaryTag::Open, |_, _| true);
        let all: Vec<usize> = (0..g.num_columns()).collect();
        let u = velocity(&g, &m, |x, _, _| [x / 300.0, 0.0]);
        let mut q = u.zeros_like();
        project_transport(&m, &g, &u, &all, &mut q);
        let w = solve_for(&m, &g, &q, false);
        for c in 0..g.num_columns() {
            for k in 0..4 {
                for n in 0..6 {
                    let z = if n < 3 { g.z(c, k)[n % 3] } else { g.z(c, k + 1)[n % 3] };
                    let want = -(z + 10.0) / 300.0;
                    assert!((w.get(0, n, c, k) - want).abs() < 1e-12, "{} vs {want}", w.get(0, n, c, k));
                }
            }
        }
        let wt = solve_for(&m, &g, &q, true);
        for (a, b) in w.data().iter().zip(wt.data()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn flat_layers_w_equals_wtilde() {
        let (m, g) = basin(3, 5, |_, _| -8.0);
        let all: Vec<usize> = (0..g.num_columns()).collect();
        let u = velocity(&g, &m, |x, y, z| [(x / 100.0).sin() * (1.0 + 0.1 * z), (y / 70.0).cos()]);
        let mut q = u.zeros_like();
        project_transport(&m, &g, &u, &all, &mut q);
        let (w, wt) = (solve_for(&m, &g, &q, false), solve_for(&m, &g, &q, true));
        for (a, b) in w.data().iter().zip(wt.data()) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    /// Uniform layer transport over a sloped bed follows the layers: `w~`
    /// vanishes on interior columns while the physical `w` does not.
    #[test]
    fn sloped_bed_uniform_transport_follows_layers() {
        let m = generate_basin_mesh(5, 5, 500.0, 500.0, |x, _| -5.0 - 0.02 * x).unwrap();
        let g = extrude(&m, &LayerPolicy::Uniform(4), &vec![[0.0; 3]; m.num_triangles()]).unwrap();
        let mut q = FieldSoA::zeros(2, g.layer_counts());
        for c in 0..g.num_columns() {
            for k in 0..4 {
                q.set_nodes(0, g.prism(c, k), [0.25; 6]);
            }
        }
        let (w, wt) = (solve_for(&m, &g, &q, false), solve_for(&m, &g, &q, true));
        let interior: Vec<usize> = (0..g.num_columns())
            .filter(|&c| m.neighbors[c].iter().all(|n| matches!(n, crate::mesh::Neighbor::Interior { .. })))
            .collect();
        let mut wmax = 0.0f64;
        for &c in &interior {
            for k in 0..4 {
                for n in 0..6 {
                    assert!(wt.get(0, n, c, k).abs() < 1e-13);
                    wmax = wmax.max(w.get(0, n, c, k).abs());
                }
            }
        }
        assert!(wmax > 1e-4, "{wmax}");
    }

    /// The w-stabilization term on a lateral face equals the 2D free-surface
    /// edge term times the thickness fraction.
    #[test]
    fn surface_jump_matches_2d_edge_term() {
        let m = generate_basin_mesh(2, 2, 200.0, 200.0, |_, _| -10.0).unwrap();
        let eta: Vec<[f64; 3]> = (0..m.num_triangles()).map(|t| if t % 2 == 0 { [0.2; 3] } else { [0.0; 3] }).collect();
        let g = extrude(&m, &LayerPolicy::Uniform(2), &eta).unwrap();
        let q = FieldSoA::zeros(2, g.layer_counts());
        let stab = stab_of(&m, &g);
        let all: Vec<usize> = (0..g.num_columns()).collect();
        let mut rhs = FieldSoA::zeros(1, g.layer_counts());
        compute_wtilde_rhs(&m, &g, &q, &stab, &all, &mut rhs).unwrap();
        let p = PhysParams::default();
        let f = Forcing2D::default();
        let ctx = External2D::new(&m, &p, &f);
        let q2 = Field2D::zeros(2, m.num_triangles());
        let mut nonzero = false;
        for c in 0..g.num_columns() {
            let r2 = ctx.free_surface_weak(&q2, &stab[c], c);
            let s = wtilde_column_sum(&rhs, c);
            for h in 0..3 {
                assert!((s[h] - r2[h]).abs() <= 1e-12 * r2[h].abs().max(1.0));
                nonzero |= r2[h].abs() > 1e-6;
            }
            let mut rw = FieldSoA::zeros(1, g.layer_counts());
            compute_w_rhs(&m, &g, &q, &stab, &[c], &mut rw).unwrap();
            let sw = wtilde_column_sum(&rw, c);
            for h in 0..3 {
                assert!((sw[h] - r2[h]).abs() <= 1e-12 * r2[h].abs().max(1.0));
            }
        }
        assert!(nonzero);
    }
}
