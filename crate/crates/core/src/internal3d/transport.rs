//! Linearized transports: the projection `q` of `Jz u` and the mean-matched
//! `q-bar`, plus the stabilized lateral normal transport shared by every
//! horizontal flux.

use super::{column_depth, lat_phi, lateral_neighbor, volume_points, dot6};
use crate::dg_core::{mass_h_inv, EDGE_W};
use crate::error::{Error, Result};
use crate::external2d::{EdgeField, Field2D};
use crate::layout::FieldSoA;
use crate::mesh::{BoundaryTag, ColumnGrid, Mesh2D, Neighbor};

/// Projects `Jz u` onto the prism basis with the `Jz`-free mass matrix,
/// writing all components of `u` for the listed columns.
pub fn project_transport(mesh: &Mesh2D, grid: &ColumnGrid, u: &FieldSoA<f64>, cols: &[usize], q: &mut FieldSoA<f64>) {
    let nf = u.components();
    for &c in cols {
        let j2d = mesh.geom[c].j2d;
        for k in 0..grid.layers(c) {
            let p = grid.prism(c, k);
            let pts = volume_points(&grid.prism_geom(mesh, c, k));
            for f in 0..nf {
                let un = u.nodes(f, p);
                let mut b = [0.0; 6];
                for pt in &pts {
                    let v = pt.w * pt.jz * pt.val(&un);
                    for n in 0..6 {
                        b[n] += v * pt.phi[n];
                    }
                }
                let t = mass_h_inv(j2d, [b[0], b[1], b[2]]);
                let s = mass_h_inv(j2d, [b[3], b[4], b[5]]);
                let out: [f64; 6] = std::array::from_fn(|n| {
                    let h = n % 3;
                    if n < 3 {
                        2.0 * t[h] - s[h]
                    } else {
                        2.0 * s[h] - t[h]
                    }
                });
                q.set_nodes(f, p, out);
            }
        }
    }
}

/// Adds `(Jz / H)(target - sum q)` to both vertical degrees of freedom of
/// every layer of one nodal stack. `q[k] = [top, bottom]` of layer `k` and
/// `jz[k]` is its half-thickness; `H = sum 2 jz`.
pub fn consistent_stack(q: &mut [[f64; 2]], jz: &[f64], target: f64) {
    let depth: f64 = jz.iter().map(|j| 2.0 * j).sum();
    let sum: f64 = q.iter().map(|v| v[0] + v[1]).sum();
    let corr = target - sum;
    for (v, &j) in q.iter_mut().zip(jz) {
        let add = j / depth * corr;
        v[0] += add;
        v[1] += add;
    }
}

/// `q-bar = q + (Jz/H)(Q-bar - sum_vertical q)` at each column node, so the
/// vertical sum of `q-bar` equals the 2D mean transport `q_bar2d`.
pub fn build_consistent_transport(
    grid: &ColumnGrid,
    q: &FieldSoA<f64>,
    q_bar2d: &Field2D,
    cols: &[usize],
    out: &mut FieldSoA<f64>,
) -> Result<()> {
    if q.components() != q_bar2d.comps {
        return Err(Error::ShapeMismatch(format!("{} 3D vs {} 2D transport components", q.components(), q_bar2d.comps)));
    }
    for &c in cols {
        let depth = column_depth(grid, c)?;
        let l = grid.layers(c);
        for f in 0..q.components() {
            for h in 0..3 {
                let mut sum = 0.0;
                for k in 0..l {
                    sum += q.get(f, h, c, k) + q.get(f, h + 3, c, k);
                }
                let corr = q_bar2d.get(c, h, f) - sum;
                for k in 0..l {
                    let add = grid.jz(c, k)[h] / depth[h] * corr;
                    out.set(f, h, c, k, q.get(f, h, c, k) + add);
                    out.set(f, h + 3, c, k, q.get(f, h + 3, c, k) + add);
                }
            }
        }
    }
    Ok(())
}

#[inline]
fn trace(v: &[f64; 3], j: usize, g: usize) -> f64 {
    EDGE_W[g].0 * v[j] + EDGE_W[g].1 * v[(j + 1) % 3]
}

/// `Jz / H` traced at edge point `g` of edge `j`.
pub(crate) fn jz_over_h(grid: &ColumnGrid, c: usize, k: usize, j: usize, g: usize) -> f64 {
    trace(&grid.jz(c, k), j, g) / trace(&grid.depth(c), j, g)
}

/// Stabilized normal transport `n . [mean] q + [mean](Jz/H) S` per unit
/// edge Jacobian, at lateral point `(g, gz)` of edge `j` of prism `(c, k)`.
/// Walls give zero; open edges take the exterior transport from inside.
#[allow(clippy::too_many_arguments)]
pub fn lateral_transport(
    mesh: &Mesh2D,
    grid: &ColumnGrid,
    q: &FieldSoA<f64>,
    stab: &EdgeField,
    c: usize,
    k: usize,
    j: usize,
    g: usize,
    gz: usize,
) -> f64 {
    let n = mesh.geom[c].edges[j].normal;
    let phi = lat_phi(j, g, gz);
    let p = grid.prism(c, k);
    let qi = [dot6(&phi, &q.nodes(0, p)), dot6(&phi, &q.nodes(1, p))];
    let ri = jz_over_h(grid, c, k, j, g);
    let s = stab[c][j][g];
    match mesh.neighbors[c][j] {
        Neighbor::Interior { .. } => {
            let (tri, edge) = lateral_neighbor(mesh, c, j).expect("interior edge");
            let pe = grid.prism(tri, k);
            let phe = lat_phi(edge, 1 - g, gz);
            let qe = [dot6(&phe, &q.nodes(0, pe)), dot6(&phe, &q.nodes(1, pe))];
            let re = jz_over_h(grid, tri, k, edge, 1 - g);
            n[0] * 0.5 * (qi[0] + qe[0]) + n[1] * 0.5 * (qi[1] + qe[1]) + 0.5 * (ri + re) * s
        }
        Neighbor::Boundary(BoundaryTag::Wall) => 0.0,
        Neighbor::Boundary(BoundaryTag::Open) => n[0] * qi[0] + n[1] * qi[1] + ri * s,
    }
}

#[cfg(test)]
mod tests {
    use super::super::testkit::basin;
    use super::*;
    use crate::dg_core::phi_prism;
    use crate::mesh::{extrude, generate_basin_mesh, LayerPolicy};

    #[test]
    fn constant_velocity_constant_jz() {
        let (m, g) = basin(3, 4, |_, _| -16.0);
        let mut u = FieldSoA::zeros(2, g.layer_counts());
        for c in 0..g.num_columns() {
            for k in 0..4 {
                u.set_nodes(0, g.prism(c, k), [0.3; 6]);
                u.set_nodes(1, g.prism(c, k), [-1.2; 6]);
            }
        }
        let mut q = u.zeros_like();
        let all: Vec<usize> = (0..g.num_columns()).collect();
        project_transport(&m, &g, &u, &all, &mut q);
        for (a, b) in q.data().iter().zip(u.data()) {
            assert!((a - 2.0 * b).abs() < 1e-13, "{a} vs {b}");
        }
        let zero = u.zeros_like();
        project_transport(&m, &g, &zero, &all, &mut q);
        assert!(q.data().iter().all(|&x| x == 0.0));
    }

    /// Projection of a P1 velocity times a P1 Jz, checked against an
    /// independent quadrature plus dense mass solve at a different rule.
    #[test]
    fn projection_matches_quadrature_oracle() {
        let m = generate_basin_mesh(2, 2, 3.0, 2.0, |x, y| -4.0 - x + 0.3 * y).unwrap();
        let eta: Vec<[f64; 3]> = (0..m.num_triangles()).map(|t| [0.05 * t as f64, -0.1, 0.02]).collect();
        let g = extrude(&m, &LayerPolicy::Uniform(2), &eta).unwrap();
        let mut u = FieldSoA::zeros(1, g.layer_counts());
        for c in 0..g.num_columns() {
            for k in 0..2 {
                let v: [f64; 6] = std::array::from_fn(|n| ((c * 7 + k * 3 + n) as f64 * 0.37).sin());
                u.set_nodes(0, g.prism(c, k), v);
            }
        }
        let mut q = u.zeros_like();
        project_transport(&m, &g, &u, &[5], &mut q);
        // Oracle: tensor Gauss rule (3 points per direction, collapsed square map).
        let gl = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];
        for k in 0..2 {
            let pg = g.prism_geom(&m, 5, k);
            let un = u.nodes(0, g.prism(5, k));
            let mut mass = nalgebra::DMatrix::<f64>::zeros(6, 6);
            let mut rhs = nalgebra::DVector::<f64>::zeros(6);
            for &(a, wa) in &gl {
                for &(b, wb) in &gl {
                    for &(zeta, wz) in &gl {
                        let s = 0.5 * (1.0 + a);
                        let xi = s;
                        let et = (1.0 - s) * 0.5 * (1.0 + b);
                        let jac = 0.25 * (1.0 - s);
                        let w = wa * wb * wz * jac * pg.j2d;
                        let phi = phi_prism(xi, et, zeta);
                        let ph = crate::dg_core::phi_h(xi, et);
                        let jz = pg.jz(&ph);
                        let uv: f64 = (0..6).map(|n| phi[n] * un[n]).sum();
                        for i in 0..6 {
                            rhs[i] += w * phi[i] * jz * uv;
                            for jj in 0..6 {
                                mass[(i, jj)] += w * phi[i] * phi[jj];
                            }
                        }
                    }
                }
            }
            let sol = mass.lu().solve(&rhs).unwrap();
            let got = q.nodes(0, g.prism(5, k));
            for n in 0..6 {
                assert!((sol[n] - got[n]).abs() < 1e-12, "{n}: {} vs {}", sol[n], got[n]);
            }
        }
    }

    #[test]
    fn consistent_transport_examples() {
        let mut q = vec![[2.5, 2.5], [2.5, 2.5]];
        consistent_stack(&mut q, &[2.5, 2.5], 12.0);
        assert!((q[0][0] + q[0][1] - 6.0).abs() < 1e-14 && (q[1][0] + q[1][1] - 6.0).abs() < 1e-14);

        let mut q = vec![[0.0, 0.0], [0.0, 0.0]];
        consistent_stack(&mut q, &[2.0, 3.0], 1.0);
        assert!((q[0][0] + q[0][1] - 0.4).abs() < 1e-15);
        assert!((q[1][0] + q[1][1] - 0.6).abs() < 1e-15);

        let mut q = vec![[0.1, 0.3], [0.2, 0.4]];
        let before = q.clone();
        consistent_stack(&mut q, &[1.0, 1.0], 1.0);
        assert_eq!(q, before);
    }

    #[test]
    fn vertical_sum_matches_mean_transport() {
        let m = generate_basin_mesh(3, 3, 3.0, 3.0, |x, _| -5.0 - x).unwrap();
        let eta: Vec<[f64; 3]> = (0..m.num_triangles()).map(|t| [0.01 * t as f64, 0.0, 0.1]).collect();
        let g = extrude(&m, &LayerPolicy::Uniform(5), &eta).unwrap();
        let mut q = FieldSoA::zeros(2, g.layer_counts());
        for (i, v) in q.data_mut().iter_mut().enumerate() {
            *v = ((i * 13) as f64).sin();
        }
        let qb = Field2D::from_fn(2, m.num_triangles(), |t, h, c| 3.0 + (t + h + c) as f64);
        let all: Vec<usize> = (0..g.num_columns()).collect();
        let mut out = q.zeros_like();
        build_consistent_transport(&g, &q, &qb, &all, &mut out).unwrap();
        for c in 0..g.num_columns() {
            for h in 0..3 {
                for f in 0..2 {
                    let s: f64 = (0..5).map(|k| out.get(f, h, c, k) + out.get(f, h + 3, c, k)).sum();
                    assert!((s - qb.get(c, h, f)).abs() <= 1e-12 * qb.get(c, h, f).abs());
                }
            }
        }
    }
}
