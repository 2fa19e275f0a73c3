//! The horizontal 3D operator `F3Dh` for momentum and tracers: advection by
//! the consistent transport, the explicit part of the diffusion tensor,
//! Coriolis and the baroclinic pressure gradient.

use super::transport::lateral_transport;
use super::vertical::apply_mass;
use super::{lat_phi, lateral_neighbor, volume_points, dot6};
use crate::dg_core::{gradient_decompose, penalty_sigma, split_diagonal, tri_rule, PenaltyParams, EDGE_W};
use crate::error::Result;
use crate::external2d::EdgeField;
use crate::layout::FieldSoA;
use crate::mesh::{ColumnGrid, Mesh2D, PrismGeom};

/// Which horizontal terms to include and their coefficients.
#[derive(Debug, Clone, Copy)]
pub struct HorizontalTerms<'a> {
    pub advection: bool,
    /// Horizontal diffusivity; only its explicit part enters here.
    pub kappa_h: f64,
    /// Coriolis parameter, applied to two-component fields.
    pub coriolis: f64,
    /// Baroclinic `r` and the reference density.
    pub pressure: Option<(&'a FieldSoA<f64>, f64)>,
    pub penalty: PenaltyParams,
}

/// Physical gradient of nodal values `v` on the top or bottom face.
fn face_grad(pg: &PrismGeom, v: &[f64; 6], phi: &[f64; 3], top: bool) -> [f64; 3] {
    let zp = if top { [1.0, 0.0] } else { [0.0, 1.0] };
    gradient_decompose(v, phi, &pg.grad, &zp, &pg.m(phi, &zp)).total()
}

/// `kappa_e grad u` on a face point, with the explicit part of the split.
fn explicit_flux(pg: &PrismGeom, kh: f64, v: &[f64; 6], phi: &[f64; 3], top: bool) -> [f64; 3] {
    let zp = if top { [1.0, 0.0] } else { [0.0, 1.0] };
    let (_, ke) = split_diagonal(kh, 0.0, pg.m(phi, &zp));
    let g = face_grad(pg, v, phi, top);
    [ke[0] * g[0], ke[1] * g[1], ke[2] * g[2]]
}

/// Writes `F3Dh` of every component of `u` for the listed columns into
/// `out` (weak form, before the mass solve). `q` is the two-component
/// transport and `stab` the matching lateral stabilization.
#[allow(clippy::too_many_arguments)]
pub fn compute_f3dh(
    mesh: &Mesh2D,
    grid: &ColumnGrid,
    u: &FieldSoA<f64>,
    q: &FieldSoA<f64>,
    stab: &EdgeField,
    cols: &[usize],
    terms: &HorizontalTerms,
    out: &mut FieldSoA<f64>,
) -> Result<()> {
    let nf = u.components();
    let kh = terms.kappa_h;
    for &c in cols {
        let geo = &mesh.geom[c];
        let l = grid.layers(c);
        for k in 0..l {
            let pr = grid.prism(c, k);
            let pg = grid.prism_geom(mesh, c, k);
            let pts = volume_points(&pg);
            let qn = [q.nodes(0, pr), q.nodes(1, pr)];
            let jz = grid.jz(c, k);
            let mut r = vec![[0.0; 6]; nf];
            for (f, rf) in r.iter_mut().enumerate() {
                let un = u.nodes(f, pr);
                for pt in &pts {
                    let uv = pt.val(&un);
                    let gu = pt.grad_of(&un);
                    let (_, ke) = split_diagonal(kh, 0.0, pt.m);
                    let flux = [ke[0] * gu[0], ke[1] * gu[1], ke[2] * gu[2]];
                    let qp = [pt.val(&qn[0]), pt.val(&qn[1])];
                    for n in 0..6 {
                        if terms.advection {
                            rf[n] += pt.w * uv * (qp[0] * pt.gt[n][0] + qp[1] * pt.gt[n][1]);
                        }
                        if kh != 0.0 {
                            let gn = pt.grad(n);
                            rf[n] -= pt.w * pt.jz * (gn[0] * flux[0] + gn[1] * flux[1] + gn[2] * flux[2]);
                        }
                    }
                }
            }
            for j in 0..3 {
                let eg = &geo.edges[j];
                let nb = lateral_neighbor(mesh, c, j);
                let ext = nb.map(|(tri, edge)| (grid.prism(tri, k), grid.prism_geom(mesh, tri, k), edge, grid.jz(tri, k), tri));
                for g in 0..2 {
                    let jz_i = EDGE_W[g].0 * jz[j] + EDGE_W[g].1 * jz[(j + 1) % 3];
                    for gz in 0..2 {
                        let phi = lat_phi(j, g, gz);
                        let fnrm = if terms.advection { lateral_transport(mesh, grid, q, stab, c, k, j, g, gz) } else { 0.0 };
                        for (f, rf) in r.iter_mut().enumerate() {
                            let ui = dot6(&phi, &u.nodes(f, pr));
                            let mut add = 0.0;
                            if terms.advection && fnrm != 0.0 {
                                let up = match &ext {
                                    Some((pe, _, edge, _, _)) if fnrm < 0.0 => dot6(&lat_phi(*edge, 1 - g, gz), &u.nodes(f, *pe)),
                                    _ => ui,
                                };
                                add -= up * fnrm * eg.jedge;
                            }
                            if kh != 0.0 {
                                if let Some((pe, pge, edge, jze, tri)) = &ext {
                                    let phe = lat_phi(*edge, 1 - g, gz);
                                    let ue = dot6(&phe, &u.nodes(f, *pe));
                                    let jz_e = EDGE_W[1 - g].0 * jze[*edge] + EDGE_W[1 - g].1 * jze[(*edge + 1) % 3];
                                    let gi = lateral_grad(&pg, &u.nodes(f, pr), &phi);
                                    let ge = lateral_grad(pge, &u.nodes(f, *pe), &phe);
                                    let fi = jz_i * kh * (eg.normal[0] * gi[0] + eg.normal[1] * gi[1]);
                                    let fe = jz_e * kh * (eg.normal[0] * ge[0] + eg.normal[1] * ge[1]);
                                    let le = mesh.geom[*tri].area / eg.length;
                                    let sigma = penalty_sigma(&terms.penalty, geo.area / eg.length, le)?;
                                    add += 0.5 * (fi + fe) * eg.jedge;
                                    add -= sigma * kh * 0.5 * (jz_i + jz_e) * eg.jedge * 0.5 * (ui - ue);
                                }
                            }
                            if add != 0.0 {
                                for n in 0..6 {
                                    rf[n] += phi[n] * add;
                                }
                            }
                        }
                    }
                }
            }
            if kh != 0.0 {
                // Explicit diffusive flux across interior horizontal faces.
                for pt in tri_rule() {
                    for (f, rf) in r.iter_mut().enumerate() {
                        let un = u.nodes(f, pr);
                        if k > 0 {
                            let pa = grid.prism_geom(mesh, c, k - 1);
                            let ua = u.nodes(f, grid.prism(c, k - 1));
                            let fi = explicit_flux(&pg, kh, &un, &pt.phi, true);
                            let fe = explicit_flux(&pa, kh, &ua, &pt.phi, false);
                            let nrm = pg.top_flux_normal();
                            let v = pt.w * 0.5 * (0..3).map(|d| nrm[d] * (fi[d] + fe[d])).sum::<f64>();
                            for h in 0..3 {
                                rf[h] += v * pt.phi[h];
                            }
                        }
                        if k + 1 < l {
                            let pb = grid.prism_geom(mesh, c, k + 1);
                            let ub = u.nodes(f, grid.prism(c, k + 1));
                            let fi = explicit_flux(&pg, kh, &un, &pt.phi, false);
                            let fe = explicit_flux(&pb, kh, &ub, &pt.phi, true);
                            let nrm = pg.bottom_flux_normal();
                            let v = pt.w * 0.5 * (0..3).map(|d| nrm[d] * (fi[d] + fe[d])).sum::<f64>();
                            for h in 0..3 {
                                rf[h + 3] += v * pt.phi[h];
                            }
                        }
                    }
                }
            }
            if nf == 2 && terms.coriolis != 0.0 {
                let f = terms.coriolis;
                let (ux, uy) = (u.nodes(0, pr), u.nodes(1, pr));
                let mx = apply_mass(&pg, &uy.map(|v| f * v));
                let my = apply_mass(&pg, &ux.map(|v| -f * v));
                for n in 0..6 {
                    r[0][n] += mx[n];
                    r[1][n] += my[n];
                }
            }
            if let (2, Some((rr, rho0))) = (nf, terms.pressure) {
                for (comp, rf) in r.iter_mut().enumerate() {
                    let mr = apply_mass(&pg, &rr.nodes(comp, pr).map(|v| -v / rho0));
                    for n in 0..6 {
                        rf[n] += mr[n];
                    }
                }
            }
            for (f, rf) in r.iter().enumerate() {
                out.set_nodes(f, pr, *rf);
            }
        }
    }
    Ok(())
}

/// Physical horizontal gradient of nodal values `v` at lateral basis `phi`.
fn lateral_grad(pg: &PrismGeom, v: &[f64; 6], phi: &[f64; 6]) -> [f64; 2] {
    let ph = [phi[0] + phi[3], phi[1] + phi[4], phi[2] + phi[5]];
    let zt = [phi[0] + phi[1] + phi[2], phi[3] + phi[4] + phi[5]];
    let g = gradient_decompose(v, &ph, &pg.grad, &zt, &pg.m(&ph, &zt)).total();
    [g[0], g[1]]
}
