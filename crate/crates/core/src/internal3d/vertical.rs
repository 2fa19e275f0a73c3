//! The vertical operator `A`: advection by `w~ - w_m` and diffusion with the
//! implicit diffusivity `kappa_i`, assembled per column in the 6x6-block
//! banded pattern, plus prism mass matrices and surface/bed stresses.
//!
//! Horizontal faces use upwind advection (the surface face is evaluated from
//! inside, the bed carries no flux) and an incomplete interior penalty
//! discretization of diffusion without a diffusive flux at the surface or bed.

use super::volume_points;
use crate::column_solvers::BandedColumnMatrix;
use crate::dg_core::{penalty_sigma, split_diagonal, tri_rule, PenaltyParams, DPHI_Z};
use crate::error::Result;
use crate::layout::FieldSoA;
use crate::mesh::{ColumnGrid, Mesh2D, PrismGeom};
use crate::params::{PhysParams, VerticalProfile};

/// Inputs of the vertical operator of one field.
#[derive(Debug, Clone, Copy)]
pub struct VerticalInputs<'a> {
    /// Geometry the operator is assembled on.
    pub grid: &'a ColumnGrid,
    /// Grid whose mesh velocity `w_m` is used.
    pub mesh_velocity: &'a ColumnGrid,
    pub w_tilde: &'a FieldSoA<f64>,
    pub kappa_v: &'a VerticalProfile,
    /// Per-column, per-layer vertical diffusivity replacing `kappa_v`.
    pub eddy: Option<&'a [Vec<f64>]>,
    pub kappa_h: f64,
    pub penalty: PenaltyParams,
    /// Without advection only the volume change `u d(zeta) w_m` remains, so a
    /// uniform field is kept uniform on a moving mesh.
    pub advection: bool,
}

impl VerticalInputs<'_> {
    fn kappa_v(&self, c: usize, k: usize, depth: f64) -> f64 {
        match self.eddy {
            Some(e) => e[c][k],
            None => self.kappa_v.at(depth),
        }
    }
}

/// Face data of one prism at a triangle quadrature point.
struct FacePoint {
    phi: [f64; 3],
    /// `d/d zeta` coefficients on the six nodes.
    dz: [f64; 6],
    kappa: f64,
    jz: f64,
}

fn face_point(vi: &VerticalInputs, pg: &PrismGeom, c: usize, k: usize, phi: [f64; 3], top: bool) -> FacePoint {
    let zp = if top { [1.0, 0.0] } else { [0.0, 1.0] };
    let m = pg.m(&phi, &zp);
    let z: f64 = (0..3).map(|h| phi[h] * if top { pg.zt[h] } else { pg.zb[h] }).sum();
    let eta = vi.grid.eta(c);
    let depth = (0..3).map(|h| phi[h] * eta[h]).sum::<f64>() - z;
    let (kappa, _) = split_diagonal(vi.kappa_h, vi.kappa_v(c, k, depth), m);
    FacePoint { phi, dz: std::array::from_fn(|n| phi[n % 3] * DPHI_Z[n / 3]), kappa, jz: pg.jz(&phi) }
}

/// Assembles `A` for column `col` (scalar; shared by all components).
pub fn assemble_vertical(mesh: &Mesh2D, vi: &VerticalInputs, col: usize) -> Result<BandedColumnMatrix<f64>> {
    let grid = vi.grid;
    let l = grid.layers(col);
    let mut a = BandedColumnMatrix::zeros(l);
    let eta = grid.eta(col);
    let geoms: Vec<PrismGeom> = (0..l).map(|k| grid.prism_geom(mesh, col, k)).collect();
    let j2d = mesh.geom[col].j2d;
    let rel = |k: usize, top: bool, phi: &[f64; 3]| -> f64 {
        // w~ from the prism below the interface minus the mesh velocity.
        let kk = if top { k } else { k + 1 };
        let wt = vi.w_tilde.nodes(0, grid.prism(col, kk));
        let wm = vi.mesh_velocity.w_m(col, kk);
        (0..3).map(|h| phi[h] * (wt[h] - wm[h])).sum()
    };
    for k in 0..l {
        let pg = &geoms[k];
        let wt = vi.w_tilde.nodes(0, grid.prism(col, k));
        let (wmt, wmb) = (vi.mesh_velocity.w_m(col, k), vi.mesh_velocity.w_m(col, k + 1));
        let wm = [wmt[0], wmt[1], wmt[2], wmb[0], wmb[1], wmb[2]];
        for pt in volume_points(pg) {
            let adv = pt.val(&wt) - pt.val(&wm);
            let swell = pt.dzeta_of(&wm);
            let depth = (0..3).map(|h| (pt.phi[h] + pt.phi[h + 3]) * eta[h]).sum::<f64>() - pt.z;
            let (kappa, _) = split_diagonal(vi.kappa_h, vi.kappa_v(col, k, depth), pt.m);
            for i in 0..6 {
                for j in 0..6 {
                    let transport = if vi.advection { pt.dz[i] * adv * pt.phi[j] } else { pt.phi[i] * swell * pt.phi[j] };
                    let v = pt.w * (transport - kappa * pt.dz[i] * pt.dz[j] / pt.jz);
                    a.add(k, i, k, j, v);
                }
            }
        }
        for pt in tri_rule() {
            let w = pt.w * j2d;
            if vi.advection {
                vertical_upwind(&mut a, k, l, w, &pt.phi, &rel);
            }
            // Diffusion across the interface below prism k (shared with k + 1).
            if k + 1 < l {
                let (pu, pl) = (&geoms[k], &geoms[k + 1]);
                let fu = face_point(vi, pu, col, k, pt.phi, false);
                let fl = face_point(vi, pl, col, k + 1, pt.phi, true);
                let sigma = penalty_sigma(&vi.penalty, pu.mean_height(), pl.mean_height())?;
                let kmax = fu.kappa.max(fl.kappa);
                // Mean flux {kappa d(zeta)u / Jz} from both sides, as seen by the
                // upper prism's bottom rows (sign -) and lower prism's top rows (+).
                for h in 0..3 {
                    for n in 0..6 {
                        let cu = 0.5 * fu.kappa * fu.dz[n] / fu.jz;
                        let cl = 0.5 * fl.kappa * fl.dz[n] / fl.jz;
                        a.add(k, h + 3, k, n, -w * fu.phi[h] * cu);
                        a.add(k, h + 3, k + 1, n, -w * fu.phi[h] * cl);
                        a.add(k + 1, h, k, n, w * fl.phi[h] * cu);
                        a.add(k + 1, h, k + 1, n, w * fl.phi[h] * cl);
                    }
                    for g in 0..3 {
                        let pen = 0.5 * sigma * kmax * w * pt.phi[h] * pt.phi[g];
                        // Upper prism: diff = (u_upper_bottom - u_lower_top) / 2.
                        a.add(k, h + 3, k, g + 3, -pen);
                        a.add(k, h + 3, k + 1, g, pen);
                        a.add(k + 1, h, k + 1, g, -pen);
                        a.add(k + 1, h, k, g + 3, pen);
                    }
                }
            }
        }
    }
    Ok(a)
}

/// Upwind advective fluxes through the top face (outward `+z`) and bottom
/// face (outward `-z`) of prism `k`. The surface face takes its value from
/// inside; the bed carries no flux.
fn vertical_upwind(a: &mut BandedColumnMatrix<f64>, k: usize, l: usize, w: f64, phi: &[f64; 3], rel: &impl Fn(usize, bool, &[f64; 3]) -> f64) {
    let at = rel(k, true, phi);
    let (src_k, src_off) = if at >= 0.0 || k == 0 { (k, 0) } else { (k - 1, 3) };
    for i in 0..3 {
        for h in 0..3 {
            a.add(k, i, src_k, h + src_off, -w * phi[i] * phi[h] * at);
        }
    }
    if k + 1 < l {
        let ab = rel(k, false, phi);
        let (src_k, src_off) = if ab <= 0.0 { (k, 3) } else { (k + 1, 0) };
        for i in 0..3 {
            for h in 0..3 {
                a.add(k, i + 3, src_k, h + src_off, w * phi[i] * phi[h] * ab);
            }
        }
    }
}

/// Adds the linearized bed drag `-C_d |u_pred| u` to `A` on the bottom face
/// of the deepest layer.
pub fn add_bed_drag(a: &mut BandedColumnMatrix<f64>, j2d: f64, u_pred: [[f64; 2]; 3], cd: f64) {
    let k = a.num_layers() - 1;
    for pt in tri_rule() {
        let ux: f64 = (0..3).map(|h| pt.phi[h] * u_pred[h][0]).sum();
        let uy: f64 = (0..3).map(|h| pt.phi[h] * u_pred[h][1]).sum();
        let s = cd * ux.hypot(uy) * pt.w * j2d;
        for i in 0..3 {
            for j in 0..3 {
                a.add(k, i + 3, k, j + 3, -s * pt.phi[i] * pt.phi[j]);
            }
        }
    }
}

/// Quadratic bed stress `-C_d |u_b| u_b` (kinematic).
pub fn bottom_stress(u_b: [f64; 2], cd: f64) -> [f64; 2] {
    let s = cd * u_b[0].hypot(u_b[1]);
    [-s * u_b[0], -s * u_b[1]]
}

/// Weak surface and bed stress contributions of one column, on the top
/// nodes of layer 0 and the bottom nodes of the deepest layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stresses {
    pub surface: [[f64; 2]; 3],
    pub bed: [[f64; 2]; 3],
}

/// Wind `tau_s` (kinematic, constant over the column top) and the quadratic
/// drag of the bottom-layer velocity of `u`.
pub fn apply_surface_bottom_stress(mesh: &Mesh2D, grid: &ColumnGrid, u: &FieldSoA<f64>, col: usize, p: &PhysParams) -> Stresses {
    let j2d = mesh.geom[col].j2d;
    let tau = p.kinematic_wind();
    let mut s = Stresses { surface: [[0.0; 2]; 3], bed: [[0.0; 2]; 3] };
    for h in 0..3 {
        s.surface[h] = [tau[0] * j2d / 6.0, tau[1] * j2d / 6.0];
    }
    let pb = grid.prism(col, grid.layers(col) - 1);
    let (ux, uy) = (u.nodes(0, pb), u.nodes(1, pb));
    for pt in tri_rule() {
        let ub = [(0..3).map(|h| pt.phi[h] * ux[h + 3]).sum(), (0..3).map(|h| pt.phi[h] * uy[h + 3]).sum()];
        let tb = bottom_stress(ub, p.drag);
        for h in 0..3 {
            s.bed[h][0] += pt.w * j2d * pt.phi[h] * tb[0];
            s.bed[h][1] += pt.w * j2d * pt.phi[h] * tb[1];
        }
    }
    s
}

/// The `Jz`-weighted 2D mass block of a prism; the prism mass matrix is
/// `Mz (x) mhj` with `Mz = [[2/3, 1/3], [1/3, 2/3]]`.
pub(crate) fn mass_hj(pg: &PrismGeom) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for pt in tri_rule() {
        let w = pt.w * pg.j2d * pg.jz(&pt.phi);
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += w * pt.phi[a] * pt.phi[b];
            }
        }
    }
    m
}

/// Dense 6x6 prism mass matrix.
pub fn prism_mass(pg: &PrismGeom) -> [[f64; 6]; 6] {
    let mhj = mass_hj(pg);
    const MZ: [[f64; 2]; 2] = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
    std::array::from_fn(|a| std::array::from_fn(|b| MZ[a / 3][b / 3] * mhj[a % 3][b % 3]))
}

/// `M x` for one prism.
pub fn apply_mass(pg: &PrismGeom, x: &[f64; 6]) -> [f64; 6] {
    let mhj = mass_hj(pg);
    let mx = |v: usize| -> [f64; 3] { std::array::from_fn(|a| (0..3).map(|b| mhj[a][b] * x[v * 3 + b]).sum()) };
    let (t, b) = (mx(0), mx(1));
    std::array::from_fn(|n| {
        let h = n % 3;
        if n < 3 {
            (2.0 * t[h] + b[h]) / 3.0
        } else {
            (t[h] + 2.0 * b[h]) / 3.0
        }
    })
}

/// Solves `M x = b` for one prism.
pub fn mass_solve(pg: &PrismGeom, b: &[f64; 6]) -> [f64; 6] {
    let inv = inverse3(&mass_hj(pg));
    let s = |v: usize| -> [f64; 3] { std::array::from_fn(|a| (0..3).map(|c| inv[a][c] * b[v * 3 + c]).sum()) };
    let (t, u) = (s(0), s(1));
    std::array::from_fn(|n| {
        let h = n % 3;
        if n < 3 {
            2.0 * t[h] - u[h]
        } else {
            2.0 * u[h] - t[h]
        }
    })
}

fn inverse3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
        [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
        [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    std::array::from_fn(|i| std::array::from_fn(|j| cof[j][i] / det))
}
