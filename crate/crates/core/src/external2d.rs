//! The 2D external mode: free-surface and depth-integrated momentum
//! residuals, SSP-RK3 sub-cycling with mean-transport accumulation, and the
//! extraction of the 2D forcing seen by the 3D momentum equation.
//!
//! Fields are P1-DG per triangle. Every edge term is evaluated by each side
//! from its own traces, so the contribution an element receives is the exact
//! negative of what its neighbor receives.

use crate::dg_core::{iface_diff, iface_max, iface_mean, mass_h, mass_h_inv, tri_rule, EDGE_W};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh2D, Neighbor};
use crate::params::PhysParams;
use crate::partition::{overlapped, Exchange, HaloField, SerialExchange};

pub use crate::params::eos_density;

/// Per-triangle nodal field with `comps` components, indexed `(t * 3 + h) * comps + f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub comps: usize,
    pub data: Vec<f64>,
}

impl Field2D {
    pub fn zeros(comps: usize, triangles: usize) -> Self {
        Field2D { comps, data: vec![0.0; triangles * 3 * comps] }
    }

    pub fn from_fn(comps: usize, triangles: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut out = Field2D::zeros(comps, triangles);
        for t in 0..triangles {
            for h in 0..3 {
                for c in 0..comps {
                    out.data[(t * 3 + h) * comps + c] = f(t, h, c);
                }
            }
        }
        out
    }

    pub fn num_triangles(&self) -> usize {
        self.data.len() / (3 * self.comps)
    }

    pub fn get(&self, t: usize, h: usize, c: usize) -> f64 {
        self.data[(t * 3 + h) * self.comps + c]
    }

    pub fn set(&mut self, t: usize, h: usize, c: usize, v: f64) {
        self.data[(t * 3 + h) * self.comps + c] = v;
    }

    /// Nodal values of component `c` on triangle `t`.
    pub fn tri(&self, t: usize, c: usize) -> [f64; 3] {
        std::array::from_fn(|h| self.get(t, h, c))
    }

    /// Two-component nodal vectors on triangle `t`.
    pub fn tri2(&self, t: usize) -> [[f64; 2]; 3] {
        std::array::from_fn(|h| [self.get(t, h, 0), self.get(t, h, 1)])
    }

    pub fn set_tri(&mut self, t: usize, c: usize, v: [f64; 3]) {
        for (h, x) in v.into_iter().enumerate() {
            self.set(t, h, c, x);
        }
    }

    pub fn set_tri2(&mut self, t: usize, v: [[f64; 2]; 3]) {
        for (h, x) in v.into_iter().enumerate() {
            self.set(t, h, 0, x[0]);
            self.set(t, h, 1, x[1]);
        }
    }

    fn elem(&self, t: usize) -> &[f64] {
        let n = 3 * self.comps;
        &self.data[t * n..(t + 1) * n]
    }

    fn elem_mut(&mut self, t: usize) -> &mut [f64] {
        let n = 3 * self.comps;
        &mut self.data[t * n..(t + 1) * n]
    }
}

impl HaloField for Field2D {
    fn pack(&self, elems: &[usize], buf: &mut Vec<f64>) {
        for &t in elems {
            buf.extend_from_slice(self.elem(t));
        }
    }
    fn unpack(&mut self, elems: &[usize], buf: &[f64]) -> usize {
        let n = 3 * self.comps;
        for (i, &t) in elems.iter().enumerate() {
            self.elem_mut(t).copy_from_slice(&buf[i * n..(i + 1) * n]);
        }
        elems.len() * n
    }
    fn poison(&mut self, elems: &[usize]) {
        for &t in elems {
            self.elem_mut(t).fill(f64::NAN);
        }
    }
    fn all_finite(&self, elems: &[usize]) -> bool {
        elems.iter().all(|&t| self.elem(t).iter().all(|x| x.is_finite()))
    }
}

/// Per element, edge and edge quadrature point scalar (e.g. the
/// free-surface stabilization `[max c][diff eta]`).
pub type EdgeField = Vec<[[f64; 2]; 3]>;

/// Value varying linearly in time between `a` at `t0` and `b` at `t0 + interval`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearForcing<const N: usize> {
    pub t0: f64,
    pub interval: f64,
    pub a: [f64; N],
    pub b: [f64; N],
}

impl<const N: usize> LinearForcing<N> {
    pub fn constant(v: [f64; N]) -> Self {
        LinearForcing { t0: 0.0, interval: 1.0, a: v, b: v }
    }

    pub fn at(&self, t: f64) -> [f64; N] {
        if self.a == self.b {
            return self.a;
        }
        let s = (t - self.t0) / self.interval;
        std::array::from_fn(|i| self.a[i] + s * (self.b[i] - self.a[i]))
    }
}

/// Time-dependent 2D forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forcing2D {
    /// Uniform atmospheric pressure gradient, Pa/m.
    pub p_atm_grad: LinearForcing<2>,
    /// Surface elevation imposed on open boundaries, m.
    pub open_eta: LinearForcing<1>,
    /// Uniform volume source `s`, m/s.
    pub source: f64,
}

impl Default for Forcing2D {
    fn default() -> Self {
        Forcing2D {
            p_atm_grad: LinearForcing::constant([0.0, 0.0]),
            open_eta: LinearForcing::constant([0.0]),
            source: 0.0,
        }
    }
}

/// Trace of nodal values on edge `j` at edge quadrature point `g`.
#[inline]
pub fn edge_trace(v: &[f64; 3], j: usize, g: usize) -> f64 {
    EDGE_W[g].0 * v[j] + EDGE_W[g].1 * v[(j + 1) % 3]
}

#[inline]
fn edge_trace2(v: &[[f64; 2]; 3], j: usize, g: usize) -> [f64; 2] {
    let (wa, wb) = EDGE_W[g];
    let (a, b) = (v[j], v[(j + 1) % 3]);
    [wa * a[0] + wb * b[0], wa * a[1] + wb * b[1]]
}

/// The state across edge `j` of `t`, evaluated at edge point `g` from the
/// exterior side's own traces.
#[derive(Debug, Clone, Copy)]
struct EdgeState {
    eta: f64,
    h: f64,
    q: [f64; 2],
}

/// Nodal `d eta/dt`, `dQ/dt` and the stabilization flux of one triangle.
pub type Tendency = ([f64; 3], [[f64; 2]; 3], [[f64; 2]; 3]);

/// Assembly context for the 2D residuals.
#[derive(Debug, Clone, Copy)]
pub struct External2D<'a> {
    pub mesh: &'a Mesh2D,
    pub params: &'a PhysParams,
    pub forcing: &'a Forcing2D,
}

impl<'a> External2D<'a> {
    pub fn new(mesh: &'a Mesh2D, params: &'a PhysParams, forcing: &'a Forcing2D) -> Self {
        External2D { mesh, params, forcing }
    }

    fn depth(&self, eta: &Field2D, t: usize) -> Result<[f64; 3]> {
        let b = self.mesh.bed(t);
        let e = eta.tri(t, 0);
        let h: [f64; 3] = std::array::from_fn(|i| e[i] - b[i]);
        if h.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::DryColumn { col: t, depth: h.iter().copied().fold(f64::INFINITY, f64::min) });
        }
        Ok(h)
    }

    fn sides(&self, eta: &Field2D, q: &Field2D, t: usize, j: usize, g: usize, time: f64) -> (EdgeState, EdgeState) {
        let bt = self.mesh.bed(t);
        let et = eta.tri(t, 0);
        let qt = q.tri2(t);
        let e_int = edge_trace(&et, j, g);
        let int = EdgeState { eta: e_int, h: e_int - edge_trace(&bt, j, g), q: edge_trace2(&qt, j, g) };
        let ext = match self.mesh.neighbors[t][j] {
            Neighbor::Interior { tri, edge } => {
                let e = edge_trace(&eta.tri(tri, 0), edge, 1 - g);
                EdgeState { eta: e, h: e - edge_trace(&self.mesh.bed(tri), edge, 1 - g), q: edge_trace2(&q.tri2(tri), edge, 1 - g) }
            }
            Neighbor::Boundary(BoundaryTag::Wall) => {
                let n = self.mesh.geom[t].edges[j].normal;
                let qn = n[0] * int.q[0] + n[1] * int.q[1];
                EdgeState { eta: int.eta, h: int.h, q: [int.q[0] - 2.0 * qn * n[0], int.q[1] - 2.0 * qn * n[1]] }
            }
            Neighbor::Boundary(BoundaryTag::Open) => {
                let e = self.forcing.open_eta.at(time)[0];
                EdgeState { eta: e, h: e - edge_trace(&bt, j, g), q: int.q }
            }
        };
        (int, ext)
    }

    /// Free-surface stabilization `[max c][diff eta]` at every edge point of `t`.
    pub fn stabilization(&self, eta: &Field2D, q: &Field2D, t: usize, time: f64) -> [[f64; 2]; 3] {
        let p = self.params;
        std::array::from_fn(|j| {
            std::array::from_fn(|g| {
                let (i, e) = self.sides(eta, q, t, j, g, time);
                iface_max(p.celerity(i.h), p.celerity(e.h)) * iface_diff(i.eta, e.eta)
            })
        })
    }

    /// Weak free-surface residual of `t` (before the mass solve), for a
    /// transport `q` and precomputed stabilization `stab`.
    pub fn free_surface_weak(&self, q: &Field2D, stab: &[[f64; 2]; 3], t: usize) -> [f64; 3] {
        let geo = &self.mesh.geom[t];
        let qt = q.tri2(t);
        let qs = [(qt[0][0] + qt[1][0] + qt[2][0]) / 6.0, (qt[0][1] + qt[1][1] + qt[2][1]) / 6.0];
        let src = self.forcing.source * geo.j2d / 6.0;
        let mut r: [f64; 3] = std::array::from_fn(|i| geo.j2d * (geo.grad[i][0] * qs[0] + geo.grad[i][1] * qs[1]) + src);
        for j in 0..3 {
            let eg = &geo.edges[j];
            for g in 0..2 {
                let qi = edge_trace2(&qt, j, g);
                let qe = self.exterior_q(q, t, j, g, qi);
                let fl = eg.normal[0] * iface_mean(qi[0], qe[0]) + eg.normal[1] * iface_mean(qi[1], qe[1]) + stab[j][g];
                let (wa, wb) = EDGE_W[g];
                r[j] -= wa * fl * eg.jedge;
                r[(j + 1) % 3] -= wb * fl * eg.jedge;
            }
        }
        r
    }

    fn exterior_q(&self, q: &Field2D, t: usize, j: usize, g: usize, qi: [f64; 2]) -> [f64; 2] {
        match self.mesh.neighbors[t][j] {
            Neighbor::Interior { tri, edge } => edge_trace2(&q.tri2(tri), edge, 1 - g),
            Neighbor::Boundary(BoundaryTag::Wall) => {
                let n = self.mesh.geom[t].edges[j].normal;
                let qn = n[0] * qi[0] + n[1] * qi[1];
                [qi[0] - 2.0 * qn * n[0], qi[1] - 2.0 * qn * n[1]]
            }
            Neighbor::Boundary(BoundaryTag::Open) => qi,
        }
    }

    /// Weak depth-integrated momentum residual of `t` without the 3D forcing.
    pub fn momentum_weak(&self, eta: &Field2D, q: &Field2D, t: usize, time: f64) -> Result<[[f64; 2]; 3]> {
        let p = self.params;
        let geo = &self.mesh.geom[t];
        let h = self.depth(eta, t)?;
        let et = eta.tri(t, 0);
        let ge = [
            et[0] * geo.grad[0][0] + et[1] * geo.grad[1][0] + et[2] * geo.grad[2][0],
            et[0] * geo.grad[0][1] + et[1] * geo.grad[1][1] + et[2] * geo.grad[2][1],
        ];
        let gp = self.forcing.p_atm_grad.at(time);
        let mh = mass_h(geo.j2d);
        let mut r = [[0.0; 2]; 3];
        for i in 0..3 {
            let mhh = mh[i][0] * h[0] + mh[i][1] * h[1] + mh[i][2] * h[2];
            for c in 0..2 {
                r[i][c] = -p.g * mhh * ge[c] - mhh * gp[c] / p.rho0;
            }
        }
        for j in 0..3 {
            let eg = &geo.edges[j];
            for g in 0..2 {
                let (si, se) = self.sides(eta, q, t, j, g, time);
                let c = iface_max(p.celerity(si.h), p.celerity(se.h));
                let de = iface_diff(si.eta, se.eta);
                let hm = iface_mean(si.h, se.h);
                let (wa, wb) = EDGE_W[g];
                for k in 0..2 {
                    let fl = (p.g * eg.normal[k] * hm * de - c * iface_diff(si.q[k], se.q[k])) * eg.jedge;
                    r[j][k] += wa * fl;
                    r[(j + 1) % 3][k] += wb * fl;
                }
            }
        }
        Ok(r)
    }

    /// Nodal tendencies `(d eta/dt, dQ/dt)` of `t` and its stabilization.
    pub fn tendency(
        &self,
        eta: &Field2D,
        q: &Field2D,
        f3d: Option<&Field2D>,
        t: usize,
        time: f64,
    ) -> Result<Tendency> {
        let j2d = self.mesh.geom[t].j2d;
        let stab = self.stabilization(eta, q, t, time);
        let de = mass_h_inv(j2d, self.free_surface_weak(q, &stab, t));
        let rm = self.momentum_weak(eta, q, t, time)?;
        let mx = mass_h_inv(j2d, [rm[0][0], rm[1][0], rm[2][0]]);
        let my = mass_h_inv(j2d, [rm[0][1], rm[1][1], rm[2][1]]);
        let mut dq: [[f64; 2]; 3] = std::array::from_fn(|h| [mx[h], my[h]]);
        if let Some(f) = f3d {
            for (h, d) in dq.iter_mut().enumerate() {
                d[0] += f.get(t, h, 0);
                d[1] += f.get(t, h, 1);
            }
        }
        Ok((de, dq, stab))
    }

    /// Courant number `dt2d max(sqrt(gH) + |Q|/H) / min edge length` over `elems`.
    pub fn courant(&self, eta: &Field2D, q: &Field2D, elems: &[usize], dt2d: f64) -> Result<f64> {
        let mut smax = 0.0f64;
        let mut lmin = f64::INFINITY;
        for &t in elems {
            let h = self.depth(eta, t)?;
            for i in 0..3 {
                let qn = q.get(t, i, 0).hypot(q.get(t, i, 1));
                smax = smax.max(self.params.celerity(h[i]) + qn / h[i]);
            }
            for e in &self.mesh.geom[t].edges {
                lmin = lmin.min(e.length);
            }
        }
        Ok(dt2d * smax / lmin)
    }
}

/// Result of one external sub-cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcycleOutput {
    pub eta: Field2D,
    pub q: Field2D,
    /// Mean transport (owned and ghost elements).
    pub q_bar: Field2D,
    /// Mean stabilization (owned elements).
    pub s_bar: EdgeField,
    /// Nodal 2D forcing for the 3D momentum equation (owned elements).
    pub f2d: Field2D,
}

/// SSP-RK3 stage weights of the three stage states in the step increment.
pub const RK_WEIGHTS: [f64; 3] = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];

/// Advances `(eta, q)` by `m` SSP-RK3 steps of `dt2d` from time `t0`.
///
/// `eta0`/`q0` must have fresh ghosts. `q_bar` and `s_bar` are the
/// RK-weighted stage means, so the free-surface increment over the cycle is
/// exactly `m dt2d` times the free-surface residual of `(q_bar, s_bar)`.
/// Each stage ends with one `(eta, q)` exchange.
#[allow(clippy::too_many_arguments)]
pub fn subcycle_external(
    ctx: &External2D,
    ex: &mut dyn Exchange,
    eta0: &Field2D,
    q0: &Field2D,
    f3d: Option<&Field2D>,
    t0: f64,
    m: usize,
    dt2d: f64,
) -> Result<SubcycleOutput> {
    if m == 0 {
        return Err(Error::ShapeMismatch("external sub-cycle needs m >= 1".into()));
    }
    let nt = ctx.mesh.num_triangles();
    let owned = ex.owned().to_vec();
    let mut local = owned.clone();
    local.extend_from_slice(ex.ghosts());
    let courant = ctx.courant(eta0, q0, &owned, dt2d)?;
    if courant > 1.0 / 3.0 {
        return Err(Error::CflViolation { courant, dt2d });
    }
    let mut cur = (eta0.clone(), q0.clone());
    let mut q_bar = Field2D::zeros(2, nt);
    let mut s_bar: EdgeField = vec![[[0.0; 2]; 3]; nt];
    let inv_m = 1.0 / m as f64;
    for step in 0..m {
        let t = t0 + step as f64 * dt2d;
        let mut stage = cur.clone();
        let mut next = cur.clone();
        for (s, (alpha, ts)) in [(0.0, 0.0), (0.75, 1.0), (1.0 / 3.0, 0.5)].into_iter().enumerate() {
            let w = RK_WEIGHTS[s] * inv_m;
            for &e in &local {
                for h in 0..3 {
                    for c in 0..2 {
                        let i = (e * 3 + h) * 2 + c;
                        q_bar.data[i] += w * stage.1.data[i];
                    }
                }
            }
            let base = &cur;
            let src = &stage;
            let sb = &mut s_bar;
            overlapped(ex, &mut next, |elems, out| {
                for &e in elems {
                    let (de, dq, stab) = ctx.tendency(&src.0, &src.1, f3d, e, t + ts * dt2d)?;
                    for j in 0..3 {
                        for g in 0..2 {
                            sb[e][j][g] += w * stab[j][g];
                        }
                    }
                    let beta = 1.0 - alpha;
                    for h in 0..3 {
                        let v = src.0.get(e, h, 0) + dt2d * de[h];
                        out.0.set(e, h, 0, if s == 0 { v } else { alpha * base.0.get(e, h, 0) + beta * v });
                        for c in 0..2 {
                            let v = src.1.get(e, h, c) + dt2d * dq[h][c];
                            out.1.set(e, h, c, if s == 0 { v } else { alpha * base.1.get(e, h, c) + beta * v });
                        }
                    }
                }
                Ok(())
            })?;
            std::mem::swap(&mut stage, &mut next);
        }
        cur = stage;
    }
    let span = m as f64 * dt2d;
    let mut f2d = Field2D::zeros(2, nt);
    for &e in &owned {
        for h in 0..3 {
            for c in 0..2 {
                let i = (e * 3 + h) * 2 + c;
                let f = f3d.map_or(0.0, |f| f.data[i]);
                f2d.data[i] = (cur.1.data[i] - q0.data[i] - span * f) / span;
            }
        }
    }
    Ok(SubcycleOutput { eta: cur.0, q: cur.1, q_bar, s_bar, f2d })
}

/// [`subcycle_external`] on a single rank.
pub fn subcycle_serial(
    ctx: &External2D,
    eta0: &Field2D,
    q0: &Field2D,
    f3d: Option<&Field2D>,
    t0: f64,
    m: usize,
    dt2d: f64,
) -> Result<SubcycleOutput> {
    let mut ex = SerialExchange::new(ctx.mesh.num_triangles());
    subcycle_external(ctx, &mut ex, eta0, q0, f3d, t0, m, dt2d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics2D {
    pub volume: f64,
    pub energy: f64,
    pub eta_min: f64,
    pub eta_max: f64,
}

/// Volume `int eta`, energy `int g eta^2/2 + |Q|^2/(2H)` and the extrema of `eta`.
pub fn diagnostics(mesh: &Mesh2D, p: &PhysParams, eta: &Field2D, q: &Field2D) -> Diagnostics2D {
    let mut d = Diagnostics2D { volume: 0.0, energy: 0.0, eta_min: f64::INFINITY, eta_max: f64::NEG_INFINITY };
    for t in 0..mesh.num_triangles() {
        let j2d = mesh.geom[t].j2d;
        let e = eta.tri(t, 0);
        let b = mesh.bed(t);
        let qt = q.tri2(t);
        d.volume += j2d / 6.0 * (e[0] + e[1] + e[2]);
        for pt in tri_rule() {
            let f = pt.phi;
            let ev = f[0] * e[0] + f[1] * e[1] + f[2] * e[2];
            let h = ev - (f[0] * b[0] + f[1] * b[1] + f[2] * b[2]);
            let qx = f[0] * qt[0][0] + f[1] * qt[1][0] + f[2] * qt[2][0];
            let qy = f[0] * qt[0][1] + f[1] * qt[1][1] + f[2] * qt[2][1];
            d.energy += pt.w * j2d * (0.5 * p.g * ev * ev + 0.5 * (qx * qx + qy * qy) / h);
        }
        for v in e {
            d.eta_min = d.eta_min.min(v);
            d.eta_max = d.eta_max.max(v);
        }
    }
    d
}
