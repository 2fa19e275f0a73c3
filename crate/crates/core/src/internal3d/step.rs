//! The two-stage IMEX internal step and its partitioned driver.
//!
//! Stage 1 advances momentum and tracers over `dt/2` with the vertical
//! operator implicit, from the state and geometry at `t0`; the external mode
//! runs `ceil(m/2)` sub-steps. Stage 2 restarts from `t0`, advances over `dt`
//! with every term explicit and evaluated at the stage-1 values, while the
//! external mode runs `m` sub-steps from `(eta0, Q0)`.
//!
//! Each stage follows the same sequence: baroclinic `r`, transport `q`,
//! `F3Dh` and stresses, the depth-integrated 3D forcing of the external mode,
//! the sub-cycle, the new geometry, `q-bar`, `w~` and the column updates.

use super::continuity::{compute_w_rhs, compute_wtilde_rhs, wtilde_column_sum};
use super::horizontal::{compute_f3dh, HorizontalTerms};
use super::hpg::compute_r_rhs;
use super::solve::{solve_banded_columns, solve_r, solve_w, Precision};
use super::transport::{build_consistent_transport, project_transport};
use super::vertical::{
    add_bed_drag, apply_mass, apply_surface_bottom_stress, assemble_vertical, mass_solve, prism_mass, VerticalInputs,
};
use super::{check_conforming_layers, extend_h, volume_points};
use crate::column_solvers::{solve_tridiagonal, BandedColumnMatrix};
use crate::dg_core::mass_h_inv;
use crate::error::{Error, Result};
use crate::external2d::{subcycle_external, EdgeField, External2D, Field2D, Forcing2D, SubcycleOutput};
use crate::layout::FieldSoA;
use crate::mesh::{ColumnGrid, Mesh2D};
use crate::params::PhysParams;
use crate::partition::{connect, decompose, halo_exchange, overlapped, run_ranks, Exchange, PhaseTiming};

/// Relaxation time of the eddy viscosity toward its profile, s.
const EDDY_RELAXATION_TIME: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Internal time step, s.
    pub dt: f64,
    /// External sub-steps per internal step.
    pub m: usize,
    pub precision: Precision,
    /// Columns per cell in the column solves.
    pub cell_width: usize,
    /// Relax a per-layer eddy viscosity toward the `kappa_v` profile.
    pub turbulence_relaxation: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { dt: 60.0, m: 20, precision: Precision::F64, cell_width: 8, turbulence_relaxation: false }
    }
}

/// Prognostic 3D state plus the diagnostics of the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct State3D {
    pub time: f64,
    pub eta: Field2D,
    pub q2d: Field2D,
    pub grid: ColumnGrid,
    pub u: FieldSoA<f64>,
    /// Temperature and salinity.
    pub tracers: FieldSoA<f64>,
    /// Per-column, per-layer eddy viscosity; empty unless relaxation is on.
    pub eddy: Vec<Vec<f64>>,
    pub r: FieldSoA<f64>,
    pub w: FieldSoA<f64>,
    pub w_tilde: FieldSoA<f64>,
}

impl State3D {
    /// Builds a state on `grid` with `Q` set to the depth integral of `u`.
    pub fn new(mesh: &Mesh2D, grid: ColumnGrid, u: FieldSoA<f64>, tracers: FieldSoA<f64>, time: f64) -> Result<Self> {
        let counts = grid.layer_counts().to_vec();
        if u.components() != 2 || tracers.components() != 2 || u.layers(0) != counts[0] || tracers.num_prisms() != grid.num_prisms() {
            return Err(Error::ShapeMismatch("state fields do not match the grid".into()));
        }
        let nt = mesh.num_triangles();
        let all: Vec<usize> = (0..nt).collect();
        let mut q = u.zeros_like();
        project_transport(mesh, &grid, &u, &all, &mut q);
        let mut q2d = Field2D::zeros(2, nt);
        for c in 0..nt {
            for f in 0..2 {
                for h in 0..3 {
                    let s: f64 = (0..grid.layers(c)).map(|k| q.get(f, h, c, k) + q.get(f, h + 3, c, k)).sum();
                    q2d.set(c, h, f, s);
                }
            }
        }
        let eta = Field2D::from_fn(1, nt, |t, h, _| grid.eta(t)[h]);
        Ok(State3D {
            time,
            eta,
            q2d,
            r: FieldSoA::zeros(2, &counts),
            w: FieldSoA::zeros(1, &counts),
            w_tilde: FieldSoA::zeros(1, &counts),
            eddy: Vec::new(),
            grid,
            u,
            tracers,
        })
    }
}

/// Integral budgets over a set of columns. Tracer statistics refer to the
/// first tracer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub volume: f64,
    pub momentum: [f64; 2],
    pub tracer_mass: f64,
    pub tracer_min: f64,
    pub tracer_max: f64,
}

impl Budget {
    pub fn empty() -> Self {
        Budget { volume: 0.0, momentum: [0.0; 2], tracer_mass: 0.0, tracer_min: f64::INFINITY, tracer_max: f64::NEG_INFINITY }
    }

    pub fn merge(self, o: Budget) -> Budget {
        Budget {
            volume: self.volume + o.volume,
            momentum: [self.momentum[0] + o.momentum[0], self.momentum[1] + o.momentum[1]],
            tracer_mass: self.tracer_mass + o.tracer_mass,
            tracer_min: self.tracer_min.min(o.tracer_min),
            tracer_max: self.tracer_max.max(o.tracer_max),
        }
    }

    pub fn of(mesh: &Mesh2D, grid: &ColumnGrid, u: &FieldSoA<f64>, tracers: &FieldSoA<f64>, cols: &[usize]) -> Budget {
        let mut b = Budget::empty();
        for &c in cols {
            for k in 0..grid.layers(c) {
                let p = grid.prism(c, k);
                let (ux, uy, t) = (u.nodes(0, p), u.nodes(1, p), tracers.nodes(0, p));
                for pt in volume_points(&grid.prism_geom(mesh, c, k)) {
                    let w = pt.w * pt.jz;
                    b.volume += w;
                    b.momentum[0] += w * pt.val(&ux);
                    b.momentum[1] += w * pt.val(&uy);
                    b.tracer_mass += w * pt.val(&t);
                }
                for v in t {
                    b.tracer_min = b.tracer_min.min(v);
                    b.tracer_max = b.tracer_max.max(v);
                }
            }
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageReport {
    /// `"half"` or `"full"`.
    pub stage: &'static str,
    /// Largest `|sum_vertical q-bar - Q-bar|` relative to the largest `|Q-bar|`.
    pub qbar_rel_err: f64,
    /// Largest gap between the column sum of the `w~` right-hand side and the
    /// free-surface right-hand side, relative to the element's flux scale.
    pub wtilde_err: f64,
    pub budget: Budget,
}

impl StageReport {
    pub fn merge(self, o: StageReport) -> StageReport {
        StageReport {
            stage: self.stage,
            qbar_rel_err: self.qbar_rel_err.max(o.qbar_rel_err),
            wtilde_err: self.wtilde_err.max(o.wtilde_err),
            budget: self.budget.merge(o.budget),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Time at the end of the step.
    pub time: f64,
    pub stages: [StageReport; 2],
    /// Halo exchanges completed during the step.
    pub exchanges: usize,
}

impl StepReport {
    pub fn merge(self, o: StepReport) -> StepReport {
        StepReport { time: self.time, stages: [self.stages[0].merge(o.stages[0]), self.stages[1].merge(o.stages[1])], exchanges: self.exchanges }
    }
}

/// Values a stage evaluates its right-hand side at.
struct Eval<'s> {
    grid: &'s ColumnGrid,
    u: &'s FieldSoA<f64>,
    tracers: &'s FieldSoA<f64>,
    eta: &'s Field2D,
    q2d: &'s Field2D,
    time: f64,
}

struct StageOut {
    u: FieldSoA<f64>,
    tracers: FieldSoA<f64>,
    grid: ColumnGrid,
    sc: SubcycleOutput,
    r: FieldSoA<f64>,
    w_tilde: FieldSoA<f64>,
    w: Option<FieldSoA<f64>>,
    report: StageReport,
}

/// Per-column inputs of the momentum and tracer updates of one stage.
struct ColumnTerms<'s> {
    ev: &'s Eval<'s>,
    base: &'s State3D,
    new_grid: &'s ColumnGrid,
    f2d: &'s Field2D,
    mom: VerticalInputs<'s>,
    tra: VerticalInputs<'s>,
    span: f64,
}

pub struct Model<'a> {
    pub mesh: &'a Mesh2D,
    pub params: &'a PhysParams,
    pub forcing: &'a Forcing2D,
    pub cfg: ModelConfig,
}

impl<'a> Model<'a> {
    pub fn new(mesh: &'a Mesh2D, params: &'a PhysParams, forcing: &'a Forcing2D, cfg: ModelConfig, grid: &ColumnGrid) -> Result<Self> {
        if forcing.source != 0.0 {
            return Err(Error::Unsupported("a volume source has no 3D counterpart in the coupled model".into()));
        }
        if cfg.m == 0 || !(cfg.dt > 0.0) || cfg.cell_width == 0 {
            return Err(Error::Unsupported(format!("dt = {}, m = {}, cell width = {}", cfg.dt, cfg.m, cfg.cell_width)));
        }
        check_conforming_layers(mesh, grid)?;
        Ok(Model { mesh, params, forcing, cfg })
    }

    fn momentum_terms<'r>(&self, r: &'r FieldSoA<f64>) -> HorizontalTerms<'r> {
        let p = self.params;
        HorizontalTerms { advection: p.momentum_advection, kappa_h: p.kappa_h, coriolis: p.f, pressure: Some((r, p.rho0)), penalty: p.penalty }
    }

    fn tracer_terms(&self) -> HorizontalTerms<'static> {
        let p = self.params;
        HorizontalTerms { advection: true, kappa_h: p.nu_h, coriolis: 0.0, pressure: None, penalty: p.penalty }
    }

    /// Sets up the eddy viscosity of `st` when relaxation is on and it is unset.
    pub fn init_eddy(&self, st: &mut State3D) {
        if self.cfg.turbulence_relaxation && st.eddy.is_empty() {
            st.eddy = (0..st.grid.num_columns()).map(|c| self.eddy_target(&st.grid, c)).collect();
        }
    }

    fn eddy_target(&self, grid: &ColumnGrid, c: usize) -> Vec<f64> {
        let eta = grid.eta(c);
        let mean = |v: [f64; 3]| (v[0] + v[1] + v[2]) / 3.0;
        (0..grid.layers(c))
            .map(|k| self.params.kappa_v.at(mean(eta) - 0.5 * (mean(grid.z(c, k)) + mean(grid.z(c, k + 1)))))
            .collect()
    }

    /// Advances `st` by one internal step. `st` must hold fresh ghosts.
    pub fn step(&self, st: &mut State3D, ex: &mut dyn Exchange) -> Result<StepReport> {
        self.init_eddy(st);
        let start = ex.exchanges();
        let dt = self.cfg.dt;
        let m = self.cfg.m;
        let s1 = {
            let ev = Eval { grid: &st.grid, u: &st.u, tracers: &st.tracers, eta: &st.eta, q2d: &st.q2d, time: st.time };
            self.stage(st, &ev, 0.5 * dt, m.div_ceil(2), true, ex).map_err(|e| e.at("stage 1"))?
        };
        let s2 = {
            let ev = Eval { grid: &s1.grid, u: &s1.u, tracers: &s1.tracers, eta: &s1.sc.eta, q2d: &s1.sc.q, time: st.time + 0.5 * dt };
            self.stage(st, &ev, dt, m, false, ex).map_err(|e| e.at("stage 2"))?
        };
        let owned = ex.owned().to_vec();
        for (name, f) in [("u", &s2.u), ("tracers", &s2.tracers)] {
            if !owned.iter().all(|&c| (0..f.layers(c)).all(|k| (0..f.components()).all(|i| f.nodes(i, f.offsets()[c] + k).iter().all(|v| v.is_finite())))) {
                return Err(Error::NonFinite { field: name, step: (st.time / dt).round() as usize });
            }
        }
        st.time += dt;
        st.eta = s2.sc.eta;
        st.q2d = s2.sc.q;
        st.grid = s2.grid;
        st.u = s2.u;
        st.tracers = s2.tracers;
        st.r = s2.r;
        st.w_tilde = s2.w_tilde;
        if let Some(w) = s2.w {
            st.w = w;
        }
        if self.cfg.turbulence_relaxation {
            let mut local = owned.clone();
            local.extend_from_slice(ex.ghosts());
            let a = dt / EDDY_RELAXATION_TIME;
            for c in local {
                let target = self.eddy_target(&st.grid, c);
                st.eddy[c] = relax_eddy_viscosity(&st.eddy[c], &target, a)?;
            }
        }
        Ok(StepReport { time: st.time, stages: [s1.report, s2.report], exchanges: ex.exchanges() - start })
    }

    fn stage(&self, st: &State3D, ev: &Eval, span: f64, msteps: usize, implicit: bool, ex: &mut dyn Exchange) -> Result<StageOut> {
        let (mesh, p) = (self.mesh, self.params);
        let nt = mesh.num_triangles();
        let counts = st.grid.layer_counts().to_vec();
        let owned = ex.owned().to_vec();
        let mut local = owned.clone();
        local.extend_from_slice(ex.ghosts());
        local.sort_unstable();
        let (width, prec) = (self.cfg.cell_width, self.cfg.precision);
        let ctx = External2D::new(mesh, p, self.forcing);

        // Baroclinic pressure gradient from the equation of state.
        let mut rho = FieldSoA::zeros(1, &counts);
        for &c in &local {
            for k in 0..counts[c] {
                let pr = st.grid.prism(c, k);
                let (t, s) = (ev.tracers.nodes(0, pr), ev.tracers.nodes(1, pr));
                rho.set_nodes(0, pr, std::array::from_fn(|n| p.eos(t[n], s[n])));
            }
        }
        let mut r = FieldSoA::zeros(2, &counts);
        compute_r_rhs(mesh, ev.grid, p, &rho, &owned, &mut r)?;
        solve_r(mesh, &mut r, &owned, width, prec)?;

        // Predicted transport and the 3D forcing of the external mode.
        let mut q = FieldSoA::zeros(2, &counts);
        project_transport(mesh, ev.grid, ev.u, &local, &mut q);
        let mut stab: EdgeField = vec![[[0.0; 2]; 3]; nt];
        for &c in &owned {
            stab[c] = ctx.stabilization(ev.eta, ev.q2d, c, ev.time);
        }
        let mut f3h = FieldSoA::zeros(2, &counts);
        compute_f3dh(mesh, ev.grid, ev.u, &q, &stab, &owned, &self.momentum_terms(&r), &mut f3h)?;
        let mut f3d2d = Field2D::zeros(2, nt);
        for &c in &owned {
            let s = apply_surface_bottom_stress(mesh, ev.grid, ev.u, c, p);
            for comp in 0..2 {
                let mut acc: [f64; 3] = std::array::from_fn(|h| s.surface[h][comp] + s.bed[h][comp]);
                for k in 0..counts[c] {
                    let v = f3h.nodes(comp, ev.grid.prism(c, k));
                    for h in 0..3 {
                        acc[h] += v[h] + v[h + 3];
                    }
                }
                let nodal = mass_h_inv(mesh.geom[c].j2d, acc);
                for h in 0..3 {
                    f3d2d.set(c, h, comp, nodal[h]);
                }
            }
        }

        let sc = subcycle_external(&ctx, ex, &st.eta, &st.q2d, Some(&f3d2d), st.time, msteps, span / msteps as f64)?;
        let eta_new: Vec<[f64; 3]> = (0..nt).map(|t| sc.eta.tri(t, 0)).collect();
        let new_grid = st.grid.updated(&eta_new, span, Some(&local))?;

        // Consistent transport and the mesh-relative vertical velocity.
        let mut qbar = FieldSoA::zeros(2, &counts);
        build_consistent_transport(ev.grid, &q, &sc.q_bar, &local, &mut qbar)?;
        let qbar_rel_err = qbar_error(ev.grid, &qbar, &sc.q_bar, &owned);
        let mut wt = FieldSoA::zeros(1, &counts);
        compute_wtilde_rhs(mesh, ev.grid, &qbar, &sc.s_bar, &owned, &mut wt)?;
        let wtilde_err = wtilde_error(&ctx, &wt, &sc, &owned);
        solve_w(mesh, &mut wt, &owned, width, prec)?;
        let w = if implicit {
            None
        } else {
            let mut w = FieldSoA::zeros(1, &counts);
            compute_w_rhs(mesh, ev.grid, &qbar, &sc.s_bar, &owned, &mut w)?;
            solve_w(mesh, &mut w, &owned, width, prec)?;
            Some(w)
        };

        let eddy = if self.cfg.turbulence_relaxation { Some(st.eddy.as_slice()) } else { None };
        let ct = ColumnTerms {
            ev,
            base: st,
            new_grid: &new_grid,
            f2d: &sc.f2d,
            mom: VerticalInputs {
                grid: ev.grid,
                mesh_velocity: &new_grid,
                w_tilde: &wt,
                kappa_v: &p.kappa_v,
                eddy,
                kappa_h: p.kappa_h,
                penalty: p.penalty,
                advection: p.momentum_advection,
            },
            tra: VerticalInputs {
                grid: ev.grid,
                mesh_velocity: &new_grid,
                w_tilde: &wt,
                kappa_v: &p.nu_v,
                eddy: None,
                kappa_h: p.nu_h,
                penalty: p.penalty,
                advection: true,
            },
            span,
        };
        let mom_terms = self.momentum_terms(&r);
        let tra_terms = self.tracer_terms();
        let mut out = (FieldSoA::zeros(2, &counts), FieldSoA::zeros(2, &counts));
        if implicit {
            let mut fu = FieldSoA::zeros(2, &counts);
            let mut ft = FieldSoA::zeros(2, &counts);
            compute_f3dh(mesh, ev.grid, ev.u, &qbar, &sc.s_bar, &owned, &mom_terms, &mut fu)?;
            compute_f3dh(mesh, ev.grid, ev.tracers, &qbar, &sc.s_bar, &owned, &tra_terms, &mut ft)?;
            let mut mats_u: Vec<BandedColumnMatrix<f64>> = (0..nt).map(|_| BandedColumnMatrix::zeros(0)).collect();
            let mut mats_t = mats_u.clone();
            for &c in &owned {
                let (au, at) = self.column_operators(&ct, c)?;
                self.column_rhs(&ct, c, &fu, &ft, None, &mut out)?;
                let masses: Vec<[[f64; 6]; 6]> = (0..counts[c]).map(|k| prism_mass(&new_grid.prism_geom(mesh, c, k))).collect();
                mats_u[c] = implicit_system(&au, &masses, span);
                mats_t[c] = implicit_system(&at, &masses, span);
            }
            solve_banded_columns(&mut mats_u, &mut out.0, &owned, width, prec)?;
            solve_banded_columns(&mut mats_t, &mut out.1, &owned, width, prec)?;
            halo_exchange(ex, &mut out)?;
        } else {
            overlapped(ex, &mut out, |elems, out| {
                let mut fu = FieldSoA::zeros(2, &counts);
                let mut ft = FieldSoA::zeros(2, &counts);
                compute_f3dh(mesh, ev.grid, ev.u, &qbar, &sc.s_bar, elems, &mom_terms, &mut fu)?;
                compute_f3dh(mesh, ev.grid, ev.tracers, &qbar, &sc.s_bar, elems, &tra_terms, &mut ft)?;
                for &c in elems {
                    let ops = self.column_operators(&ct, c)?;
                    self.column_rhs(&ct, c, &fu, &ft, Some(&ops), out)?;
                    for k in 0..counts[c] {
                        let pg = new_grid.prism_geom(mesh, c, k);
                        let pr = new_grid.prism(c, k);
                        for f in 0..2 {
                            out.0.set_nodes(f, pr, mass_solve(&pg, &out.0.nodes(f, pr)));
                            out.1.set_nodes(f, pr, mass_solve(&pg, &out.1.nodes(f, pr)));
                        }
                    }
                }
                Ok(())
            })?;
        }
        let budget = Budget::of(mesh, &new_grid, &out.0, &out.1, &owned);
        let report = StageReport { stage: if implicit { "half" } else { "full" }, qbar_rel_err, wtilde_err, budget };
        Ok(StageOut { u: out.0, tracers: out.1, grid: new_grid, sc, r, w_tilde: wt, w, report })
    }

    /// Vertical operators of momentum (with the linearized bed drag of the
    /// evaluation velocity) and tracers for column `c`.
    fn column_operators(&self, ct: &ColumnTerms, c: usize) -> Result<(BandedColumnMatrix<f64>, BandedColumnMatrix<f64>)> {
        let mut au = assemble_vertical(self.mesh, &ct.mom, c)?;
        if self.params.drag != 0.0 {
            let pb = ct.ev.grid.prism(c, ct.ev.grid.layers(c) - 1);
            let (ux, uy) = (ct.ev.u.nodes(0, pb), ct.ev.u.nodes(1, pb));
            add_bed_drag(&mut au, self.mesh.geom[c].j2d, std::array::from_fn(|h| [ux[h + 3], uy[h + 3]]), self.params.drag);
        }
        let at = assemble_vertical(self.mesh, &ct.tra, c)?;
        Ok((au, at))
    }

    /// Right-hand sides `M0 x0 + span (F3Dh + M_new F2D/H_new + wind)` of
    /// column `c`, plus `span A x_eval` when `ops` is given (explicit stage).
    fn column_rhs(
        &self,
        ct: &ColumnTerms,
        c: usize,
        fu: &FieldSoA<f64>,
        ft: &FieldSoA<f64>,
        ops: Option<&(BandedColumnMatrix<f64>, BandedColumnMatrix<f64>)>,
        out: &mut (FieldSoA<f64>, FieldSoA<f64>),
    ) -> Result<()> {
        let mesh = self.mesh;
        let l = ct.base.grid.layers(c);
        let h_new = super::column_depth(ct.new_grid, c)?;
        let span = ct.span;
        let wind = apply_surface_bottom_stress(mesh, ct.ev.grid, ct.ev.u, c, self.params).surface;
        let explicit = ops.map(|(au, at)| (column_product(au, ct.ev.u, c), column_product(at, ct.ev.tracers, c)));
        for k in 0..l {
            let pr = ct.base.grid.prism(c, k);
            let pg0 = ct.base.grid.prism_geom(mesh, c, k);
            let pgn = ct.new_grid.prism_geom(mesh, c, k);
            for f in 0..2 {
                let m0u = apply_mass(&pg0, &ct.base.u.nodes(f, pr));
                let f2 = ct.f2d.tri(c, f);
                let mf = apply_mass(&pgn, &extend_h(std::array::from_fn(|h| f2[h] / h_new[h])));
                let fh = fu.nodes(f, pr);
                let mut v: [f64; 6] = std::array::from_fn(|n| m0u[n] + span * (fh[n] + mf[n]));
                if k == 0 {
                    for h in 0..3 {
                        v[h] += span * wind[h][f];
                    }
                }
                let m0t = apply_mass(&pg0, &ct.base.tracers.nodes(f, pr));
                let th = ft.nodes(f, pr);
                let mut vt: [f64; 6] = std::array::from_fn(|n| m0t[n] + span * th[n]);
                if let Some((eu, et)) = &explicit {
                    for n in 0..6 {
                        v[n] += span * eu[(k * 6 + n) * 2 + f];
                        vt[n] += span * et[(k * 6 + n) * 2 + f];
                    }
                }
                out.0.set_nodes(f, pr, v);
                out.1.set_nodes(f, pr, vt);
            }
        }
        Ok(())
    }
}

/// `A x` for the two-component field `x` on column `c`, ordered layer, node, component.
fn column_product(a: &BandedColumnMatrix<f64>, x: &FieldSoA<f64>, c: usize) -> Vec<f64> {
    let l = a.num_layers();
    let mut v = vec![0.0; l * 12];
    for k in 0..l {
        for n in 0..6 {
            for f in 0..2 {
                v[(k * 6 + n) * 2 + f] = x.get(f, n, c, k);
            }
        }
    }
    a.matvec(&v, 2)
}

/// `M_new - span A` with the block-diagonal prism masses.
fn implicit_system(a: &BandedColumnMatrix<f64>, masses: &[[[f64; 6]; 6]], span: f64) -> BandedColumnMatrix<f64> {
    let mut s = BandedColumnMatrix {
        diag: a.diag.iter().map(|d| d.map(|v| -span * v)).collect(),
        upper: a.upper.iter().map(|d| d.map(|v| -span * v)).collect(),
        lower: a.lower.iter().map(|d| d.map(|v| -span * v)).collect(),
    };
    for (k, m) in masses.iter().enumerate() {
        for i in 0..6 {
            for j in 0..6 {
                s.add(k, i, k, j, m[i][j]);
            }
        }
    }
    s
}

fn qbar_error(grid: &ColumnGrid, qbar: &FieldSoA<f64>, q2d: &Field2D, cols: &[usize]) -> f64 {
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for &c in cols {
        for f in 0..2 {
            for h in 0..3 {
                let s: f64 = (0..grid.layers(c)).map(|k| qbar.get(f, h, c, k) + qbar.get(f, h + 3, c, k)).sum();
                err = err.max((s - q2d.get(c, h, f)).abs());
                scale = scale.max(q2d.get(c, h, f).abs());
            }
        }
    }
    if err == 0.0 {
        0.0
    } else {
        err / scale.max(f64::MIN_POSITIVE)
    }
}

fn wtilde_error(ctx: &External2D, rhs: &FieldSoA<f64>, sc: &SubcycleOutput, cols: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for &c in cols {
        let geo = &ctx.mesh.geom[c];
        let sum = wtilde_column_sum(rhs, c);
        let fs = ctx.free_surface_weak(&sc.q_bar, &sc.s_bar[c], c);
        let qmax = (0..3).map(|h| sc.q_bar.get(c, h, 0).hypot(sc.q_bar.get(c, h, 1))).fold(0.0, f64::max);
        let smax = sc.s_bar[c].iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
        let gmax = geo.grad.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
        let scale = geo.j2d * qmax * gmax + geo.edges.iter().map(|e| e.jedge * (qmax + smax)).sum::<f64>();
        let err = (0..3).map(|h| (sum[h] - fs[h]).abs()).fold(0.0, f64::max);
        if err > 0.0 {
            worst = worst.max(err / scale.max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// One implicit relaxation of a layer profile `nu` toward `target` with rate
/// `a = dt / T`, mixed with its vertical neighbors at half that rate.
pub fn relax_eddy_viscosity(nu: &[f64], target: &[f64], a: f64) -> Result<Vec<f64>> {
    let l = nu.len();
    if target.len() != l {
        return Err(Error::ShapeMismatch(format!("{} eddy values for {} targets", l, target.len())));
    }
    let d = 0.5 * a;
    let lower: Vec<f64> = (0..l).map(|k| if k > 0 { -d } else { 0.0 }).collect();
    let upper: Vec<f64> = (0..l).map(|k| if k + 1 < l { -d } else { 0.0 }).collect();
    let diag: Vec<f64> = (0..l).map(|k| 1.0 + a - lower[k] - upper[k]).collect();
    let rhs: Vec<f64> = (0..l).map(|k| nu[k] + a * target[k]).collect();
    solve_tridiagonal(&lower, &diag, &upper, &rhs)
}

/// Assembles a global state from each rank's owned columns.
pub fn gather_states(pieces: &[(Vec<usize>, State3D)]) -> Result<State3D> {
    let mut out = pieces.first().ok_or_else(|| Error::MapMismatch("no ranks to gather".into()))?.1.clone();
    for (owned, st) in pieces {
        out.grid.copy_columns(&st.grid, owned)?;
        for &c in owned {
            for f2 in [(&mut out.eta, &st.eta), (&mut out.q2d, &st.q2d)] {
                let n = 3 * f2.1.comps;
                f2.0.data[c * n..(c + 1) * n].copy_from_slice(&f2.1.data[c * n..(c + 1) * n]);
            }
            for (dst, src) in [(&mut out.u, &st.u), (&mut out.tracers, &st.tracers), (&mut out.r, &st.r), (&mut out.w, &st.w), (&mut out.w_tilde, &st.w_tilde)] {
                for k in 0..src.layers(c) {
                    let pr = src.offsets()[c] + k;
                    for f in 0..src.components() {
                        dst.set_nodes(f, pr, src.nodes(f, pr));
                    }
                }
            }
            if !st.eddy.is_empty() {
                out.eddy[c] = st.eddy[c].clone();
            }
        }
    }
    Ok(out)
}

/// Result of a run on several in-process ranks.
#[derive(Debug, Clone)]
pub struct PartitionedRun {
    pub state: State3D,
    /// Per-step reports summed (budgets) or maximized (errors) over ranks.
    pub reports: Vec<StepReport>,
    pub timings: Vec<PhaseTiming>,
}

/// Owned elements, final state, reports and timings of one rank.
type RankResult = (Vec<usize>, State3D, Vec<StepReport>, Vec<PhaseTiming>);

/// Runs `steps` internal steps from `init` on `ranks` ranks and gathers the result.
pub fn run_partitioned(model: &Model, init: &State3D, ranks: usize, steps: usize, poison: bool) -> Result<PartitionedRun> {
    let parts = decompose(model.mesh, init.grid.layer_counts(), ranks)?;
    let endpoints = connect(parts, poison)?;
    let results = run_ranks(endpoints, |mut ex| -> Result<RankResult> {
        let mut st = init.clone();
        let mut reports = Vec::with_capacity(steps);
        for s in 0..steps {
            ex.set_step(s);
            reports.push(model.step(&mut st, &mut ex).map_err(|e| e.at(format!("rank {} step {s}", ex.part.rank)))?);
        }
        Ok((ex.part.owned.clone(), st, reports, std::mem::take(&mut ex.timings)))
    });
    let mut pieces = Vec::with_capacity(ranks);
    let mut reports: Vec<StepReport> = Vec::new();
    let mut timings = Vec::new();
    for res in results {
        let (owned, st, rep, tim) = res?;
        if reports.is_empty() {
            reports = rep;
        } else {
            for (a, b) in reports.iter_mut().zip(rep) {
                *a = a.merge(b);
            }
        }
        timings.extend(tim);
        pieces.push((owned, st));
    }
    Ok(PartitionedRun { state: gather_states(&pieces)?, reports, timings })
}
