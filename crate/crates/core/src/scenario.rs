//! Built-in test cases: a rectangular basin, its bathymetry, initial state
//! and the physics each case is meant to exercise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::external2d::Forcing2D;
use crate::internal3d::{ModelConfig, State3D};
use crate::layout::FieldSoA;
use crate::mesh::{extrude, generate_basin_mesh, ColumnGrid, LayerPolicy, Mesh2D};
use crate::params::{PhysParams, VerticalProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Still water over random smooth bathymetry.
    LakeAtRest,
    /// First basin mode `eta = a cos(pi x / Lx)` over a flat bed.
    StandingWave,
    /// Warm and cold water side by side, at rest.
    LockExchange,
    /// Uniform wind stress on a shallow basin with vertical mixing.
    WindDrivenColumn,
    /// Constant tracer in a uniform current on a moving, sloped mesh.
    UniformAdvection,
    /// Smooth temperature field with a sloping surface and weak shear.
    Baroclinic,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::LakeAtRest,
        ScenarioKind::StandingWave,
        ScenarioKind::LockExchange,
        ScenarioKind::WindDrivenColumn,
        ScenarioKind::UniformAdvection,
        ScenarioKind::Baroclinic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::LakeAtRest => "lake-at-rest",
            ScenarioKind::StandingWave => "standing-wave",
            ScenarioKind::LockExchange => "lock-exchange",
            ScenarioKind::WindDrivenColumn => "wind-driven-column",
            ScenarioKind::UniformAdvection => "uniform-advection",
            ScenarioKind::Baroclinic => "baroclinic",
        }
    }

    pub fn from_name(name: &str) -> Option<ScenarioKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn default_basin(self) -> BasinConfig {
        let base = BasinConfig { nx: 8, ny: 8, lx: 8000.0, ly: 8000.0, depth: 10.0, layers: LayerPolicy::Uniform(4), amplitude: 0.0, seed: 1 };
        match self {
            ScenarioKind::LakeAtRest => BasinConfig { depth: 20.0, seed: 7, ..base },
            ScenarioKind::StandingWave => BasinConfig { nx: 16, ny: 2, ly: 1000.0, amplitude: 0.01, ..base },
            ScenarioKind::LockExchange => BasinConfig { nx: 8, ny: 2, ly: 2000.0, depth: 20.0, layers: LayerPolicy::Uniform(5), amplitude: 0.5, ..base },
            ScenarioKind::WindDrivenColumn => BasinConfig { nx: 2, ny: 2, lx: 2000.0, ly: 2000.0, layers: LayerPolicy::Uniform(8), ..base },
            ScenarioKind::UniformAdvection => BasinConfig { nx: 4, ny: 4, lx: 4000.0, ly: 4000.0, amplitude: 0.2, ..base },
            ScenarioKind::Baroclinic => BasinConfig { nx: 4, ny: 4, lx: 4000.0, ly: 4000.0, amplitude: 0.05, ..base },
        }
    }

    pub fn default_params(self) -> PhysParams {
        let base = PhysParams::default();
        match self {
            ScenarioKind::LakeAtRest => PhysParams { f: 1e-4, drag: 2.5e-3, kappa_h: 1.0, nu_h: 1.0, ..base },
            ScenarioKind::StandingWave => PhysParams { momentum_advection: false, ..base },
            ScenarioKind::LockExchange => PhysParams {
                kappa_h: 1.0,
                nu_h: 1.0,
                kappa_v: VerticalProfile::Constant(1e-3),
                nu_v: VerticalProfile::Constant(1e-4),
                ..base
            },
            ScenarioKind::WindDrivenColumn => PhysParams {
                wind: [0.1, 0.0],
                drag: 2.5e-3,
                f: 1e-4,
                kappa_v: VerticalProfile::Constant(1e-2),
                nu_v: VerticalProfile::Constant(1e-3),
                ..base
            },
            ScenarioKind::UniformAdvection => PhysParams {
                f: 1e-4,
                kappa_h: 2.0,
                nu_h: 2.0,
                nu_v: VerticalProfile::Constant(1e-3),
                momentum_advection: false,
                ..base
            },
            ScenarioKind::Baroclinic => PhysParams {
                f: 1e-4,
                kappa_h: 1.0,
                nu_h: 1.0,
                kappa_v: VerticalProfile::Constant(1e-3),
                nu_v: VerticalProfile::Constant(1e-4),
                ..base
            },
        }
    }

    /// Initial surface elevation at `(x, y)`.
    fn surface(self, b: &BasinConfig) -> impl Fn(f64, f64) -> f64 {
        let (a, lx) = (b.amplitude, b.lx);
        move |x, _y| match self {
            ScenarioKind::StandingWave | ScenarioKind::UniformAdvection | ScenarioKind::Baroclinic => a * (PI * x / lx).cos(),
            _ => 0.0,
        }
    }
}

/// Rectangular basin and initial-condition knobs of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    /// Mean rest depth, m.
    pub depth: f64,
    pub layers: LayerPolicy,
    /// Scenario-specific amplitude: surface elevation in m for the wave
    /// cases, temperature contrast in K for the lock exchange.
    pub amplitude: f64,
    /// Seed of the random bathymetry.
    pub seed: u64,
}

/// A ready-to-run case.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub mesh: Mesh2D,
    pub params: PhysParams,
    pub forcing: Forcing2D,
    pub init: State3D,
}

impl Scenario {
    /// Internal step for `m` external sub-steps at external Courant number
    /// `courant`, from the fastest wave over the deepest point at rest.
    pub fn stable_dt(&self, m: usize, courant: f64) -> f64 {
        let c = self.params.celerity(self.mesh.max_depth() + self.max_eta()) + self.max_speed();
        m as f64 * courant * self.mesh.min_edge_length() / c
    }

    fn max_eta(&self) -> f64 {
        self.init.eta.data.iter().fold(0.0f64, |a, v| a.max(*v))
    }

    fn max_speed(&self) -> f64 {
        let u = self.init.u.data();
        let half = u.len() / 2;
        (0..half).fold(0.0f64, |a, i| a.max(u[i].hypot(u[half + i])))
    }

    /// Default stepping: 20 external sub-steps at Courant number 0.1.
    pub fn default_config(&self) -> ModelConfig {
        ModelConfig { dt: self.stable_dt(20, 0.1), m: 20, ..Default::default() }
    }
}

/// Random smooth bed: a handful of low Fourier modes with seeded amplitudes
/// and phases, varying by at most 40% of the mean depth.
pub fn random_smooth_bed(lx: f64, ly: f64, depth: f64, seed: u64) -> impl Fn(f64, f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let kx = rng.gen_range(1..=3) as f64 * PI / lx;
            let ky = rng.gen_range(1..=3) as f64 * PI / ly;
            (kx, ky, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    move |x, y| {
        let s: f64 = modes.iter().map(|&(kx, ky, a, ph)| a * (kx * x + ph).sin() * (ky * y).cos()).sum();
        -depth * (1.0 + 0.4 * s / 6.0)
    }
}

fn bed_fn(kind: ScenarioKind, b: &BasinConfig) -> Box<dyn Fn(f64, f64) -> f64> {
    let (depth, lx) = (b.depth, b.lx);
    match kind {
        ScenarioKind::LakeAtRest => Box::new(random_smooth_bed(b.lx, b.ly, depth, b.seed)),
        ScenarioKind::UniformAdvection | ScenarioKind::Baroclinic => Box::new(move |x, _| -depth * (1.0 + 0.2 * x / lx)),
        _ => Box::new(move |_, _| -depth),
    }
}

/// Sets component `comp` of a nodal 3D field from a function of the node
/// position `(x, y, z)`.
pub fn fill_nodal(mesh: &Mesh2D, grid: &ColumnGrid, field: &mut FieldSoA<f64>, comp: usize, f: impl Fn(f64, f64, f64) -> f64) {
    for c in 0..grid.num_columns() {
        for k in 0..grid.layers(c) {
            let (zt, zb) = (grid.z(c, k), grid.z(c, k + 1));
            let v: [f64; 6] = std::array::from_fn(|n| {
                let vx = &mesh.vertices[mesh.triangles[c][n % 3]];
                f(vx.x, vx.y, if n < 3 { zt[n % 3] } else { zb[n % 3] })
            });
            field.set_nodes(comp, grid.prism(c, k), v);
        }
    }
}

/// Builds the mesh, layered grid and initial state of `kind` on basin `b`.
pub fn build(kind: ScenarioKind, b: &BasinConfig, params: PhysParams) -> Result<Scenario> {
    if !(b.depth > 0.0) {
        return Err(Error::InvalidMesh(format!("basin depth {} must be positive", b.depth)));
    }
    let mesh = generate_basin_mesh(b.nx, b.ny, b.lx, b.ly, bed_fn(kind, b))?;
    build_on(kind, mesh, b, params)
}

/// Initial state of `kind` on a given mesh. The basin extents, depth and
/// amplitude of `b` shape the initial fields; its grid sizes are ignored.
pub fn build_on(kind: ScenarioKind, mesh: Mesh2D, b: &BasinConfig, params: PhysParams) -> Result<Scenario> {
    if mesh.num_triangles() == 0 {
        return Err(Error::InvalidMesh("mesh has no triangles".into()));
    }
    let eta_of = kind.surface(b);
    let eta: Vec<[f64; 3]> = (0..mesh.num_triangles())
        .map(|t| std::array::from_fn(|h| {
            let v = &mesh.vertices[mesh.triangles[t][h]];
            eta_of(v.x, v.y)
        }))
        .collect();
    let grid = extrude(&mesh, &b.layers, &eta)?;
    let counts = grid.layer_counts().to_vec();
    let mut u = FieldSoA::zeros(2, &counts);
    let mut tr = FieldSoA::zeros(2, &counts);
    let (lx, ly, depth, amp) = (b.lx, b.ly, b.depth, b.amplitude);
    for c in 0..grid.num_columns() {
        let cx = mesh.geom[c].centroid[0];
        for k in 0..grid.layers(c) {
            let (zt, zb) = (grid.z(c, k), grid.z(c, k + 1));
            let prism = grid.prism(c, k);
            let node = |n: usize| {
                let v = &mesh.vertices[mesh.triangles[c][n % 3]];
                (v.x, v.y, if n < 3 { zt[n % 3] } else { zb[n % 3] })
            };
            let temp: [f64; 6] = std::array::from_fn(|n| {
                let (x, y, z) = node(n);
                match kind {
                    ScenarioKind::LockExchange => params.t0 + if cx < 0.5 * lx { amp } else { -amp },
                    ScenarioKind::Baroclinic => {
                        params.t0 + 2.0 * (PI * x / lx).cos() * (1.0 + 0.5 * z / depth) + 0.5 * (PI * y / ly).sin()
                    }
                    _ => params.t0,
                }
            });
            let vel: [[f64; 2]; 6] = std::array::from_fn(|n| {
                let (x, y, z) = node(n);
                match kind {
                    ScenarioKind::UniformAdvection => [0.05, 0.02],
                    ScenarioKind::Baroclinic => {
                        let s = (PI * x / lx).sin() * (PI * y / ly).sin();
                        [0.05 * s * (1.0 + 0.3 * z / depth), -0.03 * s]
                    }
                    _ => [0.0, 0.0],
                }
            });
            tr.set_nodes(0, prism, temp);
            tr.set_nodes(1, prism, [params.s0; 6]);
            u.set_nodes(0, prism, vel.map(|v| v[0]));
            u.set_nodes(1, prism, vel.map(|v| v[1]));
        }
    }
    let init = State3D::new(&mesh, grid, u, tr, 0.0)?;
    Ok(Scenario { kind, mesh, params, forcing: Forcing2D::default(), init })
}

/// [`build`] with the scenario's default basin and physics.
pub fn default_scenario(kind: ScenarioKind) -> Result<Scenario> {
    build(kind, &kind.default_basin(), kind.default_params())
}
