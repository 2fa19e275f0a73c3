//! The `run` subcommand: advance a scenario and write its outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use prismdg_core::external2d::{diagnostics, Diagnostics2D, External2D};
use prismdg_core::internal3d::{run_partitioned, Model, ModelConfig, State3D};
use prismdg_core::mesh::read_mesh;
use prismdg_core::scenario::{build, build_on, BasinConfig, Scenario};

use crate::config::RunConfig;
use crate::output::{budget_rows, diagnostics_row, timing_rows, Snapshot, BUDGET_HEADER, DIAGNOSTICS_HEADER, TIMINGS_HEADER};
use crate::CliError;

/// Courant number of the external mode used when `dt` is left to the model.
pub const AUTO_COURANT: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub steps: usize,
    pub dt: f64,
    pub final_state: State3D,
    pub final_diagnostics: Diagnostics2D,
    pub files: Vec<PathBuf>,
}

/// Builds the scenario of `cfg`, on its mesh file if one is given.
pub fn scenario_for(cfg: &RunConfig) -> Result<Scenario, CliError> {
    let Some(path) = &cfg.mesh_file else {
        return Ok(build(cfg.scenario, &cfg.basin, cfg.params.clone())?);
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    let mesh = read_mesh(&text)?;
    let (xmin, xmax) = mesh.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v.x), b.max(v.x)));
    let (ymin, ymax) = mesh.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v.y), b.max(v.y)));
    let basin = BasinConfig { lx: xmax - xmin, ly: ymax - ymin, depth: mesh.max_depth(), ..cfg.basin.clone() };
    Ok(build_on(cfg.scenario, mesh, &basin, cfg.params.clone())?)
}

/// Header text: the resolved configuration plus the modeling choices in
/// comment lines. Feeding it back to `run` reproduces the run.
pub fn run_header(cfg: &RunConfig, courant: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# prismdg run header; rerun with `prismdg run --config <this file>`");
    let _ = writeln!(s, "# imex: stage 1 implicit vertical terms over dt/2 with ceil(m/2) external sub-steps;");
    let _ = writeln!(s, "#   stage 2 explicit over dt from the stage-1 values with m external sub-steps restarted from the step start");
    let _ = writeln!(s, "# bottom drag: linearized about the pre-stage velocity");
    let _ = writeln!(s, "# external scheme: SSP-RK3, celerity sqrt(g H) per side at each edge point");
    let _ = writeln!(s, "# column solves: {}; assembly: fp64", cfg.precision.name());
    let _ = writeln!(s, "# overlap: boundary elements, then halo send, interior elements, halo join, on in-process ranks");
    let _ = writeln!(s, "# external courant number at start: {courant:.6}");
    let _ = writeln!(s, "# timings.csv holds wall-clock times and is the only non-reproducible output");
    s.push_str(&cfg.to_text());
    s
}

fn write(path: PathBuf, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(&path, bytes).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    files.push(path);
    Ok(())
}

/// West-most node of the mesh, where the surface is probed.
fn probe_node(s: &Scenario) -> (usize, usize) {
    let mut best = (0, 0);
    let mut bx = (f64::INFINITY, f64::INFINITY);
    for (t, tri) in s.mesh.triangles.iter().enumerate() {
        for (h, &v) in tri.iter().enumerate() {
            let p = &s.mesh.vertices[v];
            if (p.x, p.y) < bx {
                bx = (p.x, p.y);
                best = (t, h);
            }
        }
    }
    best
}

/// Runs `cfg` and writes all outputs into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    cfg.validate().map_err(|msg| CliError::Config { line: 0, msg })?;
    let scn = scenario_for(cfg)?;
    let dt = cfg.dt.unwrap_or_else(|| scn.stable_dt(cfg.m, AUTO_COURANT));
    let mcfg = ModelConfig { dt, m: cfg.m, precision: cfg.precision, cell_width: cfg.cell_width, turbulence_relaxation: cfg.turbulence_relaxation };
    let model = Model::new(&scn.mesh, &scn.params, &scn.forcing, mcfg, &scn.init.grid)?;
    let all: Vec<usize> = (0..scn.mesh.num_triangles()).collect();
    let courant = External2D::new(&scn.mesh, &scn.params, &scn.forcing).courant(&scn.init.eta, &scn.init.q2d, &all, dt / cfg.m as f64)?;

    fs::create_dir_all(out_dir).map_err(|e| CliError::Io { path: out_dir.to_path_buf(), source: e })?;
    let mut files = Vec::new();
    let resolved = RunConfig { dt: Some(dt), ..cfg.clone() };
    write(out_dir.join("run_header.cfg"), run_header(&resolved, courant).as_bytes(), &mut files)?;

    let steps = (cfg.end_time / dt - 1e-9).ceil().max(0.0) as usize;
    let every = if cfg.output_interval > 0.0 { ((cfg.output_interval / dt).round() as usize).max(1) } else { steps.max(1) };
    let probe = probe_node(&scn);

    let mut st = scn.init.clone();
    if cfg.turbulence_relaxation {
        model.init_eddy(&mut st);
    }
    let mut diag_csv = String::from(DIAGNOSTICS_HEADER);
    let mut budget_csv = String::from(BUDGET_HEADER);
    let mut timing_csv = String::from(TIMINGS_HEADER);
    let mut probe_csv = String::from("t,eta_probe\n");
    let mut snap_index = 0;
    let mut emit = |st: &State3D, diag_csv: &mut String, probe_csv: &mut String, files: &mut Vec<PathBuf>| -> Result<Diagnostics2D, CliError> {
        let d = diagnostics(&scn.mesh, &scn.params, &st.eta, &st.q2d);
        diagnostics_row(diag_csv, st.time, &d);
        let _ = writeln!(probe_csv, "{:?},{:?}", st.time, st.eta.get(probe.0, probe.1, 0));
        for snap in [
            Snapshot::from_2d("eta", &st.eta, st.time),
            Snapshot::from_2d("Q", &st.q2d, st.time),
            Snapshot::from_soa("u", &st.u, st.time),
            Snapshot::from_soa("tracers", &st.tracers, st.time),
        ] {
            write(out_dir.join(format!("snap_{snap_index:05}_{}.bin", snap.field)), &snap.to_bytes(), files)?;
        }
        snap_index += 1;
        Ok(d)
    };
    let mut last = emit(&st, &mut diag_csv, &mut probe_csv, &mut files)?;
    let mut done = 0;
    while done < steps {
        let chunk = every.min(steps - done);
        let res = run_partitioned(&model, &st, cfg.ranks, chunk, false)
            .map_err(|e| CliError::Core(e.at(format!("run from step {done} (t = {:?} s)", st.time))))?;
        for rep in &res.reports {
            budget_rows(&mut budget_csv, rep);
        }
        timing_rows(&mut timing_csv, &res.timings, done);
        st = res.state;
        done += chunk;
        last = emit(&st, &mut diag_csv, &mut probe_csv, &mut files)?;
    }
    write(out_dir.join("diagnostics.csv"), diag_csv.as_bytes(), &mut files)?;
    write(out_dir.join("budget.csv"), budget_csv.as_bytes(), &mut files)?;
    write(out_dir.join("probe.csv"), probe_csv.as_bytes(), &mut files)?;
    write(out_dir.join("timings.csv"), timing_csv.as_bytes(), &mut files)?;
    Ok(RunOutcome { steps, dt, final_state: st, final_diagnostics: last, files })
}
