//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use prismdg_core::internal3d::Precision;
use prismdg_core::mesh::LayerPolicy;
use prismdg_core::params::VerticalProfile;
use prismdg_core::scenario::{BasinConfig, ScenarioKind};
use prismdg_core::PhysParams;

use crate::CliError;

/// Everything a run needs. Unset optional values are resolved from the
/// scenario defaults when the run starts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    /// Plain-text mesh replacing the generated basin.
    pub mesh_file: Option<PathBuf>,
    pub basin: BasinConfig,
    /// Internal step, s; `None` picks the scenario's stable step.
    pub dt: Option<f64>,
    pub m: usize,
    pub end_time: f64,
    pub params: PhysParams,
    pub precision: Precision,
    pub ranks: usize,
    pub cell_width: usize,
    pub turbulence_relaxation: bool,
    /// Snapshot and diagnostics interval, s; 0 writes only the end state.
    pub output_interval: f64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        RunConfig {
            scenario: kind,
            mesh_file: None,
            basin: kind.default_basin(),
            dt: None,
            m: 20,
            end_time: 3600.0,
            params: kind.default_params(),
            precision: Precision::F64,
            ranks: 1,
            cell_width: 8,
            turbulence_relaxation: false,
            output_interval: 0.0,
            output_dir: PathBuf::from("prismdg-out"),
        }
    }

    /// Parses a config. The `scenario` key picks the defaults that the other
    /// keys then override, wherever it appears.
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config { line: i + 1, msg: format!("expected `key = value`, got `{line}`") })?;
            entries.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let scenario = match entries.iter().find(|(_, k, _)| k == "scenario") {
            Some((line, _, v)) => ScenarioKind::from_name(v)
                .ok_or_else(|| CliError::Config { line: *line, msg: format!("unknown scenario `{v}`") })?,
            None => return Err(CliError::Config { line: 0, msg: "missing required key `scenario`".into() }),
        };
        let mut cfg = RunConfig::for_scenario(scenario);
        let mut seen = std::collections::HashSet::new();
        for (line, k, v) in &entries {
            if !seen.insert(k.clone()) {
                return Err(CliError::Config { line: *line, msg: format!("duplicate key `{k}`") });
            }
            cfg.set(k, v).map_err(|msg| CliError::Config { line: *line, msg })?;
        }
        cfg.validate().map_err(|msg| CliError::Config { line: 0, msg })?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let p = &mut self.params;
        let b = &mut self.basin;
        match key {
            "scenario" => {}
            "mesh_file" => self.mesh_file = Some(PathBuf::from(v)),
            "nx" => b.nx = num(key, v)?,
            "ny" => b.ny = num(key, v)?,
            "lx" => b.lx = num(key, v)?,
            "ly" => b.ly = num(key, v)?,
            "depth" => b.depth = num(key, v)?,
            "amplitude" => b.amplitude = num(key, v)?,
            "seed" => b.seed = num(key, v)?,
            "layers" => b.layers = parse_layers(v)?,
            "dt" => self.dt = if v == "auto" { None } else { Some(num(key, v)?) },
            "m" => self.m = num(key, v)?,
            "end_time" => self.end_time = num(key, v)?,
            "g" => p.g = num(key, v)?,
            "rho0" => p.rho0 = num(key, v)?,
            "f" => p.f = num(key, v)?,
            "drag" => p.drag = num(key, v)?,
            "wind_x" => p.wind[0] = num(key, v)?,
            "wind_y" => p.wind[1] = num(key, v)?,
            "kappa_h" => p.kappa_h = num(key, v)?,
            "kappa_v" => p.kappa_v = parse_profile(v)?,
            "nu_h" => p.nu_h = num(key, v)?,
            "nu_v" => p.nu_v = parse_profile(v)?,
            "alpha" => p.alpha = num(key, v)?,
            "beta" => p.beta = num(key, v)?,
            "t0" => p.t0 = num(key, v)?,
            "s0" => p.s0 = num(key, v)?,
            "penalty_n0" => p.penalty.n0 = num(key, v)?,
            "penalty_order" => p.penalty.order = num(key, v)?,
            "penalty_dim" => p.penalty.dim = num(key, v)?,
            "momentum_advection" => p.momentum_advection = flag(key, v)?,
            "precision" => {
                self.precision = match v {
                    "fp64" => Precision::F64,
                    "fp32" => Precision::F32,
                    _ => return Err(format!("precision must be fp32 or fp64, got `{v}`")),
                }
            }
            "ranks" => self.ranks = num(key, v)?,
            "cell_width" => self.cell_width = num(key, v)?,
            "turbulence_relaxation" => self.turbulence_relaxation = flag(key, v)?,
            "output_interval" => self.output_interval = num(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(format!("dt must be positive, got {dt}"));
            }
        }
        if self.m == 0 {
            return Err("m must be at least 1".into());
        }
        if !(self.end_time >= 0.0) {
            return Err(format!("end_time must be non-negative, got {}", self.end_time));
        }
        if self.ranks == 0 || self.cell_width == 0 {
            return Err("ranks and cell_width must be at least 1".into());
        }
        if !(self.output_interval >= 0.0) {
            return Err("output_interval must be non-negative".into());
        }
        Ok(())
    }

    /// The config as parseable text, with every key spelled out.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let b = &self.basin;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scenario", self.scenario.name().into());
        if let Some(f) = &self.mesh_file {
            kv("mesh_file", f.display().to_string());
        }
        kv("nx", b.nx.to_string());
        kv("ny", b.ny.to_string());
        kv("lx", fmt(b.lx));
        kv("ly", fmt(b.ly));
        kv("depth", fmt(b.depth));
        kv("amplitude", fmt(b.amplitude));
        kv("seed", b.seed.to_string());
        kv("layers", layers_text(&b.layers));
        kv("dt", self.dt.map_or("auto".into(), fmt));
        kv("m", self.m.to_string());
        kv("end_time", fmt(self.end_time));
        kv("g", fmt(p.g));
        kv("rho0", fmt(p.rho0));
        kv("f", fmt(p.f));
        kv("drag", fmt(p.drag));
        kv("wind_x", fmt(p.wind[0]));
        kv("wind_y", fmt(p.wind[1]));
        kv("kappa_h", fmt(p.kappa_h));
        kv("kappa_v", profile_text(&p.kappa_v));
        kv("nu_h", fmt(p.nu_h));
        kv("nu_v", profile_text(&p.nu_v));
        kv("alpha", fmt(p.alpha));
        kv("beta", fmt(p.beta));
        kv("t0", fmt(p.t0));
        kv("s0", fmt(p.s0));
        kv("penalty_n0", fmt(p.penalty.n0));
        kv("penalty_order", fmt(p.penalty.order));
        kv("penalty_dim", fmt(p.penalty.dim));
        kv("momentum_advection", p.momentum_advection.to_string());
        kv("precision", self.precision.name().into());
        kv("ranks", self.ranks.to_string());
        kv("cell_width", self.cell_width.to_string());
        kv("turbulence_relaxation", self.turbulence_relaxation.to_string());
        kv("output_interval", fmt(self.output_interval));
        kv("output_dir", self.output_dir.display().to_string());
        s
    }
}

/// Shortest decimal text that parses back to the same `f64`.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid value `{v}` for `{key}`"))
}

fn flag(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(format!("invalid value `{v}` for `{key}`, expected true or false")),
    }
}

/// `N` for uniform layers, or `depth:count` bands such as `10:4, 30:8`.
fn parse_layers(v: &str) -> Result<LayerPolicy, String> {
    if !v.contains(':') {
        return Ok(LayerPolicy::Uniform(num("layers", v)?));
    }
    let bands = v
        .split(',')
        .map(|band| {
            let (d, n) = band.split_once(':').ok_or_else(|| format!("invalid layer band `{band}`"))?;
            Ok((num("layers", d.trim())?, num("layers", n.trim())?))
        })
        .collect::<Result<Vec<(f64, usize)>, String>>()?;
    Ok(LayerPolicy::DepthThresholded(bands))
}

fn layers_text(l: &LayerPolicy) -> String {
    match l {
        LayerPolicy::Uniform(n) => n.to_string(),
        LayerPolicy::DepthThresholded(b) => b.iter().map(|(d, n)| format!("{}:{n}", fmt(*d))).collect::<Vec<_>>().join(", "),
    }
}

/// A number for a constant profile, or `exp:surface:scale:floor`.
fn parse_profile(v: &str) -> Result<VerticalProfile, String> {
    match v.strip_prefix("exp:") {
        None => Ok(VerticalProfile::Constant(num("profile", v)?)),
        Some(rest) => {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("expected exp:surface:scale:floor, got `{v}`"));
            }
            Ok(VerticalProfile::Exponential {
                surface: num("profile", parts[0])?,
                scale: num("profile", parts[1])?,
                floor: num("profile", parts[2])?,
            })
        }
    }
}

fn profile_text(p: &VerticalProfile) -> String {
    match *p {
        VerticalProfile::Constant(k) => fmt(k),
        VerticalProfile::Exponential { surface, scale, floor } => format!("exp:{}:{}:{}", fmt(surface), fmt(scale), fmt(floor)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_scenario_defaults() {
        let c = RunConfig::parse("scenario = lock-exchange\n").unwrap();
        assert_eq!(c, RunConfig::for_scenario(ScenarioKind::LockExchange));
    }

    #[test]
    fn comments_blank_lines_and_overrides() {
        let c = RunConfig::parse("# a run\n\nscenario = standing-wave # trailing\nm = 10\ndt = 30\nkappa_v = exp:0.01:5:0.0001\nlayers = 10:3, 40:6\nprecision = fp32\n").unwrap();
        assert_eq!(c.m, 10);
        assert_eq!(c.dt, Some(30.0));
        assert_eq!(c.params.kappa_v, VerticalProfile::Exponential { surface: 0.01, scale: 5.0, floor: 1e-4 });
        assert_eq!(c.basin.layers, LayerPolicy::DepthThresholded(vec![(10.0, 3), (40.0, 6)]));
        assert_eq!(c.precision, Precision::F32);
    }

    #[test]
    fn unknown_key_is_an_error_naming_the_key_and_line() {
        let e = RunConfig::parse("scenario = lake-at-rest\nviscosity = 3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("viscosity") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("scenario = lake-at-rest\ndt = -1\n").is_err());
        assert!(RunConfig::parse("scenario = lake-at-rest\nm = 0\n").is_err());
        assert!(RunConfig::parse("scenario = nowhere\n").is_err());
        assert!(RunConfig::parse("m = 3\n").is_err());
        assert!(RunConfig::parse("scenario = lake-at-rest\nm = 3\nm = 4\n").is_err());
    }

    #[test]
    fn text_round_trips() {
        let mut c = RunConfig::parse("scenario = wind-driven-column\nwind_y = 0.0123456789\nnu_v = exp:0.1:3:0.001\n").unwrap();
        c.dt = Some(0.1 + 0.2);
        c.mesh_file = Some("basin.mesh".into());
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }
}
