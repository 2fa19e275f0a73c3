//! Snapshot files and CSV writers.
//!
//! A snapshot is one ASCII header line
//! `PRISMDG-SNAP 1 <field> <components> <columns> <layers> <time>`
//! followed by the little-endian `f64` payload. For 3D fields the payload is
//! in `FieldSoA` order and `<layers>` is the common layer count, or the
//! comma-separated per-column counts when they differ. 2D fields have
//! `<layers> = 0` and store (column, node, component) order.

use std::fmt::Write as _;

use prismdg_core::external2d::{Diagnostics2D, Field2D};
use prismdg_core::internal3d::StepReport;
use prismdg_core::partition::PhaseTiming;
use prismdg_core::FieldSoA;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: String,
    pub components: usize,
    pub columns: usize,
    /// Per-column layer counts; empty for 2D fields.
    pub layers: Vec<usize>,
    pub time: f64,
    pub data: Vec<f64>,
}

impl Snapshot {
    pub fn from_soa(field: &str, f: &FieldSoA<f64>, time: f64) -> Self {
        let layers = (0..f.num_columns()).map(|c| f.layers(c)).collect();
        Snapshot { field: field.into(), components: f.components(), columns: f.num_columns(), layers, time, data: f.data().to_vec() }
    }

    pub fn from_2d(field: &str, f: &Field2D, time: f64) -> Self {
        Snapshot { field: field.into(), components: f.comps, columns: f.num_triangles(), layers: Vec::new(), time, data: f.data.clone() }
    }

    pub fn to_soa(&self) -> Result<FieldSoA<f64>, CliError> {
        FieldSoA::from_vec(self.components, &self.layers, self.data.clone()).map_err(CliError::Core)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let layers = match self.layers.first() {
            None => "0".to_string(),
            Some(&l) if self.layers.iter().all(|&x| x == l) => l.to_string(),
            Some(_) => self.layers.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","),
        };
        let mut out = format!("PRISMDG-SNAP 1 {} {} {} {} {:?}\n", self.field, self.components, self.columns, layers, self.time).into_bytes();
        out.reserve(8 * self.data.len());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Snapshot, CliError> {
        let bad = |msg: &str| CliError::Format(format!("snapshot: {msg}"));
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not ASCII"))?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() != 7 || tok[0] != "PRISMDG-SNAP" || tok[1] != "1" {
            return Err(bad("expected `PRISMDG-SNAP 1 <field> <components> <columns> <layers> <time>`"));
        }
        let components: usize = tok[3].parse().map_err(|_| bad("bad component count"))?;
        let columns: usize = tok[4].parse().map_err(|_| bad("bad column count"))?;
        let layers: Vec<usize> = match tok[5] {
            "0" => Vec::new(),
            s if s.contains(',') => s.split(',').map(|x| x.parse().map_err(|_| bad("bad layer counts"))).collect::<Result<_, _>>()?,
            s => vec![s.parse().map_err(|_| bad("bad layer count"))?; columns],
        };
        if !layers.is_empty() && layers.len() != columns {
            return Err(bad("layer counts do not match the column count"));
        }
        let time: f64 = tok[6].parse().map_err(|_| bad("bad time"))?;
        let values = if layers.is_empty() { columns * 3 * components } else { 6 * components * layers.iter().sum::<usize>() };
        let payload = &bytes[nl + 1..];
        if payload.len() != 8 * values {
            return Err(bad(&format!("payload has {} bytes, expected {}", payload.len(), 8 * values)));
        }
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        Ok(Snapshot { field: tok[2].into(), components, columns, layers, time, data })
    }
}

pub const DIAGNOSTICS_HEADER: &str = "t,total_volume,total_energy,eta_min,eta_max\n";
pub const BUDGET_HEADER: &str = "t,stage,volume,momentum_x,momentum_y,tracer_mass,tracer_min,tracer_max\n";
pub const TIMINGS_HEADER: &str = "step,rank,phase,micros\n";

pub fn diagnostics_row(out: &mut String, t: f64, d: &Diagnostics2D) {
    let _ = writeln!(out, "{t:?},{:?},{:?},{:?},{:?}", d.volume, d.energy, d.eta_min, d.eta_max);
}

pub fn budget_rows(out: &mut String, rep: &StepReport) {
    for s in &rep.stages {
        let b = &s.budget;
        let _ = writeln!(
            out,
            "{:?},{},{:?},{:?},{:?},{:?},{:?},{:?}",
            rep.time, s.stage, b.volume, b.momentum[0], b.momentum[1], b.tracer_mass, b.tracer_min, b.tracer_max
        );
    }
}

pub fn timing_rows(out: &mut String, timings: &[PhaseTiming], step_offset: usize) {
    for t in timings {
        let _ = writeln!(out, "{},{},{},{}", t.step + step_offset, t.rank, t.phase.name(), t.micros);
    }
}
