//! The `bench` subcommand: layout transposition and rank scaling reports.

use std::fmt::Write as _;
use std::time::Instant;

use prismdg_core::internal3d::{run_partitioned, Model};
use prismdg_core::layout::{cell_to_soa, choose_block_shape_for, soa_to_cell, CellBlock, CellPartition};
use prismdg_core::partition::{amdahl_csv, amdahl_fit, AmdahlFit};
use prismdg_core::scenario::{build, BasinConfig, ScenarioKind};
use prismdg_core::{FieldSoA, Real};

use crate::CliError;

/// Mean address distance between consecutive reads when one column is
/// walked layer by layer, node by node, component by component.
fn column_walk_stride<T: Real>(soa: &FieldSoA<T>, cells: &CellBlock<T>, col: usize, slot: usize) -> (f64, f64) {
    let (mut s_soa, mut s_cell, mut n) = (0.0, 0.0, 0usize);
    let (mut prev_soa, mut prev_cell): (Option<usize>, Option<usize>) = (None, None);
    for l in 0..soa.layers(col) {
        for k in 0..6 {
            for f in 0..soa.components() {
                let a = soa.index(f, k, col, l);
                let b = cells.index(l, k, f, slot);
                if let (Some(pa), Some(pb)) = (prev_soa, prev_cell) {
                    s_soa += a.abs_diff(pa) as f64;
                    s_cell += b.abs_diff(pb) as f64;
                    n += 1;
                }
                prev_soa = Some(a);
                prev_cell = Some(b);
            }
        }
    }
    let n = n.max(1) as f64;
    (s_soa / n, s_cell / n)
}

fn layout_rows<T: Real>(out: &mut String, precision: &str, columns: usize, layers: usize, width: usize, reps: usize) -> Result<(), CliError> {
    let comps = 2;
    let mut f = FieldSoA::<T>::zeros(comps, &vec![layers; columns]);
    for (i, v) in f.data_mut().iter_mut().enumerate() {
        *v = T::from_f64((i as f64 * 0.618).fract());
    }
    let part = CellPartition::all(columns, width);
    let mut blocks = soa_to_cell(&f, &part)?;
    let t0 = Instant::now();
    for _ in 0..reps {
        blocks = soa_to_cell(&f, &part)?;
    }
    let fwd = t0.elapsed().as_secs_f64();
    let mut back = cell_to_soa(&blocks)?;
    let t1 = Instant::now();
    for _ in 0..reps {
        back = cell_to_soa(&blocks)?;
    }
    let bwd = t1.elapsed().as_secs_f64();
    let ok = back.data().iter().zip(f.data()).all(|(a, b)| Real::to_f64(*a).to_bits() == Real::to_f64(*b).to_bits());
    let values = (f.data().len() * reps) as f64;
    let (ss, sc) = column_walk_stride(&f, &blocks[0], blocks[0].columns[0], 0);
    let shape = choose_block_shape_for(layers, 6 * comps, width);
    let _ = writeln!(
        out,
        "{precision},{columns},{layers},{width},{:.3},{:.3},{ss:.1},{sc:.1},{},{},{:.4},{ok}",
        1e9 * fwd / values,
        1e9 * bwd / values,
        shape.n,
        shape.read_chunk,
        shape.utilization
    );
    Ok(())
}

/// Transposition throughput, column-walk strides and block shapes for each
/// cell width and precision; `roundtrip_ok` verifies every row.
pub fn layout_bench(columns: usize, layers: usize, widths: &[usize], reps: usize) -> Result<String, CliError> {
    if columns == 0 || layers == 0 {
        return Err(CliError::Usage("layout bench needs at least one column and one layer".into()));
    }
    let mut out = String::from(
        "precision,columns,layers,cell_width,soa_to_cell_ns_per_value,cell_to_soa_ns_per_value,stride_soa,stride_cell,block_n,block_layers,utilization,roundtrip_ok\n",
    );
    for &w in widths {
        layout_rows::<f64>(&mut out, "fp64", columns, layers, w, reps)?;
        layout_rows::<f32>(&mut out, "fp32", columns, layers, w, reps)?;
    }
    Ok(out)
}

/// Wall time per internal step of `kind` on each rank count.
pub fn scaling_samples(kind: ScenarioKind, basin: &BasinConfig, ranks: &[usize], steps: usize) -> Result<Vec<(usize, f64)>, CliError> {
    let s = build(kind, basin, kind.default_params())?;
    let model = Model::new(&s.mesh, &s.params, &s.forcing, s.default_config(), &s.init.grid)?;
    let mut out = Vec::new();
    for &p in ranks {
        let start = Instant::now();
        run_partitioned(&model, &s.init, p, steps, false)?;
        out.push((p, start.elapsed().as_secs_f64() / steps.max(1) as f64));
    }
    Ok(out)
}

/// Scaling CSV and the fit of `T(P) = a + b / P`.
pub fn scaling_bench(kind: ScenarioKind, basin: &BasinConfig, ranks: &[usize], steps: usize) -> Result<(String, Option<AmdahlFit>), CliError> {
    if basin.nx == 0 || basin.ny == 0 {
        return Err(CliError::Usage("scaling bench needs a non-empty mesh".into()));
    }
    let samples = scaling_samples(kind, basin, ranks, steps)?;
    Ok((amdahl_csv(&samples), amdahl_fit(&samples)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_rows_verify_round_trip() {
        let csv = layout_bench(40, 5, &[2, 8], 1).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.ends_with(",true")));
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let basin = BasinConfig { nx: 0, ..ScenarioKind::LockExchange.default_basin() };
        assert!(scaling_bench(ScenarioKind::LockExchange, &basin, &[1], 1).is_err());
        assert!(layout_bench(0, 4, &[8], 1).is_err());
    }
}
