//! Column solves routed through the cell layout, in either precision.

use crate::column_solvers::{solve_banded_cells, solve_r_cells, solve_w_cells, BandedColumnMatrix};
use crate::error::{Error, Result};
use crate::layout::{cell_to_soa_into, soa_to_cell_subset, CellPartition, FieldSoA};
use crate::mesh::Mesh2D;
use crate::real::Real;
use std::str::FromStr;

/// Precision of the column solves. Assembly always runs in `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "fp32",
            Precision::F64 => "fp64",
        }
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fp32" => Ok(Precision::F32),
            "fp64" => Ok(Precision::F64),
            _ => Err(Error::ShapeMismatch(format!("unknown precision `{s}` (expected fp32 or fp64)"))),
        }
    }
}

/// Transposes the listed columns into cells, runs `solve` on them in `T`
/// and scatters the result back.
fn via_cells<T: Real>(
    field: &mut FieldSoA<f64>,
    cols: &[usize],
    width: usize,
    solve: impl FnOnce(&mut [crate::layout::CellBlock<T>]) -> Result<()>,
) -> Result<()> {
    let part = CellPartition::contiguous(cols, width);
    let narrow: FieldSoA<T> = field.map(T::from_f64);
    let mut blocks = soa_to_cell_subset(&narrow, &part)?;
    solve(&mut blocks)?;
    let mut back = narrow;
    cell_to_soa_into(&blocks, &mut back)?;
    for b in &blocks {
        for (j, &c) in b.columns.iter().enumerate() {
            for l in 0..b.layers[j] {
                for k in 0..6 {
                    for f in 0..field.components() {
                        field.set(f, k, c, l, back.get(f, k, c, l).to_f64());
                    }
                }
            }
        }
    }
    Ok(())
}

fn via_cells_f64(
    field: &mut FieldSoA<f64>,
    cols: &[usize],
    width: usize,
    solve: impl FnOnce(&mut [crate::layout::CellBlock<f64>]) -> Result<()>,
) -> Result<()> {
    let part = CellPartition::contiguous(cols, width);
    let mut blocks = soa_to_cell_subset(field, &part)?;
    solve(&mut blocks)?;
    cell_to_soa_into(&blocks, field)
}

fn j2d_of(mesh: &Mesh2D) -> Vec<f64> {
    mesh.geom.iter().map(|g| g.j2d).collect()
}

/// Solves `D_vu r = rhs` in place on the listed columns.
pub fn solve_r(mesh: &Mesh2D, rhs: &mut FieldSoA<f64>, cols: &[usize], width: usize, prec: Precision) -> Result<()> {
    let j2d = j2d_of(mesh);
    match prec {
        Precision::F64 => via_cells_f64(rhs, cols, width, |b| solve_r_cells(b, &j2d)),
        Precision::F32 => via_cells::<f32>(rhs, cols, width, |b| solve_r_cells(b, &j2d)),
    }
}

/// Solves `D_vd w = rhs` in place on the listed columns.
pub fn solve_w(mesh: &Mesh2D, rhs: &mut FieldSoA<f64>, cols: &[usize], width: usize, prec: Precision) -> Result<()> {
    let j2d = j2d_of(mesh);
    match prec {
        Precision::F64 => via_cells_f64(rhs, cols, width, |b| solve_w_cells(b, &j2d)),
        Precision::F32 => via_cells::<f32>(rhs, cols, width, |b| solve_w_cells(b, &j2d)),
    }
}

/// Solves the assembled systems `mats[c] x = rhs` in place on the listed
/// columns; `mats` is indexed by global column and consumed.
pub fn solve_banded_columns(
    mats: &mut [BandedColumnMatrix<f64>],
    rhs: &mut FieldSoA<f64>,
    cols: &[usize],
    width: usize,
    prec: Precision,
) -> Result<()> {
    match prec {
        Precision::F64 => via_cells_f64(rhs, cols, width, |b| solve_banded_cells(mats, b)),
        Precision::F32 => {
            let mut narrow: Vec<BandedColumnMatrix<f32>> = mats
                .iter()
                .map(|m| BandedColumnMatrix {
                    diag: m.diag.iter().map(|d| d.map(|x| x as f32)).collect(),
                    upper: m.upper.iter().map(|d| d.map(|x| x as f32)).collect(),
                    lower: m.lower.iter().map(|d| d.map(|x| x as f32)).collect(),
                })
                .collect();
            via_cells::<f32>(rhs, cols, width, |b| solve_banded_cells(&mut narrow, b))
        }
    }
}
