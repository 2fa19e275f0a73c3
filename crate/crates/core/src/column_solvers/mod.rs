//! Per-column linear algebra.
//!
//! Within a column, unknowns are ordered layer (top first), prism node, then
//! component, which is also the row order of a [`CellBlock`](crate::CellBlock).

mod banded;
mod dense;
mod matrix_free;
mod tridiagonal;

pub use banded::{factor_solve, solve_banded_cells, solve_banded_column, BandAccess, BandedColumnMatrix};
pub use dense::{assemble_dense_oracle, DenseMatrix};
pub use matrix_free::{solve_r_cells, solve_r_column, solve_w_cells, solve_w_column};
pub use tridiagonal::solve_tridiagonal;

/// The four families of column systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnSystemKind {
    /// Surface-anchored pressure-gradient system, solved top-down.
    Dvu,
    /// Bed-anchored vertical-velocity system, solved bottom-up.
    Dvd,
    /// Assembled implicit momentum/tracer system with prism-banded blocks.
    BandedImplicit,
    Tridiagonal,
}
