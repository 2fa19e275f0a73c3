//! Layered-prismatic discontinuous Galerkin model of coastal ocean flow.
//!
//! A 2D triangular mesh is extruded into columns of prisms. Fast barotropic
//! dynamics are sub-cycled explicitly in 2D ([`external2d`]); the 3D mode
//! ([`internal3d`]) treats vertical terms implicitly and couples to 2D through
//! consistent mean transports. Vertical systems are solved per column
//! ([`column_solvers`]) on column-blocked storage ([`layout`]), and the whole
//! step can run on several in-process ranks with overlapped halo exchange
//! ([`partition`]).

pub mod column_solvers;
pub mod dg_core;
pub mod error;
pub mod external2d;
pub mod internal3d;
pub mod layout;
pub mod mesh;
pub mod params;
pub mod partition;
pub mod real;
pub mod scenario;

pub use error::{Error, Result};
pub use layout::{BlockShape, CellBlock, CellPartition, FieldSoA};
pub use mesh::{ColumnGrid, LayerPolicy, Mesh2D};
pub use params::PhysParams;
pub use real::Real;
