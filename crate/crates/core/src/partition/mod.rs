//! Horizontal domain decomposition, halo exchange and the boundary-first
//! overlap schedule.
//!
//! Ranks are in-process workers joined by channels. Every rank keeps
//! full-size arrays but only computes its owned elements; ghost entries are
//! refreshed by exchange. Because every assembly is gather-only, results do
//! not depend on the rank count, bit for bit.

mod amdahl;
mod decompose;
mod exchange;

pub use amdahl::{amdahl_csv, amdahl_fit, AmdahlFit};
pub use decompose::{decompose, Partition};
pub use exchange::{
    connect, halo_exchange, overlapped, run_ranks, Exchange, HaloField, Phase, PhaseTiming, RankExchange,
    SerialExchange,
};
