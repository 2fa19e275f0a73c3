use super::Partition;
use crate::error::{Error, Result};
use crate::layout::FieldSoA;
use crate::real::Real;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::Instant;

/// A per-element field that can travel through a halo exchange.
pub trait HaloField {
    fn pack(&self, elems: &[usize], buf: &mut Vec<f64>);
    /// Reads values for `elems` from the front of `buf`; returns how many were used.
    fn unpack(&mut self, elems: &[usize], buf: &[f64]) -> usize;
    fn poison(&mut self, elems: &[usize]);
    fn all_finite(&self, elems: &[usize]) -> bool;
}

impl<T: Real> HaloField for FieldSoA<T> {
    fn pack(&self, elems: &[usize], buf: &mut Vec<f64>) {
        for &c in elems {
            for f in 0..self.components() {
                for k in 0..6 {
                    for l in 0..self.layers(c) {
                        buf.push(self.get(f, k, c, l).to_f64());
                    }
                }
            }
        }
    }

    fn unpack(&mut self, elems: &[usize], buf: &[f64]) -> usize {
        let mut i = 0;
        for &c in elems {
            for f in 0..self.components() {
                for k in 0..6 {
                    for l in 0..self.layers(c) {
                        self.set(f, k, c, l, T::from_f64(buf[i]));
                        i += 1;
                    }
                }
            }
        }
        i
    }

    fn poison(&mut self, elems: &[usize]) {
        for &c in elems {
            for f in 0..self.components() {
                for k in 0..6 {
                    for l in 0..self.layers(c) {
                        self.set(f, k, c, l, T::nan());
                    }
                }
            }
        }
    }

    fn all_finite(&self, elems: &[usize]) -> bool {
        elems.iter().all(|&c| {
            (0..self.components())
                .all(|f| (0..6).all(|k| (0..self.layers(c)).all(|l| self.get(f, k, c, l).is_finite())))
        })
    }
}

impl<A: HaloField, B: HaloField> HaloField for (A, B) {
    fn pack(&self, elems: &[usize], buf: &mut Vec<f64>) {
        self.0.pack(elems, buf);
        self.1.pack(elems, buf);
    }
    fn unpack(&mut self, elems: &[usize], buf: &[f64]) -> usize {
        let n = self.0.unpack(elems, buf);
        n + self.1.unpack(elems, &buf[n..])
    }
    fn poison(&mut self, elems: &[usize]) {
        self.0.poison(elems);
        self.1.poison(elems);
    }
    fn all_finite(&self, elems: &[usize]) -> bool {
        self.0.all_finite(elems) && self.1.all_finite(elems)
    }
}

impl<A: HaloField> HaloField for Vec<A> {
    fn pack(&self, elems: &[usize], buf: &mut Vec<f64>) {
        self.iter().for_each(|a| a.pack(elems, buf));
    }
    fn unpack(&mut self, elems: &[usize], buf: &[f64]) -> usize {
        let mut n = 0;
        for a in self.iter_mut() {
            n += a.unpack(elems, &buf[n..]);
        }
        n
    }
    fn poison(&mut self, elems: &[usize]) {
        self.iter_mut().for_each(|a| a.poison(elems));
    }
    fn all_finite(&self, elems: &[usize]) -> bool {
        self.iter().all(|a| a.all_finite(elems))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Boundary,
    Pack,
    Interior,
    Unpack,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Boundary => "boundary",
            Phase::Pack => "pack",
            Phase::Interior => "interior",
            Phase::Unpack => "unpack",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTiming {
    pub step: usize,
    pub rank: usize,
    pub phase: Phase,
    pub micros: u128,
}

/// The exchange contract seen by the steppers.
pub trait Exchange {
    fn rank(&self) -> usize;
    fn owned(&self) -> &[usize];
    fn ghosts(&self) -> &[usize];
    fn boundary(&self) -> &[usize];
    fn interior(&self) -> &[usize];
    /// Packs and sends the owned values the neighbors need.
    fn start(&mut self, field: &dyn HaloField) -> Result<()>;
    /// Receives and unpacks every ghost; this is the join point.
    fn finish(&mut self, field: &mut dyn HaloField) -> Result<()>;
    /// Whether ghosts are poisoned while an exchange is in flight.
    fn poison_in_flight(&self) -> bool;
    fn record(&mut self, phase: Phase, micros: u128);
    /// Number of completed exchanges.
    fn exchanges(&self) -> usize;
    fn set_step(&mut self, step: usize);
}

/// Single-rank exchange: everything is owned and exchanges are empty.
#[derive(Debug, Clone)]
pub struct SerialExchange {
    owned: Vec<usize>,
    count: usize,
    step: usize,
    pub timings: Vec<PhaseTiming>,
    pub keep_timings: bool,
}

impl SerialExchange {
    pub fn new(num_elements: usize) -> Self {
        SerialExchange { owned: (0..num_elements).collect(), count: 0, step: 0, timings: Vec::new(), keep_timings: false }
    }
}

impl Exchange for SerialExchange {
    fn rank(&self) -> usize {
        0
    }
    fn owned(&self) -> &[usize] {
        &self.owned
    }
    fn ghosts(&self) -> &[usize] {
        &[]
    }
    fn boundary(&self) -> &[usize] {
        &self.owned
    }
    fn interior(&self) -> &[usize] {
        &[]
    }
    fn start(&mut self, _field: &dyn HaloField) -> Result<()> {
        Ok(())
    }
    fn finish(&mut self, _field: &mut dyn HaloField) -> Result<()> {
        self.count += 1;
        Ok(())
    }
    fn poison_in_flight(&self) -> bool {
        false
    }
    fn record(&mut self, phase: Phase, micros: u128) {
        if self.keep_timings {
            self.timings.push(PhaseTiming { step: self.step, rank: 0, phase, micros });
        }
    }
    fn exchanges(&self) -> usize {
        self.count
    }
    fn set_step(&mut self, step: usize) {
        self.step = step;
    }
}

/// One rank's endpoint: its partition plus channels to each neighbor.
#[derive(Debug)]
pub struct RankExchange {
    pub part: Partition,
    tx: Vec<(usize, Sender<Vec<f64>>)>,
    rx: Vec<(usize, Receiver<Vec<f64>>)>,
    poison: bool,
    count: usize,
    step: usize,
    pub timings: Vec<PhaseTiming>,
}

/// Builds connected endpoints for a decomposition.
pub fn connect(parts: Vec<Partition>, poison: bool) -> Result<Vec<RankExchange>> {
    let n = parts.len();
    let mut txs: Vec<Vec<(usize, Sender<Vec<f64>>)>> = (0..n).map(|_| Vec::new()).collect();
    let mut rxs: Vec<Vec<(usize, Receiver<Vec<f64>>)>> = (0..n).map(|_| Vec::new()).collect();
    for p in &parts {
        for (q, elems) in &p.send {
            let other = parts.get(*q).ok_or_else(|| Error::MapMismatch(format!("rank {} sends to missing rank {q}", p.rank)))?;
            match other.recv.iter().find(|(r, _)| *r == p.rank) {
                Some((_, ghosts)) if ghosts == elems => {}
                _ => {
                    return Err(Error::MapMismatch(format!(
                        "send map {} -> {q} does not match the receiver's ghost list",
                        p.rank
                    )))
                }
            }
            let (tx, rx) = channel();
            txs[p.rank].push((*q, tx));
            rxs[*q].push((p.rank, rx));
        }
    }
    for p in &parts {
        if p.recv.len() != rxs[p.rank].len() {
            return Err(Error::MapMismatch(format!("rank {} expects ghosts from an unconnected rank", p.rank)));
        }
    }
    Ok(parts
        .into_iter()
        .zip(txs.into_iter().zip(rxs))
        .map(|(part, (tx, mut rx))| {
            rx.sort_by_key(|(q, _)| *q);
            RankExchange { part, tx, rx, poison, count: 0, step: 0, timings: Vec::new() }
        })
        .collect())
}

impl Exchange for RankExchange {
    fn rank(&self) -> usize {
        self.part.rank
    }
    fn owned(&self) -> &[usize] {
        &self.part.owned
    }
    fn ghosts(&self) -> &[usize] {
        &self.part.ghosts
    }
    fn boundary(&self) -> &[usize] {
        &self.part.boundary
    }
    fn interior(&self) -> &[usize] {
        &self.part.interior
    }
    fn start(&mut self, field: &dyn HaloField) -> Result<()> {
        for (q, elems) in &self.part.send {
            let mut buf = Vec::new();
            field.pack(elems, &mut buf);
            let tx = &self.tx.iter().find(|(r, _)| r == q).expect("connected").1;
            tx.send(buf).map_err(|_| Error::ChannelClosed { rank: *q })?;
        }
        Ok(())
    }
    fn finish(&mut self, field: &mut dyn HaloField) -> Result<()> {
        for (q, ghosts) in &self.part.recv {
            let rx = &self.rx.iter().find(|(r, _)| r == q).expect("connected").1;
            let buf = rx.recv().map_err(|_| Error::ChannelClosed { rank: *q })?;
            let used = field.unpack(ghosts, &buf);
            if used != buf.len() {
                return Err(Error::MapMismatch(format!(
                    "rank {} got {} values from rank {q}, unpacked {used}",
                    self.part.rank,
                    buf.len()
                )));
            }
        }
        self.count += 1;
        Ok(())
    }
    fn poison_in_flight(&self) -> bool {
        self.poison
    }
    fn record(&mut self, phase: Phase, micros: u128) {
        self.timings.push(PhaseTiming { step: self.step, rank: self.part.rank, phase, micros });
    }
    fn exchanges(&self) -> usize {
        self.count
    }
    fn set_step(&mut self, step: usize) {
        self.step = step;
    }
}

/// Plain exchange: send, then join.
pub fn halo_exchange(ex: &mut dyn Exchange, field: &mut dyn HaloField) -> Result<()> {
    ex.start(field)?;
    ex.finish(field)
}

/// Runs one overlapped phase: compute boundary elements, send them, compute
/// interior elements while the exchange is in flight, then join.
///
/// With poisoning on, ghosts of `out` hold NaN during the interior phase, so
/// an interior computation that reads an un-joined ghost shows up as a
/// non-finite interior output and is reported as a schedule violation.
pub fn overlapped<F: HaloField>(
    ex: &mut dyn Exchange,
    out: &mut F,
    mut compute: impl FnMut(&[usize], &mut F) -> Result<()>,
) -> Result<()> {
    let boundary = ex.boundary().to_vec();
    let interior = ex.interior().to_vec();
    let t = Instant::now();
    compute(&boundary, out)?;
    ex.record(Phase::Boundary, t.elapsed().as_micros());
    let t = Instant::now();
    ex.start(out)?;
    ex.record(Phase::Pack, t.elapsed().as_micros());
    let poison = ex.poison_in_flight();
    if poison {
        out.poison(ex.ghosts());
    }
    let t = Instant::now();
    compute(&interior, out)?;
    ex.record(Phase::Interior, t.elapsed().as_micros());
    if poison && !out.all_finite(&interior) {
        return Err(Error::ScheduleViolation(format!(
            "rank {}: interior results depend on ghosts still in flight",
            ex.rank()
        )));
    }
    let t = Instant::now();
    ex.finish(out)?;
    ex.record(Phase::Unpack, t.elapsed().as_micros());
    Ok(())
}

/// Runs `f` on one thread per rank and returns the results in rank order.
pub fn run_ranks<R: Send>(ranks: Vec<RankExchange>, f: impl Fn(RankExchange) -> R + Sync) -> Vec<R> {
    std::thread::scope(|s| {
        let handles: Vec<_> = ranks.into_iter().map(|ex| s.spawn(|| f(ex))).collect();
        handles.into_iter().map(|h| h.join().expect("rank thread panicked")).collect()
    })
}
