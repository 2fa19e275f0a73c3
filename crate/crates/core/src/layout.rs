//! Nodal field storage.
//!
//! [`FieldSoA`] orders values component, then local prism node (0..6), then
//! column, then layer (top to bottom). [`CellBlock`] groups `C` columns into
//! a matrix with one matrix column per prism column and rows ordered layer,
//! node, component, padded with zeros to the deepest column of the group.
//! The two are related by exact transposition.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSoA<T> {
    components: usize,
    offsets: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> FieldSoA<T> {
    pub fn zeros(components: usize, layer_counts: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(layer_counts.len() + 1);
        offsets.push(0);
        for &l in layer_counts {
            offsets.push(offsets.last().unwrap() + l);
        }
        let n = components * 6 * offsets.last().unwrap();
        FieldSoA { components, offsets, data: vec![T::zero(); n] }
    }

    /// Same shape as `self`, filled with zeros.
    pub fn zeros_like(&self) -> Self {
        FieldSoA { components: self.components, offsets: self.offsets.clone(), data: vec![T::zero(); self.data.len()] }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn num_columns(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_prisms(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn layers(&self, col: usize) -> usize {
        self.offsets[col + 1] - self.offsets[col]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Address of component `f`, node `k`, column `c`, layer `l`.
    #[inline]
    pub fn index(&self, f: usize, k: usize, c: usize, l: usize) -> usize {
        (f * 6 + k) * self.num_prisms() + self.offsets[c] + l
    }

    /// Address by global prism index.
    #[inline]
    pub fn index_prism(&self, f: usize, k: usize, prism: usize) -> usize {
        (f * 6 + k) * self.num_prisms() + prism
    }

    #[inline]
    pub fn get(&self, f: usize, k: usize, c: usize, l: usize) -> T {
        self.data[self.index(f, k, c, l)]
    }

    #[inline]
    pub fn set(&mut self, f: usize, k: usize, c: usize, l: usize, v: T) {
        let i = self.index(f, k, c, l);
        self.data[i] = v;
    }

    /// The six nodal values of component `f` on a prism.
    #[inline]
    pub fn nodes(&self, f: usize, prism: usize) -> [T; 6] {
        let np = self.num_prisms();
        std::array::from_fn(|k| self.data[(f * 6 + k) * np + prism])
    }

    #[inline]
    pub fn set_nodes(&mut self, f: usize, prism: usize, v: [T; 6]) {
        let np = self.num_prisms();
        for (k, x) in v.into_iter().enumerate() {
            self.data[(f * 6 + k) * np + prism] = x;
        }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn from_vec(components: usize, layer_counts: &[usize], data: Vec<T>) -> Result<Self> {
        let mut f = Self::zeros(components, layer_counts);
        if data.len() != f.data.len() {
            return Err(Error::ShapeMismatch(format!("expected {} values, got {}", f.data.len(), data.len())));
        }
        f.data = data;
        Ok(f)
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> FieldSoA<U> {
        FieldSoA { components: self.components, offsets: self.offsets.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// Assignment of columns to cells of width `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    pub width: usize,
    pub cells: Vec<Vec<usize>>,
}

impl CellPartition {
    /// Consecutive groups of `width` columns from `columns`.
    pub fn contiguous(columns: &[usize], width: usize) -> Self {
        let width = width.max(1);
        CellPartition { width, cells: columns.chunks(width).map(|c| c.to_vec()).collect() }
    }

    pub fn all(num_columns: usize, width: usize) -> Self {
        Self::contiguous(&(0..num_columns).collect::<Vec<_>>(), width)
    }
}

/// One cell: a `rows x C` matrix stored row-major, rows ordered
/// layer, node, component.
#[derive(Debug, Clone, PartialEq)]
pub struct CellBlock<T> {
    pub width: usize,
    pub components: usize,
    pub columns: Vec<usize>,
    pub layers: Vec<usize>,
    pub max_layers: usize,
    pub data: Vec<T>,
}

impl<T: Real> CellBlock<T> {
    pub fn zeros(width: usize, components: usize, columns: Vec<usize>, layers: Vec<usize>) -> Self {
        let max_layers = layers.iter().copied().max().unwrap_or(0);
        let data = vec![T::zero(); max_layers * 6 * components * width];
        CellBlock { width, components, columns, layers, max_layers, data }
    }

    pub fn rows(&self) -> usize {
        self.max_layers * 6 * self.components
    }

    #[inline]
    pub fn index(&self, l: usize, k: usize, f: usize, c: usize) -> usize {
        ((l * 6 + k) * self.components + f) * self.width + c
    }

    #[inline]
    pub fn get(&self, l: usize, k: usize, f: usize, c: usize) -> T {
        self.data[self.index(l, k, f, c)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, k: usize, f: usize, c: usize, v: T) {
        let i = self.index(l, k, f, c);
        self.data[i] = v;
    }
}

fn check_partition(num_columns: usize, part: &CellPartition, full: bool) -> Result<()> {
    if part.width == 0 {
        return Err(Error::ShapeMismatch("cell width must be positive".into()));
    }
    let mut seen = vec![false; num_columns];
    for cell in &part.cells {
        if cell.len() > part.width {
            return Err(Error::ShapeMismatch(format!("cell holds {} columns but C = {}", cell.len(), part.width)));
        }
        for &c in cell {
            if c >= num_columns || seen[c] {
                return Err(Error::ShapeMismatch(format!("column {c} missing from the field or listed twice")));
            }
            seen[c] = true;
        }
    }
    if full && seen.iter().any(|s| !s) {
        return Err(Error::ShapeMismatch("cell partition does not cover every column".into()));
    }
    Ok(())
}

/// Transposes a field into cells; every column must appear exactly once.
pub fn soa_to_cell<T: Real>(field: &FieldSoA<T>, part: &CellPartition) -> Result<Vec<CellBlock<T>>> {
    check_partition(field.num_columns(), part, true)?;
    Ok(gather(field, part))
}

/// Like [`soa_to_cell`] for a partition covering a subset of columns.
pub fn soa_to_cell_subset<T: Real>(field: &FieldSoA<T>, part: &CellPartition) -> Result<Vec<CellBlock<T>>> {
    check_partition(field.num_columns(), part, false)?;
    Ok(gather(field, part))
}

fn gather<T: Real>(field: &FieldSoA<T>, part: &CellPartition) -> Vec<CellBlock<T>> {
    let nf = field.components();
    part.cells
        .iter()
        .map(|cols| {
            let layers: Vec<usize> = cols.iter().map(|&c| field.layers(c)).collect();
            let mut b = CellBlock::zeros(part.width, nf, cols.clone(), layers);
            for (j, &c) in cols.iter().enumerate() {
                for l in 0..b.layers[j] {
                    for k in 0..6 {
                        for f in 0..nf {
                            b.set(l, k, f, j, field.get(f, k, c, l));
                        }
                    }
                }
            }
            b
        })
        .collect()
}

/// Inverse of [`soa_to_cell`]; the blocks must cover columns `0..n` once.
pub fn cell_to_soa<T: Real>(blocks: &[CellBlock<T>]) -> Result<FieldSoA<T>> {
    let n = blocks.iter().map(|b| b.columns.len()).sum::<usize>();
    let nf = blocks.first().map(|b| b.components).unwrap_or(1);
    let mut layers = vec![usize::MAX; n];
    for b in blocks {
        if b.components != nf {
            return Err(Error::ShapeMismatch(format!("blocks carry {} and {} components", nf, b.components)));
        }
        for (j, &c) in b.columns.iter().enumerate() {
            if c >= n || layers[c] != usize::MAX {
                return Err(Error::ShapeMismatch(format!("column {c} missing or duplicated")));
            }
            layers[c] = b.layers[j];
        }
    }
    let mut field = FieldSoA::zeros(nf, &layers);
    cell_to_soa_into(blocks, &mut field)?;
    Ok(field)
}

/// Scatters the non-padded block entries back into an existing field.
pub fn cell_to_soa_into<T: Real>(blocks: &[CellBlock<T>], field: &mut FieldSoA<T>) -> Result<()> {
    for b in blocks {
        if b.components != field.components() {
            return Err(Error::ShapeMismatch(format!(
                "block has {} components, field has {}",
                b.components,
                field.components()
            )));
        }
        for (j, &c) in b.columns.iter().enumerate() {
            if c >= field.num_columns() || field.layers(c) != b.layers[j] {
                return Err(Error::ShapeMismatch(format!("column {c} does not match the field")));
            }
            for l in 0..b.layers[j] {
                for k in 0..6 {
                    for f in 0..b.components {
                        field.set(f, k, c, l, b.get(l, k, f, j));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Worker tile shape for cell processing: `n` columns by `read_chunk` layers
/// per pass over a 128-lane group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockShape {
    pub n: usize,
    /// Layers read per column per pass, `min(floor(128 / n), L)`.
    pub read_chunk: usize,
    /// Columns written per row, `n`.
    pub write_chunk: usize,
    pub rows_per_pass: usize,
    pub passes: usize,
    /// Busy fraction of the 128 lanes in a full pass.
    pub utilization: f64,
}

pub const LANES: usize = 128;
pub const MAX_TILE_COLUMNS: usize = 32;

pub fn choose_block_shape(max_layers: usize, per_layer_rows: usize) -> BlockShape {
    choose_block_shape_for(max_layers, per_layer_rows, LANES)
}

/// Picks the tile width `n` (a divisor of `cell_width`, at most 32).
///
/// A column is kept in a single pass whenever some `n` allows it
/// (`floor(128 / n) >= L`). Among those, the rule maximizes lane
/// utilization, then `min(read_chunk, write_chunk)`, then prefers the larger
/// vertical extent.
pub fn choose_block_shape_for(max_layers: usize, per_layer_rows: usize, cell_width: usize) -> BlockShape {
    let l = max_layers.max(1);
    let cands: Vec<usize> = (1..=MAX_TILE_COLUMNS.min(cell_width.max(1))).filter(|n| cell_width.is_multiple_of(*n)).collect();
    let single: Vec<usize> = cands.iter().copied().filter(|&n| LANES / n >= l.min(LANES)).collect();
    let pool = if single.is_empty() { cands } else { single };
    let shape = |n: usize| {
        let vertical = LANES / n;
        let read = vertical.min(l);
        BlockShape {
            n,
            read_chunk: read,
            write_chunk: n,
            rows_per_pass: vertical * per_layer_rows,
            passes: l.div_ceil(vertical),
            utilization: (n * read) as f64 / LANES as f64,
        }
    };
    pool.into_iter()
        .map(shape)
        .max_by(|a, b| {
            a.utilization
                .partial_cmp(&b.utilization)
                .unwrap()
                .then(a.read_chunk.min(a.write_chunk).cmp(&b.read_chunk.min(b.write_chunk)))
                .then(b.n.cmp(&a.n))
        })
        .expect("n = 1 always qualifies")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two columns of two layers holding 0..23 in SoA order, transcribed in
    /// cell order: rows run layer then node, matrix columns are prism columns.
    #[test]
    fn golden_cell_ordering() {
        let field = FieldSoA::from_vec(1, &[2, 2], (0..24).map(|v| v as f64).collect()).unwrap();
        let blocks = soa_to_cell(&field, &CellPartition::all(2, 2)).unwrap();
        let golden = [
            0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0, //
            1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0, 21.0, 23.0,
        ];
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].data, golden);
    }

    #[test]
    fn zeros_stay_zero() {
        let field = FieldSoA::<f64>::zeros(2, &[3, 1, 2]);
        for b in soa_to_cell(&field, &CellPartition::all(3, 4)).unwrap() {
            assert!(b.data.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn single_column_single_layer() {
        let field = FieldSoA::from_vec(1, &[1], (0..6).map(|v| v as f32).collect()).unwrap();
        let b = soa_to_cell(&field, &CellPartition::all(1, 1)).unwrap();
        assert_eq!(b[0].data, field.data());
    }

    fn random_field<T: Real>(rng: &mut ChaCha8Rng, comps: usize, layers: &[usize]) -> FieldSoA<T> {
        let mut f = FieldSoA::zeros(comps, layers);
        for x in f.data_mut() {
            *x = T::from_f64(rng.gen_range(-1e3..1e3));
        }
        f
    }

    fn check_round_trip<T: Real>(seed: u64, width: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let ncol = rng.gen_range(1..40);
            let layers: Vec<usize> = (0..ncol).map(|_| rng.gen_range(1..9)).collect();
            let comps = rng.gen_range(1..3);
            let f = random_field::<T>(&mut rng, comps, &layers);
            let blocks = soa_to_cell(&f, &CellPartition::all(ncol, width)).unwrap();
            for b in &blocks {
                for (j, &l) in b.layers.iter().enumerate() {
                    for ll in l..b.max_layers {
                        for k in 0..6 {
                            for c in 0..comps {
                                assert_eq!(b.get(ll, k, c, j), T::zero());
                            }
                        }
                    }
                }
                for j in b.columns.len()..b.width {
                    for r in 0..b.rows() {
                        assert_eq!(b.data[r * b.width + j], T::zero());
                    }
                }
            }
            let back = cell_to_soa(&blocks).unwrap();
            assert_eq!(back.offsets(), f.offsets());
            assert!(back.data().iter().zip(f.data()).all(|(a, b)| a.bits() == b.bits()));
        }
    }

    #[test]
    fn round_trip_bitwise() {
        for width in [2, 4, 8, 128] {
            check_round_trip::<f64>(width as u64, width);
            check_round_trip::<f32>(width as u64 + 1000, width);
        }
    }

    #[test]
    fn unequal_layers_in_one_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_field::<f64>(&mut rng, 1, &[2, 3]);
        let blocks = soa_to_cell(&f, &CellPartition::all(2, 4)).unwrap();
        assert_eq!(blocks[0].max_layers, 3);
        assert_eq!(cell_to_soa(&blocks).unwrap(), f);
    }

    #[test]
    fn shape_errors() {
        let f = FieldSoA::<f64>::zeros(1, &[1, 1]);
        let dup = CellPartition { width: 2, cells: vec![vec![0, 0]] };
        assert!(matches!(soa_to_cell(&f, &dup), Err(Error::ShapeMismatch(_))));
        let partial = CellPartition { width: 2, cells: vec![vec![1]] };
        assert!(matches!(soa_to_cell(&f, &partial), Err(Error::ShapeMismatch(_))));
        let blocks = soa_to_cell(&f, &CellPartition::all(2, 2)).unwrap();
        let mut g = FieldSoA::<f64>::zeros(2, &[1, 1]);
        assert!(matches!(cell_to_soa_into(&blocks, &mut g), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn block_shape_examples() {
        let s = choose_block_shape(16, 6);
        assert_eq!((s.n, s.read_chunk, s.write_chunk, s.passes), (8, 16, 8, 1));
        assert_eq!(s.utilization, 1.0);
        let s = choose_block_shape(1, 6);
        assert_eq!(s.n, 32);
        assert_eq!(s.utilization, 0.25);
        assert_eq!(choose_block_shape(128, 6).n, 1);
        let s = choose_block_shape(200, 6);
        assert_eq!((s.n, s.passes), (1, 2));
        assert_eq!(choose_block_shape_for(16, 6, 4).n, 4);
    }

    proptest! {
        #[test]
        fn soa_address_is_lexicographically_monotone(layers in prop::collection::vec(1usize..6, 1..8), comps in 1usize..3) {
            let f = FieldSoA::<f64>::zeros(comps, &layers);
            let mut last = None;
            for c0 in 0..comps { for k in 0..6 { for c in 0..layers.len() { for l in 0..layers[c] {
                let a = f.index(c0, k, c, l);
                if let Some(p) = last { prop_assert!(a > p); }
                last = Some(a);
            }}}}
            prop_assert_eq!(last.unwrap() + 1, f.data().len());
        }

        #[test]
        fn block_shape_invariants(l in 1usize..300, w in prop::sample::select(vec![1usize, 2, 4, 8, 16, 32, 64, 128])) {
            let s = choose_block_shape_for(l, 6, w);
            prop_assert!(s.n >= 1 && s.n <= 32);
            prop_assert_eq!(w % s.n, 0);
            prop_assert!(s.utilization > 0.0 && s.utilization <= 1.0);
        }
    }
}
