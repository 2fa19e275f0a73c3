//! Shared inputs for the criterion benches.

use prismdg_core::column_solvers::BandedColumnMatrix;
use prismdg_core::FieldSoA;

/// Deterministic field with `layers` layers in every column.
pub fn filled_field(components: usize, columns: usize, layers: usize) -> FieldSoA<f64> {
    let mut f = FieldSoA::zeros(components, &vec![layers; columns]);
    for (i, v) in f.data_mut().iter_mut().enumerate() {
        *v = (i as f64 * 0.618_034).fract() - 0.5;
    }
    f
}

/// Block-tridiagonal column matrix with a dominant diagonal.
pub fn dominant_banded(layers: usize) -> BandedColumnMatrix<f64> {
    let mut a = BandedColumnMatrix::zeros(layers);
    for k in 0..layers {
        for i in 0..6 {
            for j in 0..6 {
                a.add(k, i, k, j, if i == j { 8.0 } else { 0.3 });
            }
            if k > 0 && i < 3 {
                for j in 0..6 {
                    a.add(k, i, k - 1, j, -0.2);
                }
            }
            if k + 1 < layers && i >= 3 {
                for j in 0..6 {
                    a.add(k, i, k + 1, j, -0.2);
                }
            }
        }
    }
    a
}
