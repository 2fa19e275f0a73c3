use super::ColumnSystemKind;
use crate::dg_core::mass_h;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    fn add_block(&mut self, bi: usize, bj: usize, scale: f64, m: &[[f64; 3]; 3]) {
        for i in 0..3 {
            for j in 0..3 {
                self.add(3 * bi + i, 3 * bj + j, scale * m[i][j]);
            }
        }
    }
}

/// Dense matrix of a scalar column system of `layers` layers.
///
/// `Dvu` and `Dvd` continue the three-layer block patterns to any depth
/// with the 2D mass matrix of `j2d`. `BandedImplicit` and `Tridiagonal`
/// have no fixed values; their structural pattern is returned with ones
/// where entries may be nonzero (`Tridiagonal` is over `layers` unknowns).
pub fn assemble_dense_oracle(kind: ColumnSystemKind, layers: usize, j2d: f64) -> DenseMatrix {
    let mh = mass_h(j2d);
    match kind {
        ColumnSystemKind::Dvu => {
            let mut a = DenseMatrix::zeros(6 * layers);
            for l in 0..layers {
                let (t, b) = (2 * l, 2 * l + 1);
                if l > 0 {
                    a.add_block(t, t - 1, 1.0, &mh);
                }
                a.add_block(t, t, -0.5, &mh);
                a.add_block(t, b, -0.5, &mh);
                a.add_block(b, t, 0.5, &mh);
                a.add_block(b, b, -0.5, &mh);
            }
            a
        }
        ColumnSystemKind::Dvd => {
            let mut a = DenseMatrix::zeros(6 * layers);
            for l in 0..layers {
                let (t, b) = (2 * l, 2 * l + 1);
                a.add_block(t, t, 0.5, &mh);
                a.add_block(t, b, -0.5, &mh);
                a.add_block(b, t, 0.5, &mh);
                a.add_block(b, b, 0.5, &mh);
                if l + 1 < layers {
                    a.add_block(b, b + 1, -1.0, &mh);
                }
            }
            a
        }
        ColumnSystemKind::BandedImplicit => {
            let mut a = DenseMatrix::zeros(6 * layers);
            for l in 0..layers {
                for i in 0..6 {
                    for j in 0..6 {
                        a.add(6 * l + i, 6 * l + j, 1.0);
                        if l > 0 && i < 3 {
                            a.add(6 * l + i, 6 * (l - 1) + j, 1.0);
                        }
                        if l + 1 < layers && i >= 3 {
                            a.add(6 * l + i, 6 * (l + 1) + j, 1.0);
                        }
                    }
                }
            }
            a
        }
        ColumnSystemKind::Tridiagonal => {
            let mut a = DenseMatrix::zeros(layers);
            for i in 0..layers {
                for j in i.saturating_sub(1)..(i + 2).min(layers) {
                    a.add(i, j, 1.0);
                }
            }
            a
        }
    }
}
