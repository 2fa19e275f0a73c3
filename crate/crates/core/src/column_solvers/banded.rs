//! Block-banded column systems and their in-place elimination.
//!
//! Layer `k` owns a diagonal block `D_k` (6x6), an upper coupling `U_k`
//! (its top three rows against the six nodes of layer `k - 1`) and a lower
//! coupling `L_k` (its bottom three rows against layer `k + 1`).
//!
//! Elimination keeps one factored diagonal block in a 36-entry buffer. For
//! each layer it first removes `U_k` against the buffered factor of `D_{k-1}`,
//! updating the top rows of `D_k` through `L_{k-1}`, then loads and factors
//! `D_k`, carrying the row operations into `L_k`. No pivoting is done.

use crate::error::{Error, Result};
use crate::layout::CellBlock;
use crate::real::Real;

/// Storage access used by the elimination kernel.
pub trait BandAccess<T> {
    fn layers(&self) -> usize;
    fn diag(&mut self, k: usize, i: usize, j: usize) -> T;
    fn set_diag(&mut self, k: usize, i: usize, j: usize, v: T);
    /// Entry `(i, j)` of `U_k`, `i < 3`.
    fn upper(&mut self, k: usize, i: usize, j: usize) -> T;
    fn set_upper(&mut self, k: usize, i: usize, j: usize, v: T);
    /// Entry `(i, j)` of `L_k`, row `i + 3` of layer `k`.
    fn lower(&mut self, k: usize, i: usize, j: usize) -> T;
    fn set_lower(&mut self, k: usize, i: usize, j: usize, v: T);
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedColumnMatrix<T> {
    pub diag: Vec<[T; 36]>,
    pub upper: Vec<[T; 18]>,
    pub lower: Vec<[T; 18]>,
}

impl<T: Real> BandedColumnMatrix<T> {
    pub fn zeros(layers: usize) -> Self {
        BandedColumnMatrix {
            diag: vec![[T::zero(); 36]; layers],
            upper: vec![[T::zero(); 18]; layers],
            lower: vec![[T::zero(); 18]; layers],
        }
    }

    pub fn identity(layers: usize) -> Self {
        let mut a = Self::zeros(layers);
        for d in &mut a.diag {
            for i in 0..6 {
                d[i * 6 + i] = T::one();
            }
        }
        a
    }

    pub fn num_layers(&self) -> usize {
        self.diag.len()
    }

    /// Adds `v` at row (layer `kr`, node `i`), column (layer `kc`, node `j`).
    /// Entries outside the band pattern are rejected.
    pub fn add(&mut self, kr: usize, i: usize, kc: usize, j: usize, v: T) {
        if kc == kr {
            self.diag[kr][i * 6 + j] = self.diag[kr][i * 6 + j] + v;
        } else if kc + 1 == kr && i < 3 {
            self.upper[kr][i * 6 + j] = self.upper[kr][i * 6 + j] + v;
        } else if kc == kr + 1 && i >= 3 {
            self.lower[kr][(i - 3) * 6 + j] = self.lower[kr][(i - 3) * 6 + j] + v;
        } else {
            panic!("entry ({kr},{i}) x ({kc},{j}) is outside the column band");
        }
    }

    pub fn get(&self, kr: usize, i: usize, kc: usize, j: usize) -> T {
        if kc == kr {
            self.diag[kr][i * 6 + j]
        } else if kc + 1 == kr && i < 3 {
            self.upper[kr][i * 6 + j]
        } else if kc == kr + 1 && i >= 3 {
            self.lower[kr][(i - 3) * 6 + j]
        } else {
            T::zero()
        }
    }

    /// Product with a column vector ordered layer, node, component.
    pub fn matvec(&self, x: &[T], comps: usize) -> Vec<T> {
        let l = self.num_layers();
        let mut y = vec![T::zero(); x.len()];
        for kr in 0..l {
            for i in 0..6 {
                for kc in kr.saturating_sub(1)..(kr + 2).min(l) {
                    for j in 0..6 {
                        let a = self.get(kr, i, kc, j);
                        if a != T::zero() {
                            for f in 0..comps {
                                y[(kr * 6 + i) * comps + f] = y[(kr * 6 + i) * comps + f] + a * x[(kc * 6 + j) * comps + f];
                            }
                        }
                    }
                }
            }
        }
        y
    }

    /// Dense row-major copy, for comparisons.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = 6 * self.num_layers();
        let mut d = vec![0.0; n * n];
        for kr in 0..self.num_layers() {
            for i in 0..6 {
                for kc in kr.saturating_sub(1)..(kr + 2).min(self.num_layers()) {
                    for j in 0..6 {
                        d[(kr * 6 + i) * n + kc * 6 + j] = self.get(kr, i, kc, j).to_f64();
                    }
                }
            }
        }
        d
    }
}

impl<T: Real> BandAccess<T> for BandedColumnMatrix<T> {
    fn layers(&self) -> usize {
        self.diag.len()
    }
    #[inline]
    fn diag(&mut self, k: usize, i: usize, j: usize) -> T {
        self.diag[k][i * 6 + j]
    }
    #[inline]
    fn set_diag(&mut self, k: usize, i: usize, j: usize, v: T) {
        self.diag[k][i * 6 + j] = v;
    }
    #[inline]
    fn upper(&mut self, k: usize, i: usize, j: usize) -> T {
        self.upper[k][i * 6 + j]
    }
    #[inline]
    fn set_upper(&mut self, k: usize, i: usize, j: usize, v: T) {
        self.upper[k][i * 6 + j] = v;
    }
    #[inline]
    fn lower(&mut self, k: usize, i: usize, j: usize) -> T {
        self.lower[k][i * 6 + j]
    }
    #[inline]
    fn set_lower(&mut self, k: usize, i: usize, j: usize, v: T) {
        self.lower[k][i * 6 + j] = v;
    }
}

/// Factors `a` in place and solves for `rhs` (ordered layer, node,
/// component). The only matrix working storage is one `[T; 36]` buffer.
pub fn factor_solve<T: Real, A: BandAccess<T>>(a: &mut A, rhs: &mut [T], comps: usize) -> Result<()> {
    let nl = a.layers();
    let r = |k: usize, i: usize, f: usize| (k * 6 + i) * comps + f;
    let mut buf = [T::zero(); 36];
    for k in 0..nl {
        if k > 0 {
            for i in 0..3 {
                for p in 0..6 {
                    let m = a.upper(k, i, p) / buf[p * 6 + p];
                    if m == T::zero() {
                        continue;
                    }
                    for q in p + 1..6 {
                        let v = a.upper(k, i, q) - m * buf[p * 6 + q];
                        a.set_upper(k, i, q, v);
                    }
                    if p >= 3 {
                        for q in 0..6 {
                            let v = a.diag(k, i, q) - m * a.lower(k - 1, p - 3, q);
                            a.set_diag(k, i, q, v);
                        }
                    }
                    for f in 0..comps {
                        rhs[r(k, i, f)] = rhs[r(k, i, f)] - m * rhs[r(k - 1, p, f)];
                    }
                    a.set_upper(k, i, p, m);
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                buf[i * 6 + j] = a.diag(k, i, j);
            }
        }
        for p in 0..6 {
            let piv = buf[p * 6 + p];
            if piv == T::zero() || !piv.is_finite() {
                return Err(Error::ZeroPivot { layer: k, node: p });
            }
            for i in p + 1..6 {
                let m = buf[i * 6 + p] / piv;
                if m == T::zero() {
                    continue;
                }
                buf[i * 6 + p] = m;
                for q in p + 1..6 {
                    buf[i * 6 + q] = buf[i * 6 + q] - m * buf[p * 6 + q];
                }
                if i >= 3 && p >= 3 && k + 1 < nl {
                    for q in 0..6 {
                        let v = a.lower(k, i - 3, q) - m * a.lower(k, p - 3, q);
                        a.set_lower(k, i - 3, q, v);
                    }
                }
                for f in 0..comps {
                    rhs[r(k, i, f)] = rhs[r(k, i, f)] - m * rhs[r(k, p, f)];
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                a.set_diag(k, i, j, buf[i * 6 + j]);
            }
        }
    }
    for k in (0..nl).rev() {
        if k + 1 < nl {
            for i in 3..6 {
                for q in 0..6 {
                    let c = a.lower(k, i - 3, q);
                    for f in 0..comps {
                        rhs[r(k, i, f)] = rhs[r(k, i, f)] - c * rhs[r(k + 1, q, f)];
                    }
                }
            }
        }
        for i in (0..6).rev() {
            let d = a.diag(k, i, i);
            for f in 0..comps {
                let mut s = rhs[r(k, i, f)];
                for q in i + 1..6 {
                    s = s - a.diag(k, i, q) * rhs[r(k, q, f)];
                }
                rhs[r(k, i, f)] = s / d;
            }
        }
    }
    Ok(())
}

/// Solves `A x = rhs` for one column; `A` is consumed by the factorization.
pub fn solve_banded_column<T: Real>(a: &mut BandedColumnMatrix<T>, rhs: &mut [T], comps: usize) -> Result<()> {
    if rhs.len() != 6 * a.num_layers() * comps {
        return Err(Error::ShapeMismatch(format!(
            "rhs has {} values for {} layers x {} components",
            rhs.len(),
            a.num_layers(),
            comps
        )));
    }
    factor_solve(a, rhs, comps)
}

/// Batched solve over cells; `mats` is indexed by global column.
pub fn solve_banded_cells<T: Real>(mats: &mut [BandedColumnMatrix<T>], blocks: &mut [CellBlock<T>]) -> Result<()> {
    let mut col = Vec::new();
    for b in blocks.iter_mut() {
        let (w, nf) = (b.width, b.components);
        for j in 0..b.columns.len() {
            let c = b.columns[j];
            let n = b.layers[j] * 6 * nf;
            col.clear();
            col.extend((0..n).map(|r| b.data[r * w + j]));
            solve_banded_column(&mut mats[c], &mut col, nf).map_err(|e| e.at(format!("column {c}")))?;
            for (r, &v) in col.iter().enumerate() {
                b.data[r * w + j] = v;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_dominant(rng: &mut ChaCha8Rng, layers: usize) -> BandedColumnMatrix<f64> {
        let mut a = BandedColumnMatrix::zeros(layers);
        for k in 0..layers {
            for i in 0..6 {
                let mut off = 0.0;
                for kc in k.saturating_sub(1)..(k + 2).min(layers) {
                    for j in 0..6 {
                        let in_band = kc == k || (kc + 1 == k && i < 3) || (kc == k + 1 && i >= 3);
                        if in_band && !(kc == k && i == j) {
                            let v = rng.gen_range(-1.0..1.0);
                            a.add(k, i, kc, j, v);
                            off += f64::abs(v);
                        }
                    }
                }
                a.add(k, i, k, i, off + rng.gen_range(0.5..2.0));
            }
        }
        a
    }

    #[test]
    fn identity_returns_rhs() {
        let mut a = BandedColumnMatrix::<f64>::identity(4);
        let rhs: Vec<f64> = (0..48).map(|i| i as f64 * 0.5 - 3.0).collect();
        let mut x = rhs.clone();
        solve_banded_column(&mut a, &mut x, 2).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for layers in [1, 2, 5, 32] {
            for comps in [1, 2] {
                let a = random_dominant(&mut rng, layers);
                let rhs: Vec<f64> = (0..6 * layers * comps).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = 6 * layers;
                let dense = DMatrix::from_row_slice(n, n, &a.to_dense()).lu();
                let mut x = rhs.clone();
                solve_banded_column(&mut a.clone(), &mut x, comps).unwrap();
                for f in 0..comps {
                    let b = DVector::from_iterator(n, (0..n).map(|i| rhs[i * comps + f]));
                    let y = dense.solve(&b).unwrap();
                    let err: f64 = (0..n).map(|i| (x[i * comps + f] - y[i]).powi(2)).sum::<f64>().sqrt();
                    assert!(err / y.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut a = BandedColumnMatrix::<f64>::identity(3);
        a.diag[1][2 * 6 + 2] = 0.0;
        let mut x = vec![1.0; 18];
        assert_eq!(solve_banded_column(&mut a, &mut x, 1), Err(Error::ZeroPivot { layer: 1, node: 2 }));
    }

    #[test]
    fn solve_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_dominant(&mut rng, 6);
        let p: Vec<f64> = (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (al, be) = (0.7, -1.3);
        let mut comb: Vec<f64> = p.iter().zip(&q).map(|(x, y)| al * x + be * y).collect();
        let (mut xp, mut xq) = (p.clone(), q.clone());
        solve_banded_column(&mut a.clone(), &mut xp, 1).unwrap();
        solve_banded_column(&mut a.clone(), &mut xq, 1).unwrap();
        solve_banded_column(&mut a.clone(), &mut comb, 1).unwrap();
        for i in 0..36 {
            assert!((comb[i] - (al * xp[i] + be * xq[i])).abs() < 1e-12);
        }
    }
}
