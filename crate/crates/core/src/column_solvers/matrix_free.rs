//! Matrix-free recursions for the `D_vu` and `D_vd` systems.
//!
//! Per layer, with `F~ = M_h^-1 F` split into top and bottom face rows:
//!
//! * `D_vu` (top-down): `s += F~_t + F~_b`, `r_t = -s + 2 F~_b`, `r_b = -s`.
//! * `D_vd` (bottom-up): `s += F~_t + F~_b`, `w_t = s`, `w_b = s - 2 F~_t`.

use crate::error::{Error, Result};
use crate::layout::CellBlock;
use crate::real::Real;

#[inline]
fn mass_inv<T: Real>(j2d: T, v: [T; 3]) -> [T; 3] {
    let c = T::from_f64(6.0) / j2d;
    let three = T::from_f64(3.0);
    [
        c * (three * v[0] - v[1] - v[2]),
        c * (three * v[1] - v[0] - v[2]),
        c * (three * v[2] - v[0] - v[1]),
    ]
}

fn check_j2d(col: usize, j2d: f64) -> Result<()> {
    if j2d > 0.0 {
        Ok(())
    } else {
        Err(Error::SingularMass { col, j2d })
    }
}

/// Solves `D_vu r = F` in place for one column stored as `6 * layers * comps`
/// values ordered layer, node, component.
pub fn solve_r_column<T: Real>(vals: &mut [T], layers: usize, comps: usize, j2d: f64) -> Result<()> {
    check_j2d(0, j2d)?;
    r_column(layers, comps, T::from_f64(j2d), |l, k, f| (l * 6 + k) * comps + f, vals);
    Ok(())
}

/// Solves `D_vd w = F` in place for one column.
pub fn solve_w_column<T: Real>(vals: &mut [T], layers: usize, comps: usize, j2d: f64) -> Result<()> {
    check_j2d(0, j2d)?;
    w_column(layers, comps, T::from_f64(j2d), |l, k, f| (l * 6 + k) * comps + f, vals);
    Ok(())
}

#[inline]
fn r_column<T: Real>(layers: usize, comps: usize, j2d: T, idx: impl Fn(usize, usize, usize) -> usize, v: &mut [T]) {
    for f in 0..comps {
        let mut s = [T::zero(); 3];
        for l in 0..layers {
            let top = mass_inv(j2d, std::array::from_fn(|i| v[idx(l, i, f)]));
            let bot = mass_inv(j2d, std::array::from_fn(|i| v[idx(l, i + 3, f)]));
            for i in 0..3 {
                s[i] = s[i] + top[i] + bot[i];
                v[idx(l, i, f)] = -s[i] + bot[i] + bot[i];
                v[idx(l, i + 3, f)] = -s[i];
            }
        }
    }
}

#[inline]
fn w_column<T: Real>(layers: usize, comps: usize, j2d: T, idx: impl Fn(usize, usize, usize) -> usize, v: &mut [T]) {
    for f in 0..comps {
        let mut s = [T::zero(); 3];
        for l in (0..layers).rev() {
            let top = mass_inv(j2d, std::array::from_fn(|i| v[idx(l, i, f)]));
            let bot = mass_inv(j2d, std::array::from_fn(|i| v[idx(l, i + 3, f)]));
            for i in 0..3 {
                s[i] = s[i] + top[i] + bot[i];
                v[idx(l, i, f)] = s[i];
                v[idx(l, i + 3, f)] = s[i] - top[i] - top[i];
            }
        }
    }
}

/// Batched [`solve_r_column`] over cells; `j2d` is indexed by global column.
/// Padding is never read or written.
pub fn solve_r_cells<T: Real>(blocks: &mut [CellBlock<T>], j2d: &[f64]) -> Result<()> {
    for b in blocks.iter_mut() {
        let (w, nf) = (b.width, b.components);
        for j in 0..b.columns.len() {
            let col = b.columns[j];
            check_j2d(col, j2d[col])?;
            let l = b.layers[j];
            r_column(l, nf, T::from_f64(j2d[col]), |l, k, f| ((l * 6 + k) * nf + f) * w + j, &mut b.data);
        }
    }
    Ok(())
}

/// Batched [`solve_w_column`] over cells.
pub fn solve_w_cells<T: Real>(blocks: &mut [CellBlock<T>], j2d: &[f64]) -> Result<()> {
    for b in blocks.iter_mut() {
        let (w, nf) = (b.width, b.components);
        for j in 0..b.columns.len() {
            let col = b.columns[j];
            check_j2d(col, j2d[col])?;
            let l = b.layers[j];
            w_column(l, nf, T::from_f64(j2d[col]), |l, k, f| ((l * 6 + k) * nf + f) * w + j, &mut b.data);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column_solvers::{assemble_dense_oracle, ColumnSystemKind};
    use crate::layout::{soa_to_cell, CellPartition, FieldSoA};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(kind: ColumnSystemKind, layers: usize, j2d: f64, rhs: &[f64]) -> Vec<f64> {
        let a = assemble_dense_oracle(kind, layers, j2d);
        let m = DMatrix::from_row_slice(a.n, a.n, &a.data);
        m.lu().solve(&DVector::from_column_slice(rhs)).unwrap().iter().copied().collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn three_layers_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [ColumnSystemKind::Dvu, ColumnSystemKind::Dvd] {
            let rhs: Vec<f64> = (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut x = rhs.clone();
            match kind {
                ColumnSystemKind::Dvu => solve_r_column(&mut x, 3, 1, 24.0).unwrap(),
                _ => solve_w_column(&mut x, 3, 1, 24.0).unwrap(),
            }
            assert!(rel_err(&x, &dense_solve(kind, 3, 24.0, &rhs)) < 1e-12);
        }
    }

    #[test]
    fn many_layers_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for layers in [1, 2, 7, 64] {
            for _ in 0..10 {
                let j2d = rng.gen_range(0.1..10.0);
                let rhs: Vec<f64> = (0..6 * layers).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut r = rhs.clone();
                solve_r_column(&mut r, layers, 1, j2d).unwrap();
                assert!(rel_err(&r, &dense_solve(ColumnSystemKind::Dvu, layers, j2d, &rhs)) < 1e-11);
                let mut w = rhs.clone();
                solve_w_column(&mut w, layers, 1, j2d).unwrap();
                assert!(rel_err(&w, &dense_solve(ColumnSystemKind::Dvd, layers, j2d, &rhs)) < 1e-11);
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut r = vec![0.0f64; 6 * 5 * 2];
        solve_r_column(&mut r, 5, 2, 1.0).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn singular_mass() {
        let mut r = vec![0.0f64; 6];
        assert!(matches!(solve_r_column(&mut r, 1, 1, 0.0), Err(Error::SingularMass { .. })));
    }

    #[test]
    fn cells_match_per_column_and_keep_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layers = [3, 1, 4, 2, 4];
        let mut f = FieldSoA::<f64>::zeros(2, &layers);
        f.data_mut().iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        let j2d: Vec<f64> = (0..5).map(|_| rng.gen_range(0.5..2.0)).collect();
        let mut blocks = soa_to_cell(&f, &CellPartition::all(5, 4)).unwrap();
        solve_w_cells(&mut blocks, &j2d).unwrap();
        for b in &blocks {
            for (j, &c) in b.columns.iter().enumerate() {
                let l = layers[c];
                let mut col: Vec<f64> = (0..l * 12).map(|i| f.get(i % 2, (i / 2) % 6, c, i / 12)).collect();
                solve_w_column(&mut col, l, 2, j2d[c]).unwrap();
                for i in 0..l * 12 {
                    assert_eq!(b.get(i / 12, (i / 2) % 6, i % 2, j), col[i]);
                }
                for ll in l..b.max_layers {
                    for k in 0..6 {
                        assert_eq!(b.get(ll, k, 0, j), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn single_precision_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for layers in [1, 16, 64] {
            let rhs: Vec<f64> = (0..6 * layers).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut r: Vec<f32> = rhs.iter().map(|&x| x as f32).collect();
            solve_r_column(&mut r, layers, 1, 1.0).unwrap();
            let r: Vec<f64> = r.iter().map(|&x| x as f64).collect();
            assert!(rel_err(&r, &dense_solve(ColumnSystemKind::Dvu, layers, 1.0, &rhs)) < 1e-4);
        }
    }
}
