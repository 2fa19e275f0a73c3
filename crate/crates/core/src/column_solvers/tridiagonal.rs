use crate::error::{Error, Result};
use crate::real::Real;

/// Thomas algorithm. `lower[0]` and `upper[n - 1]` are ignored.
pub fn solve_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::ShapeMismatch("tridiagonal bands and rhs must have equal length".into()));
    }
    let mut c = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];
    let mut prev_c = T::zero();
    let mut prev_x = T::zero();
    for i in 0..n {
        let l = if i == 0 { T::zero() } else { lower[i] };
        let d = diag[i] - l * prev_c;
        if d == T::zero() || !d.is_finite() {
            return Err(Error::ZeroPivot { layer: i, node: 0 });
        }
        c[i] = if i + 1 < n { upper[i] / d } else { T::zero() };
        x[i] = (rhs[i] - l * prev_x) / d;
        prev_c = c[i];
        prev_x = x[i];
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] = x[i] - c[i] * x[i + 1];
    }
    Ok(x)
}
