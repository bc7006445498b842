//! Small dense helpers shared by the covariance routines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot floor for the Cholesky factorization.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Lower Cholesky factor `L` with `L Lᵀ = a` and strictly positive diagonal.
///
/// Pivots at or below `PIVOT_TOLERANCE · max(diag a)` are rejected.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max);
    let floor = PIVOT_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the lower factor.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut z = b.clone();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = cholesky_lower(a)?;
    let n = a.nrows();
    let mut inv = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        inv.set_column(j, &cholesky_solve(&l, &e));
    }
    Ok(symmetrized(inv))
}

/// Largest absolute entry of `a - aᵀ`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Rows and columns of `a` reordered so that entry `(r, c)` of the result is
/// `a[(perm[r], perm[c])]`.
pub fn permute_symmetric(a: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    DMatrix::from_fn(n, n, |r, c| a[(perm[r], perm[c])])
}

/// Principal sub-matrix on the given index set.
pub fn principal(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    permute_symmetric(a, idx)
}

/// Stable sort permutation: `perm[r]` is the original index placed at rank `r`.
pub fn stable_order(keys: &[usize]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..keys.len()).collect();
    perm.sort_by_key(|&i| keys[i]);
    perm
}

/// `(a + aᵀ) / 2`.
pub fn symmetrized(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}
