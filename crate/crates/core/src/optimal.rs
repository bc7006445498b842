//! Noise correlation that minimizes the total variance of the parameters of
//! the last basis function when `n_1 + 1 = n_2 = … = n_m`.
//!
//! The noise is written with an upper-triangular factor `Λ = B Bᵀ` and
//!
//! ```text
//! B = [ η  pᵀ ]
//!     [ 0  M  ]
//! ```
//!
//! so that `Λ_{2:m|1} = M (I − p pᵀ / λ_1) Mᵀ` with `λ_1 = η² + ‖p‖²`.
//! This is the Sherman–Morrison form; it is the one implemented here.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::noise::NoiseCovariance;

/// Below this `λ_1` the first row of the factor is considered zero.
pub const DEGENERATE_LAMBDA1: f64 = 1e-14;
/// Relative gap under which two squared singular values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Upper-triangular `B` with `Λ = B Bᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperFactor {
    b: DMatrix<f64>,
}

impl UpperFactor {
    /// Entries below the diagonal must be zero. `η = 0` is accepted.
    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        let m = b.nrows();
        if b.ncols() != m || m < 2 {
            return Err(Error::DimensionMismatch(format!(
                "upper factor must be square with m ≥ 2, got {}x{}",
                m,
                b.ncols()
            )));
        }
        for i in 0..m {
            for j in 0..i {
                if b[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) below the diagonal is nonzero"
                    )));
                }
            }
        }
        Ok(UpperFactor { b })
    }

    /// `[η pᵀ; 0 M]`.
    pub fn from_parts(eta: f64, p: &DVector<f64>, m_block: &DMatrix<f64>) -> Result<Self> {
        let n = m_block.nrows();
        if m_block.ncols() != n || p.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "p has {} entries for a {}x{} M",
                p.len(),
                n,
                m_block.ncols()
            )));
        }
        let mut b = DMatrix::zeros(n + 1, n + 1);
        b[(0, 0)] = eta;
        b.view_mut((0, 1), (1, n)).copy_from(&p.transpose());
        b.view_mut((1, 1), (n, n)).copy_from(m_block);
        Self::new(b)
    }

    /// Upper factor of an SPD covariance, obtained by factoring with the
    /// channel order reversed.
    pub fn of(noise: &NoiseCovariance) -> Result<Self> {
        let m = noise.dim();
        let rev: Vec<usize> = (0..m).rev().collect();
        let l = noise.permuted(&rev)?.cholesky().matrix().clone();
        Self::new(DMatrix::from_fn(m, m, |i, j| l[(m - 1 - i, m - 1 - j)]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn eta(&self) -> f64 {
        self.b[(0, 0)]
    }

    pub fn p(&self) -> DVector<f64> {
        self.b.row(0).columns(1, self.b.ncols() - 1).transpose()
    }

    pub fn m_block(&self) -> DMatrix<f64> {
        let n = self.b.nrows() - 1;
        self.b.view((1, 1), (n, n)).into_owned()
    }

    /// `λ_1 = ‖b_1‖²`.
    pub fn lambda1(&self) -> f64 {
        self.b.row(0).norm_squared()
    }

    /// `Λ = B Bᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.b * self.b.transpose()
    }
}

/// `Λ_{2:m|1} = M (I − p pᵀ / λ_1) Mᵀ`.
pub fn conditional_cov_from_upper(factor: &UpperFactor) -> Result<DMatrix<f64>> {
    let lambda1 = factor.lambda1();
    if lambda1 < DEGENERATE_LAMBDA1 {
        return Err(Error::DegenerateFactor(lambda1));
    }
    let m = factor.m_block();
    let p = factor.p();
    let mp = &m * &p;
    let out = &m * m.transpose() - &mp * mp.transpose() / lambda1;
    Ok(crate::linalg::symmetrized(out))
}

/// `Tvar = Tr Λ_{2:m|1} / σ²`.
pub fn total_variance(noise: &NoiseCovariance, sigma2: f64) -> Result<f64> {
    if noise.dim() < 2 {
        return Err(Error::DimensionMismatch(
            "total variance needs at least two outputs".into(),
        ));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "input variance must be positive, got {sigma2}"
        )));
    }
    Ok(noise.conditional_block_cov(1, 1)?.trace() / sigma2)
}

/// Unit right-singular vector of `M` for its largest singular value.
///
/// When the largest singular value is repeated, the vector in the tied
/// subspace with the largest first component is returned (falling back to
/// later coordinates when that is zero). The first nonzero entry is positive.
pub fn leading_right_singular_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.ncols();
    let gram = m.transpose() * m;
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.max();
    let scale = top.abs().max(f64::MIN_POSITIVE);
    let tied: Vec<usize> = (0..n)
        .filter(|&c| (top - eig.eigenvalues[c]) <= TIE_TOLERANCE * scale)
        .collect();
    let mut v = if tied.len() == 1 {
        eig.eigenvectors.column(tied[0]).into_owned()
    } else {
        let basis = DMatrix::from_fn(n, tied.len(), |r, c| eig.eigenvectors[(r, tied[c])]);
        let mut chosen = None;
        for axis in 0..n {
            let proj = &basis * basis.row(axis).transpose();
            if proj.norm() > 1e-8 {
                chosen = Some(proj.normalize());
                break;
            }
        }
        chosen.expect("tied eigenvectors span a nonzero subspace")
    };
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v = -v;
        }
    }
    v
}

/// `b_1* = [0, √λ_1 v_1]`: maximizes `‖M p‖²` under `‖p‖² = λ_1` and hence
/// minimizes the total variance. The resulting `Λ` is singular.
pub fn optimal_first_row(m: &DMatrix<f64>, lambda1: f64) -> Result<DVector<f64>> {
    optimal_first_row_regularized(m, lambda1, 0.0)
}

/// `b_1* = [η, √(λ_1 − η²) v_1]`, which keeps `Λ` positive definite for `η ≠ 0`.
pub fn optimal_first_row_regularized(m: &DMatrix<f64>, lambda1: f64, eta: f64) -> Result<DVector<f64>> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "M must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !(lambda1 > 0.0 && lambda1.is_finite()) {
        return Err(Error::InvalidArgument(format!("λ1 must be positive, got {lambda1}")));
    }
    let eta2 = eta * eta;
    if eta2 > lambda1 {
        return Err(Error::EtaTooLarge { eta2, lambda1 });
    }
    let v = leading_right_singular_vector(m) * (lambda1 - eta2).sqrt();
    let mut row = DVector::zeros(v.len() + 1);
    row[0] = eta;
    row.rows_mut(1, v.len()).copy_from(&v);
    Ok(row)
}

/// Checks the order pattern `n_1 + 1 = n_2 = … = n_m` the optimum assumes.
pub fn check_order_pattern(orders: &[usize]) -> Result<()> {
    let ok = orders.len() >= 2 && orders[1..].iter().all(|&n| n == orders[1]) && orders[0] + 1 == orders[1];
    if ok {
        Ok(())
    } else {
        Err(Error::OrderPatternUnsupported(orders.to_vec()))
    }
}
