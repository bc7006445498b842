//! Spatial noise covariance, its lower Cholesky factor and the conditional
//! (non-estimable) variances derived from it.
//!
//! Module indices are zero based. Conditioning is expressed as a count of
//! leading channels: `given = j` conditions on `e_0, …, e_{j-1}`, so
//! `given = 0` conditions on nothing and returns the plain variance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance on `Λ - Λᵀ`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Entries of the Cholesky factor below `ZERO_TOLERANCE · max|γ|` count as zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// Lower-triangular factor `Γ` with positive diagonal, `Γ Γᵀ = Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyLower(DMatrix<f64>);

impl CholeskyLower {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Entry `γ_ij`.
    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
    }

    /// Whether `γ_ij` is numerically zero.
    pub fn is_zero(&self, i: usize, j: usize) -> bool {
        self.0[(i, j)].abs() < ZERO_TOLERANCE * self.max_abs()
    }
}

/// Positive-definite spatial covariance `Λ` of the output noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    lambda: DMatrix<f64>,
    chol: CholeskyLower,
}

impl NoiseCovariance {
    /// Validates symmetry and positive definiteness of `lambda`.
    pub fn new(lambda: DMatrix<f64>) -> Result<Self> {
        if lambda.nrows() == 0 || lambda.nrows() != lambda.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "noise covariance must be square and non-empty, got {}x{}",
                lambda.nrows(),
                lambda.ncols()
            )));
        }
        if lambda.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("noise covariance has non-finite entries".into()));
        }
        let scale = lambda.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        let asym = linalg::asymmetry(&lambda);
        if asym > SYMMETRY_TOLERANCE * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let lambda = linalg::symmetrized(lambda);
        let chol = CholeskyLower(linalg::cholesky_lower(&lambda)?);
        Ok(NoiseCovariance { lambda, chol })
    }

    /// `Λ` given as a row-major list of `m²` numbers.
    pub fn from_row_major(m: usize, values: &[f64]) -> Result<Self> {
        if values.len() != m * m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {m}x{m} matrix, got {}",
                m * m,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(m, m, values))
    }

    /// Builds `Λ = F Fᵀ` from any square factor (lower, upper or dense).
    pub fn from_factor(factor: &DMatrix<f64>) -> Result<Self> {
        if factor.nrows() != factor.ncols() {
            return Err(Error::DimensionMismatch("noise factor must be square".into()));
        }
        Self::new(linalg::symmetrized(factor * factor.transpose()))
    }

    /// Diagonal `Λ`.
    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(variances)))
    }

    pub fn dim(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn cholesky(&self) -> &CholeskyLower {
        &self.chol
    }

    /// `λ_i`.
    pub fn variance(&self, i: usize) -> f64 {
        self.lambda[(i, i)]
    }

    /// Covariance with modules relabelled: module `perm[r]` becomes module `r`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dim() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        Self::new(linalg::permute_symmetric(&self.lambda, perm))
    }

    /// The same covariance with all cross terms removed.
    pub fn decorrelated(&self) -> Self {
        let d = DMatrix::from_diagonal(&self.lambda.diagonal());
        Self::new(d).expect("diagonal of an SPD matrix is SPD")
    }

    /// Variance of `e_i` not explained by the first `given` channels,
    /// `Σ_{k ≥ given} γ_ik²`. Requires `given ≤ i`.
    pub fn lambda_conditional(&self, i: usize, given: usize) -> Result<f64> {
        let m = self.dim();
        if i >= m || given > i {
            return Err(Error::IndexOutOfRange(format!(
                "conditional variance of channel {i} given {given} leading channels (m = {m})"
            )));
        }
        Ok((given..=i).map(|k| self.chol.gamma(i, k).powi(2)).sum())
    }

    /// Best linear estimate of `e_i` from the channels `0..reach` with `i`
    /// removed. Returns the channel indices used and their coefficients.
    pub fn estimator_coefficients(&self, i: usize, reach: usize) -> Result<(Vec<usize>, DVector<f64>)> {
        let m = self.dim();
        if i >= m || reach == 0 || reach > m {
            return Err(Error::IndexOutOfRange(format!(
                "estimator of channel {i} from {reach} leading channels (m = {m})"
            )));
        }
        let set: Vec<usize> = (0..reach).filter(|&k| k != i).collect();
        let coeffs = self.regression(i, &set)?;
        Ok((set, coeffs))
    }

    fn regression(&self, i: usize, set: &[usize]) -> Result<DVector<f64>> {
        if set.is_empty() {
            return Ok(DVector::zeros(0));
        }
        let sub = linalg::principal(&self.lambda, set);
        let cross = DVector::from_iterator(set.len(), set.iter().map(|&k| self.lambda[(k, i)]));
        let l = linalg::cholesky_lower(&sub).map_err(|_| Error::SingularSubcovariance)?;
        Ok(linalg::cholesky_solve(&l, &cross))
    }

    /// Residual variance of `e_i` after linear estimation from an arbitrary
    /// set of other channels (Schur complement).
    pub fn conditional_variance_given(&self, i: usize, set: &[usize]) -> Result<f64> {
        let m = self.dim();
        if i >= m || set.iter().any(|&k| k >= m || k == i) {
            return Err(Error::IndexOutOfRange(format!("channel {i} given {set:?} (m = {m})")));
        }
        let coeffs = self.regression(i, set)?;
        let explained: f64 = set
            .iter()
            .zip(coeffs.iter())
            .map(|(&k, c)| c * self.lambda[(k, i)])
            .sum();
        Ok((self.lambda[(i, i)] - explained).max(0.0))
    }

    /// Covariance of `e_{i..m}` after removing its best linear estimate from
    /// the first `given` channels. Requires `given ≤ i`.
    pub fn conditional_block_cov(&self, i: usize, given: usize) -> Result<DMatrix<f64>> {
        let m = self.dim();
        if i >= m || given > i {
            return Err(Error::IndexOutOfRange(format!(
                "conditional block from channel {i} given {given} leading channels (m = {m})"
            )));
        }
        let g = self.chol.matrix().view((i, given), (m - i, m - given)).into_owned();
        Ok(linalg::symmetrized(&g * g.transpose()))
    }

    /// Conditional-orthogonality graph with vertices ordered by model order.
    pub fn conditional_graph(&self, orders: &[usize]) -> Result<ConditionalGraph> {
        let m = self.dim();
        if orders.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} orders for {m} noise channels",
                orders.len()
            )));
        }
        let perm = linalg::stable_order(orders);
        let sorted = self.permuted(&perm)?;
        let chol = sorted.cholesky();
        let mut edges = Vec::new();
        for r in 0..m {
            for c in 0..r {
                if !chol.is_zero(r, c) {
                    edges.push(Edge {
                        from: perm[c],
                        to: perm[r],
                        weight: chol.gamma(r, c),
                    });
                }
            }
        }
        Ok(ConditionalGraph {
            vertex_order: perm,
            orders: orders.to_vec(),
            edges,
        })
    }
}

/// Directed edge `from → to` weighted by the Cholesky entry linking them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// Directed acyclic graph of conditional dependence between noise channels.
///
/// Edges only run from lower to higher position in `vertex_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGraph {
    /// Module labels sorted by model order (stable).
    pub vertex_order: Vec<usize>,
    pub orders: Vec<usize>,
    /// Edges for every nonzero `γ`, labelled by original module index.
    pub edges: Vec<Edge>,
}

impl ConditionalGraph {
    /// Edges that survive the order condition `n_from < n_to`.
    pub fn order_filtered(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .copied()
            .filter(|e| self.orders[e.from] < self.orders[e.to])
            .collect()
    }

    /// Parents of `module` in the order-filtered graph.
    pub fn parents(&self, module: usize) -> Vec<usize> {
        self.order_filtered()
            .iter()
            .filter(|e| e.to == module)
            .map(|e| e.from)
            .collect()
    }
}

/// Free-function form of [`NoiseCovariance::cholesky`] for a raw matrix.
pub fn cholesky_lower(lambda: &DMatrix<f64>) -> Result<CholeskyLower> {
    Ok(NoiseCovariance::new(lambda.clone())?.chol)
}

/// `Λ = L Lᵀ` for the introductory two-output noise, `L = [[1, 0], [√(1−β²), β]]`.
pub fn two_channel_lower(beta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, (1.0 - beta * beta).max(0.0).sqrt(), beta])
}
