//! Closed-form asymptotic covariances for SIMO models.
//!
//! Orders may be passed in any module order. Internally modules are ranked by
//! nondecreasing order (stable); results are reported with the caller's
//! module labels.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{BasisSet, InputSpectrum};
use crate::error::{Error, Result};
use crate::linalg;
use crate::noise::NoiseCovariance;

/// Number of modules that do not contain basis function `k` (zero based),
/// i.e. the rank of the first module whose order exceeds `k`.
///
/// `sorted_orders` must be nondecreasing.
pub fn chi(sorted_orders: &[usize], k: usize) -> Result<usize> {
    if sorted_orders.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(format!(
            "orders {sorted_orders:?} are not nondecreasing"
        )));
    }
    sorted_orders
        .iter()
        .position(|&n| n > k)
        .ok_or_else(|| Error::IndexOutOfRange(format!("basis function {} exceeds every order", k + 1)))
}

/// Modules ranked by order with the matching relabelled noise covariance.
#[derive(Debug, Clone)]
struct Ranked {
    perm: Vec<usize>,
    position: Vec<usize>,
    orders: Vec<usize>,
    noise: NoiseCovariance,
}

impl Ranked {
    fn new(noise: &NoiseCovariance, orders: &[usize]) -> Result<Self> {
        Self::with_permutation(noise, orders, linalg::stable_order(orders))
    }

    fn with_permutation(noise: &NoiseCovariance, orders: &[usize], perm: Vec<usize>) -> Result<Self> {
        let m = noise.dim();
        if orders.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} orders for {m} outputs",
                orders.len()
            )));
        }
        if orders.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "orders must be positive, got {orders:?}"
            )));
        }
        let mut position = vec![0; m];
        for (r, &i) in perm.iter().enumerate() {
            position[i] = r;
        }
        Ok(Ranked {
            orders: perm.iter().map(|&i| orders[i]).collect(),
            noise: noise.permuted(&perm)?,
            perm,
            position,
        })
    }

    fn max_order(&self) -> usize {
        *self.orders.last().unwrap()
    }

    /// `λ_{i|χ_k−1}` for module label `i` and zero-based basis index `k < n_i`.
    fn parameter_variance(&self, i: usize, k: usize) -> Result<f64> {
        let given = chi(&self.orders, k)?;
        self.noise.lambda_conditional(self.position[i], given)
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "input variance must be positive, got {sigma2}"
        )))
    }
}

fn check_basis(basis: &BasisSet, needed: usize) -> Result<()> {
    if basis.len() < needed {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} functions, model needs {needed}",
            basis.len()
        )));
    }
    Ok(())
}

/// Covariance block of the parameters tied to one basis function.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisBlock {
    /// Zero-based basis index.
    pub basis_index: usize,
    /// Module labels sharing the basis function, in ranked order.
    pub modules: Vec<usize>,
    pub cov: DMatrix<f64>,
}

/// Block-diagonal asymptotic covariance of the interleaved parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCovariance {
    pub orders: Vec<usize>,
    pub blocks: Vec<BasisBlock>,
}

impl ParamCovariance {
    /// `(module, basis index)` for each row of [`ParamCovariance::interleaved`].
    pub fn layout(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .flat_map(|b| b.modules.iter().map(move |&i| (i, b.basis_index)))
            .collect()
    }

    /// The full block-diagonal matrix in interleaved order.
    pub fn interleaved(&self) -> DMatrix<f64> {
        let p: usize = self.blocks.iter().map(|b| b.modules.len()).sum();
        let mut out = DMatrix::zeros(p, p);
        let mut off = 0;
        for b in &self.blocks {
            let s = b.modules.len();
            out.view_mut((off, off), (s, s)).copy_from(&b.cov);
            off += s;
        }
        out
    }

    /// The same covariance in stacked order `[θ_1; …; θ_m]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let offsets: Vec<usize> = self
            .orders
            .iter()
            .scan(0, |acc, &n| {
                let o = *acc;
                *acc += n;
                Some(o)
            })
            .collect();
        let p: usize = self.orders.iter().sum();
        let mut out = DMatrix::zeros(p, p);
        for b in &self.blocks {
            for (r, &i) in b.modules.iter().enumerate() {
                for (c, &j) in b.modules.iter().enumerate() {
                    out[(offsets[i] + b.basis_index, offsets[j] + b.basis_index)] = b.cov[(r, c)];
                }
            }
        }
        out
    }

    /// `asvar θ̂_{i,k}`.
    pub fn variance(&self, module: usize, k: usize) -> Option<f64> {
        let b = self.blocks.get(k)?;
        let r = b.modules.iter().position(|&i| i == module)?;
        Some(b.cov[(r, r)])
    }
}

/// Asymptotic covariance of the parameters: block `k` is
/// `Λ_{χ_k:m | χ_k−1} / σ²` over the modules that contain `B_k`.
pub fn param_cov_blocks(noise: &NoiseCovariance, orders: &[usize], sigma2: f64) -> Result<ParamCovariance> {
    check_sigma2(sigma2)?;
    let ranked = Ranked::new(noise, orders)?;
    let blocks = (0..ranked.max_order())
        .map(|k| {
            let r = chi(&ranked.orders, k)?;
            let cov = ranked.noise.conditional_block_cov(r, r)? / sigma2;
            Ok(BasisBlock {
                basis_index: k,
                modules: ranked.perm[r..].to_vec(),
                cov,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParamCovariance {
        orders: orders.to_vec(),
        blocks,
    })
}

/// Asymptotic covariance of `Ĝ(e^{jω})`, an `m × m` matrix in module labels:
/// `Σ_k |B_k(e^{jω})|² · [0 0; 0 Λ_{χ_k:m|χ_k−1}] / σ²`.
pub fn ascov_frf(
    noise: &NoiseCovariance,
    orders: &[usize],
    sigma2: f64,
    basis: &BasisSet,
    omega: f64,
) -> Result<DMatrix<Complex64>> {
    let blocks = param_cov_blocks(noise, orders, sigma2)?;
    let m = noise.dim();
    check_basis(basis, blocks.blocks.len())?;
    let mags = basis.magnitudes_squared(omega);
    let mut out = DMatrix::<f64>::zeros(m, m);
    for b in &blocks.blocks {
        let w = mags[b.basis_index];
        for (r, &i) in b.modules.iter().enumerate() {
            for (c, &j) in b.modules.iter().enumerate() {
                out[(i, j)] += w * b.cov[(r, c)];
            }
        }
    }
    Ok(out.map(|x| Complex64::new(x, 0.0)))
}

/// `asvar Ĝ_i = Σ_{k ≤ n_i} |B_k(e^{jω})|² λ_{i|χ_k−1} / σ²`.
pub fn asvar_module(
    noise: &NoiseCovariance,
    orders: &[usize],
    sigma2: f64,
    basis: &BasisSet,
    module: usize,
    omega: f64,
) -> Result<f64> {
    check_sigma2(sigma2)?;
    let ranked = Ranked::new(noise, orders)?;
    if module >= orders.len() {
        return Err(Error::IndexOutOfRange(format!("module {module} of {}", orders.len())));
    }
    let n_i = orders[module];
    check_basis(basis, n_i)?;
    let mags = basis.magnitudes_squared(omega);
    let mut acc = 0.0;
    for (k, mag) in mags.iter().enumerate().take(n_i) {
        acc += mag * ranked.parameter_variance(module, k)?;
    }
    Ok(acc / sigma2)
}

/// Outcome of the model-order variance-increase test for a pair of modules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceIncrease {
    /// `n_j < n_i`.
    pub order_condition: bool,
    /// Cholesky entry linking `j` to `i` once `j` is ranked last among the
    /// modules of order `n_j`; `None` when the order condition fails.
    pub gamma: Option<f64>,
    /// `|B_{n_j+1}(e^{jω})|² ≠ 0`.
    pub basis_condition: bool,
    /// Increase of `asvar Ĝ_i` when `n_j` grows by one: `γ² |B_{n_j+1}|² / σ²`.
    pub magnitude: f64,
}

impl VarianceIncrease {
    pub fn increases(&self) -> bool {
        self.magnitude > 0.0 && self.order_condition && self.basis_condition && self.gamma.is_some()
    }
}

/// Whether growing the order of module `j` by one raises `asvar Ĝ_i` at `ω`.
pub fn variance_increase_predicate(
    noise: &NoiseCovariance,
    orders: &[usize],
    sigma2: f64,
    basis: &BasisSet,
    i: usize,
    j: usize,
    omega: f64,
) -> Result<VarianceIncrease> {
    check_sigma2(sigma2)?;
    let m = orders.len();
    if i >= m || j >= m || i == j {
        return Err(Error::IndexOutOfRange(format!("module pair ({i}, {j}) of {m}")));
    }
    let (ni, nj) = (orders[i], orders[j]);
    if nj >= ni {
        return Ok(VarianceIncrease {
            order_condition: false,
            gamma: None,
            basis_condition: false,
            magnitude: 0.0,
        });
    }
    check_basis(basis, nj + 1)?;
    // Stable ranking with j moved behind every other module of order n_j.
    let mut perm: Vec<usize> = (0..m).collect();
    perm.sort_by_key(|&l| (orders[l], l == j));
    let ranked = Ranked::with_permutation(noise, orders, perm)?;
    let chol = ranked.noise.cholesky();
    let (pi, pj) = (ranked.position[i], ranked.position[j]);
    let gamma = chol.gamma(pi, pj);
    let correlated = !chol.is_zero(pi, pj);
    let mag_b = basis.magnitudes_squared(omega)[nj];
    let basis_condition = mag_b > 0.0;
    let magnitude = if correlated {
        gamma * gamma * mag_b / sigma2
    } else {
        0.0
    };
    Ok(VarianceIncrease {
        order_condition: true,
        gamma: Some(if correlated { gamma } else { 0.0 }),
        basis_condition,
        magnitude,
    })
}

/// `asvar Ĝ_i` for FIR models driven by `u = w / A(q)`:
///
/// `(1/Φ_u) (λ_i Σ_{k ≤ n_a} (1−|ξ_k|²)/|e^{jω}−ξ_k|² + λ_i (n_1 − n_a) + Σ_{j=2}^{i} λ_{i|j−1} (n_j − n_{j−1}))`
///
/// with modules ranked by order.
pub fn asvar_ar_input(
    noise: &NoiseCovariance,
    orders: &[usize],
    spectrum: &InputSpectrum,
    module: usize,
    omega: f64,
) -> Result<f64> {
    let ranked = Ranked::new(noise, orders)?;
    if module >= orders.len() {
        return Err(Error::IndexOutOfRange(format!("module {module} of {}", orders.len())));
    }
    let n_a = spectrum.ar_poles.len();
    let n_min = ranked.orders[0];
    if n_a > n_min {
        return Err(Error::OrderTooSmall { n_a, n_min });
    }
    let pos = ranked.position[module];
    let lambda_i = ranked.noise.variance(pos);
    let z = Complex64::from_polar(1.0, omega);
    let pole_sum: f64 = spectrum
        .ar_poles
        .iter()
        .map(|&xi| (1.0 - xi.norm_sqr()) / (z - xi).norm_sqr())
        .sum();
    let mut acc = lambda_i * pole_sum + lambda_i * (n_min - n_a) as f64;
    for r in 1..=pos {
        let step = ranked.orders[r] - ranked.orders[r - 1];
        if step > 0 {
            acc += ranked.noise.lambda_conditional(pos, r)? * step as f64;
        }
    }
    Ok(acc / spectrum.value(omega))
}

/// Closed-form covariances for one configuration over a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub sigma2: f64,
    pub params: ParamCovariance,
    pub omegas: Vec<f64>,
    /// `ascov Ĝ(e^{jω})` per grid point.
    pub frf_cov: Vec<DMatrix<Complex64>>,
    /// `per_module[w][i] = asvar Ĝ_i(e^{jω_w})`.
    pub per_module: Vec<Vec<f64>>,
}

pub fn covariance_report(
    noise: &NoiseCovariance,
    orders: &[usize],
    sigma2: f64,
    basis: &BasisSet,
    omegas: &[f64],
) -> Result<CovarianceReport> {
    let params = param_cov_blocks(noise, orders, sigma2)?;
    let mut frf_cov = Vec::with_capacity(omegas.len());
    let mut per_module = Vec::with_capacity(omegas.len());
    for &w in omegas {
        frf_cov.push(ascov_frf(noise, orders, sigma2, basis, w)?);
        per_module.push(
            (0..orders.len())
                .map(|i| asvar_module(noise, orders, sigma2, basis, i, w))
                .collect::<Result<_>>()?,
        );
    }
    Ok(CovarianceReport {
        sigma2,
        params,
        omegas: omegas.to_vec(),
        frf_cov,
        per_module,
    })
}

/// `count` equispaced frequencies on `[0, π]`.
pub fn frequency_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|k| PI * k as f64 / (count - 1) as f64).collect(),
    }
}
