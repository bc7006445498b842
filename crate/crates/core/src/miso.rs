//! The dual multi-input single-output structure: correlated white inputs
//! `u_1 … u_m` with covariance `Σ_u` and one output with noise variance `λ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::settle_length;
use crate::variance::{BasisBlock, ParamCovariance};

/// MISO configuration. Module `i` uses the first `orders[i]` basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct MisoSpec {
    input_cov: DMatrix<f64>,
    noise_var: f64,
    orders: Vec<usize>,
}

impl MisoSpec {
    /// Only symmetry and shapes are checked here. Singular leading blocks of
    /// `Σ_u` are reported by the covariance routines, since that is where
    /// identifiability is lost.
    pub fn new(input_cov: DMatrix<f64>, noise_var: f64, orders: Vec<usize>) -> Result<Self> {
        let m = input_cov.nrows();
        if input_cov.ncols() != m || orders.len() != m || m == 0 {
            return Err(Error::DimensionMismatch(format!(
                "input covariance {}x{} with {} orders",
                m,
                input_cov.ncols(),
                orders.len()
            )));
        }
        let asym = linalg::asymmetry(&input_cov);
        if asym > crate::noise::SYMMETRY_TOLERANCE * input_cov.amax().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        if orders.contains(&0) || orders.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(format!(
                "orders must be positive and nonincreasing, got {orders:?}"
            )));
        }
        Ok(MisoSpec {
            input_cov,
            noise_var,
            orders,
        })
    }

    pub fn input_cov(&self) -> &DMatrix<f64> {
        &self.input_cov
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn inputs(&self) -> usize {
        self.orders.len()
    }

    /// Number of modules containing basis function `k` (zero based).
    pub fn chi(&self, k: usize) -> usize {
        self.orders.iter().filter(|&&n| n > k).count()
    }

    /// `Σ_{1:c}⁻¹`, or `SingularInputCovariance(c)` when the block is singular.
    fn leading_inverse(&self, c: usize) -> Result<DMatrix<f64>> {
        let idx: Vec<usize> = (0..c).collect();
        linalg::spd_inverse(&linalg::principal(&self.input_cov, &idx)).map_err(|_| Error::SingularInputCovariance(c))
    }
}

/// `ascov θ̄ = λ · diag(Σ_{1:χ_1}⁻¹, Σ_{1:χ_2}⁻¹, …)`.
pub fn miso_param_cov(miso: &MisoSpec) -> Result<ParamCovariance> {
    let n_max = miso.orders[0];
    let mut blocks = Vec::with_capacity(n_max);
    for k in 0..n_max {
        let c = miso.chi(k);
        blocks.push(BasisBlock {
            basis_index: k,
            modules: (0..c).collect(),
            cov: miso.leading_inverse(c)? * miso.noise_var,
        });
    }
    Ok(ParamCovariance {
        orders: miso.orders.clone(),
        blocks,
    })
}

/// `asvar Ĝ_i = Σ_{k ≤ n_i} |B_k(e^{jω})|² λ / σ²_{i|χ_k}` where `σ²_{i|c}` is
/// the variance of `u_i` not explained by the other inputs among the first `c`.
pub fn miso_asvar_module(miso: &MisoSpec, basis: &BasisSet, module: usize, omega: f64) -> Result<f64> {
    let m = miso.inputs();
    if module >= m {
        return Err(Error::IndexOutOfRange(format!("module {module} of {m}")));
    }
    let n_i = miso.orders[module];
    if basis.len() < n_i {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} functions, module needs {n_i}",
            basis.len()
        )));
    }
    let mags = basis.magnitudes_squared(omega);
    let mut acc = 0.0;
    let mut cached: Option<(usize, f64)> = None;
    for (k, mag) in mags.iter().enumerate().take(n_i) {
        let c = miso.chi(k);
        let precision = match cached {
            Some((cc, p)) if cc == c => p,
            _ => {
                let p = miso.leading_inverse(c)?[(module, module)];
                cached = Some((c, p));
                p
            }
        };
        acc += mag * miso.noise_var * precision;
    }
    Ok(acc)
}

/// Simulated MISO data. The first `settle` samples are transients.
#[derive(Debug, Clone, PartialEq)]
pub struct MisoDataset {
    /// One row per sample, one column per input.
    pub u: DMatrix<f64>,
    pub y: Vec<f64>,
    pub settle: usize,
}

impl MisoDataset {
    pub fn len(&self) -> usize {
        self.y.len() - self.settle
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `y = Σ_i Σ_k θ_{i,k} B_k(q) u_i + e` with `u(t) = Σ_CH w(t)`.
///
/// Per sample the generator draws the `m` input innovations, then the noise.
pub fn simulate_miso<R: Rng + ?Sized>(
    miso: &MisoSpec,
    basis: &BasisSet,
    theta: &[Vec<f64>],
    n: usize,
    rng: &mut R,
) -> Result<MisoDataset> {
    let m = miso.inputs();
    if theta.len() != m || theta.iter().zip(&miso.orders).any(|(t, &o)| t.len() != o) {
        return Err(Error::DimensionMismatch(
            "parameter blocks do not match the orders".into(),
        ));
    }
    let p: usize = miso.orders.iter().sum();
    if n < p + 1 {
        return Err(Error::InvalidArgument(format!(
            "{n} samples cannot identify {p} parameters"
        )));
    }
    let chol = linalg::cholesky_lower(&miso.input_cov).map_err(|_| Error::SingularInputCovariance(m))?;
    let settle = settle_length(miso.orders[0]);
    let total = n + settle;
    let sd = miso.noise_var.sqrt();
    let mut u = DMatrix::<f64>::zeros(total, m);
    let mut e = Vec::with_capacity(total);
    let mut w = DVector::<f64>::zeros(m);
    for t in 0..total {
        for j in 0..m {
            w[j] = rng.sample(StandardNormal);
        }
        u.set_row(t, &(&chol * &w).transpose());
        e.push(sd * rng.sample::<f64, _>(StandardNormal));
    }
    let mut y = e;
    for (i, th) in theta.iter().enumerate() {
        let ui: Vec<f64> = u.column(i).iter().copied().collect();
        let z = basis.truncated(th.len())?.filter_all(&ui)?;
        for (k, &c) in th.iter().enumerate() {
            for t in 0..total {
                y[t] += c * z[k][t];
            }
        }
    }
    Ok(MisoDataset { u, y, settle })
}

/// Ordinary least squares on MISO data; blocks follow the module labels.
pub fn miso_least_squares(data: &MisoDataset, orders: &[usize], basis: &BasisSet) -> Result<Vec<Vec<f64>>> {
    let m = orders.len();
    if data.u.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} inputs for {m} orders",
            data.u.ncols()
        )));
    }
    let mut signals = Vec::new();
    for (i, &n) in orders.iter().enumerate() {
        let ui: Vec<f64> = data.u.column(i).iter().copied().collect();
        signals.extend(basis.truncated(n)?.filter_all(&ui)?);
    }
    let p = signals.len();
    let mut normal = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for t in data.settle..data.y.len() {
        for a in 0..p {
            let za = signals[a][t];
            for b in a..p {
                normal[(a, b)] += za * signals[b][t];
            }
            rhs[a] += za * data.y[t];
        }
    }
    for a in 0..p {
        for b in 0..a {
            normal[(a, b)] = normal[(b, a)];
        }
    }
    let l = linalg::cholesky_lower(&normal).map_err(|_| Error::SingularNormalMatrix(0.0))?;
    let diag = l.diagonal();
    let rcond = (diag.min() / diag.max()).powi(2);
    if !(rcond >= crate::estimation::RCOND_FLOOR) {
        return Err(Error::SingularNormalMatrix(rcond));
    }
    let theta = linalg::cholesky_solve(&l, &rhs);
    let mut out = Vec::with_capacity(m);
    let mut off = 0;
    for &n in orders {
        out.push(theta.as_slice()[off..off + n].to_vec());
        off += n;
    }
    Ok(out)
}

/// `MISO ascov Ĝ(e^{jω})` for the full input vector, an `m × m` matrix.
pub fn miso_ascov_frf(miso: &MisoSpec, basis: &BasisSet, omega: f64) -> Result<DMatrix<Complex64>> {
    let cov = miso_param_cov(miso)?;
    let m = miso.inputs();
    let mags = basis.magnitudes_squared(omega);
    if mags.len() < miso.orders[0] {
        return Err(Error::DimensionMismatch(format!("basis has {} functions", mags.len())));
    }
    let mut out = DMatrix::<f64>::zeros(m, m);
    for b in &cov.blocks {
        let c = b.modules.len();
        out.view_mut((0, 0), (c, c))
            .zip_apply(&b.cov, |x, y| *x += mags[b.basis_index] * y);
    }
    Ok(out.map(|x| Complex64::new(x, 0.0)))
}
