//! SIMO model `y_i = Γ_i(q) θ_i u + e_i` on a shared basis, its regressors and
//! seeded data generation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{BasisSet, InputSpectrum};
use crate::error::{Error, Result};
use crate::linalg;

/// Samples discarded at the start of every simulation, at least.
pub const MIN_SETTLE: usize = 50;

/// Model orders `n_i` for each module on a shared basis.
///
/// Orders may be given in any sequence; [`SimoModel::ranking`] holds the
/// stable permutation that sorts them.
#[derive(Debug, Clone, PartialEq)]
pub struct SimoModel {
    orders: Vec<usize>,
    ranking: Vec<usize>,
    basis: BasisSet,
}

impl SimoModel {
    pub fn new(orders: Vec<usize>, basis: BasisSet) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one module".into()));
        }
        if orders.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "every module needs at least one parameter, got {orders:?}"
            )));
        }
        let n_max = *orders.iter().max().unwrap();
        if basis.len() < n_max {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} functions but the largest order is {n_max}",
                basis.len()
            )));
        }
        let ranking = linalg::stable_order(&orders);
        Ok(SimoModel { orders, ranking, basis })
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn outputs(&self) -> usize {
        self.orders.len()
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    /// Module labels sorted by nondecreasing order (ties keep label order).
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn max_order(&self) -> usize {
        *self.orders.iter().max().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.orders.iter().sum()
    }

    /// Offset of module `i` in the stacked vector `[θ_1; …; θ_m]`.
    pub fn offset(&self, i: usize) -> usize {
        self.orders[..i].iter().sum()
    }

    /// `(module, basis index)` of each entry of the interleaved vector θ̄:
    /// grouped by basis function, modules sorted by order within a group.
    pub fn interleaved_layout(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for k in 0..self.max_order() {
            for &i in &self.ranking {
                if self.orders[i] > k {
                    out.push((i, k));
                }
            }
        }
        out
    }

    /// `G_i(e^{jω}) = Σ_k θ_{i,k} B_k(e^{jω})` for every module.
    pub fn frequency_response(&self, theta: &ParameterVector, omega: f64) -> Result<Vec<Complex64>> {
        theta.check(self)?;
        let b = self.basis.evaluate(omega);
        Ok(theta
            .blocks
            .iter()
            .map(|th| th.iter().zip(&b).map(|(t, bk)| bk * *t).sum())
            .collect())
    }

    /// `φᵀ(t)` for every sample, from rest: row `i` carries `B_k(q) u` in the
    /// columns of `θ_i` and zeros elsewhere.
    pub fn build_regressors(&self, u: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let z = self.basis_signals(u)?;
        let m = self.outputs();
        let p = self.parameter_count();
        Ok((0..u.len())
            .map(|t| {
                let mut phi = DMatrix::zeros(m, p);
                for i in 0..m {
                    let off = self.offset(i);
                    for k in 0..self.orders[i] {
                        phi[(i, off + k)] = z[k][t];
                    }
                }
                phi
            })
            .collect())
    }

    /// `B_k(q) u` for `k = 1..=max_order`.
    pub fn basis_signals(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.basis.truncated(self.max_order())?.filter_all(u)
    }
}

/// Per-module coefficient lists `θ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub blocks: Vec<Vec<f64>>,
}

impl ParameterVector {
    pub fn new(blocks: Vec<Vec<f64>>) -> Self {
        ParameterVector { blocks }
    }

    pub fn zeros(model: &SimoModel) -> Self {
        ParameterVector {
            blocks: model.orders().iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn check(&self, model: &SimoModel) -> Result<()> {
        let dims: Vec<usize> = self.blocks.iter().map(Vec::len).collect();
        if dims != model.orders() {
            return Err(Error::DimensionMismatch(format!(
                "parameter blocks {dims:?} do not match orders {:?}",
                model.orders()
            )));
        }
        Ok(())
    }

    /// Stacked `[θ_1; …; θ_m]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn from_flat(model: &SimoModel, flat: &[f64]) -> Result<Self> {
        if flat.len() != model.parameter_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                model.parameter_count()
            )));
        }
        let mut blocks = Vec::with_capacity(model.outputs());
        let mut off = 0;
        for &n in model.orders() {
            blocks.push(flat[off..off + n].to_vec());
            off += n;
        }
        Ok(ParameterVector { blocks })
    }

    /// Interleaved `θ̄` following [`SimoModel::interleaved_layout`].
    pub fn interleaved(&self, model: &SimoModel) -> Result<Vec<f64>> {
        self.check(model)?;
        Ok(model
            .interleaved_layout()
            .iter()
            .map(|&(i, k)| self.blocks[i][k])
            .collect())
    }

    pub fn from_interleaved(model: &SimoModel, bar: &[f64]) -> Result<Self> {
        let layout = model.interleaved_layout();
        if bar.len() != layout.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                bar.len(),
                layout.len()
            )));
        }
        let mut out = Self::zeros(model);
        for (&(i, k), &v) in layout.iter().zip(bar) {
            out.blocks[i][k] = v;
        }
        Ok(out)
    }

    /// Keeps the first `n_i` coefficients of each block, padding with zeros.
    pub fn resized(&self, orders: &[usize]) -> Self {
        let blocks = self
            .blocks
            .iter()
            .zip(orders)
            .map(|(b, &n)| (0..n).map(|k| b.get(k).copied().unwrap_or(0.0)).collect())
            .collect();
        ParameterVector { blocks }
    }
}

/// Provenance of a simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    pub noise_factor: DMatrix<f64>,
    pub input: InputSpectrum,
    pub theta: ParameterVector,
}

/// Input and output samples. The first `settle` samples are filter
/// transients and are skipped by estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub u: Vec<f64>,
    /// One row per sample, one column per output.
    pub y: DMatrix<f64>,
    pub settle: usize,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Samples available for estimation.
    pub fn len(&self) -> usize {
        self.u.len() - self.settle
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn outputs(&self) -> usize {
        self.y.ncols()
    }
}

/// Number of transient samples dropped for a model of the given maximum order.
pub fn settle_length(max_order: usize) -> usize {
    max_order.max(MIN_SETTLE)
}

/// Simulates `n` usable samples with a ChaCha stream seeded by `seed`.
pub fn simulate(
    model: &SimoModel,
    theta0: &ParameterVector,
    input: &InputSpectrum,
    noise_factor: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = simulate_with_rng(model, theta0, input, noise_factor, n, &mut rng)?;
    data.meta.seed = Some(seed);
    Ok(data)
}

/// Simulates `y(t) = φᵀ(t) θ⁰ + F w(t)` from rest with input `u = w_u / A(q)`.
///
/// Per sample the generator draws the input innovation first, then the `m`
/// noise innovations, so streams line up across models with equal `m`.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    model: &SimoModel,
    theta0: &ParameterVector,
    input: &InputSpectrum,
    noise_factor: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    theta0.check(model)?;
    let m = model.outputs();
    if noise_factor.nrows() != m || noise_factor.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "noise factor is {}x{} for {m} outputs",
            noise_factor.nrows(),
            noise_factor.ncols()
        )));
    }
    if n < model.parameter_count() + m {
        return Err(Error::InvalidArgument(format!(
            "{n} samples cannot identify {} parameters on {m} outputs",
            model.parameter_count()
        )));
    }
    let settle = settle_length(model.max_order());
    let total = n + settle;
    let sigma_w = input.sigma_w2.sqrt();
    let mut w_u = Vec::with_capacity(total);
    let mut noise = DMatrix::<f64>::zeros(total, m);
    let mut w = DVector::<f64>::zeros(m);
    for t in 0..total {
        w_u.push(sigma_w * rng.sample::<f64, _>(StandardNormal));
        for j in 0..m {
            w[j] = rng.sample(StandardNormal);
        }
        noise.set_row(t, &(noise_factor * &w).transpose());
    }
    let u = if input.is_white() {
        w_u
    } else {
        input.shaping_filter().filter(&w_u)
    };
    let z = model.basis_signals(&u)?;
    let mut y = noise;
    for (i, th) in theta0.blocks.iter().enumerate() {
        for (k, &c) in th.iter().enumerate() {
            if c != 0.0 {
                for t in 0..total {
                    y[(t, i)] += c * z[k][t];
                }
            }
        }
    }
    Ok(Dataset {
        u,
        y,
        settle,
        meta: DatasetMeta {
            seed: None,
            noise_factor: noise_factor.clone(),
            input: input.clone(),
            theta: theta0.clone(),
        },
    })
}
