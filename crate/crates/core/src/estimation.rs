//! Weighted least squares with the noise precision as weight, and the Monte
//! Carlo sample statistics used to check the closed-form covariances.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Dataset, ParameterVector, SimoModel};
use crate::noise::NoiseCovariance;

/// Reciprocal condition number below which the normal matrix is rejected.
pub const RCOND_FLOOR: f64 = 1e-12;

/// Result of [`weighted_ls`].
#[derive(Debug, Clone, PartialEq)]
pub struct WlsEstimate {
    pub theta_hat: ParameterVector,
    /// `Σ_t φ(t) Λ⁻¹ φᵀ(t)` in stacked parameter order.
    pub normal_matrix: DMatrix<f64>,
    pub samples: usize,
}

/// `θ̂ = (Σ φ Λ⁻¹ φᵀ)⁻¹ Σ φ Λ⁻¹ y` over the settled part of `data`.
///
/// Every module uses a prefix of the same basis, so the normal equations are
/// assembled from the basis-signal Gram `Σ z zᵀ` and cross terms `Σ z yᵀ`.
/// Sums run in time order.
pub fn weighted_ls(data: &Dataset, model: &SimoModel, noise: &NoiseCovariance) -> Result<WlsEstimate> {
    let m = model.outputs();
    if data.outputs() != m || noise.dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "model has {m} outputs, data {}, noise {}",
            data.outputs(),
            noise.dim()
        )));
    }
    let z = model.basis_signals(&data.u)?;
    let nb = z.len();
    let mut zz = DMatrix::<f64>::zeros(nb, nb);
    let mut zy = DMatrix::<f64>::zeros(nb, m);
    for t in data.settle..data.u.len() {
        for a in 0..nb {
            let za = z[a][t];
            for b in a..nb {
                zz[(a, b)] += za * z[b][t];
            }
            for j in 0..m {
                zy[(a, j)] += za * data.y[(t, j)];
            }
        }
    }
    for a in 0..nb {
        for b in 0..a {
            zz[(a, b)] = zz[(b, a)];
        }
    }
    let weight = linalg::spd_inverse(noise.matrix())?;
    let orders = model.orders();
    let p = model.parameter_count();
    let mut normal = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for i in 0..m {
        let oi = model.offset(i);
        for a in 0..orders[i] {
            for j in 0..m {
                let oj = model.offset(j);
                for b in 0..orders[j] {
                    normal[(oi + a, oj + b)] = weight[(i, j)] * zz[(a, b)];
                }
                rhs[oi + a] += weight[(i, j)] * zy[(a, j)];
            }
        }
    }
    let l = linalg::cholesky_lower(&normal).map_err(|_| Error::SingularNormalMatrix(0.0))?;
    let diag = l.diagonal();
    let rcond = (diag.min() / diag.max()).powi(2);
    if !(rcond >= RCOND_FLOOR) {
        return Err(Error::SingularNormalMatrix(rcond));
    }
    let theta = linalg::cholesky_solve(&l, &rhs);
    Ok(WlsEstimate {
        theta_hat: ParameterVector::from_flat(model, theta.as_slice())?,
        normal_matrix: normal,
        samples: data.len(),
    })
}

/// How a [`SampleCovariance`] was normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    PerRun,
    /// Multiplied by the sample count `N` of each run.
    SampleCount(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    pub matrix: DMatrix<f64>,
    pub runs: usize,
    pub scaling: Scaling,
}

/// `(1/MC) Σ (θ̂_r − θ)(θ̂_r − θ)ᵀ` in stacked order, optionally scaled by `N`.
pub fn sample_covariance(
    estimates: &[ParameterVector],
    truth: &ParameterVector,
    scale_by: Option<usize>,
) -> Result<SampleCovariance> {
    if estimates.len() < 2 {
        return Err(Error::InvalidArgument("need at least two estimates".into()));
    }
    let t = DVector::from_vec(truth.flatten());
    let p = t.len();
    let mut acc = DMatrix::<f64>::zeros(p, p);
    for est in estimates {
        let e = DVector::from_vec(est.flatten());
        if e.len() != p {
            return Err(Error::DimensionMismatch("estimate and truth differ in length".into()));
        }
        let d = e - &t;
        acc += &d * d.transpose();
    }
    let factor = scale_by.map_or(1.0, |n| n as f64) / estimates.len() as f64;
    Ok(SampleCovariance {
        matrix: acc * factor,
        runs: estimates.len(),
        scaling: scale_by.map_or(Scaling::PerRun, Scaling::SampleCount),
    })
}

/// Per-frequency mean of `|G_i(e^{jω}, θ⁰) − G_i(e^{jω}, θ̂)|²` over runs.
pub fn sample_frf_variance(
    estimates: &[ParameterVector],
    model: &SimoModel,
    truth: &ParameterVector,
    module: usize,
    omegas: &[f64],
) -> Result<Vec<f64>> {
    if module >= model.outputs() {
        return Err(Error::IndexOutOfRange(format!(
            "module {module} of {}",
            model.outputs()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no estimates".into()));
    }
    omegas
        .iter()
        .map(|&w| {
            let g0 = model.frequency_response(truth, w)?[module];
            let mut acc = 0.0;
            for est in estimates {
                acc += (g0 - model.frequency_response(est, w)?[module]).norm_sqr();
            }
            Ok(acc / estimates.len() as f64)
        })
        .collect()
}
