//! TOML experiment configuration.
//!
//! Module and basis indices in config files are one based, matching the
//! usual `θ_{i,k}` naming. Everything is converted to zero-based indices on
//! resolution.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Deserialize;
use simovar_core::basis::gram_matrix;
use simovar_core::noise::two_channel_lower;
use simovar_core::{
    fir_basis, prefiltered_fir_basis, takenaka_malmquist, BasisSet, InputSpectrum, NoiseCovariance, ParameterVector,
    Rational, SimoModel, UpperFactor,
};

use crate::error::{ExperimentError, Result};

/// Relative tolerance for treating the basis Gram matrix as `σ² I`.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Usable samples per run, `N`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Monte Carlo runs per sweep point.
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Frequency grid for `analyze`. An integer count gives an equispaced grid on `[0, π]`.
    #[serde(default)]
    pub omega: OmegaSpec,
    /// Reuse the same input and noise realizations at every sweep point.
    #[serde(default)]
    pub common_random_numbers: bool,
    #[serde(default)]
    pub output: Option<String>,
    pub model: ModelSection,
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub statistic: Vec<StatisticSection>,
}

fn default_samples() -> usize {
    500
}

fn default_runs() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Count(usize),
    Values(Vec<f64>),
}

impl Default for OmegaSpec {
    fn default() -> Self {
        OmegaSpec::Count(64)
    }
}

impl OmegaSpec {
    pub fn grid(&self) -> Vec<f64> {
        match self {
            OmegaSpec::Count(n) => simovar_core::variance::frequency_grid(*n),
            OmegaSpec::Values(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisName {
    Fir,
    Tm,
    PrefilteredFir,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub orders: Vec<usize>,
    #[serde(default = "default_basis")]
    pub basis: BasisName,
    /// Real poles of the Takenaka–Malmquist basis.
    #[serde(default)]
    pub poles: Vec<f64>,
    /// Numerator coefficients in `q⁻¹` of the FIR prefilter.
    #[serde(default)]
    pub prefilter: Vec<f64>,
    /// True parameters per module; truncated or zero padded to the orders in use.
    #[serde(default)]
    pub theta: Vec<Vec<f64>>,
}

fn default_basis() -> BasisName {
    BasisName::Fir
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    #[default]
    White,
    Ar,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    #[serde(default)]
    pub kind: InputKind,
    /// Variance of the white input, or of the AR driving noise.
    #[serde(default = "one")]
    pub variance: f64,
    #[serde(default)]
    pub ar_poles: Vec<f64>,
}

impl Default for InputSection {
    fn default() -> Self {
        InputSection {
            kind: InputKind::White,
            variance: 1.0,
            ar_poles: Vec::new(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseForm {
    /// `Λ` itself.
    Covariance,
    /// Lower factor `Λ_CH`.
    Lower,
    /// Upper factor `B`.
    Upper,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub form: NoiseForm,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    /// Two-output noise `[[1, 0], [√(1−β²), β]]`.
    Beta,
    /// Upper factor `[[ε, √(1−ε²) cos α, √(1−ε²) sin α], [0, M]]`.
    Alpha,
    /// Orders of the listed modules.
    Order,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: SweepValues,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub m_block: Option<Vec<Vec<f64>>>,
    /// One-based modules whose order follows the sweep value.
    #[serde(default)]
    pub modules: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SweepValues {
    List(Vec<f64>),
    Range { start: f64, end: f64, count: usize },
}

impl SweepValues {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepValues::List(v) => v.clone(),
            SweepValues::Range { start, end, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|s| start + (end - start) * s as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    /// `N · (θ̂_{i,k} − θ_{i,k})²`.
    ParamVar,
    /// `N · |G_i(e^{jω}, θ̂) − G_i(e^{jω}, θ)|²`.
    FrfVar,
    /// `N · Σ_i (θ̂_{i,k} − θ_{i,k})²` over the modules containing basis `k`.
    TotalVar,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticSection {
    pub kind: StatisticKind,
    pub name: Option<String>,
    #[serde(default)]
    pub module: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub omega: Option<f64>,
}

/// Statistic with validated zero-based indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Statistic {
    ParamVar { module: usize, k: usize },
    FrfVar { module: usize, omega: f64 },
    TotalVar { k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedStatistic {
    pub name: String,
    pub stat: Statistic,
}

/// Everything needed to simulate and predict at one sweep point.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sweep_value: f64,
    pub model: SimoModel,
    pub theta0: ParameterVector,
    pub input: InputSpectrum,
    pub noise: NoiseCovariance,
    /// Regressor variance `σ²` when the basis is orthonormal under the input
    /// spectrum up to that scale, else `None`.
    pub sigma2: Option<f64>,
}

fn err<T>(field: &str, message: impl Into<String>) -> Result<T> {
    Err(ExperimentError::config(field, message))
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return err(
            field,
            format!(
                "expected a square matrix, got {n} rows of lengths {:?}",
                rows.iter().map(Vec::len).collect::<Vec<_>>()
            ),
        );
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn numeric<T>(field: &str, r: simovar_core::Result<T>) -> Result<T> {
    r.map_err(|e| ExperimentError::config(field, e.to_string()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ExperimentError::config("toml", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::config("path", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn outputs(&self) -> usize {
        self.model.orders.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.outputs();
        if m == 0 || self.model.orders.contains(&0) {
            return err("model.orders", "need at least one module and positive orders");
        }
        if self.runs == 0 {
            return err("runs", "must be at least 1");
        }
        if !self.model.theta.is_empty() && self.model.theta.len() != m {
            return err(
                "model.theta",
                format!("{} parameter blocks for {m} modules", self.model.theta.len()),
            );
        }
        match self.model.basis {
            BasisName::PrefilteredFir if self.model.prefilter.is_empty() => {
                return err("model.prefilter", "prefiltered-fir basis needs prefilter coefficients");
            }
            BasisName::Tm if self.model.poles.iter().any(|p| p.abs() >= 1.0) => {
                return err("model.poles", "poles must lie strictly inside the unit circle");
            }
            _ => {}
        }
        if self.input.variance.is_nan() || self.input.variance <= 0.0 {
            return err("input.variance", "must be positive");
        }
        if self.input.kind == InputKind::White && !self.input.ar_poles.is_empty() {
            return err("input.ar_poles", "white input takes no poles");
        }
        for (s, st) in self.statistic.iter().enumerate() {
            self.resolve_statistic(s, st)?;
        }
        // Resolving every sweep point checks dimensions and positivity.
        let points = self.sweep_points()?;
        for &v in &points {
            let orders = self.orders_at(v)?;
            let p: usize = orders.iter().sum();
            if self.samples < p + m {
                return err(
                    "samples",
                    format!("{} samples cannot identify {p} parameters on {m} outputs", self.samples),
                );
            }
            self.noise_at(v)?;
        }
        Ok(())
    }

    pub fn statistics(&self) -> Result<Vec<NamedStatistic>> {
        self.statistic
            .iter()
            .enumerate()
            .map(|(s, st)| self.resolve_statistic(s, st))
            .collect()
    }

    fn resolve_statistic(&self, s: usize, st: &StatisticSection) -> Result<NamedStatistic> {
        let field = |f: &str| format!("statistic[{s}].{f}");
        let m = self.outputs();
        let module = || -> Result<usize> {
            match st.module {
                Some(i) if (1..=m).contains(&i) => Ok(i - 1),
                Some(i) => err(&field("module"), format!("{i} is not in 1..={m}")),
                None => err(&field("module"), "required"),
            }
        };
        let k = || -> Result<usize> {
            match st.k {
                Some(k) if k >= 1 => Ok(k - 1),
                _ => err(&field("k"), "a one-based basis index is required"),
            }
        };
        let stat = match st.kind {
            StatisticKind::ParamVar => Statistic::ParamVar {
                module: module()?,
                k: k()?,
            },
            StatisticKind::FrfVar => Statistic::FrfVar {
                module: module()?,
                omega: st
                    .omega
                    .ok_or_else(|| ExperimentError::config(field("omega"), "required"))?,
            },
            StatisticKind::TotalVar => Statistic::TotalVar { k: k()? },
        };
        let name = st.name.clone().unwrap_or_else(|| match &stat {
            Statistic::ParamVar { module, k } => format!("theta_{}_{}", module + 1, k + 1),
            Statistic::FrfVar { module, .. } => format!("g{}", module + 1),
            Statistic::TotalVar { k } => format!("total_{}", k + 1),
        });
        if name.is_empty() || name.contains(',') {
            return err(&field("name"), "must be nonempty and contain no commas");
        }
        Ok(NamedStatistic { name, stat })
    }

    /// Sweep values, or a single `NaN` placeholder without a sweep.
    pub fn sweep_points(&self) -> Result<Vec<f64>> {
        match &self.sweep {
            None => Ok(vec![f64::NAN]),
            Some(s) => {
                let v = s.values.values();
                if v.is_empty() {
                    return err("sweep.values", "empty sweep");
                }
                Ok(v)
            }
        }
    }

    pub fn orders_at(&self, value: f64) -> Result<Vec<usize>> {
        let mut orders = self.model.orders.clone();
        if let Some(s) = &self.sweep {
            if s.parameter == SweepParameter::Order {
                if s.modules.is_empty() {
                    return err("sweep.modules", "order sweeps need the modules to vary");
                }
                if value < 1.0 || value.fract() != 0.0 {
                    return err("sweep.values", format!("order {value} is not a positive integer"));
                }
                for &i in &s.modules {
                    if !(1..=orders.len()).contains(&i) {
                        return err("sweep.modules", format!("module {i} out of range"));
                    }
                    orders[i - 1] = value as usize;
                }
            }
        }
        Ok(orders)
    }

    pub fn noise_at(&self, value: f64) -> Result<NoiseCovariance> {
        let m = self.outputs();
        let sweep = self.sweep.as_ref().map(|s| s.parameter);
        let noise = match sweep {
            Some(SweepParameter::Beta) => {
                if m != 2 {
                    return err("sweep.parameter", "beta sweeps need exactly two outputs");
                }
                if !(value > 0.0 && value <= 1.0) {
                    return err("sweep.values", format!("beta {value} is not in (0, 1]"));
                }
                numeric("sweep.values", NoiseCovariance::from_factor(&two_channel_lower(value)))?
            }
            Some(SweepParameter::Alpha) => {
                let s = self.sweep.as_ref().unwrap();
                let eps = s
                    .epsilon
                    .ok_or_else(|| ExperimentError::config("sweep.epsilon", "required for alpha sweeps"))?;
                if !(eps > 0.0 && eps <= 1.0) {
                    return err("sweep.epsilon", "must lie in (0, 1]");
                }
                let mb = matrix("sweep.m_block", s.m_block.as_deref().unwrap_or(&[]))?;
                if mb.nrows() != 2 || m != 3 {
                    return err("sweep.m_block", "alpha sweeps need a 2x2 block and three outputs");
                }
                let r = (1.0 - eps * eps).sqrt();
                let p = DVector::from_vec(vec![r * value.cos(), r * value.sin()]);
                let f = numeric("sweep.m_block", UpperFactor::from_parts(eps, &p, &mb))?;
                numeric("sweep.m_block", NoiseCovariance::new(f.covariance()))?
            }
            _ => {
                let section = self
                    .noise
                    .as_ref()
                    .ok_or_else(|| ExperimentError::config("noise", "required"))?;
                let mat = matrix("noise.matrix", &section.matrix)?;
                if mat.nrows() != m {
                    return err(
                        "noise.matrix",
                        format!("{}x{} noise for {m} outputs", mat.nrows(), mat.ncols()),
                    );
                }
                let built = match section.form {
                    NoiseForm::Covariance => NoiseCovariance::new(mat),
                    NoiseForm::Lower => NoiseCovariance::from_factor(&mat),
                    NoiseForm::Upper => UpperFactor::new(mat).and_then(|f| NoiseCovariance::new(f.covariance())),
                };
                numeric("noise.matrix", built)?
            }
        };
        Ok(noise)
    }

    pub fn input_spectrum(&self) -> Result<InputSpectrum> {
        let spec = match self.input.kind {
            InputKind::White => InputSpectrum::white(self.input.variance),
            InputKind::Ar => {
                let poles: Vec<Complex64> = self.input.ar_poles.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                InputSpectrum::autoregressive(&poles, self.input.variance)
            }
        };
        numeric("input", spec)
    }

    pub fn basis(&self, n: usize) -> Result<BasisSet> {
        Ok(match self.model.basis {
            BasisName::Fir => fir_basis(n),
            BasisName::Tm => {
                let poles: Vec<Complex64> = self.model.poles.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                let full = numeric("model.poles", takenaka_malmquist(&poles, n.max(poles.len())))?;
                numeric("model.poles", full.truncated(n))?
            }
            BasisName::PrefilteredFir => prefiltered_fir_basis(&Rational::fir(self.model.prefilter.clone()), n),
        })
    }

    /// `σ²` such that the basis Gram matrix under the input spectrum is `σ² I`.
    pub fn regressor_variance(basis: &BasisSet, input: &InputSpectrum) -> Result<Option<f64>> {
        let gram = gram_matrix(basis, input)?;
        let s = gram[(0, 0)].re;
        let n = gram.nrows();
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { s } else { 0.0 };
                if (gram[(r, c)] - target).norm() > ORTHONORMAL_TOLERANCE * s {
                    return Ok(None);
                }
            }
        }
        Ok(Some(s))
    }

    pub fn scenario(&self, value: f64) -> Result<Scenario> {
        let orders = self.orders_at(value)?;
        let n_max = *orders.iter().max().unwrap();
        let basis = self.basis(n_max)?;
        let model = numeric("model", SimoModel::new(orders.clone(), basis.clone()))?;
        let theta0 = if self.model.theta.is_empty() {
            ParameterVector::zeros(&model)
        } else {
            ParameterVector::new(self.model.theta.clone()).resized(&orders)
        };
        let input = self.input_spectrum()?;
        let sigma2 = Self::regressor_variance(&basis, &input)?;
        Ok(Scenario {
            sweep_value: value,
            model,
            theta0,
            input,
            noise: self.noise_at(value)?,
            sigma2,
        })
    }
}
