//! The `run`, `analyze` and `optimize` commands.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use simovar_core::basis::BasisKind;
use simovar_core::model::ParameterVector;
use simovar_core::montecarlo::{self, stream_key, stream_rng, Execution, SimoCampaign};
use simovar_core::optimal::{self, check_order_pattern, leading_right_singular_vector};
use simovar_core::{
    ascov_frf, asvar_ar_input, asvar_module, conditional_cov_from_upper, optimal_first_row_regularized,
    param_cov_blocks, UpperFactor,
};

use crate::config::{ExperimentConfig, InputKind, NamedStatistic, Scenario, Statistic, SweepParameter};
use crate::error::{ExperimentError, Result};
use crate::table::{FigureRow, FigureTable, OptimizeTable, ReportRow, ReportTable, StatValues};

/// Angles in the grid cross-check of `optimize` when `M` is 2 x 2.
pub const ANGLE_GRID: usize = 3600;
/// Random directions in the cross-check for larger `M`.
pub const DIRECTION_SAMPLES: usize = 10_000;

fn sweep_name(cfg: &ExperimentConfig) -> String {
    match cfg.sweep.as_ref().map(|s| s.parameter) {
        Some(SweepParameter::Beta) => "beta".into(),
        Some(SweepParameter::Alpha) => "alpha".into(),
        Some(SweepParameter::Order) => "order".into(),
        None => "point".into(),
    }
}

fn orthonormal_sigma2(sc: &Scenario) -> Result<f64> {
    sc.sigma2.ok_or_else(|| {
        ExperimentError::config(
            "model.basis",
            "closed-form predictions need a basis orthonormal under the input spectrum",
        )
    })
}

fn check_statistic(sc: &Scenario, st: &NamedStatistic) -> Result<()> {
    let orders = sc.model.orders();
    let bad = match st.stat {
        Statistic::ParamVar { module, k } => k >= orders[module],
        Statistic::TotalVar { k } => orders.iter().all(|&n| n <= k),
        Statistic::FrfVar { .. } => false,
    };
    if bad {
        return Err(ExperimentError::config(
            "statistic",
            format!(
                "{} refers to a parameter absent at sweep value {}",
                st.name, sc.sweep_value
            ),
        ));
    }
    Ok(())
}

fn prediction(sc: &Scenario, sigma2: f64, st: &Statistic) -> Result<f64> {
    let orders = sc.model.orders();
    Ok(match *st {
        Statistic::ParamVar { module, k } => param_cov_blocks(&sc.noise, orders, sigma2)?
            .variance(module, k)
            .expect("checked against the orders"),
        Statistic::FrfVar { module, omega } => {
            asvar_module(&sc.noise, orders, sigma2, sc.model.basis(), module, omega)?
        }
        Statistic::TotalVar { k } => param_cov_blocks(&sc.noise, orders, sigma2)?.blocks[k].cov.trace(),
    })
}

/// Per-run value of a statistic, already multiplied by `N`.
fn sample_value(sc: &Scenario, n: f64, st: &Statistic, est: &ParameterVector) -> Result<f64> {
    let truth = &sc.theta0;
    Ok(match *st {
        Statistic::ParamVar { module, k } => n * (est.blocks[module][k] - truth.blocks[module][k]).powi(2),
        Statistic::FrfVar { module, omega } => {
            let g0 = sc.model.frequency_response(truth, omega)?[module];
            let g = sc.model.frequency_response(est, omega)?[module];
            n * (g - g0).norm_sqr()
        }
        Statistic::TotalVar { k } => {
            let mut acc = 0.0;
            for (b, t) in est.blocks.iter().zip(&truth.blocks) {
                if k < b.len() {
                    acc += (b[k] - t[k]).powi(2);
                }
            }
            n * acc
        }
    })
}

/// Monte Carlo campaign over every sweep point. Sample columns are
/// `N`-scaled so they estimate the asymptotic values in the prediction
/// columns.
pub fn run(cfg: &ExperimentConfig, exec: Execution) -> Result<FigureTable> {
    let stats = cfg.statistics()?;
    if stats.is_empty() {
        return Err(ExperimentError::config(
            "statistic",
            "run needs at least one [[statistic]]",
        ));
    }
    let points = cfg.sweep_points()?;
    let n = cfg.samples as f64;
    let mut rows = Vec::with_capacity(points.len());
    for (s, &value) in points.iter().enumerate() {
        let sc = cfg.scenario(value)?;
        let sigma2 = orthonormal_sigma2(&sc)?;
        for st in &stats {
            check_statistic(&sc, st)?;
        }
        let campaign = SimoCampaign {
            model: &sc.model,
            theta0: &sc.theta0,
            input: &sc.input,
            noise: &sc.noise,
            samples: cfg.samples,
            runs: cfg.runs,
            seed: cfg.seed,
        };
        let crn = cfg.common_random_numbers;
        let results = campaign.estimates(exec, |r| stream_key(if crn { 0 } else { s as u64 }, r as u64));
        let first_error = results.iter().find_map(|r| r.as_ref().err().cloned());
        let (estimates, excluded) = montecarlo::partition_results(results);
        if estimates.len() < 2 {
            return Err(first_error.map(ExperimentError::from).unwrap_or_else(|| {
                ExperimentError::config("runs", "at least two successful runs are needed per sweep point")
            }));
        }
        let mut values = Vec::with_capacity(stats.len());
        for st in &stats {
            let per_run = estimates
                .iter()
                .map(|e| sample_value(&sc, n, &st.stat, e))
                .collect::<Result<Vec<f64>>>()?;
            let summary = montecarlo::summarize(&per_run);
            values.push(StatValues {
                prediction: prediction(&sc, sigma2, &st.stat)?,
                sample: summary.mean,
                stderr: summary.stderr,
            });
        }
        rows.push(FigureRow {
            sweep: value,
            values,
            excluded,
        });
    }
    Ok(FigureTable {
        sweep_name: sweep_name(cfg),
        stats: stats.into_iter().map(|s| s.name).collect(),
        rows,
    })
}

/// Closed-form covariances at every sweep point and frequency.
///
/// With a basis orthonormal under the input spectrum this emits the
/// parameter covariance, the FRF covariance and per-module variances. With
/// an FIR basis and AR input it emits the AR-input variance together with
/// its pole term.
pub fn analyze(cfg: &ExperimentConfig) -> Result<ReportTable> {
    let omegas = cfg.omega.grid();
    let swept = cfg.sweep.is_some();
    let mut table = ReportTable::default();
    for value in cfg.sweep_points()? {
        let sc = cfg.scenario(value)?;
        let sweep = swept.then_some(value);
        let orders = sc.model.orders();
        let m = orders.len();
        let ar_fir = cfg.input.kind == InputKind::Ar && matches!(sc.model.basis().kind(), BasisKind::Fir);
        if sc.sigma2.is_none() && !ar_fir {
            return Err(ExperimentError::config(
                "model.basis",
                "analyze needs a basis orthonormal under the input spectrum, or an FIR basis with AR input",
            ));
        }
        let mut push = |quantity: &str, omega: Option<f64>, i: usize, j: usize, re: f64, im: f64| {
            table.rows.push(ReportRow {
                sweep,
                quantity: quantity.into(),
                omega,
                i: i + 1,
                j: j + 1,
                re,
                im,
            })
        };
        if let Some(sigma2) = sc.sigma2 {
            let cov = param_cov_blocks(&sc.noise, orders, sigma2)?.stacked();
            for r in 0..cov.nrows() {
                for c in 0..cov.ncols() {
                    push("param_cov", None, r, c, cov[(r, c)], 0.0);
                }
            }
            for &w in &omegas {
                let frf = ascov_frf(&sc.noise, orders, sigma2, sc.model.basis(), w)?;
                for i in 0..m {
                    for j in 0..m {
                        push("frf_cov", Some(w), i, j, frf[(i, j)].re, frf[(i, j)].im);
                    }
                }
                for i in 0..m {
                    push(
                        "asvar",
                        Some(w),
                        i,
                        i,
                        asvar_module(&sc.noise, orders, sigma2, sc.model.basis(), i, w)?,
                        0.0,
                    );
                }
            }
        }
        if ar_fir {
            let poles: Vec<_> = sc.input.ar_poles.clone();
            for &w in &omegas {
                let z = nalgebra::Complex::from_polar(1.0, w);
                let pole_sum: f64 = poles
                    .iter()
                    .map(|&xi| (1.0 - xi.norm_sqr()) / (z - xi).norm_sqr())
                    .sum();
                for i in 0..m {
                    push(
                        "asvar_ar",
                        Some(w),
                        i,
                        i,
                        asvar_ar_input(&sc.noise, orders, &sc.input, i, w)?,
                        0.0,
                    );
                    push(
                        "pole_term",
                        Some(w),
                        i,
                        i,
                        sc.noise.variance(i) * pole_sum / sc.input.value(w),
                        0.0,
                    );
                }
            }
        }
    }
    Ok(table)
}

/// Optimal first row of the upper noise factor for `n_1 + 1 = n_2 = … = n_m`.
///
/// Rows: `eta`, `lambda1`, `v1` (per entry), `b1_star` (keeping the
/// configured `η`), `b1_ideal` (`η = 0`), `tvar_current`, `tvar_optimal`,
/// `tvar_ideal`, `grid_tvar_min`, and `alpha0` when `M` is 2 x 2.
pub fn optimize(cfg: &ExperimentConfig) -> Result<OptimizeTable> {
    check_order_pattern(&cfg.model.orders).map_err(|e| ExperimentError::config("model.orders", e.to_string()))?;
    if cfg.sweep.is_some() {
        return Err(ExperimentError::config(
            "sweep",
            "optimize takes a fixed noise configuration",
        ));
    }
    let sc = cfg.scenario(f64::NAN)?;
    let sigma2 = orthonormal_sigma2(&sc)?;
    let factor = UpperFactor::of(&sc.noise)?;
    let (eta, lambda1, m_block) = (factor.eta(), factor.lambda1(), factor.m_block());
    let tvar = |eta: f64, p: &DVector<f64>| -> Result<f64> {
        let f = UpperFactor::from_parts(eta, p, &m_block)?;
        Ok(conditional_cov_from_upper(&f)?.trace() / sigma2)
    };
    let v1 = leading_right_singular_vector(&m_block);
    let star = optimal_first_row_regularized(&m_block, lambda1, eta)?;
    let ideal = optimal_first_row_regularized(&m_block, lambda1, 0.0)?;
    let dim = m_block.nrows();
    let mut t = OptimizeTable::default();
    t.push("eta", 1, eta);
    t.push("lambda1", 1, lambda1);
    for (i, x) in v1.iter().enumerate() {
        t.push("v1", i + 1, *x);
    }
    for (i, x) in star.iter().enumerate() {
        t.push("b1_star", i + 1, *x);
    }
    for (i, x) in ideal.iter().enumerate() {
        t.push("b1_ideal", i + 1, *x);
    }
    t.push("tvar_current", 1, optimal::total_variance(&sc.noise, sigma2)?);
    t.push("tvar_optimal", 1, tvar(eta, &star.rows(1, dim).into_owned())?);
    let ideal_tvar = tvar(0.0, &ideal.rows(1, dim).into_owned())?;
    t.push("tvar_ideal", 1, ideal_tvar);
    // Cross-check the ideal optimum against a search over directions.
    let radius = lambda1.sqrt();
    let mut best = f64::INFINITY;
    if dim == 2 {
        for s in 0..ANGLE_GRID {
            let a = std::f64::consts::PI * s as f64 / ANGLE_GRID as f64;
            best = best.min(tvar(0.0, &DVector::from_vec(vec![radius * a.cos(), radius * a.sin()]))?);
        }
        t.push("alpha0", 1, v1[1].atan2(v1[0]));
    } else {
        let mut rng = stream_rng(cfg.seed, u64::MAX);
        for _ in 0..DIRECTION_SAMPLES {
            let d = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            if d.norm() > 0.0 {
                best = best.min(tvar(0.0, &(d.normalize() * radius))?);
            }
        }
    }
    t.push("grid_tvar_min", 1, best);
    Ok(t)
}
