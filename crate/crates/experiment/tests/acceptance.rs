//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use simovar::{analyze, run, Figure};
use simovar_core::basis::{gram_matrix, gram_schmidt_orthonormalize, Rational};
use simovar_core::miso::{miso_least_squares, simulate_miso};
use simovar_core::montecarlo::{run_indexed, stream_rng, Execution};
use simovar_core::noise::two_channel_lower;
use simovar_core::{
    ascov_frf, asvar_ar_input, asvar_module, fir_basis, miso_param_cov, optimal_first_row, param_cov_blocks,
    takenaka_malmquist, variance_increase_predicate, BasisSet, InputSpectrum, MisoSpec, NoiseCovariance,
};

type EdgeSet = BTreeSet<(usize, usize)>;
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(key: u64) -> ChaCha8Rng {
    stream_rng(0x00AC_CE97, key)
}

fn random_noise(r: &mut ChaCha8Rng, m: usize) -> NoiseCovariance {
    let l = DMatrix::from_fn(m, m, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => r.gen_range(0.2..2.0),
        std::cmp::Ordering::Greater => r.gen_range(-1.0..1.0),
        std::cmp::Ordering::Less => 0.0,
    });
    NoiseCovariance::from_factor(&l).unwrap()
}

fn random_basis(r: &mut ChaCha8Rng, n: usize) -> (BasisSet, &'static str) {
    if r.gen_bool(0.5) {
        (fir_basis(n), "fir")
    } else {
        let count = r.gen_range(1..=3).min(n);
        let poles: Vec<Complex64> = (0..count)
            .map(|_| Complex64::new(r.gen_range(-0.9..0.9), 0.0))
            .collect();
        (takenaka_malmquist(&poles, n).unwrap(), "tm")
    }
}

/// Intro example reproduced entrywise.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for beta in [0.1_f64, 0.5, 0.9] {
        let noise = NoiseCovariance::from_factor(&two_channel_lower(beta)).unwrap();
        let got = param_cov_blocks(&noise, &[1, 2], 1.0).unwrap().stacked();
        let s = (1.0 - beta * beta).sqrt();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, s, 0.0, s, 1.0, 0.0, 0.0, 0.0, beta * beta]);
        worst = worst.max((got - expected).amax());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_millis(1),
        format!(
            "max entry error {worst:.2e} (tol 1e-12), {:.1} us (limit 1 ms)",
            elapsed.as_secs_f64() * 1e6
        ),
    )
}

/// Conditional variances on the three-channel example.
fn criterion_2() -> Outcome {
    let noise = NoiseCovariance::from_row_major(3, &[1.0, 0.6, 0.9, 0.6, 1.0, 0.54, 0.9, 0.54, 1.0]).unwrap();
    let l21 = noise.lambda_conditional(1, 1).unwrap();
    let l31 = noise.lambda_conditional(2, 1).unwrap();
    let err = (l21 - 0.64).abs().max((l31 - 0.19).abs());
    outcome(
        err <= 1e-12,
        format!("lambda_2|1 = {l21:.15}, lambda_3|1 = {l31:.15}, error {err:.2e} (tol 1e-12)"),
    )
}

/// FRF covariance from the inverse of the numerically integrated information matrix.
fn oracle_frf_cov(
    noise: &NoiseCovariance,
    orders: &[usize],
    sigma2: f64,
    basis: &BasisSet,
    omega: f64,
) -> DMatrix<Complex64> {
    let m = orders.len();
    let n_max = *orders.iter().max().unwrap();
    let gram = gram_matrix(&basis.truncated(n_max).unwrap(), &InputSpectrum::white(sigma2).unwrap()).unwrap();
    let w = noise.matrix().clone().try_inverse().unwrap();
    let offsets: Vec<usize> = orders
        .iter()
        .scan(0, |a, &n| {
            let o = *a;
            *a += n;
            Some(o)
        })
        .collect();
    let p: usize = orders.iter().sum();
    let mut info = DMatrix::<f64>::zeros(p, p);
    for i in 0..m {
        for j in 0..m {
            for k in 0..orders[i] {
                for l in 0..orders[j] {
                    info[(offsets[i] + k, offsets[j] + l)] = w[(i, j)] * gram[(k, l)].re;
                }
            }
        }
    }
    let cov = info.try_inverse().unwrap().map(|x| Complex64::new(x, 0.0));
    let b = basis.evaluate(omega);
    let mut jac = DMatrix::<Complex64>::zeros(m, p);
    for i in 0..m {
        for k in 0..orders[i] {
            jac[(i, offsets[i] + k)] = b[k];
        }
    }
    &jac * cov * jac.adjoint()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let mut worst = 0.0_f64;
    let mut kinds = BTreeSet::new();
    for _ in 0..50 {
        let m = r.gen_range(1..=4);
        let orders: Vec<usize> = (0..m).map(|_| r.gen_range(1..=6)).collect();
        let n_max = *orders.iter().max().unwrap();
        let noise = random_noise(&mut r, m);
        let (basis, kind) = random_basis(&mut r, n_max);
        kinds.insert(kind);
        let sigma2 = r.gen_range(0.5..2.0);
        let omega = r.gen_range(0.0..PI);
        let closed = ascov_frf(&noise, &orders, sigma2, &basis, omega).unwrap();
        let oracle = oracle_frf_cov(&noise, &orders, sigma2, &basis, omega);
        let scale = oracle.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let diff = (closed - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && elapsed < Duration::from_secs(30) && kinds.len() == 2,
        format!(
            "50 configs ({kinds:?}), max relative error {worst:.2e} (tol 1e-6), {:.2} s (limit 30 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn four_workers<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cfg = Figure::Fig5.config().unwrap();
    let table = four_workers(|| run(&cfg, Execution::Parallel)).unwrap();
    let elapsed = start.elapsed();
    let series = table.series("g3").unwrap();
    let sample: Vec<f64> = series.iter().map(|(_, v)| v.sample).collect();
    let rising = sample[..5].windows(2).all(|w| w[1] >= w[0]);
    let flat_ref = series[4].1;
    let flat = series[4..]
        .iter()
        .all(|(_, v)| (v.sample - flat_ref.sample).abs() <= 2.0 * flat_ref.stderr);
    let runs_ok = cfg.runs == 2000 && cfg.samples == 500 && table.total_excluded() == 0;
    outcome(
        rising && flat && runs_ok && elapsed < Duration::from_secs(300),
        format!(
            "N-scaled var G3(pi/3) by order: {}; rising to 5: {rising}, flat 5..8 within 2 SE: {flat}, {:.1} s (limit 300 s)",
            sample.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let cfg = Figure::Fig6.config().unwrap();
    let table = run(&cfg, Execution::Parallel).unwrap();
    let t21 = table.series("theta_2_1").unwrap();
    let t22 = table.series("theta_2_2").unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for beta in [0.2, 0.5, 0.8] {
        let row = t21
            .iter()
            .position(|(b, _)| (b - beta).abs() < 1e-12)
            .expect("beta in the sweep grid");
        worst = worst.max((t22[row].1.sample / (beta * beta) - 1.0).abs());
        worst = worst.max((t21[row].1.sample - 1.0).abs());
        checked += 1;
    }
    outcome(
        worst <= 0.10 && checked == 3 && cfg.runs == 2000 && cfg.samples == 500,
        format!(
            "max relative deviation {:.1}% over beta in (0.2, 0.5, 0.8) (tol 10%)",
            worst * 100.0
        ),
    )
}

fn criterion_6() -> Outcome {
    let cfg = Figure::Fig7.config().unwrap();
    let table = run(&cfg, Execution::Parallel).unwrap();
    let series = table.series("total").unwrap();
    let step = PI / (series.len() - 1) as f64;
    let argmin = series
        .iter()
        .min_by(|a, b| a.1.sample.total_cmp(&b.1.sample))
        .unwrap()
        .0;
    let argmax = series
        .iter()
        .max_by(|a, b| a.1.sample.total_cmp(&b.1.sample))
        .unwrap()
        .0;
    let m = DMatrix::from_row_slice(2, 2, &[0.8, 0.6, 0.0, 1.0]);
    let row = optimal_first_row(&m, 1.0).unwrap();
    let v_ok = (row[1] - 0.447).abs() <= 1e-3 && (row[2] - 0.894).abs() <= 1e-3;
    outcome(
        series.len() == 64 && (argmin - 1.11).abs() <= step && (argmax - 2.68).abs() <= step && v_ok,
        format!(
            "sample argmin {argmin:.3}, argmax {argmax:.3} (grid step {step:.3}); v1 = [{:.4}, {:.4}]",
            row[1], row[2]
        ),
    )
}

fn predicate_edges(noise: &NoiseCovariance, orders: &[usize]) -> BTreeSet<(usize, usize)> {
    let basis = fir_basis(*orders.iter().max().unwrap() + 1);
    let mut edges = BTreeSet::new();
    for i in 0..orders.len() {
        for j in 0..orders.len() {
            if i != j
                && variance_increase_predicate(noise, orders, 1.0, &basis, i, j, 0.7)
                    .unwrap()
                    .increases()
            {
                edges.insert((j + 1, i + 1));
            }
        }
    }
    edges
}

fn criterion_7() -> Outcome {
    let l = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, 0.4, 1.0, 0.0, 0.0, 0.2, 0.0, 1.0, 0.0, 0.0, 0.3, 0.0, 1.0,
        ],
    );
    let noise = NoiseCovariance::from_factor(&l).unwrap();
    let distinct = predicate_edges(&noise, &[1, 2, 3, 4]);
    let expected: BTreeSet<_> = [(1, 2), (1, 3), (2, 4)].into();
    let removed = |orders: &[usize]| -> (EdgeSet, EdgeSet) {
        let e = predicate_edges(&noise, orders);
        (
            distinct.difference(&e).copied().collect(),
            e.difference(&distinct).copied().collect(),
        )
    };
    let (cut_24, added_24) = removed(&[1, 2, 3, 2]);
    let (cut_123, added_123) = removed(&[1, 1, 1, 2]);
    // Any edge beyond the text must be a genuine increase of the child's variance.
    let basis = fir_basis(4);
    let genuine = |orders: &[usize], added: &BTreeSet<(usize, usize)>| {
        added.iter().all(|&(j, i)| {
            let mut grown = orders.to_vec();
            grown[j - 1] += 1;
            let before = asvar_module(&noise, orders, 1.0, &basis, i - 1, 0.7).unwrap();
            asvar_module(&noise, &grown, 1.0, &basis, i - 1, 0.7).unwrap() > before
        })
    };
    let pass = distinct == expected
        && cut_24 == [(2, 4)].into()
        && cut_123 == [(1, 2), (1, 3)].into()
        && genuine(&[1, 2, 3, 2], &added_24)
        && genuine(&[1, 1, 1, 2], &added_123);
    outcome(
        pass,
        format!(
            "distinct {distinct:?}; n2 = n4 cuts {cut_24:?} (adds {added_24:?}); n1 = n2 = n3 cuts {cut_123:?} (adds {added_123:?})"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    for beta in [0.3_f64, 0.7] {
        let s = (1.0 - beta * beta).sqrt();
        let spec = MisoSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, s, s, 1.0]), 1.0, vec![2, 1]).unwrap();
        let got = miso_param_cov(&spec).unwrap().stacked();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, -s, 0.0, beta * beta, 0.0, -s, 0.0, 1.0]) / (beta * beta);
        worst = worst.max((got - expected).amax());
    }
    // Monte Carlo at beta = 0.5.
    let beta: f64 = 0.5;
    let s = (1.0 - beta * beta).sqrt();
    let spec = MisoSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, s, s, 1.0]), 1.0, vec![2, 1]).unwrap();
    let basis = fir_basis(2);
    let theta = vec![vec![1.0, -0.5], vec![0.7]];
    let truth = DVector::from_vec(vec![1.0, -0.5, 0.7]);
    let (runs, n) = (2000, 500);
    let estimates = run_indexed(runs, Execution::Parallel, |r| {
        let mut g = stream_rng(0x5150, r as u64);
        let data = simulate_miso(&spec, &basis, &theta, n, &mut g).unwrap();
        let est = miso_least_squares(&data, spec.orders(), &basis).unwrap();
        DVector::from_vec(est.concat())
    });
    let mut sample = DMatrix::<f64>::zeros(3, 3);
    for e in &estimates {
        let d = e - &truth;
        sample += &d * d.transpose();
    }
    sample *= n as f64 / runs as f64;
    let predicted = miso_param_cov(&spec).unwrap().stacked();
    let rel = (&sample - &predicted).norm() / predicted.norm();
    outcome(
        worst <= 1e-12 && rel <= 0.10,
        format!(
            "example matrix error {worst:.2e} (tol 1e-12); MC Frobenius deviation {:.1}% (tol 10%)",
            rel * 100.0
        ),
    )
}

fn criterion_9() -> Outcome {
    let spectrum = InputSpectrum::autoregressive(&[Complex64::new(0.8, 0.0)], 1.0).unwrap();
    let tm = takenaka_malmquist(&[Complex64::new(0.8, 0.0)], 3).unwrap();
    let mut worst: f64 = 0.0;
    for beta in [1.0, 0.4] {
        let noise = NoiseCovariance::from_factor(&two_channel_lower(beta)).unwrap();
        for s in 0..64 {
            let w = PI * s as f64 / 63.0;
            for i in 0..2 {
                let a = asvar_ar_input(&noise, &[2, 3], &spectrum, i, w).unwrap();
                let b = asvar_module(&noise, &[2, 3], spectrum.value(w), &tm, i, w).unwrap();
                worst = worst.max((a - b).abs() / b);
            }
        }
    }
    let report = analyze(&Figure::Fig2.config().unwrap()).unwrap();
    let curve = |beta: f64| -> Vec<(f64, f64)> {
        report
            .select("asvar_ar")
            .filter(|r| r.i == 2 && r.sweep == Some(beta))
            .map(|r| (r.omega.unwrap(), r.re))
            .collect()
    };
    let (uncorrelated, correlated) = (curve(1.0), curve(0.4));
    let below = uncorrelated.len() == 64
        && uncorrelated
            .iter()
            .zip(&correlated)
            .all(|(u, c)| u.0 == c.0 && c.1 < u.1);
    outcome(
        worst <= 1e-8 && below,
        format!("max relative error vs TM oracle {worst:.2e} (tol 1e-8) on 64 points; beta = 0.4 curve below beta = 1: {below}"),
    )
}

/// Compact versions of the property suites with fixed seeds.
fn criterion_10() -> Outcome {
    let start = Instant::now();
    let mut r = rng(10);
    // Schur-complement equivalence.
    let mut schur_err: f64 = 0.0;
    for _ in 0..1000 {
        let m = r.gen_range(2..=5);
        let noise = random_noise(&mut r, m);
        let lam = noise.matrix();
        for given in 1..m {
            let a = lam.view((given, given), (m - given, m - given)).into_owned();
            let b = lam.view((given, 0), (m - given, given)).into_owned();
            let c = lam.view((0, 0), (given, given)).into_owned().try_inverse().unwrap();
            let expected = a - &b * c * b.transpose();
            let got = noise.conditional_block_cov(given, given).unwrap();
            schur_err = schur_err.max((got - &expected).amax() / expected.amax());
        }
    }
    // Gram orthonormality.
    let mut gram_err: f64 = 0.0;
    for n_a in 0..=2 {
        let poles: Vec<Complex64> = (0..n_a).map(|_| Complex64::new(r.gen_range(-0.8..0.8), 0.0)).collect();
        let spectrum = InputSpectrum::autoregressive(&poles, 1.0).unwrap();
        for n in 1..=8 {
            let pre = Rational::fir(vec![1.0, r.gen_range(-0.5..0.5)]);
            let raw: Vec<Rational> = (1..=n).map(|k| pre.mul(&Rational::delay(k))).collect();
            let ortho = gram_schmidt_orthonormalize(&raw, &spectrum).unwrap();
            let g = gram_matrix(&ortho, &spectrum).unwrap();
            let dev = (g - DMatrix::<Complex64>::identity(n, n))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            gram_err = gram_err.max(dev);
        }
    }
    // Monotone leveling.
    let mut leveling_ok = true;
    for _ in 0..50 {
        let m = r.gen_range(2..=4);
        let noise = random_noise(&mut r, m);
        let orders: Vec<usize> = (0..m).map(|_| r.gen_range(1..=6)).collect();
        let basis = fir_basis(8);
        let w = r.gen_range(0.0..PI);
        let i = r.gen_range(0..m);
        let j = (i + 1) % m;
        let mut grown = orders.clone();
        let mut prev = asvar_module(&noise, &orders, 1.0, &basis, i, w).unwrap();
        for nj in orders[j] + 1..=8 {
            grown[j] = nj;
            let v = asvar_module(&noise, &grown, 1.0, &basis, i, w).unwrap();
            leveling_ok &= v >= prev - 1e-10 * prev;
            if nj > orders[i] {
                leveling_ok &= (v - prev).abs() <= 1e-10 * prev;
            }
            prev = v;
        }
    }
    // Scaling invariance of the optimal direction.
    let mut dir_err: f64 = 0.0;
    for _ in 0..200 {
        let d = r.gen_range(1..=4);
        let m = DMatrix::from_fn(d, d, |_, _| r.gen_range(-2.0..2.0));
        let l1 = r.gen_range(0.1..10.0);
        let c = r.gen_range(0.01..100.0);
        let a = optimal_first_row(&m, l1).unwrap().normalize();
        let b = optimal_first_row(&m, c * l1).unwrap().normalize();
        dir_err = dir_err.max((a - b).amax());
    }
    let elapsed = start.elapsed();
    outcome(
        schur_err <= 1e-8 && gram_err <= 1e-8 && leveling_ok && dir_err <= 1e-9 && elapsed < Duration::from_secs(120),
        format!(
            "schur {schur_err:.1e} (tol 1e-8), gram {gram_err:.1e} (tol 1e-8), leveling {leveling_ok}, direction {dir_err:.1e} (tol 1e-9), {:.2} s (limit 120 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    // Respect `cargo test -- <filter>` loosely: any filter argument that does
    // not mention "acceptance" skips the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty()
        && !args
            .iter()
            .any(|a| "acceptance".contains(a.as_str()) || a.contains("criterion"))
    {
        return;
    }
    let criteria: [Criterion; 10] = [
        ("intro-example exactness", criterion_1),
        ("conditional variances", criterion_2),
        ("oracle equivalence", criterion_3),
        ("model-order sweep", criterion_4),
        ("correlation sweep", criterion_5),
        ("optimal correlation", criterion_6),
        ("variance-increase predicate", criterion_7),
        ("MISO duality", criterion_8),
        ("AR-input theorem", criterion_9),
        ("property suites", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
