//! Orthonormal scalar basis functions and spectrum-weighted inner products.
//!
//! Transfer functions are written in the backward shift `q⁻¹`; evaluating at
//! frequency `ω` substitutes `q⁻¹ = e^{-jω}`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Initial number of quadrature nodes on `[-π, π)`.
pub const QUADRATURE_START: usize = 1024;
/// Largest node count tried before giving up.
pub const QUADRATURE_MAX: usize = 1 << 20;
/// Frobenius change between successive refinements that counts as converged.
pub const QUADRATURE_TOLERANCE: f64 = 1e-9;
/// Gram–Schmidt pivot norms below this are treated as dependence.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Real rational transfer function `num(q⁻¹) / den(q⁻¹)` with `den[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rational {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl Rational {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        match den.first() {
            Some(&d0) if d0 != 0.0 => {
                let num = num.iter().map(|b| b / d0).collect();
                let den = den.iter().map(|a| a / d0).collect();
                Ok(Rational { num, den })
            }
            _ => Err(Error::InvalidArgument(
                "denominator must have a nonzero leading coefficient".into(),
            )),
        }
    }

    /// FIR filter with the given impulse response.
    pub fn fir(num: Vec<f64>) -> Self {
        Rational { num, den: vec![1.0] }
    }

    /// Pure delay `q^{-k}`.
    pub fn delay(k: usize) -> Self {
        let mut num = vec![0.0; k + 1];
        num[k] = 1.0;
        Self::fir(num)
    }

    pub fn eval(&self, omega: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, -omega);
        poly_eval(&self.num, z) / poly_eval(&self.den, z)
    }

    /// Filters `x` from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for t in 0..x.len() {
            let mut acc = 0.0;
            for (k, b) in self.num.iter().enumerate() {
                if k > t {
                    break;
                }
                acc += b * x[t - k];
            }
            for (k, a) in self.den.iter().enumerate().skip(1) {
                if k > t {
                    break;
                }
                acc -= a * y[t - k];
            }
            y[t] = acc;
        }
        y
    }

    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut x = vec![0.0; len];
        if len > 0 {
            x[0] = 1.0;
        }
        self.filter(&x)
    }

    pub fn mul(&self, other: &Rational) -> Rational {
        Rational {
            num: poly_mul(&self.num, &other.num),
            den: poly_mul(&self.den, &other.den),
        }
    }

    pub fn scale(&self, c: f64) -> Rational {
        Rational {
            num: self.num.iter().map(|b| b * c).collect(),
            den: self.den.clone(),
        }
    }

    /// `Σ c_l f_l` brought over a common denominator.
    pub fn linear_combination(coeffs: &[f64], functions: &[Rational]) -> Rational {
        if let Some(first) = functions.first() {
            if functions.iter().all(|f| f.den == first.den) {
                let mut num = Vec::new();
                for (c, f) in coeffs.iter().zip(functions) {
                    poly_add_scaled(&mut num, &f.num, *c);
                }
                return Rational {
                    num,
                    den: first.den.clone(),
                };
            }
        }
        let den = functions.iter().fold(vec![1.0], |acc, f| poly_mul(&acc, &f.den));
        let mut num = Vec::new();
        for (l, (c, f)) in coeffs.iter().zip(functions).enumerate() {
            let others = functions
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != l)
                .fold(vec![1.0], |acc, (_, g)| poly_mul(&acc, &g.den));
            poly_add_scaled(&mut num, &poly_mul(&f.num, &others), *c);
        }
        Rational { num, den }
    }
}

fn poly_eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add_scaled(acc: &mut Vec<f64>, p: &[f64], c: f64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, x) in acc.iter_mut().zip(p) {
        *a += c * x;
    }
}

/// Real coefficients of `Π (1 − ξ_k q⁻¹)`. Complex poles must come in
/// conjugate pairs.
pub fn pole_polynomial(poles: &[Complex64]) -> Result<Vec<f64>> {
    check_conjugate_pairs(poles)?;
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &p in poles {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &x) in c.iter().enumerate() {
            next[i] += x;
            next[i + 1] -= x * p;
        }
        c = next;
    }
    Ok(c.iter().map(|x| x.re).collect())
}

fn check_stable(poles: &[Complex64]) -> Result<()> {
    for p in poles {
        if !(p.norm() < 1.0) {
            return Err(Error::UnstablePole(format!("{p}")));
        }
    }
    Ok(())
}

fn check_conjugate_pairs(poles: &[Complex64]) -> Result<()> {
    const TOL: f64 = 1e-12;
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] || poles[i].im.abs() <= TOL {
            continue;
        }
        let partner = (0..poles.len()).find(|&j| j != i && !used[j] && (poles[j] - poles[i].conj()).norm() <= TOL);
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => {
                return Err(Error::InvalidArgument(format!(
                    "pole {} has no conjugate partner",
                    poles[i]
                )));
            }
        }
    }
    Ok(())
}

/// Which family a [`BasisSet`] belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    /// Pure delays `q^{-k}`.
    Fir,
    /// Takenaka–Malmquist functions; poles beyond the list are zero.
    TakenakaMalmquist { poles: Vec<Complex64> },
    /// Explicit real rational functions (prefiltered or orthonormalized sets).
    Rational(Vec<Rational>),
}

/// Ordered list of `count` scalar basis functions `B_1, …, B_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    kind: BasisKind,
    count: usize,
}

/// Delay basis `B_k = q^{-k}`, `k = 1..=n`.
pub fn fir_basis(n: usize) -> BasisSet {
    BasisSet {
        kind: BasisKind::Fir,
        count: n,
    }
}

/// Takenaka–Malmquist basis for the given poles, padded with poles at zero
/// up to `n` functions. The functions depend on the order of `poles`; their
/// span does not.
pub fn takenaka_malmquist(poles: &[Complex64], n: usize) -> Result<BasisSet> {
    check_stable(poles)?;
    check_conjugate_pairs(poles)?;
    if n < poles.len() {
        return Err(Error::InvalidArgument(format!(
            "{} functions requested for {} poles",
            n,
            poles.len()
        )));
    }
    Ok(BasisSet {
        kind: BasisKind::TakenakaMalmquist { poles: poles.to_vec() },
        count: n,
    })
}

/// `prefilter(q) · q^{-k}`, `k = 1..=n`.
pub fn prefiltered_fir_basis(prefilter: &Rational, n: usize) -> BasisSet {
    let functions = (1..=n).map(|k| prefilter.mul(&Rational::delay(k))).collect();
    BasisSet {
        kind: BasisKind::Rational(functions),
        count: n,
    }
}

impl BasisSet {
    /// Explicit list of real rational functions.
    pub fn from_rationals(functions: Vec<Rational>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidArgument("empty basis".into()));
        }
        let count = functions.len();
        Ok(BasisSet {
            kind: BasisKind::Rational(functions),
            count,
        })
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// The first `n` functions.
    pub fn truncated(&self, n: usize) -> Result<BasisSet> {
        if n > self.count {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} functions, asked for {n}",
                self.count
            )));
        }
        let kind = match &self.kind {
            BasisKind::Rational(f) => BasisKind::Rational(f[..n].to_vec()),
            k => k.clone(),
        };
        Ok(BasisSet { kind, count: n })
    }

    fn pole(&self, k: usize) -> Complex64 {
        match &self.kind {
            BasisKind::TakenakaMalmquist { poles } => poles.get(k).copied().unwrap_or_default(),
            _ => Complex64::default(),
        }
    }

    /// `(B_1(e^{jω}), …, B_n(e^{jω}))`.
    pub fn evaluate(&self, omega: f64) -> Vec<Complex64> {
        match &self.kind {
            BasisKind::Fir => (1..=self.count)
                .map(|k| Complex64::from_polar(1.0, -(k as f64) * omega))
                .collect(),
            BasisKind::Rational(f) => f.iter().map(|r| r.eval(omega)).collect(),
            BasisKind::TakenakaMalmquist { .. } => {
                let z = Complex64::from_polar(1.0, omega);
                let one = Complex64::new(1.0, 0.0);
                let mut blaschke = one;
                let mut out = Vec::with_capacity(self.count);
                for k in 0..self.count {
                    let xi = self.pole(k);
                    let gain = (1.0 - xi.norm_sqr()).sqrt();
                    out.push(blaschke * gain / (z - xi));
                    blaschke *= (one - xi.conj() * z) / (z - xi);
                }
                out
            }
        }
    }

    /// `|B_k(e^{jω})|²` for every function.
    pub fn magnitudes_squared(&self, omega: f64) -> Vec<f64> {
        self.evaluate(omega).iter().map(|b| b.norm_sqr()).collect()
    }

    /// Real rational realization of every function, used for filtering.
    pub fn functions(&self) -> Result<Vec<Rational>> {
        match &self.kind {
            BasisKind::Fir => Ok((1..=self.count).map(Rational::delay).collect()),
            BasisKind::Rational(f) => Ok(f.clone()),
            BasisKind::TakenakaMalmquist { poles } => {
                if poles.iter().any(|p| p.im != 0.0) {
                    return Err(Error::NotRealizable(
                        "Takenaka–Malmquist functions with complex poles have complex coefficients".into(),
                    ));
                }
                let mut out = Vec::with_capacity(self.count);
                // Running all-pass numerator Π (q⁻¹ − ξ_i) and denominator Π (1 − ξ_i q⁻¹).
                let mut ap_num = vec![1.0];
                let mut den = vec![1.0];
                for k in 0..self.count {
                    let xi = self.pole(k).re;
                    let gain = (1.0 - xi * xi).sqrt();
                    let den_k = poly_mul(&den, &[1.0, -xi]);
                    let num_k = poly_mul(&ap_num, &[0.0, gain]);
                    out.push(Rational {
                        num: num_k,
                        den: den_k.clone(),
                    });
                    ap_num = poly_mul(&ap_num, &[-xi, 1.0]);
                    den = den_k;
                }
                Ok(out)
            }
        }
    }

    /// Filters `u` through every basis function; element `k` is `B_{k+1}(q) u`.
    pub fn filter_all(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        match &self.kind {
            BasisKind::Fir => Ok((1..=self.count)
                .map(|k| {
                    let mut v = vec![0.0; u.len()];
                    if k < u.len() {
                        v[k..].copy_from_slice(&u[..u.len() - k]);
                    }
                    v
                })
                .collect()),
            _ => Ok(self.functions()?.iter().map(|f| f.filter(u)).collect()),
        }
    }
}

/// Stationary input spectrum `Φ_u(ω) = σ_w² / |A(e^{jω})|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpectrum {
    pub sigma_w2: f64,
    pub ar_poles: Vec<Complex64>,
}

impl InputSpectrum {
    /// White spectrum of variance `sigma2`.
    pub fn white(sigma2: f64) -> Result<Self> {
        Self::autoregressive(&[], sigma2)
    }

    /// `u = w / A(q)` with `A(q) = Π (1 − ξ_k q⁻¹)` and `var w = sigma_w2`.
    pub fn autoregressive(poles: &[Complex64], sigma_w2: f64) -> Result<Self> {
        if !(sigma_w2 > 0.0 && sigma_w2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "input variance must be positive, got {sigma_w2}"
            )));
        }
        check_stable(poles)?;
        check_conjugate_pairs(poles)?;
        Ok(InputSpectrum {
            sigma_w2,
            ar_poles: poles.to_vec(),
        })
    }

    pub fn is_white(&self) -> bool {
        self.ar_poles.is_empty()
    }

    pub fn value(&self, omega: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -omega);
        let a2: f64 = self.ar_poles.iter().map(|&p| (1.0 - p * z_inv).norm_sqr()).product();
        self.sigma_w2 / a2
    }

    /// Real coefficients of `A(q⁻¹)`.
    pub fn ar_polynomial(&self) -> Vec<f64> {
        pole_polynomial(&self.ar_poles).expect("poles validated at construction")
    }

    /// Shaping filter `1 / A(q)`.
    pub fn shaping_filter(&self) -> Rational {
        Rational {
            num: vec![1.0],
            den: self.ar_polynomial(),
        }
    }
}

/// Mean of a periodic matrix-valued function over `[-π, π)`, refining an
/// equispaced rule until successive estimates agree to `QUADRATURE_TOLERANCE`.
pub fn periodic_mean<F>(rows: usize, cols: usize, f: F) -> Result<DMatrix<Complex64>>
where
    F: Fn(f64) -> DMatrix<Complex64>,
{
    let node = |j: usize, n: usize| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (j as f64) / (n as f64);
    let mut n = QUADRATURE_START;
    let mut sum = DMatrix::<Complex64>::zeros(rows, cols);
    for j in 0..n {
        sum += f(node(j, n));
    }
    let mut estimate = sum.clone() / Complex64::from(n as f64);
    let mut change = f64::INFINITY;
    while n < QUADRATURE_MAX {
        for j in 0..n {
            sum += f(node(2 * j + 1, 2 * n));
        }
        n *= 2;
        let next = sum.clone() / Complex64::from(n as f64);
        change = (&next - &estimate).norm();
        estimate = next;
        if change < QUADRATURE_TOLERANCE {
            return Ok(estimate);
        }
    }
    Err(Error::QuadratureNotConverged(change))
}

/// `⟨B_k, B_l⟩_Φ = (1/2π) ∫ B_k Φ B_l* dω`.
pub fn gram_matrix(basis: &BasisSet, spectrum: &InputSpectrum) -> Result<DMatrix<Complex64>> {
    let n = basis.len();
    periodic_mean(n, n, |w| {
        let b = basis.evaluate(w);
        let phi = spectrum.value(w);
        DMatrix::from_fn(n, n, |k, l| b[k] * b[l].conj() * phi)
    })
}

fn gram_of_rationals(functions: &[Rational], spectrum: &InputSpectrum) -> Result<DMatrix<f64>> {
    let n = functions.len();
    let g = periodic_mean(n, n, |w| {
        let b: Vec<Complex64> = functions.iter().map(|f| f.eval(w)).collect();
        let phi = spectrum.value(w);
        DMatrix::from_fn(n, n, |k, l| b[k] * b[l].conj() * phi)
    })?;
    Ok(linalg::symmetrized(g.map(|x| x.re)))
}

/// Orthonormalizes `functions` under the `Φ`-weighted inner product, in order.
///
/// Each output function has a positive first nonzero impulse-response
/// coefficient.
pub fn gram_schmidt_orthonormalize(functions: &[Rational], spectrum: &InputSpectrum) -> Result<BasisSet> {
    if functions.is_empty() {
        return Err(Error::InvalidArgument("nothing to orthonormalize".into()));
    }
    let n = functions.len();
    let gram = gram_of_rationals(functions, spectrum)?;
    // Classical Gram–Schmidt in coefficient space: C = L⁻¹ with G = L Lᵀ.
    let mut coeffs = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let mut c = vec![0.0; n];
        c[k] = 1.0;
        for prev in 0..k {
            let proj: f64 = (0..n)
                .map(|a| (0..n).map(|b| coeffs[(prev, a)] * gram[(a, b)] * c[b]).sum::<f64>())
                .sum();
            for a in 0..n {
                c[a] -= proj * coeffs[(prev, a)];
            }
        }
        let norm2: f64 = (0..n)
            .map(|a| (0..n).map(|b| c[a] * gram[(a, b)] * c[b]).sum::<f64>())
            .sum();
        if !(norm2.max(0.0).sqrt() >= RANK_TOLERANCE) {
            return Err(Error::RankDeficient(norm2.max(0.0).sqrt()));
        }
        let norm = norm2.sqrt();
        for a in 0..n {
            coeffs[(k, a)] = c[a] / norm;
        }
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let row: Vec<f64> = coeffs.row(k).iter().copied().collect();
        let mut f = Rational::linear_combination(&row, functions);
        let lead = f
            .impulse_response(64)
            .into_iter()
            .find(|x| x.abs() > 1e-12)
            .unwrap_or(1.0);
        if lead < 0.0 {
            f = f.scale(-1.0);
        }
        out.push(f);
    }
    BasisSet::from_rationals(out)
}
