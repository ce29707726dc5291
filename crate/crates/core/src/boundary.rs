//! Test functions transported to the unit circle, the resolvent `(I + K)^{-1}`,
//! the integral-equation solution `h`, and the large-`n` predictions for the gas.
//!
//! Vectors live in `ℓ²(ℕ) ⊕ ℓ²(ℕ)` truncated at order `m`: a function
//! `G(θ) = a0/2 + Σ a_k cos kθ + b_k sin kθ` is packed as
//! `g = ½(√k a_k ; √k b_k)`, so that `G = a0/2 + 2 (x_θ, y_θ)ᵀ g`.

use crate::curve::ConformalMap;
use crate::grunsky::{DVector2, KOperator};
use crate::spectral::{angles, TrigSeries};
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Largest discarded fraction of the L² energy of `G` accepted by [`analyze_g`].
pub const MAX_TAIL_FRACTION: f64 = 1e-8;

/// Test function on the curve, as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GSpec {
    /// Given directly as a trigonometric series in `θ`.
    Fourier { a0: f64, a: Vec<f64>, b: Vec<f64> },
    /// `Re z^p`.
    ReZ { p: u32 },
    /// `Im z^p`.
    ImZ { p: u32 },
    /// `log|ψ'|` with `ψ = φ^{-1}`, i.e. `−log|φ'(e^{iθ})|` on the circle.
    LogAbsPsiPrime,
}

impl GSpec {
    /// `G(θ) = g(φ(e^{iθ}))`, with `φ` at its original capacity.
    pub fn eval_on_circle(&self, map: &ConformalMap, theta: f64) -> f64 {
        match self {
            GSpec::Fourier { a0, a, b } => {
                let mut acc = 0.5 * a0;
                for (k, ak) in a.iter().enumerate() {
                    acc += ak * ((k + 1) as f64 * theta).cos();
                }
                for (k, bk) in b.iter().enumerate() {
                    acc += bk * ((k + 1) as f64 * theta).sin();
                }
                acc
            }
            GSpec::ReZ { p } => (map.phi(Complex64::from_polar(1.0, theta)) * map.capacity()).powu(*p).re,
            GSpec::ImZ { p } => (map.phi(Complex64::from_polar(1.0, theta)) * map.capacity()).powu(*p).im,
            GSpec::LogAbsPsiPrime => {
                -map.dphi(Complex64::from_polar(1.0, theta)).norm().ln() - map.capacity().ln()
            }
        }
    }
}

/// Fourier data of `G = g∘φ` truncated at mode `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySeries {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Discarded fraction of the L² energy.
    pub tail: f64,
}

impl BoundarySeries {
    pub fn zero(m: usize) -> Self {
        BoundarySeries { a0: 0.0, a: vec![0.0; m], b: vec![0.0; m], tail: 0.0 }
    }

    pub fn from_trig(s: &TrigSeries) -> Self {
        BoundarySeries { a0: s.a0, a: s.a.clone(), b: s.b.clone(), tail: 0.0 }
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn trig(&self) -> TrigSeries {
        TrigSeries { a0: self.a0, a: self.a.clone(), b: self.b.clone() }
    }

    /// Packed vector `½(√k a_k ; √k b_k)`.
    pub fn gvec(&self) -> DVector<f64> {
        let m = self.m();
        DVector::from_fn(2 * m, |i, _| {
            let k = i % m + 1;
            let c = if i < m { self.a[k - 1] } else { self.b[k - 1] };
            0.5 * (k as f64).sqrt() * c
        })
    }

    /// Inverse of [`BoundarySeries::gvec`], with the given mean coefficient.
    pub fn from_gvec(a0: f64, v: &DVector<f64>) -> Self {
        let m = v.len() / 2;
        let a = (0..m).map(|i| 2.0 * v[i] / ((i + 1) as f64).sqrt()).collect();
        let b = (0..m).map(|i| 2.0 * v[m + i] / ((i + 1) as f64).sqrt()).collect();
        BoundarySeries { a0, a, b, tail: 0.0 }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.trig().eval(theta)
    }

    /// `Σ k (a_k² + b_k²)`.
    pub fn h_half_energy(&self) -> f64 {
        self.a.iter().zip(&self.b).enumerate().map(|(k, (a, b))| (k + 1) as f64 * (a * a + b * b)).sum()
    }
}

/// FFT of `G(θ) = g(φ(e^{iθ}))` on `N` points, truncated at mode `m`.
pub fn analyze_g(gspec: &GSpec, map: &ConformalMap, m: usize, grid: usize) -> Result<BoundarySeries> {
    if !grid.is_power_of_two() || grid < 4 * m {
        return Err(Error::GridTooSmall { need: (4 * m).next_power_of_two(), got: grid });
    }
    let samples: Vec<f64> = angles(grid).iter().map(|&t| gspec.eval_on_circle(map, t)).collect();
    let full = TrigSeries::analyze(&samples);
    let energy = |s: &[f64], t: &[f64]| s.iter().zip(t).map(|(a, b)| a * a + b * b).sum::<f64>();
    let total = 0.5 * full.a0 * full.a0 + energy(&full.a, &full.b);
    let kept = full.truncated(m);
    let discarded = energy(&full.a[kept.a.len()..], &full.b[kept.b.len()..]);
    let tail = if total > 0.0 { discarded / total } else { 0.0 };
    if tail > MAX_TAIL_FRACTION {
        return Err(Error::TailTooLarge(tail));
    }
    let mut out = BoundarySeries::from_trig(&kept);
    out.a.resize(m, 0.0);
    out.b.resize(m, 0.0);
    out.tail = tail;
    Ok(out)
}

/// Conjugate function: `α_k cos + β_k sin ↦ −β_k cos + α_k sin`, mean dropped.
pub fn conjugate(f: &BoundarySeries) -> BoundarySeries {
    BoundarySeries { a0: 0.0, a: f.b.iter().map(|b| -b).collect(), b: f.a.clone(), tail: f.tail }
}

/// Block rotation `L(x, y) = (−y, x)`.
pub fn rotate_l(v: &DVector<f64>) -> DVector<f64> {
    let m = v.len() / 2;
    DVector::from_fn(2 * m, |i, _| if i < m { -v[m + i] } else { v[i - m] })
}

/// Factored `I + K`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct Resolvent {
    ipk: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Resolvent {
    pub fn new(k: &KOperator) -> Result<Self> {
        if 1.0 - k.kappa < 1e-6 {
            return Err(Error::IllConditioned(k.kappa));
        }
        let n = k.matrix.nrows();
        let ipk = DMatrix::identity(n, n) + &k.matrix;
        let chol = Cholesky::new(ipk.clone()).ok_or(Error::IllConditioned(k.kappa))?;
        Ok(Resolvent { ipk, chol })
    }

    /// `x` with `(I + K)x = v`, one step of iterative refinement.
    pub fn solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = self.chol.solve(v);
        let r = v - &self.ipk * &x;
        x += self.chol.solve(&r);
        let res = (v - &self.ipk * &x).norm();
        let tol = 1e-12 * v.norm();
        if res > tol && res > f64::MIN_POSITIVE {
            return Err(Error::CrossCheckFailure { what: "resolvent residual", gap: res, tol });
        }
        Ok(x)
    }

    /// `uᵀ (I + K)^{-1} v`.
    pub fn form(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        Ok(u.dot(&self.solve(v)?))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.ipk
    }
}

pub fn solve_resolvent(k: &KOperator, v: &DVector<f64>) -> Result<DVector<f64>> {
    Resolvent::new(k)?.solve(v)
}

/// `h = (2/β) L (I + K)^{-1} g`, with `H(θ) = 2 (x_θ, y_θ)ᵀ h`.
#[derive(Debug, Clone)]
pub struct HSolution {
    pub beta: f64,
    pub hvec: DVector<f64>,
}

impl HSolution {
    pub fn m(&self) -> usize {
        self.hvec.len() / 2
    }

    /// Trigonometric coefficients of `H`.
    pub fn series(&self) -> TrigSeries {
        let s = BoundarySeries::from_gvec(0.0, &self.hvec);
        TrigSeries { a0: 0.0, a: s.a, b: s.b }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.series().eval(theta)
    }

    /// `H'(θ) = −2 (x_θ, y_θ)ᵀ J L h`.
    pub fn eval_prime(&self, theta: f64) -> f64 {
        self.series().derivative().eval(theta)
    }
}

pub fn solve_h(k: &KOperator, g: &BoundarySeries, beta: f64) -> Result<HSolution> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::OutOfRange { what: "beta", value: beta });
    }
    let x = solve_resolvent(k, &g.gvec())?;
    Ok(HSolution { beta, hvec: rotate_l(&x) * (2.0 / beta) })
}

/// `‖g + (β/2)(I + K) L h‖`, the Fourier form of the integral equation.
pub fn fourier_equation_residual(k: &KOperator, g: &BoundarySeries, h: &HSolution) -> f64 {
    let n = k.matrix.nrows();
    let ipk = DMatrix::identity(n, n) + &k.matrix;
    (g.gvec() + ipk * rotate_l(&h.hvec) * (0.5 * h.beta)).norm()
}

/// Sup over the grid of the defect in
/// `G(ω) − a0/2 = −(β/2) H̃(ω) − (β/2π) ∫ log|(φ(e^{iθ})−φ(e^{iω}))/(e^{iθ}−e^{iω})| H'(θ) dθ`,
/// the principal value split into the conjugate-function multiplier and a
/// smooth kernel integrated by the trapezoid rule.
pub fn residual_inteq(map: &ConformalMap, g: &BoundarySeries, h: &HSolution, beta: f64, grid: usize) -> Result<f64> {
    if !grid.is_power_of_two() || grid < 4 * g.m() {
        return Err(Error::GridTooSmall { need: (4 * g.m()).next_power_of_two(), got: grid });
    }
    let samples = map.sample(grid)?;
    let hs = h.series();
    let conj = hs.conjugate().synthesize(grid);
    let hp = hs.derivative().synthesize(grid);
    let gv = g.trig().synthesize(grid);
    let kernel = smooth_log_kernel(&samples.z, &samples.log_abs_dphi);
    let w = 2.0 * PI / grid as f64;
    let mut worst: f64 = 0.0;
    for q in 0..grid {
        let integral: f64 = (0..grid).map(|p| kernel(p, q) * hp[p]).sum::<f64>() * w;
        let rhs = -0.5 * beta * conj[q] - beta / (2.0 * PI) * integral;
        worst = worst.max((gv[q] - 0.5 * g.a0 - rhs).abs());
    }
    Ok(worst)
}

/// `log|(φ_p − φ_q)/(e^{iθ_p} − e^{iθ_q})|` with the diagonal `log|φ'|`.
pub(crate) fn smooth_log_kernel<'a>(z: &'a [Complex64], log_abs_dphi: &'a [f64]) -> impl Fn(usize, usize) -> f64 + 'a {
    let n = z.len();
    move |p, q| {
        if p == q {
            log_abs_dphi[p]
        } else {
            let ep = Complex64::from_polar(1.0, 2.0 * PI * p as f64 / n as f64);
            let eq = Complex64::from_polar(1.0, 2.0 * PI * q as f64 / n as f64);
            ((z[p] - z[q]) / (ep - eq)).norm().ln()
        }
    }
}

/// Selberg value `log Z_{n,β}(𝕋) = n log 2π − log n! + log Γ(1+βn/2) − n log Γ(1+β/2)`.
pub fn log_selberg(n: usize, beta: f64) -> f64 {
    let nf = n as f64;
    nf * (2.0 * PI).ln() - ln_gamma(nf + 1.0) + ln_gamma(1.0 + 0.5 * beta * nf) - nf * ln_gamma(1.0 + 0.5 * beta)
}

/// Terms of the large-`n` expansion of `log D_n^β[e^g]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPartitionTerms {
    pub n: usize,
    pub selberg: f64,
    pub capacity_term: f64,
    pub mean_term: f64,
    pub det_term: f64,
    pub quadratic_term: f64,
    /// Sum of all terms: the predicted `log D_n^β[e^g]`.
    pub log_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub beta: f64,
    pub mu_g: f64,
    pub sigma2_g: f64,
    pub gbeta: Vec<f64>,
    pub log_det: f64,
    pub terms: Vec<LogPartitionTerms>,
}

impl Prediction {
    /// `log D_n − log Z_{n,β}(𝕋) − capacity term` for the `i`-th entry.
    pub fn log_ratio(&self, i: usize) -> f64 {
        let t = &self.terms[i];
        t.mean_term + t.det_term + t.quadratic_term
    }
}

/// Central-limit mean and variance plus the expansion of `log D_n^β[e^g]`.
pub fn predict(
    k: &KOperator,
    d: &DVector2,
    g: &BoundarySeries,
    beta: f64,
    capacity: f64,
    n_list: &[usize],
) -> Result<Prediction> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::OutOfRange { what: "beta", value: beta });
    }
    let res = Resolvent::new(k)?;
    let gv = g.gvec();
    let rg = res.solve(&gv)?;
    let mu_g = 2.0 * (1.0 - 2.0 / beta) * d.values.dot(&rg);
    let sigma2_g = 4.0 / beta * gv.dot(&rg);
    let gbeta = &gv + &d.values * (0.5 * beta - 1.0);
    let quadratic = 2.0 / beta * res.form(&gbeta, &gbeta)?;
    let log_det: f64 = k.matrix.clone().symmetric_eigen().eigenvalues.iter().map(|x| x.ln_1p()).sum();
    let terms = n_list
        .iter()
        .map(|&n| expansion(n, beta, capacity.ln(), 0.5 * g.a0, log_det, quadratic))
        .collect();
    Ok(Prediction { beta, mu_g, sigma2_g, gbeta: gbeta.iter().copied().collect(), log_det, terms })
}

fn expansion(n: usize, beta: f64, log_cap: f64, half_a0: f64, log_det: f64, quadratic: f64) -> LogPartitionTerms {
    let nf = n as f64;
    let selberg = log_selberg(n, beta);
    let capacity_term = (0.5 * beta * nf * nf + (1.0 - 0.5 * beta) * nf) * log_cap;
    let mean_term = nf * half_a0;
    let det_term = -0.5 * log_det;
    LogPartitionTerms {
        n,
        selberg,
        capacity_term,
        mean_term,
        det_term,
        quadratic_term: quadratic,
        log_d: selberg + capacity_term + mean_term + det_term + quadratic,
    }
}

/// Complex-valued counterpart of [`Prediction`]; forms are bilinear, not Hermitian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPrediction {
    pub beta: f64,
    pub mu_g: Complex64,
    pub sigma2_g: Complex64,
    /// `(n, predicted log D_n^β[e^g])`.
    pub log_d: Vec<(usize, Complex64)>,
}

/// [`predict`] for `g = g_re + i g_im`.
pub fn predict_complex(
    k: &KOperator,
    d: &DVector2,
    g_re: &BoundarySeries,
    g_im: &BoundarySeries,
    beta: f64,
    capacity: f64,
    n_list: &[usize],
) -> Result<ComplexPrediction> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::OutOfRange { what: "beta", value: beta });
    }
    let res = Resolvent::new(k)?;
    let (gr, gi) = (g_re.gvec(), g_im.gvec());
    let (xr, xi) = (res.solve(&gr)?, res.solve(&gi)?);
    let bil = |ur: &DVector<f64>, ui: &DVector<f64>, vr: &DVector<f64>, vi: &DVector<f64>| {
        Complex64::new(ur.dot(vr) - ui.dot(vi), ur.dot(vi) + ui.dot(vr))
    };
    let zero = DVector::zeros(gr.len());
    let mu_g = bil(&d.values, &zero, &xr, &xi) * (2.0 * (1.0 - 2.0 / beta));
    let sigma2_g = bil(&gr, &gi, &xr, &xi) * (4.0 / beta);
    let br = &gr + &d.values * (0.5 * beta - 1.0);
    let (yr, yi) = (res.solve(&br)?, xi.clone());
    let quadratic = bil(&br, &gi, &yr, &yi) * (2.0 / beta);
    let log_det: f64 = k.matrix.clone().symmetric_eigen().eigenvalues.iter().map(|x| x.ln_1p()).sum();
    let half_a0 = Complex64::new(0.5 * g_re.a0, 0.5 * g_im.a0);
    let log_d = n_list
        .iter()
        .map(|&n| {
            let real = expansion(n, beta, capacity.ln(), 0.0, log_det, 0.0);
            (n, Complex64::new(real.log_d, 0.0) + half_a0 * n as f64 + quadratic)
        })
        .collect();
    Ok(ComplexPrediction { beta, mu_g, sigma2_g, log_d })
}

/// Both sides of
/// `(1/4π)∫G H' + 2(1−β/2)(1/4π)∫log|φ'| H' = (2/β) gᵀ(I+K)^{-1}g + 2(1−2/β) dᵀ(I+K)^{-1}g`,
/// the left by the trapezoid rule on `N` points, the right by linear algebra.
pub fn identity_lemma_gvar(
    map: &ConformalMap,
    g: &BoundarySeries,
    h: &HSolution,
    d: &DVector2,
    k: &KOperator,
    beta: f64,
    grid: usize,
) -> Result<(f64, f64)> {
    let samples = map.sample(grid)?;
    let gv = g.trig().synthesize(grid);
    let hp = h.series().derivative().synthesize(grid);
    let w = 2.0 * PI / grid as f64 / (4.0 * PI);
    let first: f64 = gv.iter().zip(&hp).map(|(a, b)| a * b).sum::<f64>() * w;
    let second: f64 = samples.log_abs_dphi.iter().zip(&hp).map(|(a, b)| a * b).sum::<f64>() * w;
    let lhs = first + 2.0 * (1.0 - 0.5 * beta) * second;
    let res = Resolvent::new(k)?;
    let x = res.solve(&g.gvec())?;
    let rhs = 2.0 / beta * g.gvec().dot(&x) + 2.0 * (1.0 - 2.0 / beta) * d.values.dot(&x);
    Ok((lhs, rhs))
}
