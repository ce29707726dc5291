//! Grunsky coefficients of an exterior map and the operators built from them.
//!
//! With `cap = 1`,
//! `log[(φ(z) − φ(w))/(z − w)] = −Σ_{k,l≥1} a_kl z^{-k} w^{-l}` for `|z|, |w| ≥ 1`.
//! The coefficients are read off a 2-D FFT of the kernel, either on the unit
//! torus or on the torus of radius `r > 1`. The operator
//! `K = [[Re B, Im B], [Im B, −Re B]]` with `B_kl = √(kl)·a_kl` and the vector `d`
//! (Fourier data of `log|φ'|`) are then assembled exactly from the matrix.

use crate::curve::ConformalMap;
use crate::spectral::{angles, torus_negative_modes};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_ORDER: usize = 128;
pub const DEFAULT_GRID: usize = 1024;
/// Largest admissible phase step between neighbouring kernel samples.
pub const MAX_PHASE_STEP: f64 = PI / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BoundaryFft,
    OffcircleFft,
}

/// Truncated Grunsky matrix, `a[(k-1, l-1)] ≈ a_kl`.
#[derive(Debug, Clone)]
pub struct GrunskyData {
    pub m: usize,
    pub a: DMatrix<Complex64>,
    pub method: Method,
    /// Envelope estimate of `Σ_{max(k,l)>m} kl|a_kl|`.
    pub tail: f64,
    /// Estimated entrywise extraction error (aliasing/roundoff).
    pub grid_error: f64,
}

/// The real symmetric `2m×2m` operator `K` and `κ = ‖B‖`.
#[derive(Debug, Clone)]
pub struct KOperator {
    pub m: usize,
    pub matrix: DMatrix<f64>,
    pub kappa: f64,
    /// Singular values of `B`, descending.
    pub singular_values: Vec<f64>,
}

/// `d = ½(√k Σ_j Re a_{j,k−j} ; √k Σ_j Im a_{j,k−j})`, so that
/// `log|φ'(e^{iθ})| = −2 (x_θ, y_θ)ᵀ d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DVector2 {
    pub m: usize,
    pub values: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FredholmReport {
    pub det_i_plus_k: f64,
    pub log_det: f64,
    pub det_i_minus_bbstar: f64,
    pub relative_gap: f64,
    pub loewner_energy: f64,
}

/// Operators of the deformed curve `s·φ(·/s)` and their `s`-derivatives.
#[derive(Debug, Clone)]
pub struct DeformedOperators {
    pub s: f64,
    pub k: KOperator,
    pub d: DVector2,
    pub k_prime: DMatrix<f64>,
    pub d_prime: DVector<f64>,
}

/// Grunsky matrix of order `m` from an `N×N` kernel grid.
pub fn compute_grunsky(
    map: &ConformalMap,
    m: usize,
    method: Method,
    grid: usize,
    radius: f64,
) -> Result<GrunskyData> {
    if !grid.is_power_of_two() || grid < 4 * m || m == 0 {
        return Err(Error::GridTooSmall { need: (4 * m.max(1)).next_power_of_two(), got: grid });
    }
    let r = match method {
        Method::BoundaryFft => 1.0,
        Method::OffcircleFft => {
            if !(radius > 1.0 && radius.is_finite()) {
                return Err(Error::OutOfRange { what: "radius", value: radius });
            }
            radius
        }
    };
    let mut kernel = log_kernel(map, grid, r)?;
    let peak = kernel.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let coeffs = torus_negative_modes(&mut kernel, grid, m);

    // Roundoff floor of the extracted coefficients before rescaling by r^{k+l}.
    let floor = 64.0 * f64::EPSILON * peak.max(1e-300) * (grid as f64).log2().max(1.0);
    let mut a = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    let mut grid_error: f64 = 0.0;
    for k in 1..=m {
        for l in 1..=m {
            let c = coeffs[k][l];
            let scale = r.powi((k + l) as i32);
            if r > 1.0 && c.norm() <= floor {
                // below the noise floor: amplifying it by r^{k+l} only manufactures noise
                grid_error = grid_error.max(floor * scale);
                continue;
            }
            a[(k - 1, l - 1)] = -c * scale;
            grid_error = grid_error.max(floor * scale);
        }
    }
    let at = a.transpose();
    let a = (&a + &at) * Complex64::new(0.5, 0.0);
    let tail = tail_estimate(&a);
    Ok(GrunskyData { m, a, method, tail, grid_error })
}

/// `log[(φ(z)−φ(w))/(z−w)]` on `|z| = |w| = r`, continuous on the torus.
///
/// Each row is unwrapped outward from its diagonal value `log φ'(z)`, whose own
/// branch is fixed by continuity along the circle and zero mean.
fn log_kernel(map: &ConformalMap, n: usize, r: f64) -> Result<Vec<Complex64>> {
    let th = angles(n);
    let z: Vec<Complex64> = th.iter().map(|&t| Complex64::from_polar(r, t)).collect();
    let phi: Vec<Complex64> = z.iter().map(|&u| map.phi(u)).collect();

    let mut diag: Vec<Complex64> = z.iter().map(|&u| map.dphi(u).ln()).collect();
    for p in 1..n {
        let step = wrap(diag[p].im - diag[p - 1].im);
        if step.abs() > MAX_PHASE_STEP {
            return Err(Error::BranchUnwrapFailure { row: p, col: p, jump: step });
        }
        diag[p].im = diag[p - 1].im + step;
    }
    let closing = wrap(diag[0].im - diag[n - 1].im);
    if (diag[n - 1].im + closing - diag[0].im).abs() > 1e-9 {
        return Err(Error::BranchUnwrapFailure { row: 0, col: 0, jump: closing });
    }
    let mean = diag.iter().map(|c| c.im).sum::<f64>() / n as f64;
    let shift = 2.0 * PI * (mean / (2.0 * PI)).round();
    for d in &mut diag {
        d.im -= shift;
    }

    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for p in 0..n {
        let row = &mut out[p * n..(p + 1) * n];
        row[p] = diag[p];
        let mut prev = diag[p].im;
        for step_idx in 1..n {
            let q = (p + step_idx) % n;
            let v = ((phi[p] - phi[q]) / (z[p] - z[q])).ln();
            let step = wrap(v.im - prev);
            if step.abs() > MAX_PHASE_STEP {
                return Err(Error::BranchUnwrapFailure { row: p, col: q, jump: step });
            }
            prev += step;
            row[q] = Complex64::new(v.re, prev);
        }
        let closing = wrap(diag[p].im - prev);
        if (prev + closing - diag[p].im).abs() > 1e-9 || closing.abs() > MAX_PHASE_STEP {
            return Err(Error::BranchUnwrapFailure { row: p, col: p, jump: closing });
        }
    }
    Ok(out)
}

fn wrap(x: f64) -> f64 {
    x - 2.0 * PI * (x / (2.0 * PI)).round()
}

/// Power-law envelope `|a_kl| ≤ A (kl)^{-p}` fitted on the top quartile
/// `max(k,l) > 3m/4`, summed over the discarded region with weight `kl`.
///
/// Entries at roundoff level carry no decay information; when the top quartile
/// holds fewer than six resolved entries the matrix has decayed below
/// resolution and the roundoff floor itself is reported.
pub fn tail_estimate(a: &DMatrix<Complex64>) -> f64 {
    let m = a.nrows();
    let peak = a.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let floor = 1e3 * f64::EPSILON * peak;
    let lo = (3 * m) / 4;
    let mut pts = Vec::new();
    for k in 1..=m {
        for l in 1..=m {
            let v = a[(k - 1, l - 1)].norm();
            if k.max(l) > lo && v > floor {
                pts.push((((k * l) as f64).ln(), v.ln()));
            }
        }
    }
    if pts.len() < 6 {
        return floor;
    }
    let np = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / np;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / np;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let p = -slope;
    // lift the fit so it bounds every fitted entry
    let log_a = pts.iter().map(|&(x, y)| y + p * x).fold(f64::NEG_INFINITY, f64::max);
    if p <= 2.5 {
        return f64::INFINITY;
    }
    // Σ_{k>m} k^{1-p} ≤ m^{2-p}/(p-2)
    let inner: f64 = (1..=m).map(|k| (k as f64).powf(1.0 - p)).sum();
    let outer = (m as f64).powf(2.0 - p) / (p - 2.0);
    log_a.exp() * (2.0 * inner * outer + outer * outer)
}

/// Assembles `K`, `d` and `κ` from the Grunsky matrix.
pub fn build_operators(g: &GrunskyData) -> Result<(KOperator, DVector2)> {
    let k = k_from_matrix(&scaled_b(&g.a, 1.0))?;
    let d = d_vector(&g.a, 1.0);
    Ok((k, d))
}

fn scaled_b(a: &DMatrix<Complex64>, s: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        let (k, l) = (i + 1, j + 1);
        a[(i, j)] * (((k * l) as f64).sqrt() * s.powi((k + l) as i32))
    })
}

fn block_operator(b: &DMatrix<Complex64>) -> DMatrix<f64> {
    let m = b.nrows();
    let mut k = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let v = b[(i, j)];
            k[(i, j)] = v.re;
            k[(i, j + m)] = v.im;
            k[(i + m, j)] = v.im;
            k[(i + m, j + m)] = -v.re;
        }
    }
    // exact symmetry
    let kt = k.transpose();
    (k + kt) * 0.5
}

fn k_from_matrix(b: &DMatrix<Complex64>) -> Result<KOperator> {
    let m = b.nrows();
    let matrix = block_operator(b);
    let mut singular_values: Vec<f64> = b.clone().svd(false, false).singular_values.iter().copied().collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));
    let kappa = singular_values.first().copied().unwrap_or(0.0);
    if kappa >= 1.0 {
        return Err(Error::KappaGeOne(kappa));
    }
    Ok(KOperator { m, matrix, kappa, singular_values })
}

fn d_vector(a: &DMatrix<Complex64>, s: f64) -> DVector2 {
    let m = a.nrows();
    let mut v = DVector::zeros(2 * m);
    for k in 2..=m {
        let sum: Complex64 = (1..k).map(|j| a[(j - 1, k - j - 1)]).sum();
        let w = 0.5 * (k as f64).sqrt() * s.powi(k as i32);
        v[k - 1] = w * sum.re;
        v[m + k - 1] = w * sum.im;
    }
    DVector2 { m, values: v }
}

/// `det(I + K)` from the eigenvalues of `K`, cross-checked against
/// `det(I − BB*)` by LU; Loewner energy `−12 log det(I − BB*)`.
pub fn fredholm_det(k: &KOperator) -> Result<FredholmReport> {
    if k.kappa >= 1.0 {
        return Err(Error::KappaGeOne(k.kappa));
    }
    let eig = k.matrix.clone().symmetric_eigen();
    let log_det: f64 = eig.eigenvalues.iter().map(|&x| x.ln_1p()).sum();

    let m = k.m;
    let b = DMatrix::from_fn(m, m, |i, j| Complex64::new(k.matrix[(i, j)], k.matrix[(i, j + m)]));
    let bbh = &b * b.adjoint();
    let ibb = DMatrix::<Complex64>::identity(m, m) - bbh;
    let det2 = ibb.lu().determinant().re;
    let det1 = log_det.exp();
    let relative_gap = (det1 - det2).abs() / det2.abs().max(f64::MIN_POSITIVE);
    if relative_gap.is_nan() || relative_gap > 1e-8 {
        return Err(Error::CrossCheckFailure { what: "det(I+K) vs det(I-BB*)", gap: relative_gap, tol: 1e-8 });
    }
    Ok(FredholmReport {
        det_i_plus_k: det1,
        log_det,
        det_i_minus_bbstar: det2,
        relative_gap,
        loewner_energy: -12.0 * det2.ln(),
    })
}

/// Sorted eigenvalues of `K` against `±` singular values of `B`; returns the
/// largest absolute mismatch.
pub fn spectrum_pairing_gap(k: &KOperator) -> f64 {
    let mut eig: Vec<f64> = k.matrix.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let mut paired: Vec<f64> = k.singular_values.iter().flat_map(|&s| [s, -s]).collect();
    paired.sort_by(f64::total_cmp);
    eig.iter().zip(&paired).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `K(s)`, `d(s)` with `a_kl(s) = s^{k+l} a_kl`, and their `s`-derivatives.
pub fn deformed_operators(g: &GrunskyData, s: f64) -> Result<DeformedOperators> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange { what: "s", value: s });
    }
    let m = g.m;
    let k = k_from_matrix(&scaled_b(&g.a, s))?;
    let d = d_vector(&g.a, s);
    let b_prime = DMatrix::from_fn(m, m, |i, j| {
        let (kk, ll) = (i + 1, j + 1);
        let e = (kk + ll) as i32;
        g.a[(i, j)] * (((kk * ll) as f64).sqrt() * e as f64 * s.powi(e - 1))
    });
    let k_prime = block_operator(&b_prime);
    let base = d_vector(&g.a, 1.0).values;
    let d_prime = DVector::from_fn(2 * m, |i, _| {
        let kk = (i % m + 1) as i32;
        base[i] * kk as f64 * s.powi(kk - 1)
    });
    Ok(DeformedOperators { s, k, d, k_prime, d_prime })
}

impl KOperator {
    /// `(x_ω, y_ω)ᵀ K (x_θ, y_θ)`, the truncated kernel
    /// `−log|(φ(e^{iθ})−φ(e^{iω}))/(e^{iθ}−e^{iω})|`.
    pub fn bilinear(&self, theta: f64, omega: f64) -> f64 {
        let xt = basis_vector(self.m, theta);
        let xw = basis_vector(self.m, omega);
        xw.dot(&(&self.matrix * xt))
    }
}

/// `(x_θ, y_θ) = ((cos kθ)/√k ; (sin kθ)/√k)`, `k = 1..m`.
pub fn basis_vector(m: usize, theta: f64) -> DVector<f64> {
    DVector::from_fn(2 * m, |i, _| {
        let k = (i % m + 1) as f64;
        let (s, c) = (k * theta).sin_cos();
        if i < m { c / k.sqrt() } else { s / k.sqrt() }
    })
}
