//! FFT-based helpers for periodic functions sampled on equispaced grids.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Equispaced angles `2πp/N`, `p = 0..N`.
pub fn angles(n: usize) -> Vec<f64> {
    (0..n).map(|p| 2.0 * PI * p as f64 / n as f64).collect()
}

/// Real trigonometric coefficients of a sampled periodic function,
/// `f(θ) = a0/2 + Σ_{k≥1} a_k cos kθ + b_k sin kθ`.
///
/// `a[k-1]`, `b[k-1]` hold mode `k` for `k < N/2`; the Nyquist mode is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeries {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrigSeries {
    pub fn analyze(samples: &[f64]) -> Self {
        let n = samples.len();
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let modes = n.saturating_sub(1) / 2;
        let a = (1..=modes).map(|k| 2.0 * buf[k].re * scale).collect();
        let b = (1..=modes).map(|k| -2.0 * buf[k].im * scale).collect();
        TrigSeries { a0: 2.0 * buf[0].re * scale, a, b }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut acc = 0.5 * self.a0;
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let (s, c) = ((k + 1) as f64 * theta).sin_cos();
            acc += a * c + b * s;
        }
        acc
    }

    /// Samples on the `N`-point grid, by inverse FFT.
    pub fn synthesize(&self, n: usize) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0] = Complex64::new(0.5 * self.a0, 0.0);
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let k = k + 1;
            if 2 * k >= n {
                break;
            }
            let c = Complex64::new(0.5 * a, -0.5 * b);
            buf[k] += c;
            buf[n - k] += c.conj();
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    pub fn derivative(&self) -> TrigSeries {
        let (a, b) = self
            .a
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(k, (a, b))| {
                let k = (k + 1) as f64;
                (k * b, -k * a)
            })
            .unzip();
        TrigSeries { a0: 0.0, a, b }
    }

    /// Conjugate function: `cos kθ ↦ sin kθ`, `sin kθ ↦ −cos kθ`, constants to zero.
    pub fn conjugate(&self) -> TrigSeries {
        TrigSeries { a0: 0.0, a: self.b.iter().map(|b| -b).collect(), b: self.a.clone() }
    }

    pub fn truncated(&self, modes: usize) -> TrigSeries {
        let m = modes.min(self.a.len());
        TrigSeries { a0: self.a0, a: self.a[..m].to_vec(), b: self.b[..m].to_vec() }
    }
}

/// Coefficients `c[k][l]` of `e^{-i(kθ + lω)}` in a function sampled on the
/// `N×N` torus grid (`data[p*N + q]` at `(θ_p, ω_q)`), for `0 ≤ k, l ≤ modes`.
pub fn torus_negative_modes(data: &mut [Complex64], n: usize, modes: usize) -> Vec<Vec<Complex64>> {
    assert_eq!(data.len(), n * n);
    let inverse = FftPlanner::new().plan_fft_inverse(n);
    for row in data.chunks_mut(n) {
        inverse.process(row);
    }
    let mut out = vec![vec![Complex64::new(0.0, 0.0); modes + 1]; modes + 1];
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    let scale = 1.0 / (n as f64 * n as f64);
    for l in 0..=modes {
        for p in 0..n {
            column[p] = data[p * n + l];
        }
        inverse.process(&mut column);
        for k in 0..=modes {
            out[k][l] = column[k] * scale;
        }
    }
    out
}
