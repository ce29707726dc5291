//! Boundary-integral oracles on the curve itself: a Nyström discretization of
//! the Neumann–Poincaré operator, an interior Dirichlet solve by double-layer
//! potential, and the Neumann-jump form of the Dirichlet energy.
//!
//! Everything here works on the capacity-normalized curve; the quantities
//! compared against the Grunsky side are scale invariant.

use crate::boundary::{BoundarySeries, HSolution};
use crate::boundary::smooth_log_kernel;
use crate::curve::ConformalMap;
use crate::spectral::{angles, TrigSeries};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Relative tolerance of the quadrature-vs-polygon length check.
pub const LENGTH_TOL: f64 = 1e-8;

/// Trapezoid nodes `ζ_i = φ(e^{iθ_i})` with arclength weights.
#[derive(Debug, Clone)]
pub struct NystromGrid {
    pub theta: Vec<f64>,
    pub z: Vec<Complex64>,
    pub tangent: Vec<Complex64>,
    pub normal: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub curvature: Vec<f64>,
    pub log_abs_dphi: Vec<f64>,
    pub length: f64,
}

impl NystromGrid {
    pub fn new(map: &ConformalMap, n: usize) -> Result<Self> {
        let samples = map.sample(n)?;
        let h = 2.0 * PI / n as f64;
        let mut tangent = Vec::with_capacity(n);
        let mut curvature = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (i, &t) in samples.theta.iter().enumerate() {
            let e = Complex64::from_polar(1.0, t);
            let dphi = samples.dphi[i];
            let d1 = Complex64::i() * e * dphi;
            let d2 = -e * dphi - e * e * map.d2phi(e);
            let speed = d1.norm();
            let kappa = (d1.conj() * d2).im / speed.powi(3);
            if !kappa.is_finite() {
                return Err(Error::QuadratureDivergence(i));
            }
            tangent.push(d1 / speed);
            curvature.push(kappa);
            weights.push(speed * h);
        }
        let normal = tangent.iter().map(|s| -Complex64::i() * s).collect();
        let length = weights.iter().sum();
        let grid = NystromGrid {
            theta: samples.theta,
            z: samples.z,
            tangent,
            normal,
            weights,
            curvature,
            log_abs_dphi: samples.log_abs_dphi,
            length,
        };
        let reference = polygon_length(map, 16 * n);
        let gap = (grid.length - reference).abs() / reference;
        if gap > LENGTH_TOL {
            return Err(Error::CrossCheckFailure { what: "curve length", gap, tol: LENGTH_TOL });
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Dense matrix of `f ↦ (1/π)∫ f(ζ) ∂/∂ν(ζ) log|z−ζ| |dζ|`, the diagonal
    /// filled with the limit `κ/(2π)·w`.
    pub fn np_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.curvature[j] * self.weights[j] / (2.0 * PI)
            } else {
                (self.normal[j] / (self.z[j] - self.z[i])).re * self.weights[j] / PI
            }
        })
    }

    /// `∂S/∂ν(z)` for the single-layer potential `S(f)(w) = (1/2π)∫ log|ζ−w|^{-1} f |dζ|`
    /// at an off-curve point `w`, along direction `nu`.
    pub fn single_layer_normal_derivative(&self, f: &[f64], w: Complex64, nu: Complex64) -> f64 {
        let sum: f64 = (0..self.len()).map(|j| (nu / (self.z[j] - w)).re * f[j] * self.weights[j]).sum();
        sum / (2.0 * PI)
    }
}

/// Richardson-extrapolated inscribed polygon length on `M` and `2M` vertices.
fn polygon_length(map: &ConformalMap, m: usize) -> f64 {
    let perimeter = |k: usize| {
        let pts: Vec<Complex64> = angles(k).iter().map(|&t| map.phi(Complex64::from_polar(1.0, t))).collect();
        (0..k).map(|i| (pts[(i + 1) % k] - pts[i]).norm()).sum::<f64>()
    };
    let (coarse, fine) = (perimeter(m), perimeter(2 * m));
    (4.0 * fine - coarse) / 3.0
}

/// `2m × 2m` matrix of the Nyström NP operator in the packed Fourier basis.
pub fn np_fourier_matrix(map: &ConformalMap, m: usize, n: usize) -> Result<DMatrix<f64>> {
    if !n.is_power_of_two() || n < 8 * m {
        return Err(Error::GridTooSmall { need: (8 * m).next_power_of_two(), got: n });
    }
    let grid = NystromGrid::new(map, n)?;
    let a = grid.np_matrix();
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    for col in 0..2 * m {
        let k = col % m + 1;
        let scale = 1.0 / (k as f64).sqrt();
        let f = DVector::from_iterator(
            n,
            grid.theta.iter().map(|&t| scale * if col < m { (k as f64 * t).cos() } else { (k as f64 * t).sin() }),
        );
        let image = TrigSeries::analyze((&a * f).as_slice());
        for l in 1..=m {
            let root = (l as f64).sqrt();
            out[(l - 1, col)] = root * image.a[l - 1];
            out[(m + l - 1, col)] = root * image.b[l - 1];
        }
    }
    Ok(out)
}

/// Interior Dirichlet energy `∫ g ∂g₋/∂ν |dζ|` of the harmonic extension of `g`
/// into the bounded component, by a double-layer ansatz `(I + K_NP)μ = 2g`.
///
/// The normal derivative is taken as the tangential derivative of the conjugate
/// function, whose interior boundary value is
/// `½ M̃(ω) + (1/2π)∫ log|(φ(e^{it})−φ(e^{iω}))/(e^{it}−e^{iω})| M'(t) dt` with `M = μ∘φ`.
pub fn interior_dirichlet_energy(map: &ConformalMap, g: &BoundarySeries, n: usize) -> Result<f64> {
    if n < 512 || n < 4 * g.m() {
        return Err(Error::GridTooSmall { need: (4 * g.m()).max(512).next_power_of_two(), got: n });
    }
    let grid = NystromGrid::new(map, n)?;
    let system = DMatrix::identity(n, n) + grid.np_matrix();
    let gvals = DVector::from_vec(g.trig().synthesize(n));
    let mu = system.lu().solve(&(&gvals * 2.0)).ok_or(Error::SolveFailure)?;
    if mu.iter().any(|x| !x.is_finite()) {
        return Err(Error::SolveFailure);
    }
    let m_series = TrigSeries::analyze(mu.as_slice());
    let half_conj = m_series.conjugate().synthesize(n);
    let mp = m_series.derivative().synthesize(n);
    let kernel = smooth_log_kernel(&grid.z, &grid.log_abs_dphi);
    let w = 2.0 * PI / n as f64;
    let conj_inner: Vec<f64> = (0..n)
        .map(|q| {
            let smooth: f64 = (0..n).map(|p| kernel(p, q) * mp[p]).sum::<f64>() * w / (2.0 * PI);
            0.5 * half_conj[q] + smooth
        })
        .collect();
    let dconj = TrigSeries::analyze(&conj_inner).derivative().synthesize(n);
    Ok(gvals.iter().zip(&dconj).map(|(a, b)| a * b).sum::<f64>() * w)
}

/// Exterior Dirichlet energy `π Σ k (a_k² + b_k²)`, by conformal invariance.
pub fn exterior_dirichlet_energy(g: &BoundarySeries) -> f64 {
    PI * g.h_half_energy()
}

/// `(1/8π)∫ g · (∂g₊/∂ν − ∂g₋/∂ν) |dζ|`, the jump obtained from `h` as
/// `β ∂h/∂s` with `∂h/∂s = H'(θ)/|φ'(e^{iθ})|`.
pub fn neumann_jump_energy(map: &ConformalMap, g: &BoundarySeries, h: &HSolution, beta: f64, n: usize) -> Result<f64> {
    let samples = map.sample(n)?;
    let gv = g.trig().synthesize(n);
    let hp = h.series().derivative().synthesize(n);
    let w = 2.0 * PI / n as f64;
    let integral: f64 = (0..n)
        .map(|i| {
            let speed = samples.dphi[i].norm();
            gv[i] * (beta * hp[i] / speed) * speed * w
        })
        .sum();
    Ok(integral / (8.0 * PI))
}

/// Largest defect of `(∂S₊/∂ν − ∂S₋/∂ν) + f = 0` over the nodes, with the
/// one-sided normal derivatives extrapolated to the curve from six off-curve
/// points at distances `ε/6, 2ε/6, …, ε`.
pub fn plemelj_jump_defect(grid: &NystromGrid, f: &[f64], eps: f64) -> f64 {
    let dists: Vec<f64> = (1..=6).map(|i| eps * f64::from(i) / 6.0).collect();
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        let (z, nu) = (grid.z[i], grid.normal[i]);
        let side = |sign: f64| {
            let vals: Vec<f64> =
                dists.iter().map(|&d| grid.single_layer_normal_derivative(f, z + nu * (sign * d), nu)).collect();
            neville_at_zero(&dists, &vals)
        };
        let jump = side(1.0) - side(-1.0);
        worst = worst.max((jump + f[i]).abs());
    }
    worst
}

fn neville_at_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    for level in 1..x.len() {
        for i in 0..x.len() - level {
            p[i] = (x[i + level] * p[i] - x[i] * p[i + 1]) / (x[i + level] - x[i]);
        }
    }
    p[0]
}
