//! Jordan curves given by the exterior conformal map as a finite Laurent series.
//!
//! Internally every map is normalized to capacity one,
//! `φ(z) = z + Σ_{j≥0} c_j z^{-j}`, and the original capacity is kept so that
//! capacity-dependent factors can be reinstated in reports.

use crate::spectral::angles;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Grid used for the univalence certificate.
pub const CERTIFICATE_GRID: usize = 4096;
/// Smallest admissible `|φ'|` on the certificate grid.
pub const MIN_DERIVATIVE: f64 = 1e-8;

/// Curve description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle,
    Ellipse { c: f64 },
    Cubic { c: f64 },
    /// `φ(z) = cap·z + Σ c_j z^{-j}`, coefficients as `[j, re, im]` triples.
    Laurent { cap: f64, coeffs: Vec<(u32, f64, f64)> },
}

/// Named family a map belongs to; deformation keeps the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Family {
    Circle,
    Ellipse { c: f64 },
    Cubic { c: f64 },
    Laurent,
}

/// Exterior conformal map of a Jordan curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMap {
    capacity: f64,
    coeffs: Vec<Complex64>,
    family: Family,
}

/// Result of the grid-level univalence test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivalenceCertificate {
    pub grid: usize,
    pub min_abs_derivative: f64,
    pub max_abs_value: f64,
    pub signed_area: f64,
}

/// Boundary values of a map on the `N`-th roots of unity.
#[derive(Debug, Clone)]
pub struct CurveSamples {
    pub theta: Vec<f64>,
    pub z: Vec<Complex64>,
    pub dphi: Vec<Complex64>,
    pub log_abs_dphi: Vec<f64>,
}

impl CurveSamples {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Builds a normalized map from its spec and certifies univalence.
pub fn make_curve(spec: &CurveSpec) -> Result<ConformalMap> {
    let (capacity, coeffs, family) = match spec {
        CurveSpec::Circle => (1.0, Vec::new(), Family::Circle),
        CurveSpec::Ellipse { c } => {
            finite("c", *c)?;
            (1.0, vec![Complex64::new(0.0, 0.0), Complex64::new(*c, 0.0)], Family::Ellipse { c: *c })
        }
        CurveSpec::Cubic { c } => {
            finite("c", *c)?;
            let mut v = vec![Complex64::new(0.0, 0.0); 3];
            v[2] = Complex64::new(*c, 0.0);
            (1.0, v, Family::Cubic { c: *c })
        }
        CurveSpec::Laurent { cap, coeffs } => {
            if coeffs.is_empty() {
                return Err(Error::EmptySpec);
            }
            if !(cap.is_finite() && *cap > 0.0) {
                return Err(Error::OutOfRange { what: "cap", value: *cap });
            }
            let top = coeffs.iter().map(|c| c.0 as usize).max().unwrap_or(0);
            let mut v = vec![Complex64::new(0.0, 0.0); top + 1];
            for &(j, re, im) in coeffs {
                finite("coefficient", re)?;
                finite("coefficient", im)?;
                v[j as usize] += Complex64::new(re, im) / cap;
            }
            (*cap, v, Family::Laurent)
        }
    };
    let map = ConformalMap::from_parts(capacity, coeffs, family);
    map.univalence_certificate(CERTIFICATE_GRID)?;
    Ok(map)
}

fn finite(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value })
    }
}

impl ConformalMap {
    /// The identity map of the unit circle.
    pub fn circle() -> Self {
        Self::from_parts(1.0, Vec::new(), Family::Circle)
    }

    fn from_parts(capacity: f64, mut coeffs: Vec<Complex64>, family: Family) -> Self {
        while coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        ConformalMap { capacity, coeffs, family }
    }

    /// Capacity of the curve before normalization.
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Normalized coefficients `c_j`, indexed by `j`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// True when every coefficient is real, so the curve is symmetric about ℝ.
    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }

    /// Normalized `φ(z)`.
    pub fn phi(&self, z: Complex64) -> Complex64 {
        let w = z.inv();
        z + horner(&self.coeffs, w)
    }

    /// Normalized `φ'(z)`.
    pub fn dphi(&self, z: Complex64) -> Complex64 {
        let w = z.inv();
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * w + c * j as f64;
        }
        // Σ j c_j w^{j+1}, accumulated as w·(Σ j c_j w^{j-1})·w
        Complex64::new(1.0, 0.0) - acc * w * w
    }

    /// Normalized `φ''(z)`.
    pub fn d2phi(&self, z: Complex64) -> Complex64 {
        let w = z.inv();
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * w + c * (j * (j + 1)) as f64;
        }
        acc * w * w * w
    }

    /// `φ(e^{iθ})`, `φ'(e^{iθ})` together.
    pub fn boundary(&self, theta: f64) -> (Complex64, Complex64) {
        let z = Complex64::from_polar(1.0, theta);
        (self.phi(z), self.dphi(z))
    }

    /// `s·φ(z/s)`: coefficient `c_j` becomes `s^{j+1} c_j`, capacity unchanged.
    pub fn deform(&self, s: f64) -> Result<ConformalMap> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfRange { what: "s", value: s });
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * s.powi(j as i32 + 1))
            .collect();
        let family = match self.family {
            Family::Ellipse { c } => Family::Ellipse { c: c * s * s },
            Family::Cubic { c } => Family::Cubic { c: c * s * s * s },
            f => f,
        };
        Ok(Self::from_parts(self.capacity, coeffs, family))
    }

    /// Exact evaluation at the `N`-th roots of unity.
    pub fn sample(&self, n: usize) -> Result<CurveSamples> {
        let need = (4 * (self.coeffs.len() + 1)).next_power_of_two();
        if !n.is_power_of_two() || n < need {
            return Err(Error::GridTooSmall { need, got: n });
        }
        let theta = angles(n);
        let (z, dphi): (Vec<_>, Vec<_>) = theta.iter().map(|&t| self.boundary(t)).unzip();
        let log_abs_dphi = dphi.iter().map(|d| d.norm().ln()).collect();
        Ok(CurveSamples { theta, z, dphi, log_abs_dphi })
    }

    /// Grid-level univalence test: `φ'` bounded away from zero, the sampled
    /// boundary polygon simple, and positively oriented.
    pub fn univalence_certificate(&self, grid: usize) -> Result<UnivalenceCertificate> {
        let theta = angles(grid);
        let mut z = Vec::with_capacity(grid);
        let mut min_d = f64::INFINITY;
        let mut max_z: f64 = 0.0;
        for &t in &theta {
            let (p, d) = self.boundary(t);
            if !(p.re.is_finite() && p.im.is_finite()) {
                return Err(Error::NonUnivalent("non-finite boundary value".into()));
            }
            min_d = min_d.min(d.norm());
            max_z = max_z.max(p.norm());
            z.push(p);
        }
        if min_d.is_nan() || min_d < MIN_DERIVATIVE {
            return Err(Error::NonUnivalent(format!("min |phi'| = {min_d:e} on the boundary")));
        }
        if let Some((i, j)) = first_self_intersection(&z) {
            return Err(Error::NonUnivalent(format!("boundary segments {i} and {j} cross")));
        }
        let signed_area = shoelace(&z);
        if signed_area <= 0.0 {
            return Err(Error::NonUnivalent(format!(
                "boundary is negatively oriented (signed area {signed_area:e})"
            )));
        }
        Ok(UnivalenceCertificate { grid, min_abs_derivative: min_d, max_abs_value: max_z, signed_area })
    }
}

fn horner(coeffs: &[Complex64], w: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * w + c)
}

fn shoelace(z: &[Complex64]) -> f64 {
    let n = z.len();
    0.5 * (0..n).map(|i| (z[i].conj() * z[(i + 1) % n]).im).sum::<f64>()
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    ((b - a).conj() * (c - a)).im
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0 && !(d1 == 0.0 && d2 == 0.0 && d3 == 0.0 && d4 == 0.0)
        || (d1 == 0.0 && d2 == 0.0 && d3 == 0.0 && d4 == 0.0 && collinear_overlap(p1, p2, q1, q2))
}

fn collinear_overlap(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let (lo, hi) = (p1.re.min(p2.re).max(q1.re.min(q2.re)), p1.re.max(p2.re).min(q1.re.max(q2.re)));
    let (ylo, yhi) = (p1.im.min(p2.im).max(q1.im.min(q2.im)), p1.im.max(p2.im).min(q1.im.max(q2.im)));
    lo <= hi && ylo <= yhi
}

/// Sweep over x-sorted segments of the closed polygon; adjacent segments are
/// skipped since they share an endpoint.
fn first_self_intersection(z: &[Complex64]) -> Option<(usize, usize)> {
    let n = z.len();
    if n < 4 {
        return None;
    }
    let seg = |i: usize| (z[i], z[(i + 1) % n]);
    let mut order: Vec<usize> = (0..n).collect();
    let min_x = |i: usize| {
        let (a, b) = seg(i);
        a.re.min(b.re)
    };
    order.sort_by(|&i, &j| min_x(i).total_cmp(&min_x(j)));
    for (pos, &i) in order.iter().enumerate() {
        let (a, b) = seg(i);
        let max_x = a.re.max(b.re);
        let (ylo, yhi) = (a.im.min(b.im), a.im.max(b.im));
        for &j in &order[pos + 1..] {
            if min_x(j) > max_x {
                break;
            }
            let adjacent = (i + 1) % n == j || (j + 1) % n == i;
            if adjacent {
                continue;
            }
            let (c, d) = seg(j);
            if c.im.max(d.im) < ylo || c.im.min(d.im) > yhi {
                continue;
            }
            if segments_cross(a, b, c, d) {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}
