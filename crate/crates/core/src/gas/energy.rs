use crate::curve::ConformalMap;
use crate::grunsky::{deformed_operators, DeformedOperators, GrunskyData};
use crate::{Error, Result};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Two particles closer than this on the curve count as a collision.
pub(crate) const COLLISION_DIST: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Pairwise distances on the curve.
    Direct,
    /// Circle interaction plus the Grunsky correction in power sums.
    Grunsky,
}

/// Log-density of the gas on `γ_s` in the `θ`-parametrization, up to a constant:
/// `β Σ_{μ<ν} log|φ_s(e^{iθ_μ}) − φ_s(e^{iθ_ν})| + Σ_μ log|φ_s'(e^{iθ_μ})|`.
///
/// The Grunsky mode evaluates the same quantity from truncated `a_kl(s)` and `d(s)`.
pub fn energy(
    theta: &[f64],
    map: &ConformalMap,
    beta: f64,
    mode: EnergyMode,
    s: f64,
    grunsky: Option<&GrunskyData>,
) -> Result<f64> {
    match mode {
        EnergyMode::Direct => {
            let map_s = map.deform(s)?;
            let z: Vec<Complex64> = theta.iter().map(|&t| map_s.phi(Complex64::from_polar(1.0, t))).collect();
            let log_dphi: Vec<f64> =
                theta.iter().map(|&t| map_s.dphi(Complex64::from_polar(1.0, t)).norm().ln()).collect();
            direct_energy(&z, &log_dphi, beta)
        }
        EnergyMode::Grunsky => {
            let g = grunsky.ok_or_else(|| Error::InvalidConfig("grunsky mode needs Grunsky data".into()))?;
            grunsky_energy(theta, &deformed_operators(g, s)?, beta)
        }
    }
}

pub(crate) fn direct_energy(z: &[Complex64], log_dphi: &[f64], beta: f64) -> Result<f64> {
    let n = z.len();
    let mut pair = 0.0;
    for mu in 0..n {
        for nu in mu + 1..n {
            let r = (z[mu] - z[nu]).norm();
            if r < COLLISION_DIST {
                return Err(Error::Collision(mu, nu));
            }
            pair += r.ln();
        }
    }
    let e = beta * pair + log_dphi.iter().sum::<f64>();
    if !e.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    Ok(e)
}

/// `(β/2)[Σ_{μ≠ν} log|2 sin((θ_μ−θ_ν)/2)| − (X,Y)ᵀK(s)(X,Y)] − 2(1−β/2) d(s)ᵀ(X,Y)`.
pub fn grunsky_energy(theta: &[f64], ops: &DeformedOperators, beta: f64) -> Result<f64> {
    let n = theta.len();
    let mut circle = 0.0;
    for mu in 0..n {
        for nu in mu + 1..n {
            let r = (2.0 * (0.5 * (theta[mu] - theta[nu])).sin()).abs();
            if r < COLLISION_DIST {
                return Err(Error::Collision(mu, nu));
            }
            circle += 2.0 * r.ln();
        }
    }
    let xy = xy_from_angles(theta, ops.d.m);
    let quad = xy.dot(&(&ops.k.matrix * &xy));
    let e = 0.5 * beta * (circle - quad) - 2.0 * (1.0 - 0.5 * beta) * ops.d.values.dot(&xy);
    if !e.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    Ok(e)
}

/// Power sums `S_k = Σ_μ e^{−ikθ_μ}`, `k = 1..m`.
pub(crate) fn power_sums(theta: &[f64], m: usize) -> Vec<Complex64> {
    let mut s = vec![Complex64::new(0.0, 0.0); m];
    for &t in theta {
        let w = Complex64::from_polar(1.0, -t);
        let mut p = w;
        for sk in s.iter_mut() {
            *sk += p;
            p *= w;
        }
    }
    s
}

/// `(X, Y)` with `X_k = Re S_k/√k`, `Y_k = −Im S_k/√k`.
pub(crate) fn xy_from_power_sums(s: &[Complex64]) -> DVector<f64> {
    let m = s.len();
    DVector::from_fn(2 * m, |i, _| {
        let k = i % m;
        let r = ((k + 1) as f64).sqrt();
        if i < m { s[k].re / r } else { -s[k].im / r }
    })
}

pub(crate) fn xy_from_angles(theta: &[f64], m: usize) -> DVector<f64> {
    xy_from_power_sums(&power_sums(theta, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{make_curve, CurveSpec};
    use crate::grunsky::{compute_grunsky, Method};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn two_particles_on_circle() {
        let map = ConformalMap::circle();
        for beta in [1.0, 2.0, 3.5] {
            let e = energy(&[0.3, 2.0], &map, beta, EnergyMode::Direct, 1.0, None).unwrap();
            let want = beta * (Complex64::from_polar(1.0, 0.3) - Complex64::from_polar(1.0, 2.0)).norm().ln();
            assert!((e - want).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_invariance_on_circle() {
        let map = ConformalMap::circle();
        let theta = [0.1, 1.0, 2.5, 4.0, 5.9];
        let e0 = energy(&theta, &map, 2.0, EnergyMode::Direct, 1.0, None).unwrap();
        let rotated: Vec<f64> = theta.iter().map(|t| t + 0.77).collect();
        let e1 = energy(&rotated, &map, 2.0, EnergyMode::Direct, 1.0, None).unwrap();
        assert!((e0 - e1).abs() < 1e-13);
    }

    #[test]
    fn collision_is_reported() {
        let map = ConformalMap::circle();
        assert!(matches!(
            energy(&[1.0, 2.0, 1.0], &map, 2.0, EnergyMode::Direct, 1.0, None),
            Err(Error::Collision(0, 2))
        ));
    }

    #[test]
    fn power_sum_quadratic_form_is_grunsky_sum() {
        let map = make_curve(&CurveSpec::Cubic { c: 0.2 }).unwrap();
        let g = compute_grunsky(&map, 16, Method::BoundaryFft, 128, 1.0).unwrap();
        let ops = deformed_operators(&g, 1.0).unwrap();
        let theta = [0.2, 1.7, 3.3, 4.1];
        let s = power_sums(&theta, 16);
        let mut direct = Complex64::new(0.0, 0.0);
        for k in 0..16 {
            for l in 0..16 {
                direct += g.a[(k, l)] * s[k] * s[l];
            }
        }
        let xy = xy_from_power_sums(&s);
        assert!((xy.dot(&(&ops.k.matrix * &xy)) - direct.re).abs() < 1e-12);
    }

    #[test]
    fn modes_agree_on_random_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for spec in [CurveSpec::Ellipse { c: 0.3 }, CurveSpec::Cubic { c: 0.15 }] {
            let map = make_curve(&spec).unwrap();
            let g = compute_grunsky(&map, 64, Method::BoundaryFft, 512, 1.0).unwrap();
            for s in [1.0, 0.6] {
                let ops = deformed_operators(&g, s).unwrap();
                let map_s = map.deform(s).unwrap();
                for _ in 0..1000 {
                    let theta: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
                    let beta = rng.gen_range(0.5..4.0);
                    let a = energy(&theta, &map_s, beta, EnergyMode::Direct, 1.0, None).unwrap();
                    let b = grunsky_energy(&theta, &ops, beta).unwrap();
                    assert!((a - b).abs() <= g.tail + 1e-8, "{spec:?} s={s}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn deformed_direct_equals_direct_on_deformed_map() {
        let map = make_curve(&CurveSpec::Ellipse { c: 0.5 }).unwrap();
        let theta = [0.0, 1.0, 2.0];
        let a = energy(&theta, &map, 2.0, EnergyMode::Direct, 0.7, None).unwrap();
        let b = energy(&theta, &map.deform(0.7).unwrap(), 2.0, EnergyMode::Direct, 1.0, None).unwrap();
        assert_eq!(a, b);
        let circle = energy(&theta, &map, 2.0, EnergyMode::Direct, 0.0, None).unwrap();
        let c0 = energy(&theta, &ConformalMap::circle(), 2.0, EnergyMode::Direct, 1.0, None).unwrap();
        assert!((circle - c0).abs() < 1e-14);
    }
}
