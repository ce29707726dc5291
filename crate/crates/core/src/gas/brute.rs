use crate::boundary::GSpec;
use crate::curve::ConformalMap;
use crate::{Error, Result};
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Observable of the angles, integrated against the gas density.
pub type Observable<'a> = &'a dyn Fn(&[f64]) -> f64;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    /// `D_n^β[e^g]`.
    pub d: f64,
    /// Expectations of the observables under the gas density without `e^g`.
    pub expectations: Vec<f64>,
}

/// Tensor-grid trapezoid evaluation of
/// `D_n^β[e^g] = (1/n!) ∫ Π_{μ<ν}|z_μ−z_ν|^β Π_μ e^{g(z_μ)} |dz_μ|` over `γ^n`.
///
/// For `β` not an even integer the pair factor `|θ_μ−θ_ν|^β` leaves an
/// `O(h^{β+1})` error at the diagonal; it is removed by Richardson
/// extrapolation against the half grid.
pub fn brute_force(
    map: &ConformalMap,
    g: Option<&GSpec>,
    beta: f64,
    n: usize,
    grid: usize,
    observables: &[Observable],
) -> Result<BruteForce> {
    let budget = match n {
        1 => usize::MAX,
        2 => 512,
        3 => 128,
        _ => 0,
    };
    if n == 0 || grid > budget {
        return Err(Error::GridExplosion { n, grid });
    }
    if grid < 8 || !grid.is_multiple_of(2) {
        return Err(Error::GridTooSmall { need: 8, got: grid });
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::OutOfRange { what: "beta", value: beta });
    }
    let cap = map.capacity();
    let theta: Vec<f64> = (0..grid).map(|i| 2.0 * PI * i as f64 / grid as f64).collect();
    let z: Vec<Complex64> = theta.iter().map(|&t| map.phi(Complex64::from_polar(1.0, t)) * cap).collect();
    let single: Vec<f64> = theta
        .iter()
        .map(|&t| {
            let jac = cap * map.dphi(Complex64::from_polar(1.0, t)).norm();
            jac * g.map_or(1.0, |g| g.eval_on_circle(map, t).exp())
        })
        .collect();
    let plain: Vec<f64> = theta.iter().map(|&t| cap * map.dphi(Complex64::from_polar(1.0, t)).norm()).collect();

    // [full grid, even-index half grid] accumulators: D and the observable numerators/normalizer
    let k = observables.len();
    let mut d = [0.0; 2];
    let mut num = vec![[0.0; 2]; k];
    let mut norm = [0.0; 2];
    let mut idx = vec![0usize; n];
    let mut angles = vec![0.0; n];
    loop {
        let mut pair = 1.0;
        for a in 0..n {
            for b in a + 1..n {
                pair *= (z[idx[a]] - z[idx[b]]).norm().powf(beta);
            }
        }
        let wg: f64 = idx.iter().map(|&i| single[i]).product::<f64>() * pair;
        let w0: f64 = idx.iter().map(|&i| plain[i]).product::<f64>() * pair;
        let on_half = idx.iter().all(|i| i % 2 == 0);
        for (a, &i) in idx.iter().enumerate() {
            angles[a] = theta[i];
        }
        let vals: Vec<f64> = observables.iter().map(|o| o(&angles)).collect();
        for slot in 0..2 {
            if slot == 1 && !on_half {
                continue;
            }
            d[slot] += wg;
            norm[slot] += w0;
            for (acc, v) in num.iter_mut().zip(&vals) {
                acc[slot] += w0 * v;
            }
        }
        if !advance(&mut idx, grid) {
            break;
        }
    }
    let h = 2.0 * PI / grid as f64;
    let scale = [h.powi(n as i32), (2.0 * h).powi(n as i32)];
    let nfact = ln_gamma(n as f64 + 1.0).exp();
    let even = (beta / 2.0).fract() == 0.0;
    let order = beta + 1.0;
    let combine = |v: [f64; 2]| {
        let (fine, coarse) = (v[0] * scale[0], v[1] * scale[1]);
        if n == 1 || even {
            fine
        } else {
            let r = 2f64.powf(order);
            (r * fine - coarse) / (r - 1.0)
        }
    };
    let z0 = combine(norm);
    Ok(BruteForce { d: combine(d) / nfact, expectations: num.iter().map(|v| combine(*v) / z0).collect() })
}

fn advance(idx: &mut [usize], grid: usize) -> bool {
    for i in idx.iter_mut().rev() {
        *i += 1;
        if *i < grid {
            return true;
        }
        *i = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::log_selberg;
    use crate::curve::{make_curve, CurveSpec};

    #[test]
    fn one_particle_gives_length() {
        let map = make_curve(&CurveSpec::Ellipse { c: 0.5 }).unwrap();
        let b = brute_force(&map, None, 2.0, 1, 256, &[]).unwrap();
        // perimeter of the ellipse with semi-axes 1.5 and 0.5
        assert!((b.d - 6.682446610277805).abs() < 1e-9);
    }

    #[test]
    fn two_particles_circle_beta_two() {
        let b = brute_force(&ConformalMap::circle(), None, 2.0, 2, 64, &[]).unwrap();
        assert!((b.d - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn selberg_at_n_two() {
        for beta in [1.0, 2.0, 3.0, 4.0, 0.7] {
            let b = brute_force(&ConformalMap::circle(), None, beta, 2, 512, &[]).unwrap();
            let want = log_selberg(2, beta).exp();
            assert!((b.d / want - 1.0).abs() < 1e-6, "beta={beta}: {} vs {want}", b.d);
        }
    }

    #[test]
    fn selberg_at_n_three() {
        for beta in [2.0, 4.0] {
            let b = brute_force(&ConformalMap::circle(), None, beta, 3, 64, &[]).unwrap();
            assert!((b.d / log_selberg(3, beta).exp() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn circle_cosine_expectation() {
        // β = 2, n = 2 on the circle: E[cos(θ1−θ2)] = −1/2
        let obs = |t: &[f64]| (t[0] - t[1]).cos();
        let b = brute_force(&ConformalMap::circle(), None, 2.0, 2, 64, &[&obs]).unwrap();
        assert!((b.expectations[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn capacity_scaling() {
        let base = make_curve(&CurveSpec::Laurent { cap: 1.0, coeffs: vec![(1, 0.2, 0.0)] }).unwrap();
        let big = make_curve(&CurveSpec::Laurent { cap: 2.0, coeffs: vec![(1, 0.4, 0.0)] }).unwrap();
        let a = brute_force(&base, None, 2.0, 2, 128, &[]).unwrap();
        let b = brute_force(&big, None, 2.0, 2, 128, &[]).unwrap();
        assert!((b.d / a.d - 2f64.powi(4)).abs() < 1e-9);
    }

    #[test]
    fn exponential_weight() {
        // constant g = c multiplies D_n by e^{nc}
        let g = GSpec::Fourier { a0: 1.0, a: vec![], b: vec![] };
        let map = make_curve(&CurveSpec::Cubic { c: 0.1 }).unwrap();
        let a = brute_force(&map, None, 2.0, 2, 128, &[]).unwrap();
        let b = brute_force(&map, Some(&g), 2.0, 2, 128, &[]).unwrap();
        assert!((b.d / a.d - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let map = ConformalMap::circle();
        assert!(matches!(brute_force(&map, None, 2.0, 2, 1024, &[]), Err(Error::GridExplosion { .. })));
        assert!(matches!(brute_force(&map, None, 2.0, 3, 256, &[]), Err(Error::GridExplosion { .. })));
        assert!(matches!(brute_force(&map, None, 2.0, 4, 16, &[]), Err(Error::GridExplosion { .. })));
    }
}
