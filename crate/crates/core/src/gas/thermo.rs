use super::chain::{mcmc_run, ChainState};
use super::GasConfig;
use crate::boundary::Resolvent;
use crate::grunsky::{build_operators, deformed_operators, GrunskyData};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        // map from [−1, 1], largest node last
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEstimate {
    pub s: f64,
    pub weight: f64,
    pub mean: f64,
    pub stderr: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoResult {
    pub nodes: Vec<NodeEstimate>,
    pub log_ratio_mc: f64,
    pub stderr: f64,
    /// `−½ log det(I+K) + (β/2)(1−2/β)² dᵀ(I+K)^{-1}d`.
    pub log_ratio_closed: f64,
}

/// `log(Z_{n,β}(γ)/Z_{n,β}(𝕋))` as `∫_0^1 E_s[∂_s energy] ds` over the
/// deformation `γ_s`, with an independent set of chains at each Gauss–Legendre
/// node; node `j` chain `i` is seeded with `seed ⊕ (j << 32) ⊕ i`.
pub fn thermo_integrate(config: &GasConfig, g: &GrunskyData, nodes: usize) -> Result<ThermoResult> {
    config.validate()?;
    if nodes < 8 {
        return Err(Error::InvalidConfig("thermodynamic integration needs at least 8 nodes".into()));
    }
    let beta = config.beta;
    let (k, d) = build_operators(g)?;
    let res = Resolvent::new(&k)?;
    let log_det: f64 = k.matrix.clone().symmetric_eigen().eigenvalues.iter().map(|x| x.ln_1p()).sum();
    let log_ratio_closed =
        -0.5 * log_det + 0.5 * beta * (1.0 - 2.0 / beta).powi(2) * res.form(&d.values, &d.values)?;

    let (s_nodes, weights) = gauss_legendre(nodes);
    let estimates: Vec<NodeEstimate> = s_nodes
        .par_iter()
        .zip(weights.par_iter())
        .enumerate()
        .map(|(j, (&s, &w))| {
            let fail = |e: Error| Error::NodeFailure { node: j, reason: e.to_string() };
            let ops = deformed_operators(g, s).map_err(fail)?;
            let probe = |state: &ChainState| {
                let xy = state.xy();
                -0.5 * beta * xy.dot(&(&ops.k_prime * &xy)) - 2.0 * (1.0 - 0.5 * beta) * ops.d_prime.dot(&xy)
            };
            let mut cfg = config.clone();
            cfg.m = g.m;
            cfg.seed = config.seed ^ ((j as u64) << 32);
            let out = mcmc_run(&cfg, s, &probe).map_err(fail)?;
            Ok(NodeEstimate {
                s,
                weight: w,
                mean: out.report.mean,
                stderr: out.report.mean_stderr,
                acceptance_rate: out.report.acceptance_rate,
            })
        })
        .collect::<Result<_>>()?;
    let log_ratio_mc = estimates.iter().map(|e| e.weight * e.mean).sum();
    let stderr = estimates.iter().map(|e| (e.weight * e.stderr).powi(2)).sum::<f64>().sqrt();
    Ok(ThermoResult { nodes: estimates, log_ratio_mc, stderr, log_ratio_closed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::ConformalMap;
    use crate::gas::McmcSettings;
    use crate::grunsky::{compute_grunsky, Method};

    #[test]
    fn gauss_legendre_exactness() {
        for n in [1, 2, 8, 16] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg + 1) as f64).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn circle_is_zero() {
        let map = ConformalMap::circle();
        let g = compute_grunsky(&map, 8, Method::BoundaryFft, 64, 1.0).unwrap();
        let s = McmcSettings { n: 8, sweeps: 200, burn_in: 50, thin: 1, step_delta: 0.5, seed: 0, chains: 1 };
        let cfg = GasConfig::new(&s, 2.0, map, 8).unwrap();
        let r = thermo_integrate(&cfg, &g, 8).unwrap();
        assert_eq!(r.log_ratio_closed, 0.0);
        assert_eq!(r.log_ratio_mc, 0.0);
        assert!(matches!(thermo_integrate(&cfg, &g, 4), Err(Error::InvalidConfig(_))));
    }
}
