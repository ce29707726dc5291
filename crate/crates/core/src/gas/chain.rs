use super::energy::{direct_energy, power_sums, xy_from_power_sums, COLLISION_DIST};
use super::stats::{batch_means, combine_reports, w2_deviation, EstimatorReport};
use super::GasConfig;
use crate::boundary::GSpec;
use crate::curve::ConformalMap;
use crate::{Error, Result};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Sweeps between full recomputations of the cached energy and power sums.
pub const REFRESH_INTERVAL: usize = 100;
const TARGET_ACCEPTANCE: f64 = 0.45;
const POWER_SUM_TOL: f64 = 1e-9;
const ENERGY_TOL: f64 = 1e-8;
/// Pair ratios multiplied before taking one logarithm.
const CHUNK: usize = 8;

/// Angles with cached curve points, power sums and energy.
#[derive(Debug, Clone)]
pub struct ChainState {
    theta: Vec<f64>,
    z: Vec<Complex64>,
    log_dphi: Vec<f64>,
    power: Vec<Complex64>,
    energy: f64,
}

impl ChainState {
    pub fn new(theta: Vec<f64>, map: &ConformalMap, beta: f64, m: usize) -> Result<Self> {
        let theta: Vec<f64> = theta.into_iter().map(|t| t.rem_euclid(2.0 * PI)).collect();
        let (z, log_dphi) = curve_points(&theta, map);
        let energy = direct_energy(&z, &log_dphi, beta)?;
        let power = power_sums(&theta, m);
        Ok(ChainState { theta, z, log_dphi, power, energy })
    }

    /// Equispaced start `θ_μ = 2πμ/n`.
    pub fn fekete(n: usize, map: &ConformalMap, beta: f64, m: usize) -> Result<Self> {
        Self::new((0..n).map(|mu| 2.0 * PI * mu as f64 / n as f64).collect(), map, beta, m)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn power_sums(&self) -> &[Complex64] {
        &self.power
    }

    /// `(X, Y)` from the cached power sums.
    pub fn xy(&self) -> DVector<f64> {
        xy_from_power_sums(&self.power)
    }

    /// Energy change for moving particle `mu` to `theta_new`; `None` on collision.
    pub fn delta_energy(&self, mu: usize, theta_new: f64, map: &ConformalMap, beta: f64) -> Option<Proposal> {
        let w = Complex64::from_polar(1.0, theta_new);
        let z_new = map.phi(w);
        let log_dphi = map.dphi(w).norm().ln();
        let z_old = self.z[mu];
        let mut log_ratio = 0.0;
        let mut prod = 1.0;
        let mut count = 0;
        let mut pending: [f64; CHUNK] = [1.0; CHUNK];
        for (nu, &z) in self.z.iter().enumerate() {
            if nu == mu {
                continue;
            }
            let num = (z_new - z).norm_sqr();
            if num < COLLISION_DIST * COLLISION_DIST {
                return None;
            }
            let r = num / (z_old - z).norm_sqr();
            pending[count] = r;
            prod *= r;
            count += 1;
            if count == CHUNK {
                log_ratio += chunk_log(prod, &pending[..count]);
                prod = 1.0;
                count = 0;
            }
        }
        if count > 0 {
            log_ratio += chunk_log(prod, &pending[..count]);
        }
        let delta = 0.5 * beta * log_ratio + log_dphi - self.log_dphi[mu];
        Some(Proposal { mu, theta: theta_new, z: z_new, log_dphi, delta })
    }

    pub fn accept(&mut self, p: &Proposal) {
        let old = Complex64::from_polar(1.0, -self.theta[p.mu]);
        let new = Complex64::from_polar(1.0, -p.theta);
        let (mut po, mut pn) = (old, new);
        for s in self.power.iter_mut() {
            *s += pn - po;
            po *= old;
            pn *= new;
        }
        self.theta[p.mu] = p.theta;
        self.z[p.mu] = p.z;
        self.log_dphi[p.mu] = p.log_dphi;
        self.energy += p.delta;
    }

    /// Recomputes every cache from the angles and checks the drift.
    pub fn refresh(&mut self, map: &ConformalMap, beta: f64) -> Result<()> {
        let fresh = ChainState::new(self.theta.clone(), map, beta, self.power.len())?;
        let power_gap = fresh.power.iter().zip(&self.power).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if power_gap > POWER_SUM_TOL {
            return Err(Error::CrossCheckFailure { what: "cached power sums", gap: power_gap, tol: POWER_SUM_TOL });
        }
        let energy_gap = (fresh.energy - self.energy).abs() / fresh.energy.abs().max(1.0);
        if energy_gap > ENERGY_TOL {
            return Err(Error::CrossCheckFailure { what: "cached energy", gap: energy_gap, tol: ENERGY_TOL });
        }
        *self = fresh;
        Ok(())
    }
}

fn curve_points(theta: &[f64], map: &ConformalMap) -> (Vec<Complex64>, Vec<f64>) {
    theta
        .iter()
        .map(|&t| {
            let w = Complex64::from_polar(1.0, t);
            (map.phi(w), map.dphi(w).norm().ln())
        })
        .unzip()
}

fn chunk_log(prod: f64, ratios: &[f64]) -> f64 {
    if prod.is_normal() {
        prod.ln()
    } else {
        ratios.iter().map(|r| r.ln()).sum()
    }
}

/// A single-site move with its cached quantities.
#[derive(Debug, Clone, Copy)]
pub struct Proposal {
    pub mu: usize,
    pub theta: f64,
    pub z: Complex64,
    pub log_dphi: f64,
    pub delta: f64,
}

/// One row of the sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sweep: usize,
    pub energy: f64,
    /// Acceptance rate within this sweep.
    pub acceptance: f64,
    pub linstat: f64,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub records: Vec<SampleRecord>,
    pub w2: Vec<f64>,
    /// Acceptance rate over all measurement sweeps.
    pub acceptance_rate: f64,
    /// Proposal half-width after burn-in adaptation.
    pub step: f64,
}

/// Observable recorded in the `linstat` column.
pub type Probe<'a> = &'a (dyn Fn(&ChainState) -> f64 + Sync);

/// Runs one chain of single-site Metropolis on the curve `map`.
pub fn run_chain(config: &GasConfig, map: &ConformalMap, seed: u64, probe: Probe) -> Result<ChainOutput> {
    config.validate()?;
    let n = config.n;
    let beta = config.beta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ChainState::fekete(n, map, beta, config.m)?;
    let mut step = config.step_delta;
    let mut records = Vec::with_capacity((config.sweeps - config.burn_in) / config.thin + 1);
    let mut w2 = Vec::with_capacity(records.capacity());
    let (mut accepted_total, mut proposed_total) = (0usize, 0usize);
    for sweep in 0..config.sweeps {
        let mut accepted = 0usize;
        for _ in 0..n {
            let mu = rng.gen_range(0..n);
            let theta_new = (state.theta[mu] + rng.gen_range(-step..step)).rem_euclid(2.0 * PI);
            let u: f64 = rng.gen();
            if let Some(p) = state.delta_energy(mu, theta_new, map, beta) {
                if !p.delta.is_finite() {
                    return Err(Error::NonFiniteEnergy);
                }
                if p.delta >= 0.0 || u < p.delta.exp() {
                    state.accept(&p);
                    accepted += 1;
                }
            }
        }
        let rate = accepted as f64 / n as f64;
        if sweep < config.burn_in {
            let gain = 1.0 / ((sweep + 1) as f64).powf(0.6);
            step = (step * (gain * (rate - TARGET_ACCEPTANCE)).exp()).clamp(1e-6, PI - 1e-9);
        } else {
            accepted_total += accepted;
            proposed_total += n;
        }
        if (sweep + 1) % REFRESH_INTERVAL == 0 {
            state.refresh(map, beta)?;
        }
        if sweep >= config.burn_in && (sweep - config.burn_in).is_multiple_of(config.thin) {
            records.push(SampleRecord { sweep, energy: state.energy, acceptance: rate, linstat: probe(&state) });
            w2.push(w2_deviation(&state.theta));
        }
    }
    let acceptance_rate = accepted_total as f64 / proposed_total.max(1) as f64;
    Ok(ChainOutput { records, w2, acceptance_rate, step })
}

#[derive(Debug, Clone)]
pub struct McmcOutput {
    pub chains: Vec<ChainOutput>,
    pub report: EstimatorReport,
}

/// Runs `config.chains` independent chains on `γ_s`; chain `i` is seeded with `seed ⊕ i`.
pub fn mcmc_run(config: &GasConfig, s: f64, probe: Probe) -> Result<McmcOutput> {
    config.validate()?;
    let map = config.map.deform(s)?;
    let chains: Vec<ChainOutput> = (0..config.chains)
        .into_par_iter()
        .map(|i| run_chain(config, &map, config.chain_seed(i), probe))
        .collect::<Result<_>>()?;
    let stats: Vec<_> =
        chains.iter().map(|c| batch_means(&c.records.iter().map(|r| r.linstat).collect::<Vec<_>>())).collect();
    let acceptance: Vec<f64> = chains.iter().map(|c| c.acceptance_rate).collect();
    let w2: Vec<f64> = chains.iter().flat_map(|c| c.w2.iter().copied()).collect();
    let report = combine_reports(&stats, &acceptance, &w2);
    Ok(McmcOutput { chains, report })
}

/// `Σ_μ g(φ(e^{iθ_μ})) − n·a0/2` on the curve `map` at its original capacity.
pub fn linear_statistic_probe<'a>(gspec: &'a GSpec, map: &'a ConformalMap, a0: f64) -> impl Fn(&ChainState) -> f64 + Sync + 'a {
    move |state| {
        let sum: f64 = state.theta.iter().map(|&t| gspec.eval_on_circle(map, t)).sum();
        sum - 0.5 * a0 * state.theta.len() as f64
    }
}

/// Writes the sample stream as CSV with columns `sweep, energy, acceptance, linstat`.
pub fn write_csv<W: Write>(records: &[SampleRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{make_curve, CurveSpec};
    use crate::gas::energy::{energy, EnergyMode};
    use crate::gas::McmcSettings;

    fn config(n: usize, beta: f64, map: ConformalMap, sweeps: usize) -> GasConfig {
        let s = McmcSettings { n, sweeps, burn_in: sweeps / 10, thin: 1, step_delta: 0.5, seed: 11, chains: 1 };
        GasConfig::new(&s, beta, map, 8).unwrap()
    }

    #[test]
    fn cached_delta_matches_full_energy() {
        let map = make_curve(&CurveSpec::Cubic { c: 0.2 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let mut state = ChainState::new(theta, &map, 3.0, 8).unwrap();
        for _ in 0..200 {
            let mu = rng.gen_range(0..12);
            let t = rng.gen_range(0.0..2.0 * PI);
            let p = state.delta_energy(mu, t, &map, 3.0).unwrap();
            let before = energy(state.theta(), &map, 3.0, EnergyMode::Direct, 1.0, None).unwrap();
            let mut moved = state.theta().to_vec();
            moved[mu] = t;
            let after = energy(&moved, &map, 3.0, EnergyMode::Direct, 1.0, None).unwrap();
            assert!(((after - before) - p.delta).abs() < 1e-9);
            state.accept(&p);
        }
        let fresh = power_sums(state.theta(), 8);
        for (a, b) in fresh.iter().zip(state.power_sums()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(state.refresh(&map, 3.0).is_ok());
    }

    #[test]
    fn collision_proposal_is_rejected() {
        let map = ConformalMap::circle();
        let state = ChainState::fekete(4, &map, 2.0, 2).unwrap();
        assert!(state.delta_energy(0, PI / 2.0, &map, 2.0).is_none());
    }

    #[test]
    fn chunked_log_survives_extreme_ratios() {
        assert!((chunk_log(0.0, &[1e-200, 1e-200]) - 2.0 * (1e-200f64).ln()).abs() < 1e-9);
        assert_eq!(chunk_log(4.0, &[2.0, 2.0]), 4f64.ln());
    }

    #[test]
    fn deterministic_stream() {
        let cfg = config(10, 2.0, make_curve(&CurveSpec::Ellipse { c: 0.3 }).unwrap(), 300);
        let probe = |s: &ChainState| s.xy()[0];
        let a = run_chain(&cfg, &cfg.map, 9, &probe).unwrap();
        let b = run_chain(&cfg, &cfg.map, 9, &probe).unwrap();
        assert_eq!(a.records, b.records);
        let c = run_chain(&cfg, &cfg.map, 10, &probe).unwrap();
        assert_ne!(a.records, c.records);
        let mut bytes = Vec::new();
        write_csv(&a.records, &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("sweep,energy,acceptance,linstat\n"));
        assert_eq!(text.lines().count(), a.records.len() + 1);
    }

    #[test]
    fn adaptation_reaches_target_band() {
        let cfg = config(16, 2.0, ConformalMap::circle(), 3000);
        let out = run_chain(&cfg, &cfg.map, 1, &|_: &ChainState| 0.0).unwrap();
        assert!((out.acceptance_rate - TARGET_ACCEPTANCE).abs() < 0.1, "{}", out.acceptance_rate);
        assert!(out.step > 0.0 && out.step < PI);
    }

    #[test]
    fn circle_cosine_mean_vanishes() {
        let map = ConformalMap::circle();
        let g = GSpec::ReZ { p: 1 };
        let mut cfg = config(12, 2.0, map.clone(), 20_000);
        cfg.chains = 2;
        let probe = linear_statistic_probe(&g, &map, 0.0);
        let out = mcmc_run(&cfg, 1.0, &probe).unwrap();
        let r = &out.report;
        assert!(r.mean.abs() < 3.0 * r.mean_stderr, "{r:?}");
        // β = 2 on the circle: Var Σcos θ_μ = 1/2 for every n ≥ 2
        assert!((r.variance - 0.5).abs() < 4.0 * r.variance_stderr, "{r:?}");
        assert!(r.acceptance_rate > 0.0 && r.acceptance_rate < 1.0);
        assert_eq!(r.chains, 2);
    }

    #[test]
    fn chains_are_order_fixed_under_threads() {
        let map = ConformalMap::circle();
        let mut cfg = config(6, 2.0, map, 400);
        cfg.chains = 3;
        let probe = |s: &ChainState| s.energy();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| mcmc_run(&cfg, 1.0, &probe)).unwrap();
        let b = many.install(|| mcmc_run(&cfg, 1.0, &probe)).unwrap();
        assert_eq!(a.report, b.report);
    }
}
