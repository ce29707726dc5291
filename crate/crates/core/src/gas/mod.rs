//! The β-ensemble on the curve: energies, a Metropolis sampler, estimators,
//! a brute-force quadrature oracle for tiny `n`, and thermodynamic integration
//! along the deformation `s ↦ s·φ(·/s)`.

mod brute;
mod chain;
mod energy;
mod stats;
mod thermo;

pub use brute::{brute_force, BruteForce};
pub use chain::{linear_statistic_probe, mcmc_run, run_chain, write_csv, ChainOutput, ChainState, McmcOutput, SampleRecord};
pub use energy::{energy, grunsky_energy, EnergyMode};
pub use stats::{batch_means, combine_reports, w2_deviation, BatchStats, EstimatorReport, BATCHES};
pub use thermo::{gauss_legendre, thermo_integrate, NodeEstimate, ThermoResult};

use crate::curve::ConformalMap;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Sampler settings as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSettings {
    pub n: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_step")]
    pub step_delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_chains")]
    pub chains: usize,
}

fn default_thin() -> usize {
    1
}

fn default_step() -> f64 {
    0.5
}

fn default_chains() -> usize {
    1
}

/// Everything a chain needs: the gas, the curve, and the sampler settings.
#[derive(Debug, Clone)]
pub struct GasConfig {
    pub n: usize,
    pub beta: f64,
    pub map: ConformalMap,
    /// Number of cached power sums `S_k`.
    pub m: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub step_delta: f64,
    pub seed: u64,
    pub chains: usize,
}

impl GasConfig {
    pub fn new(settings: &McmcSettings, beta: f64, map: ConformalMap, m: usize) -> Result<Self> {
        let cfg = GasConfig {
            n: settings.n,
            beta,
            map,
            m,
            sweeps: settings.sweeps,
            burn_in: settings.burn_in,
            thin: settings.thin,
            step_delta: settings.step_delta,
            seed: settings.seed,
            chains: settings.chains,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if self.burn_in >= self.sweeps {
            return bad("burn_in must be smaller than sweeps");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if !(self.step_delta > 0.0 && self.step_delta < PI) {
            return bad("step_delta must lie in (0, pi)");
        }
        if self.chains == 0 {
            return bad("chains must be at least 1");
        }
        Ok(())
    }

    /// Seed of chain `i`.
    pub fn chain_seed(&self, i: usize) -> u64 {
        self.seed ^ i as u64
    }
}
