use curvegas::boundary::GSpec;
use curvegas::curve::CurveSpec;
use curvegas::gas::McmcSettings;
use curvegas::grunsky::Method;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Run configuration file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub curve: CurveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<GSpec>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Truncation order of the Grunsky matrix.
    #[serde(default = "default_m")]
    pub m: usize,
    /// FFT / quadrature grid size; defaults to `max(256, 16m)` rounded up to a power of two.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcmc: Option<McmcSettings>,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Circle radius for the off-circle extraction.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Gauss–Legendre nodes for `thermo`.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_beta() -> f64 {
    2.0
}

fn default_m() -> usize {
    64
}

fn default_method() -> Method {
    Method::BoundaryFft
}

fn default_radius() -> f64 {
    1.25
}

fn default_nodes() -> usize {
    16
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(format!("beta must be positive, got {}", self.beta));
        }
        if self.m == 0 {
            return Err("m must be at least 1".into());
        }
        if let Some(n) = self.grid {
            if !n.is_power_of_two() {
                return Err(format!("N must be a power of two, got {n}"));
            }
        }
        if self.n_list.contains(&0) {
            return Err("n_list entries must be positive".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> usize {
        self.grid.unwrap_or_else(|| (16 * self.m).next_power_of_two().max(256))
    }

    pub fn g_or_default(&self) -> GSpec {
        self.g.clone().unwrap_or(GSpec::ReZ { p: 1 })
    }
}
