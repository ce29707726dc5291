use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub mean: f64,
    pub stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
    pub ess: f64,
    pub samples: usize,
}

/// Batch-means estimates of the mean and variance of a correlated series.
///
/// Samples that do not fill a whole batch are dropped from the front.
pub fn batch_means(x: &[f64]) -> BatchStats {
    let batches = BATCHES.min(x.len()).max(1);
    let size = x.len() / batches;
    let x = &x[x.len() - size * batches..];
    let t = x.len() as f64;
    let mean = x.iter().sum::<f64>() / t;
    let variance = if x.len() > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0) } else { 0.0 };
    let batch_err = |f: &dyn Fn(f64) -> f64| {
        if batches < 2 {
            return f64::INFINITY;
        }
        let bm: Vec<f64> = x.chunks(size).map(|c| c.iter().map(|&v| f(v)).sum::<f64>() / size as f64).collect();
        let mu = bm.iter().sum::<f64>() / batches as f64;
        let s2 = bm.iter().map(|b| (b - mu).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (s2 / batches as f64).sqrt()
    };
    let stderr = batch_err(&|v| v);
    let variance_stderr = batch_err(&|v| (v - mean).powi(2));
    let ess = if stderr > 0.0 && stderr.is_finite() { variance / (stderr * stderr) } else { t };
    BatchStats { mean, stderr, variance, variance_stderr, ess, samples: x.len() }
}

/// RMS deviation `(Σ t_μ²/n)^{1/2}` of the sorted angles from an equispaced
/// configuration, `t_μ = θ_(μ) − 2πμ/n − σ` with `σ` making `Σ t_μ = 0`.
pub fn w2_deviation(theta: &[f64]) -> f64 {
    let n = theta.len();
    let mut sorted: Vec<f64> = theta.iter().map(|t| t.rem_euclid(2.0 * PI)).collect();
    sorted.sort_by(f64::total_cmp);
    let dev: Vec<f64> = sorted.iter().enumerate().map(|(mu, t)| t - 2.0 * PI * mu as f64 / n as f64).collect();
    let sigma = dev.iter().sum::<f64>() / n as f64;
    (dev.iter().map(|t| (t - sigma).powi(2)).sum::<f64>() / n as f64).sqrt()
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) }
}

/// Estimates for the recorded observable of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
    pub acceptance_rate: f64,
    /// Median over retained samples of the RMS deviation from equispacing.
    pub w2: f64,
    pub ess: f64,
    pub samples: usize,
    pub chains: usize,
}

/// Pools per-chain batch statistics; chains are independent so standard
/// errors add in quadrature.
pub fn combine_reports(stats: &[BatchStats], acceptance: &[f64], w2: &[f64]) -> EstimatorReport {
    let c = stats.len() as f64;
    let mean = stats.iter().map(|s| s.mean).sum::<f64>() / c;
    let variance = stats.iter().map(|s| s.variance).sum::<f64>() / c;
    let mean_stderr = stats.iter().map(|s| s.stderr.powi(2)).sum::<f64>().sqrt() / c;
    let variance_stderr = stats.iter().map(|s| s.variance_stderr.powi(2)).sum::<f64>().sqrt() / c;
    EstimatorReport {
        mean,
        mean_stderr,
        variance,
        variance_stderr,
        acceptance_rate: acceptance.iter().sum::<f64>() / acceptance.len() as f64,
        w2: median(w2),
        ess: stats.iter().map(|s| s.ess).sum(),
        samples: stats.iter().map(|s| s.samples).sum(),
        chains: stats.len(),
    }
}
