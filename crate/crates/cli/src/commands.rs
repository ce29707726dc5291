use crate::config::RunConfig;
use curvegas::boundary::{
    analyze_g, fourier_equation_residual, identity_lemma_gvar, predict, residual_inteq, solve_h, BoundarySeries,
    Prediction, Resolvent,
};
use curvegas::curve::{make_curve, ConformalMap, UnivalenceCertificate, CERTIFICATE_GRID};
use curvegas::gas::{
    brute_force, linear_statistic_probe, mcmc_run, thermo_integrate, write_csv, ChainState, EstimatorReport,
    GasConfig, McmcSettings, ThermoResult,
};
use curvegas::grunsky::{build_operators, compute_grunsky, fredholm_det, DVector2, FredholmReport, KOperator, Method};
use curvegas::potential::{exterior_dirichlet_energy, interior_dirichlet_energy, neumann_jump_energy, np_fourier_matrix};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    /// Rejected input: exit code 2.
    Validation(String),
    /// Failed numerical check: exit code 3.
    Numerical(String),
}

impl From<curvegas::Error> for CliError {
    fn from(e: curvegas::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Strict,
    Loose,
}

impl Profile {
    /// Scale applied to deterministic tolerances.
    fn scale(self) -> f64 {
        match self {
            Profile::Strict => 1.0,
            Profile::Loose => 100.0,
        }
    }

    /// Allowed Monte Carlo deviation in standard errors.
    fn z_max(self) -> f64 {
        match self {
            Profile::Strict => 3.0,
            Profile::Loose => 5.0,
        }
    }
}

pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub profile: Profile,
}

/// What a command produced: the report file contents, text for stdout, and
/// whether every tolerance check passed.
pub struct Outcome {
    pub report: String,
    pub stdout: String,
    pub pass: bool,
}

impl Outcome {
    fn json<T: Serialize>(report: &T, pass: bool) -> Result<Self, CliError> {
        let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(Outcome { stdout: text.clone(), report: text, pass })
    }
}

impl Context {
    fn map(&self) -> Result<ConformalMap, CliError> {
        Ok(make_curve(&self.config.curve)?)
    }

    fn operators(&self, map: &ConformalMap) -> Result<(KOperator, DVector2), CliError> {
        let c = &self.config;
        let g = compute_grunsky(map, c.m, c.method, c.grid(), c.radius)?;
        Ok(build_operators(&g)?)
    }

    fn series(&self, map: &ConformalMap) -> Result<BoundarySeries, CliError> {
        Ok(analyze_g(&self.config.g_or_default(), map, self.config.m, self.config.grid())?)
    }

    fn mcmc(&self) -> Result<McmcSettings, CliError> {
        let mut s = self
            .config
            .mcmc
            .clone()
            .ok_or_else(|| CliError::Validation("this command needs an \"mcmc\" block".into()))?;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        Ok(s)
    }

    pub fn report_path(&self, command: &str) -> PathBuf {
        self.out_dir.join(format!("{command}.json"))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub config: RunConfig,
    pub capacity: f64,
    pub certificate: UnivalenceCertificate,
    pub method: Method,
    pub m: usize,
    #[serde(rename = "N")]
    pub grid: usize,
    pub tail: f64,
    pub grid_error: f64,
    pub kappa: f64,
    pub singular_values: Vec<f64>,
    pub fredholm: FredholmReport,
    pub d: Vec<f64>,
}

pub fn analyze(ctx: &Context) -> Result<Outcome, CliError> {
    let c = &ctx.config;
    let map = ctx.map()?;
    let certificate = map.univalence_certificate(CERTIFICATE_GRID)?;
    let g = compute_grunsky(&map, c.m, c.method, c.grid(), c.radius)?;
    let (k, d) = build_operators(&g)?;
    let fredholm = fredholm_det(&k)?;
    Outcome::json(
        &AnalyzeReport {
            config: c.clone(),
            capacity: map.capacity(),
            certificate,
            method: g.method,
            m: g.m,
            grid: c.grid(),
            tail: g.tail,
            grid_error: g.grid_error,
            kappa: k.kappa,
            singular_values: k.singular_values.clone(),
            fredholm,
            d: d.values.iter().copied().collect(),
        },
        true,
    )
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictReport {
    pub config: RunConfig,
    pub prediction: Prediction,
}

pub fn predict_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let c = &ctx.config;
    let map = ctx.map()?;
    let (k, d) = ctx.operators(&map)?;
    let g = ctx.series(&map)?;
    let prediction = predict(&k, &d, &g, c.beta, map.capacity(), &c.n_list)?;
    Outcome::json(&PredictReport { config: c.clone(), prediction }, true)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolveHReport {
    pub config: RunConfig,
    pub beta: f64,
    /// Packed vector `h`.
    pub h: Vec<f64>,
    /// Coefficients of `cos kθ` and `sin kθ` in `H(θ)`.
    pub h_cos: Vec<f64>,
    pub h_sin: Vec<f64>,
    pub fourier_residual: f64,
    pub inteq_residual: f64,
}

pub fn solve_h_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let c = &ctx.config;
    let map = ctx.map()?;
    let (k, _) = ctx.operators(&map)?;
    let g = ctx.series(&map)?;
    let h = solve_h(&k, &g, c.beta)?;
    let series = h.series();
    let report = SolveHReport {
        config: c.clone(),
        beta: c.beta,
        h: h.hvec.iter().copied().collect(),
        h_cos: series.a,
        h_sin: series.b,
        fourier_residual: fourier_equation_residual(&k, &g, &h),
        inteq_residual: residual_inteq(&map, &g, &h, c.beta, c.grid())?,
    };
    Outcome::json(&report, true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub profile: Profile,
    pub rows: Vec<CheckRow>,
    pub all_pass: bool,
}

pub fn verify(ctx: &Context) -> Result<Outcome, CliError> {
    let c = &ctx.config;
    let scale = ctx.profile.scale();
    let map = ctx.map()?;
    let grid = c.grid();
    let mut rows = Vec::new();
    let mut row = |name: &str, value: f64, tolerance: f64| {
        rows.push(CheckRow { name: name.into(), value, tolerance, pass: value <= tolerance });
    };

    let a = compute_grunsky(&map, c.m, Method::BoundaryFft, grid, 1.0)?;
    let b = compute_grunsky(&map, c.m, Method::OffcircleFft, grid, c.radius)?;
    let gap = (&a.a - &b.a).iter().map(|z| z.norm()).fold(0.0, f64::max);
    row("grunsky boundary vs off-circle", gap, scale * 1e-8 + a.tail.max(b.tail));

    let (k, d) = build_operators(&a)?;
    row("det(I+K) vs det(I-BB*)", fredholm_det(&k)?.relative_gap, scale * 1e-8);

    let m_np = c.m.min(16);
    let n_np = (8 * m_np).next_power_of_two().max(256);
    let np = np_fourier_matrix(&map, m_np, n_np)?;
    let (k_np, _) = build_operators(&compute_grunsky(&map, m_np, Method::BoundaryFft, n_np, 1.0)?)?;
    row("Nystrom NP matrix vs K", (&np - &k_np.matrix).amax(), scale * 1e-6);

    let g = ctx.series(&map)?;
    let h = solve_h(&k, &g, c.beta)?;
    row("integral equation residual", residual_inteq(&map, &g, &h, c.beta, grid)?, scale * 1e-6);
    let (lhs, rhs) = identity_lemma_gvar(&map, &g, &h, &d, &k, c.beta, grid)?;
    row("variance identity for h", (lhs - rhs).abs(), scale * 1e-8);

    let form = Resolvent::new(&k)?.form(&g.gvec(), &g.gvec())?;
    let jump = neumann_jump_energy(&map, &g, &h, c.beta, grid)?;
    row("Neumann jump energy vs resolvent form", (jump - form).abs(), scale * 1e-8);
    let n_dir = grid.max(512);
    let energies = (interior_dirichlet_energy(&map, &g, n_dir)? + exterior_dirichlet_energy(&g)) / (8.0 * PI);
    row("Dirichlet energies vs resolvent form", (energies - form).abs(), scale * 1e-5);

    let obs = |t: &[f64]| (t[0] - t[1]).cos();
    let exact = brute_force(&map, None, c.beta, 2, 256, &[&obs])?.expectations[0];
    let seed = ctx.seed.or(c.mcmc.as_ref().map(|m| m.seed)).unwrap_or(0);
    let settings = McmcSettings { n: 2, sweeps: 50_000, burn_in: 5_000, thin: 1, step_delta: 0.5, seed, chains: 4 };
    let cfg = GasConfig::new(&settings, c.beta, map.clone(), 1)?;
    let probe = |s: &ChainState| obs(s.theta());
    let mc = mcmc_run(&cfg, 1.0, &probe)?.report;
    row("two-particle MCMC vs quadrature (in stderr)", (mc.mean - exact).abs() / mc.mean_stderr, ctx.profile.z_max());

    let all_pass = rows.iter().all(|r| r.pass);
    let report = VerifyReport { config: c.clone(), profile: ctx.profile, rows, all_pass };
    let mut table = String::new();
    for r in &report.rows {
        let _ = writeln!(
            table,
            "{:<44} {:>10.3e}  tol {:>9.2e}  {}",
            r.name,
            r.value,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    let mut out = Outcome::json(&report, all_pass)?;
    out.stdout = table;
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleReport {
    pub config: RunConfig,
    pub estimator: EstimatorReport,
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub csv_files: Vec<String>,
}

pub fn sample(ctx: &Context) -> Result<Outcome, CliError> {
    let c = &ctx.config;
    let settings = ctx.mcmc()?;
    let map = ctx.map()?;
    let (k, d) = ctx.operators(&map)?;
    let g = ctx.series(&map)?;
    let prediction = predict(&k, &d, &g, c.beta, map.capacity(), &[])?;
    let gspec = c.g_or_default();
    let probe = linear_statistic_probe(&gspec, &map, g.a0);
    let cfg = GasConfig::new(&settings, c.beta, map.clone(), c.m)?;
    let out = mcmc_run(&cfg, 1.0, &probe)?;
    let mut csv_files = Vec::new();
    for (i, chain) in out.chains.iter().enumerate() {
        let path = ctx.out_dir.join(format!("chain_{i}.csv"));
        write_csv(&chain.records, std::fs::File::create(&path)?)?;
        csv_files.push(file_name(&path));
    }
    let report = SampleReport {
        config: c.clone(),
        estimator: out.report,
        predicted_mean: prediction.mu_g,
        predicted_variance: prediction.sigma2_g,
        csv_files,
    };
    Outcome::json(&report, true)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ThermoReport {
    pub config: RunConfig,
    pub result: ThermoResult,
    /// `(mc − closed)/stderr`.
    pub z_score: f64,
    pub pass: bool,
}

pub fn thermo(ctx: &Context) -> Result<Outcome, CliError> {
    let c = &ctx.config;
    let settings = ctx.mcmc()?;
    let map = ctx.map()?;
    let g = compute_grunsky(&map, c.m, c.method, c.grid(), c.radius)?;
    let cfg = GasConfig::new(&settings, c.beta, map, c.m)?;
    let result = thermo_integrate(&cfg, &g, c.nodes)?;
    let diff = result.log_ratio_mc - result.log_ratio_closed;
    let z_score = if result.stderr > 0.0 { diff / result.stderr } else { 0.0 };
    let pass = diff.abs() <= ctx.profile.z_max() * result.stderr + 1e-12;
    Outcome::json(&ThermoReport { config: c.clone(), result, z_score, pass }, pass)
}
