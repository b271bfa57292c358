//! Named studies shared by the command line runner and the acceptance suite.
//! A study is fully determined by its [`StudySpec`] and a 64-bit seed; every
//! random draw goes through `ChaCha8Rng::seed_from_u64`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagnostics::{
    calibrate_constant, compute_fstar, compute_g, fit_growth_exponents, h_spot_check, monitor_state, Decomposer,
    DiagnosticsError, MonitorRow, XNormReport, DEFAULT_SOBOLEV_INDEX,
};
use crate::dyadic::OUTER_EDGE;
use crate::field::SpectralField;
use crate::fit::{fit_window, log_times, DecayFit, FitError, Verdict};
use crate::grid::{Grid, GridError, DEFAULT_MAX_POINTS};
use crate::io::{save_field, FieldIoError};
use crate::linear::{
    band_data, bump_data, compact_bump, evolve_linear, measure_linear_decay, phase_gradient, stationary_point,
    window_limit, DecayError, NormKind, BANDWIDTH_THRESHOLD,
};
use crate::pseudoproduct::{
    bilinear_apply, cm_norm_probe, frac_integrate, random_band_limited, trilinear_apply, OperatorError,
    QuadratureBudget,
};
use crate::resonance::{audit_bound, audit_resonance_sets, BoundKind, Z_CONSISTENCY_TOL};
use crate::rho::{rho_sup, RhoError, DEFAULT_QUAD_BUDGET};
use crate::solver::{integrate_profile, split_step_oracle, SolverConfig, SolverError, TimeStep, TrajectoryRecord};
use crate::symbols::{self, MultiplierSymbol};

/// Tolerances and thresholds of the graded checks.
pub mod tol {
    pub const DECAY_SLOPE_D1: f64 = 0.03;
    pub const DECAY_SLOPE_D2: f64 = 0.05;
    pub const CONSERVATION_SLOPE: f64 = 0.01;
    pub const BAND_SLOPE: f64 = 0.05;
    pub const BAND_PREFACTOR_SPREAD: f64 = 3.0;
    pub const STATIONARY_RESIDUAL: f64 = 1e-9;
    pub const RHO_BAND: f64 = 3.0;
    pub const UNIT_BILINEAR: f64 = 1e-10;
    pub const UNIT_TRILINEAR: f64 = 1e-9;
    pub const FRAC_IDENTITY: f64 = 1e-14;
    pub const FRAC_RATIO_GROWTH: f64 = 10.0;
    pub const NEG_DEGREE_SPREAD: f64 = 10.0;
    pub const CM_T_SPREAD: f64 = 2.0;
    pub const ORDER: f64 = 0.3;
    pub const MUTUAL_DT2_SPREAD: f64 = 1.5;
    pub const FREE_EXACT: f64 = 1e-12;
    pub const U_BAND: f64 = 3.0;
    pub const U_SLOPE: f64 = 0.05;
    pub const XNORM_GROWTH: f64 = 0.02;
    pub const G_GAP: f64 = 0.15;
    pub const RECONSTRUCTION: f64 = 1e-12;
    pub const BILINEARITY: f64 = 1e-10;
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study spec: {0}")]
    Validation(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Decay(#[from] DecayError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Rho(#[from] RhoError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    FieldIo(#[from] FieldIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

impl From<OperatorError> for StudyError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Budget { work, max_work } => StudyError::Budget(format!(
                "quadrature work {work} exceeds {max_work}; lower `n`, `radius` or `t_max`"
            )),
            other => StudyError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyName {
    LinearDecay,
    BandedDecay,
    ResonanceAudit,
    OperatorSuite,
    NonlinearScatter,
    ProfileMonitor,
}

impl StudyName {
    pub const ALL: [StudyName; 6] = [
        StudyName::LinearDecay,
        StudyName::BandedDecay,
        StudyName::ResonanceAudit,
        StudyName::OperatorSuite,
        StudyName::NonlinearScatter,
        StudyName::ProfileMonitor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StudyName::LinearDecay => "linear-decay",
            StudyName::BandedDecay => "banded-decay",
            StudyName::ResonanceAudit => "resonance-audit",
            StudyName::OperatorSuite => "operator-suite",
            StudyName::NonlinearScatter => "nonlinear-scatter",
            StudyName::ProfileMonitor => "profile-monitor",
        }
    }
}

impl fmt::Display for StudyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StudyName {
    type Err = StudyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StudyName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| StudyError::Validation(format!("unknown study `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataRecipe {
    /// Physical `amplitude e^{-|x|^2 / (2 radius^2)}`.
    Gaussian,
    /// Frequency bump equal to `amplitude` on `|xi| < radius/2`, zero beyond `radius`.
    Bump,
    /// `L^1`-normalised dyadic band `phi_j`.
    Band,
    /// Seeded Gaussian coefficients under the bump of `radius`.
    Random,
}

/// Flat key-value study configuration. Absent keys take per-study defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Points per axis; must be a power of two.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Number of sample times (or audit samples for `resonance-audit`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataRecipe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Overrides the slope tolerance where a study grades a slope.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_work: Option<u64>,
}

impl StudySpec {
    pub fn from_toml(text: &str) -> Result<Self, StudyError> {
        Ok(toml::from_str(text)?)
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let bad = |m: String| Err(StudyError::Validation(m));
        if let Some(d) = self.dim {
            if !(1..=5).contains(&d) {
                return bad(format!("dim {d} outside 1..=5"));
            }
        }
        if let Some(n) = self.n {
            if n < 2 || !n.is_power_of_two() {
                return bad(format!("n = {n} is not a power of two >= 2"));
            }
        }
        for (key, v) in [
            ("box_length", self.box_length),
            ("t_min", self.t_min),
            ("t_max", self.t_max),
            ("radius", self.radius),
            ("dt", self.dt),
            ("tolerance", self.tolerance),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("{key} must be positive and finite, got {v}"));
                }
            }
        }
        for (key, v) in [("amplitude", self.amplitude), ("alpha", self.alpha), ("beta", self.beta)] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return bad(format!("{key} must be finite"));
                }
            }
        }
        if let (Some(a), Some(b)) = (self.t_min, self.t_max) {
            if a >= b {
                return bad(format!("t_min {a} must be below t_max {b}"));
            }
        }
        if let Some(s) = self.samples {
            if s < 2 {
                return bad(format!("samples = {s} is below 2"));
            }
        }
        if self.data == Some(DataRecipe::Band) && self.band.is_none() {
            return bad("data = \"band\" needs `band`".into());
        }
        if let Some(m) = self.max_points {
            if m == 0 {
                return bad("max_points must be positive".into());
            }
        }
        Ok(())
    }

    fn max_points(&self) -> usize {
        self.max_points.unwrap_or(DEFAULT_MAX_POINTS)
    }
}

/// One graded quantity. Checks with `asserted == false` are recorded only and
/// do not enter the study verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub asserted: bool,
    pub measured: f64,
    pub limit: String,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, verdict: Verdict, measured: f64, limit: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            verdict,
            asserted: true,
            measured,
            limit: limit.into(),
            detail: String::new(),
        }
    }

    fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check::new(name, pass_if(measured <= bound), measured, format!("<= {bound:e}"))
    }

    fn recorded(mut self) -> Self {
        self.asserted = false;
        self
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

fn pass_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub study: StudyName,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub details: serde_json::Value,
    /// Fields written next to the report, keyed by file stem.
    pub fields: Vec<(String, SpectralField)>,
    pub runtime_seconds: f64,
}

impl StudyReport {
    fn new(study: StudyName, seed: u64, columns: &[&str]) -> Self {
        StudyReport {
            study,
            seed,
            checks: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            details: json!({}),
            fields: Vec::new(),
            runtime_seconds: 0.0,
        }
    }

    /// Worst verdict over the asserted checks.
    pub fn verdict(&self) -> Verdict {
        self.checks
            .iter()
            .filter(|c| c.asserted)
            .fold(Verdict::Pass, |acc, c| acc.combine(c.verdict))
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn checks_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn set_detail(&mut self, key: &str, value: serde_json::Value) {
        self.details[key] = value;
    }
}

/// Exit status for a verdict: 0 PASS, 2 FAIL, 3 UNTRUSTED.
pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 2,
        Verdict::Untrusted => 3,
    }
}

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

/// Runs a study. The seed argument overrides `spec.seed`.
pub fn run_study(name: StudyName, spec: &StudySpec, seed: Option<u64>) -> Result<StudyReport, StudyError> {
    spec.validate()?;
    let seed = seed.or(spec.seed).unwrap_or(DEFAULT_SEED);
    let start = Instant::now();
    let mut report = match name {
        StudyName::LinearDecay => linear_decay(spec, seed),
        StudyName::BandedDecay => banded_decay(spec, seed),
        StudyName::ResonanceAudit => resonance_audit(spec, seed),
        StudyName::OperatorSuite => operator_suite(spec, seed),
        StudyName::NonlinearScatter => nonlinear_scatter(spec, seed),
        StudyName::ProfileMonitor => profile_monitor(spec, seed),
    }?;
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

pub const DEFAULT_SEED: u64 = 20_240_601;

fn rel_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.max_abs_diff(b) / b.in_space(a.space()).sup_norm().max(f64::MIN_POSITIVE)
}

/// Largest frequency of meaningful content, used to size grids.
fn recipe_bandwidth(recipe: DataRecipe, radius: f64, band: i32) -> f64 {
    match recipe {
        DataRecipe::Gaussian => (2.0 * (1.0 / BANDWIDTH_THRESHOLD).ln()).sqrt() / radius,
        DataRecipe::Bump | DataRecipe::Random => radius,
        DataRecipe::Band => OUTER_EDGE * 2f64.powi(band),
    }
}

pub fn make_data(
    recipe: DataRecipe,
    grid: &Arc<Grid>,
    amplitude: f64,
    radius: f64,
    band: i32,
    seed: u64,
) -> SpectralField {
    match recipe {
        DataRecipe::Gaussian => SpectralField::from_physical_fn(grid, |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            Complex64::new(amplitude * (-0.5 * r2 / (radius * radius)).exp(), 0.0)
        }),
        DataRecipe::Bump => bump_data(grid, radius, amplitude),
        DataRecipe::Band => band_data(grid, band).scale(Complex64::new(amplitude, 0.0)),
        DataRecipe::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            SpectralField::from_frequency_fn(grid, |xi| {
                let r = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (amplitude * compact_bump(r, radius))
            })
        }
    }
}

/// Explicit `n` and `box_length` win; otherwise the grid is sized so that
/// content up to `xi_max` stays wrap-free until `t_max`.
fn build_grid(
    spec: &StudySpec,
    dim: usize,
    xi_max: f64,
    t_max: f64,
    oversample: f64,
) -> Result<Arc<Grid>, StudyError> {
    let auto = Grid::auto_scaled(dim, xi_max, t_max, oversample, 0.0, usize::MAX)?;
    let n = spec.n.unwrap_or(auto.n_per_axis());
    let box_length = spec.box_length.unwrap_or(auto.box_length());
    Grid::with_budget(dim, n, box_length, spec.max_points()).map_err(|e| match e {
        GridError::Budget { points, budget, .. } => StudyError::Budget(format!(
            "grid {n}^{dim} = {points} points exceeds max_points = {budget}; raise `max_points`, or lower `t_max` or `radius`"
        )),
        other => StudyError::Grid(other),
    })
}

fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi / lo
}

// ---------------------------------------------------------------- linear decay

fn linear_decay(spec: &StudySpec, seed: u64) -> Result<StudyReport, StudyError> {
    let dim = spec.dim.unwrap_or(1);
    if dim >= 3 {
        return smoke(spec, seed, dim);
    }
    let mut report = StudyReport::new(StudyName::LinearDecay, seed, &["t", "sup_norm", "l2_norm"]);
    let (t_min, t_max) = (spec.t_min.unwrap_or(1.0), spec.t_max.unwrap_or(1e3));
    let recipe = spec.data.unwrap_or(if dim == 1 { DataRecipe::Gaussian } else { DataRecipe::Bump });
    let radius = spec.radius.unwrap_or(if recipe == DataRecipe::Bump { 0.9 } else { 1.0 });
    let band = spec.band.unwrap_or(0);
    let grid = build_grid(spec, dim, recipe_bandwidth(recipe, radius, band), t_max, 1.1)?;
    let data = make_data(recipe, &grid, spec.amplitude.unwrap_or(1.0), radius, band, seed);
    let times = log_times(t_min, t_max, spec.samples.unwrap_or(25));

    let sup = measure_linear_decay(&data, &times, NormKind::Sup)?;
    let l2 = measure_linear_decay(&data, &times, NormKind::L2)?;
    let expected = -(dim as f64) / 4.0;
    let tolerance = spec
        .tolerance
        .unwrap_or(if dim == 1 { tol::DECAY_SLOPE_D1 } else { tol::DECAY_SLOPE_D2 });
    report.push(
        Check::new(
            "sup-slope",
            sup.fit.verdict(expected, tolerance),
            sup.fit.slope,
            format!("{expected} ± {tolerance}"),
        )
        .detail(format!("window-safe until t = {:.3e}", sup.t_limit)),
    );
    report.push(Check::new(
        "l2-conservation",
        l2.fit.verdict(0.0, tol::CONSERVATION_SLOPE),
        l2.fit.slope,
        format!("0 ± {}", tol::CONSERVATION_SLOPE),
    ));
    for ((t, s), l) in times.iter().zip(&sup.norms).zip(&l2.norms) {
        report.rows.push(vec![num(*t), num(*s), num(*l)]);
    }

    report.push(stationary_phase_check(dim, seed));
    if dim == 1 {
        report.push(rho_check()?);
    }
    report.set_detail(
        "grid",
        json!({"n": grid.n_per_axis(), "box_length": grid.box_length(), "dim": dim}),
    );
    report.set_detail("fit", serde_json::to_value(&sup.fit)?);
    report.set_detail("xi_eff", json!(sup.xi_eff));
    Ok(report)
}

/// `|grad phi(xi*)| / (|x|/t)` over 10^4 random `(x, t)`.
fn stationary_phase_check(dim: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5A7A);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-100.0..100.0)).collect();
        let t = 10f64.powf(rng.random_range(0.0..3.0));
        let xi = stationary_point(&x, t);
        let g = phase_gradient(&xi, &x, t);
        let scale = x.iter().map(|c| c * c).sum::<f64>().sqrt() / t;
        let res = g.iter().map(|c| c * c).sum::<f64>().sqrt() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(res);
    }
    Check::at_most("stationary-point", worst, tol::STATIONARY_RESIDUAL)
}

/// `t^{1/4} sup_x |rho(x, t)|` stays in a band over `t in [10, 10^3]`.
fn rho_check() -> Result<Check, StudyError> {
    let mut scaled = Vec::new();
    let mut converged = true;
    for t in log_times(10.0, 1e3, 7) {
        let s = rho_sup(t, 8.0, 81, DEFAULT_QUAD_BUDGET)?;
        converged &= s.all_converged;
        scaled.push(s.sup_abs * t.powf(0.25));
    }
    let sp = spread(scaled.iter().copied());
    let mut c = Check::at_most("rho-decay-band", sp, tol::RHO_BAND).detail(format!("t^(1/4) sup|rho| = {}", list(&scaled)));
    if !converged {
        c.verdict = c.verdict.combine(Verdict::Untrusted);
    }
    Ok(c)
}

/// Coarse high-dimensional run: free decay on a tiny box and three nonlinear
/// steps. Everything is recorded, nothing asserted.
fn smoke(spec: &StudySpec, seed: u64, dim: usize) -> Result<StudyReport, StudyError> {
    let mut report = StudyReport::new(StudyName::LinearDecay, seed, &["t", "sup_norm", "l2_norm"]);
    let n = spec.n.unwrap_or(16);
    let box_length = spec.box_length.unwrap_or(16.0);
    let radius = spec.radius.unwrap_or(1.2);
    let grid = Grid::with_budget(dim, n, box_length, spec.max_points())?;
    let data = bump_data(&grid, radius, spec.amplitude.unwrap_or(1.0));
    let t_limit = window_limit(&grid, radius);
    let times = log_times(
        spec.t_min.unwrap_or(0.01),
        spec.t_max.unwrap_or(t_limit.min(1.0)),
        spec.samples.unwrap_or(13),
    );
    let sup = measure_linear_decay(&data, &times, NormKind::Sup)?;
    let l2 = measure_linear_decay(&data, &times, NormKind::L2)?;
    let expected = -(dim as f64) / 4.0;
    report.push(
        Check::new("smoke-sup-slope", sup.fit.verdict(expected, 0.1), sup.fit.slope, format!("{expected}"))
            .recorded()
            .detail(format!("n = {n}, box = {box_length}, window-safe until t = {t_limit:.3}")),
    );
    for ((t, s), l) in times.iter().zip(&sup.norms).zip(&l2.norms) {
        report.rows.push(vec![num(*t), num(*s), num(*l)]);
    }
    let small = bump_data(&grid, radius, 1e-3);
    let cfg = SolverConfig::new(1.0, 0.0, 1.03, TimeStep::Fixed { dt: 0.01 });
    let rec = integrate_profile(&small, &cfg)?;
    let last = rec.final_profile().expect("snapshots kept");
    let change = rel_diff(last, &small);
    let stable = rec.blowup_time.is_none() && last.values().iter().all(|v| v.re.is_finite() && v.im.is_finite());
    report.push(
        Check::new("smoke-nonlinear-3-steps", pass_if(stable), change, "finite")
            .recorded()
            .detail(format!("relative profile change over {} steps", rec.steps)),
    );
    report.set_detail("grid", json!({"n": n, "box_length": box_length, "dim": dim}));
    Ok(report)
}

// ---------------------------------------------------------------- banded decay

fn banded_decay(spec: &StudySpec, seed: u64) -> Result<StudyReport, StudyError> {
    let dim = spec.dim.unwrap_or(1);
    let mut report = StudyReport::new(StudyName::BandedDecay, seed, &["j", "t", "sup_norm"]);
    let bands: Vec<i32> = match spec.band {
        Some(j) => vec![j],
        None => vec![1, 2, 3],
    };
    let expected = -(dim as f64) / 2.0;
    let tolerance = spec.tolerance.unwrap_or(tol::BAND_SLOPE);
    // dimensionless time tau = 2^{4j} t makes every band the same problem
    let taus = log_times(spec.t_min.unwrap_or(1.0), spec.t_max.unwrap_or(10f64.powf(3.5)), spec.samples.unwrap_or(25));
    let mut prefactors = Vec::new();
    let mut fits = Vec::new();
    for &j in &bands {
        let scale = 2f64.powi(-4 * j);
        let times: Vec<f64> = taus.iter().map(|tau| tau * scale).collect();
        let b = crate::linear::measure_banded_decay(j, dim, &times, spec.max_points())?;
        let fit = &b.measurement.fit;
        report.push(Check::new(
            format!("band-{j}-slope"),
            fit.verdict(expected, tolerance),
            fit.slope,
            format!("{expected} ± {tolerance}"),
        ));
        // sup ~ C 2^{-dj} t^{-d/2}
        prefactors.push(fit.intercept.exp() * 2f64.powi(dim as i32 * j));
        for (t, s) in times.iter().zip(&b.measurement.norms) {
            report.rows.push(vec![j.to_string(), num(*t), num(*s)]);
        }
        fits.push(json!({"j": j, "fit": fit, "n": b.grid_points, "box_length": b.box_length}));
    }
    if bands.len() > 1 {
        let sp = spread(prefactors.iter().copied());
        report.push(
            Check::at_most("prefactor-spread", sp, tol::BAND_PREFACTOR_SPREAD)
                .detail(format!("C_j 2^(dj) = {}", list(&prefactors))),
        );
    }
    report.set_detail("bands", json!(fits));
    Ok(report)
}

// ------------------------------------------------------------- resonance audit

fn resonance_audit(spec: &StudySpec, seed: u64) -> Result<StudyReport, StudyError> {
    let mut report = StudyReport::new(
        StudyName::ResonanceAudit,
        seed,
        &["dim", "kind", "samples", "min_margin", "violations", "max_consistency_error"],
    );
    let dims: Vec<usize> = spec.dim.map(|d| vec![d]).unwrap_or(vec![1, 2, 5]);
    let samples = spec.samples.unwrap_or(100_000);
    report.set_detail("samples", json!(samples));
    for d in dims {
        let audits = [
            ("z", audit_bound(BoundKind::Z, d, samples, seed)),
            ("y", audit_bound(BoundKind::Y, d, samples, seed ^ 1)),
            ("x", audit_bound(BoundKind::X, d, samples, seed ^ 2)),
            ("joint", audit_resonance_sets(d, samples.max(10_000), seed ^ 3)),
        ];
        for (kind, a) in audits {
            report.push(
                Check::new(
                    format!("{kind}-bound-d{d}"),
                    pass_if(a.passed()),
                    a.violation_count as f64,
                    "0 violations",
                )
                .detail(format!("min margin {:.3e}, consistency {:.1e}", a.min_margin, a.max_consistency_error)),
            );
            if kind == "z" {
                report.push(Check::at_most(
                    format!("z-consistency-d{d}"),
                    a.max_consistency_error,
                    Z_CONSISTENCY_TOL,
                ));
            }
            report.rows.push(vec![
                d.to_string(),
                kind.to_string(),
                a.sample_count.to_string(),
                num(a.min_margin),
                a.violation_count.to_string(),
                num(a.max_consistency_error),
            ]);
        }
    }
    Ok(report)
}

// -------------------------------------------------------------- operator suite

fn unit_quadrature(arity: usize) -> MultiplierSymbol {
    // not flagged constant, so the quadrature path runs
    MultiplierSymbol::new("unit", arity, Some(0), "1 by quadrature", |_, _, _, _| Complex64::new(1.0, 0.0))
}

fn physical_lp(field: &SpectralField, p: f64) -> f64 {
    let phys = field.to_physical();
    if p.is_infinite() {
        phys.sup_norm()
    } else {
        phys.lp_norm(p)
    }
}

fn operator_suite(spec: &StudySpec, seed: u64) -> Result<StudyReport, StudyError> {
    let mut report = StudyReport::new(StudyName::OperatorSuite, seed, &["quantity", "t", "value"]);

    // unit symbol through quadrature against the pointwise product
    let g1 = Grid::new(1, 64, 20.0)?;
    let (f, g, h) = (
        random_band_limited(&g1, 0.45, seed),
        random_band_limited(&g1, 0.45, seed + 1),
        random_band_limited(&g1, 0.45, seed + 2),
    );
    let fg = f.pointwise_mul(&g).expect("same grid");
    let b = bilinear_apply(&unit_quadrature(2), &f, &g, 1.0, QuadratureBudget::bilinear(1))?;
    let g2 = Grid::new(2, 16, 10.0)?;
    let (f2, k2) = (random_band_limited(&g2, 0.45, seed + 3), random_band_limited(&g2, 0.45, seed + 4));
    let b2 = bilinear_apply(&unit_quadrature(2), &f2, &k2, 1.0, QuadratureBudget::bilinear(2))?;
    let bil = rel_diff(&b, &fg).max(rel_diff(&b2, &f2.pointwise_mul(&k2).expect("same grid")));
    report.push(Check::at_most("unit-bilinear", bil, tol::UNIT_BILINEAR));
    let tri = trilinear_apply(&unit_quadrature(3), &f, &g, &h, 1.0, QuadratureBudget::trilinear())?;
    let fgh = fg.pointwise_mul(&h).expect("same grid");
    report.push(Check::at_most("unit-trilinear", rel_diff(&tri, &fgh), tol::UNIT_TRILINEAR));

    let id = (0..3)
        .map(|k| rel_diff(&frac_integrate(&f, 0.0, 10f64.powi(k)), &f.to_frequency()))
        .fold(0.0, f64::max);
    report.push(Check::at_most("frac-identity", id, tol::FRAC_IDENTITY));

    // fractional integration ratios for three (p, q, alpha)
    let gl = Grid::new(1, 4096, 800.0)?;
    let gauss = make_data(DataRecipe::Gaussian, &gl, 1.0, 1.0, 0, seed);
    let times = log_times(1.0, 1e4, 9);
    let inf = f64::INFINITY;
    for (p, q, alpha) in [(inf, 2.0, 3.0), (2.0, 2.0, 1.0), (inf, 1.0, 2.0)] {
        let fq = physical_lp(&gauss, q);
        let ratios: Vec<f64> = times
            .iter()
            .map(|&t| {
                let lhs = physical_lp(&frac_integrate(&gauss, alpha, t), p);
                let exponent = alpha / 4.0 + (1.0 / p - 1.0 / q) / 4.0;
                lhs / (t.powf(exponent) * fq)
            })
            .collect();
        let growth = ratios.iter().copied().fold(0.0, f64::max) / ratios[0];
        let label = format!("frac-ratio-p{}-q{}-a{}", if p.is_infinite() { "inf".into() } else { p.to_string() }, q, alpha);
        for (t, r) in times.iter().zip(&ratios) {
            report.rows.push(vec![label.clone(), num(*t), num(*r)]);
        }
        report.push(Check::at_most(label, growth, tol::FRAC_RATIO_GROWTH).detail(format!("ratio at t = 1: {:.4e}", ratios[0])));
    }

    // negative-degree bilinear bounds with p = q = 4, r = 2
    let gc = Grid::new(1, spec.n.unwrap_or(128), 32.0)?;
    let pairs: Vec<(SpectralField, SpectralField)> = (0..10)
        .map(|i| (random_band_limited(&gc, 0.25, seed + 100 + 2 * i), random_band_limited(&gc, 0.25, seed + 101 + 2 * i)))
        .collect();
    let budget = QuadratureBudget::bilinear(1);
    for k in 0..=4u32 {
        let m = symbols::q_over_a(k);
        let mut constants = Vec::new();
        for t in [1.0, 10.0, 100.0] {
            let mut c = 0.0f64;
            for (a, b) in &pairs {
                let lhs = bilinear_apply(&m, a, b, t, budget)?.l2_norm();
                let s = 4.0 - k as f64;
                let rhs = physical_lp(&frac_integrate(a, s, t), 4.0) * physical_lp(b, 4.0)
                    + physical_lp(a, 4.0) * physical_lp(&frac_integrate(b, s, t), 4.0);
                c = c.max(lhs / rhs);
            }
            report.rows.push(vec![format!("q{k}-over-a-constant"), num(t), num(c)]);
            constants.push(c);
        }
        report.push(
            Check::at_most(format!("q{k}-over-a-stability"), spread(constants.iter().copied()), tol::NEG_DEGREE_SPREAD)
                .detail(format!("constants at t = 1, 10, 100: {}", list(&constants))),
        );
    }

    // multiplier-norm probes
    let z = cm_norm_probe(&symbols::q4_over_z(), 1, 3, 1100, 1.0, seed);
    let shells = spread(z.shells.iter().map(|s| s.1));
    report.push(
        Check::new("probe-q4-over-z", pass_if(z.value.is_finite() && shells < 1.5), z.value, "finite, shell spread < 1.5")
            .recorded()
            .detail(format!("shell spread {shells:.3}")),
    );
    let psi = symbols::q4_over_a_psi1();
    let probes: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|&t| cm_norm_probe(&psi, 1, 2, 1100, t, seed).value).collect();
    report.push(
        Check::at_most("probe-t-independence", spread(probes.iter().copied()), tol::CM_T_SPREAD)
            .recorded()
            .detail(format!("probe at t = 1, 10, 100: {}", list(&probes))),
    );
    let m = symbols::q4_over_z();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let a = random_band_limited(&gc, 0.25, seed + 1000 + 2 * i);
        let b = random_band_limited(&gc, 0.25, seed + 1001 + 2 * i);
        let lhs = bilinear_apply(&m, &a, &b, 1.0, budget)?.l2_norm();
        let ratio = lhs / (z.value * physical_lp(&a, 4.0) * physical_lp(&b, 4.0));
        worst = if ratio.is_finite() { worst.max(ratio) } else { f64::INFINITY };
    }
    report.push(Check::at_most("holder-smoke", worst, 1e3).recorded());
    Ok(report)
}

// ----------------------------------------------------------- nonlinear scatter

fn ci_problems() -> Result<Vec<(String, SpectralField)>, StudyError> {
    let l = 8.0 * std::f64::consts::PI;
    Ok(vec![
        ("d1".into(), bump_data(&Grid::new(1, 64, l)?, 1.0, 1.0)),
        ("d2".into(), bump_data(&Grid::new(2, 32, l)?, 1.0, 1.0)),
    ])
}

fn final_of(rec: &TrajectoryRecord) -> SpectralField {
    rec.final_profile().expect("snapshots kept").clone()
}

/// Convergence orders of both integrators on the CI problems, mutual
/// agreement scaled by `dt^2`, and exactness of the free flow.
fn cross_validate(report: &mut StudyReport) -> Result<(), StudyError> {
    let fixed = |alpha: f64, beta: f64, dt: f64| SolverConfig::new(alpha, beta, 2.0, TimeStep::Fixed { dt });
    let dts = [0.02, 0.01, 0.005];
    for (label, f1) in ci_problems()? {
        let u1 = evolve_linear(&f1, -1.0);
        let rk: Vec<SpectralField> = dts
            .iter()
            .map(|&dt| integrate_profile(&f1, &fixed(1.0, 0.5, dt)).map(|r| final_of(&r)))
            .collect::<Result<_, _>>()?;
        let ss: Vec<SpectralField> = dts
            .iter()
            .map(|&dt| split_step_oracle(&u1, &fixed(1.0, 0.5, dt)).map(|r| final_of(&r)))
            .collect::<Result<_, _>>()?;
        let order = |v: &[SpectralField]| (v[0].max_abs_diff(&v[1]) / v[1].max_abs_diff(&v[2])).log2();
        let (ork, oss) = (order(&rk), order(&ss));
        report.push(Check::new(
            format!("rk4-order-{label}"),
            pass_if((ork - 4.0).abs() <= tol::ORDER),
            ork,
            format!("4 ± {}", tol::ORDER),
        ));
        report.push(Check::new(
            format!("split-order-{label}"),
            pass_if((oss - 2.0).abs() <= tol::ORDER),
            oss,
            format!("2 ± {}", tol::ORDER),
        ));
        let reference = &rk[2];
        let c: Vec<f64> = dts
            .iter()
            .zip(&ss)
            .map(|(dt, s)| s.max_abs_diff(reference) / (dt * dt))
            .collect();
        report.push(
            Check::at_most(format!("mutual-dt2-{label}"), c[2] / c[0], tol::MUTUAL_DT2_SPREAD)
                .detail(format!("|split - rk4| / dt^2 = {}", list(&c))),
        );
        let free_rk = final_of(&integrate_profile(&f1, &fixed(0.0, 0.0, 0.05))?);
        let free_ss = final_of(&split_step_oracle(&u1, &fixed(0.0, 0.0, 0.05))?);
        let free = rel_diff(&free_rk, &f1).max(rel_diff(&free_ss, &f1));
        report.push(Check::at_most(format!("free-exact-{label}"), free, tol::FREE_EXACT));
    }
    Ok(())
}

fn nonlinear_scatter(spec: &StudySpec, seed: u64) -> Result<StudyReport, StudyError> {
    let mut columns: Vec<String> = MonitorRow::header();
    columns.push("scattering_proxy".into());
    let mut report = StudyReport::new(StudyName::NonlinearScatter, seed, &[]);
    report.columns = columns;
    cross_validate(&mut report)?;

    let dim = spec.dim.unwrap_or(1);
    let t_max = spec.t_max.unwrap_or(500.0);
    let radius = spec.radius.unwrap_or(1.1);
    let amplitude = spec.amplitude.unwrap_or(1e-3);
    let alpha = spec.alpha.unwrap_or(1.0);
    let beta = spec.beta.unwrap_or(0.0);
    let recipe = spec.data.unwrap_or(DataRecipe::Bump);
    let band = spec.band.unwrap_or(0);
    // products double the bandwidth and must clear the 2/3 dealias mask
    let grid = build_grid(spec, dim, recipe_bandwidth(recipe, radius, band), t_max, 3.0)?;
    let f1 = make_data(recipe, &grid, amplitude, radius, band, seed);
    let times = log_times(1.0, t_max, spec.samples.unwrap_or(28));
    let mut checkpoints: Vec<f64> = times.iter().flat_map(|t| [*t, (t / 2.0).max(1.0)]).collect();
    checkpoints.sort_by(f64::total_cmp);
    checkpoints.dedup();
    let step = match spec.dt {
        Some(dt) => TimeStep::Fixed { dt },
        None => TimeStep::adaptive(0.01),
    };
    let cfg = SolverConfig::new(alpha, beta, t_max, step).with_checkpoints(checkpoints);
    let rec = integrate_profile(&f1, &cfg)?;
    if let Some(t) = rec.blowup_time {
        return Err(StudyError::Solver(SolverError::BlowUp { t }));
    }
    let snapshot = |t: f64| -> &SpectralField {
        let i = rec.times.iter().position(|s| *s == t).expect("checkpoint recorded");
        &rec.snapshots[i]
    };

    let mut budget = QuadratureBudget::bilinear(dim).with_active_tol(1e-10);
    budget = budget.with_max_work(spec.max_work.unwrap_or(budget.max_work.max(1 << 27)));
    let cal = calibrate_constant(&f1, alpha, budget)?;
    let dec = Decomposer::new(&f1, cal.constant, budget)?;
    let mut rows = Vec::new();
    let mut proxy = Vec::new();
    for &t in &times {
        let state = dec.state(snapshot(t), t)?;
        let row = monitor_state(&state, DEFAULT_SOBOLEV_INDEX)?;
        let p = if t >= 2.0 {
            snapshot(t).sub(snapshot(t / 2.0)).expect("same grid").l2_norm()
        } else {
            f64::NAN
        };
        let mut record = row.record();
        record.push(num(p));
        report.rows.push(record);
        proxy.push(p);
        rows.push(row);
    }

    let late: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= 10.0).collect();
    let qd = dim as f64 / 4.0;
    let band_vals: Vec<f64> = late.iter().map(|&i| rows[i].xnorm.u_sup_scaled).collect();
    report.push(
        Check::at_most("u-decay-band", spread(band_vals.iter().copied()), tol::U_BAND)
            .detail(format!("t^(d/4)|u|_inf from {:.3e} to {:.3e}", band_vals[0], band_vals[band_vals.len() - 1])),
    );
    let u_sup: Vec<f64> = rows.iter().map(|r| r.xnorm.u_sup_scaled / r.t.powf(qd)).collect();
    let u_fit = fit_window(&times, &u_sup, 10.0)?;
    report.push(Check::new(
        "u-slope",
        u_fit.verdict(-qd, tol::U_SLOPE),
        u_fit.slope,
        format!("{} ± {}", -qd, tol::U_SLOPE),
    ));

    let totals: Vec<f64> = rows.iter().map(|r| r.xnorm.total).collect();
    let x_fit = fit_growth_exponents(&times, &totals, 10.0)?;
    let flagged = late.iter().filter(|&&i| rows[i].boundary_flag).count();
    let mut xv = x_fit.verdict_at_most(tol::XNORM_GROWTH);
    if flagged > 0 {
        xv = xv.combine(Verdict::Untrusted);
    }
    report.push(
        Check::new("xnorm-growth", xv, x_fit.slope, format!("<= {}", tol::XNORM_GROWTH))
            .detail(format!("{flagged} checkpoints after t = 10 flag mass near the box edge")),
    );

    let late_proxy: Vec<f64> = late.iter().map(|&i| proxy[i]).collect();
    let increases = late_proxy.windows(2).filter(|w| w[1] > w[0]).count();
    report.push(
        Check::new("scattering-proxy-monotone", pass_if(increases == 0), increases as f64, "0 increases after t = 10")
            .detail(format!(
                "|f(t) - f(t/2)|_2 from {:.3e} to {:.3e}",
                late_proxy[0],
                late_proxy[late_proxy.len() - 1]
            )),
    );

    let free_g: Vec<f64> = rows.iter().map(|r| r.free_g_sup).collect();
    let g_fit = fit_window(&times, &free_g, 10.0)?;
    let gap = u_fit.slope - g_fit.slope;
    let gv = if u_fit.trusted && g_fit.trusted { pass_if(gap >= tol::G_GAP) } else { Verdict::Untrusted };
    report.push(
        Check::new("g-slope-gap", gv, gap, format!(">= {}", tol::G_GAP))
            .detail(format!("u slope {:.4}, free g slope {:.4}", u_fit.slope, g_fit.slope)),
    );

    let rec_err = rows.iter().map(|r| r.reconstruction_error).fold(0.0, f64::max);
    report.push(Check::at_most("reconstruction", rec_err, tol::RECONSTRUCTION));

    // every monitored column gets a fitted exponent, recorded only
    let header = MonitorRow::header();
    let mut exponents = serde_json::Map::new();
    for (c, name) in header.iter().enumerate().skip(1) {
        let series: Vec<f64> = report.rows.iter().map(|r| r[c].parse::<f64>().unwrap_or(f64::NAN)).collect();
        if series.iter().all(|v| v.is_finite() && *v > 0.0) {
            if let Ok(fit) = fit_window(&times, &series, 10.0) {
                exponents.insert(name.clone(), json!(fit.slope));
            }
        }
    }
    report.set_detail("fitted_exponents", serde_json::Value::Object(exponents));
    report.set_detail("calibration", serde_json::to_value(cal)?);
    report.set_detail(
        "run",
        json!({
            "dim": dim, "n": grid.n_per_axis(), "box_length": grid.box_length(),
            "amplitude": amplitude, "radius": radius, "alpha": alpha, "beta": beta,
            "steps": rec.steps, "rejected_steps": rec.rejected_steps, "warnings": rec.warnings,
            "xnorm_components": XNormReport::COMPONENT_NAMES,
        }),
    );
    report.fields.push(("profile_final".into(), rec.final_profile().expect("snapshots kept").clone()));
    Ok(report)
}

// ------------------------------------------------------------- profile monitor

fn profile_monitor(spec: &StudySpec, seed: u64) -> Result<StudyReport, StudyError> {
    let mut report = StudyReport::new(StudyName::ProfileMonitor, seed, &[]);
    report.columns = MonitorRow::header();
    let dim = spec.dim.unwrap_or(1);
    let n = spec.n.unwrap_or(64);
    let grid = Grid::with_budget(dim, n, spec.box_length.unwrap_or(8.0 * std::f64::consts::PI), spec.max_points())?;
    let radius = spec.radius.unwrap_or(1.0);
    let band = spec.band.unwrap_or(0);
    let f1 = make_data(
        spec.data.unwrap_or(DataRecipe::Bump),
        &grid,
        spec.amplitude.unwrap_or(0.5),
        radius,
        band,
        seed,
    );
    let alpha = spec.alpha.unwrap_or(1.0);
    let t_max = spec.t_max.unwrap_or(1.4);
    let samples = spec.samples.unwrap_or(17);
    if samples % 2 == 0 || samples < 3 {
        return Err(StudyError::Validation(format!("samples = {samples} must be odd and >= 3 for Simpson's rule")));
    }
    let spacing = (t_max - 1.0) / (samples - 1) as f64;
    let times: Vec<f64> = (0..samples).map(|k| 1.0 + spacing * k as f64).collect();
    let dt = spec.dt.unwrap_or(spacing / 10.0);
    let cfg = SolverConfig::new(alpha, spec.beta.unwrap_or(0.0), t_max, TimeStep::Fixed { dt })
        .with_checkpoints(times.clone());
    let rec = integrate_profile(&f1, &cfg)?;
    let mut budget = QuadratureBudget::bilinear(dim);
    if let Some(w) = spec.max_work {
        budget = budget.with_max_work(w);
    }
    let cal = calibrate_constant(&f1, alpha, budget)?;
    let dec = Decomposer::new(&f1, cal.constant, budget)?;
    let mut worst = 0.0f64;
    for (t, f) in rec.times.iter().zip(&rec.snapshots) {
        let row = monitor_state(&dec.state(f, *t)?, DEFAULT_SOBOLEV_INDEX)?;
        worst = worst.max(row.reconstruction_error);
        report.rows.push(row.record());
    }
    report.push(Check::at_most("reconstruction", worst, tol::RECONSTRUCTION));

    // g is a quadratic form: check polarisation and degree-two scaling
    let t = t_max;
    let other = random_band_limited(&grid, 0.16, seed);
    let a = Complex64::new(0.3, -0.7);
    let mixed = f1.axpy(a, &other).expect("same grid");
    let lhs = compute_g(&mixed, t, budget)?;
    let g_sym = symbols::g_kernel();
    let cross = bilinear_apply(&g_sym, &f1, &other, t, budget)?
        .add(&bilinear_apply(&g_sym, &other, &f1, t, budget)?)
        .expect("same grid")
        .scale(Complex64::i() * a);
    let square = compute_g(&other, t, budget)?.scale(a * a);
    let rhs = compute_g(&f1, t, budget)?
        .add(&cross)
        .and_then(|s| s.add(&square))
        .expect("same grid");
    report.push(Check::at_most("g-bilinearity", rel_diff(&lhs, &rhs), tol::BILINEARITY));
    let delta = Complex64::new(1e-3, 0.0);
    let g = compute_g(&f1, t, budget)?;
    let gd = compute_g(&f1.scale(delta), t, budget)?;
    let fs = compute_fstar(&f1, budget)?;
    let fsd = compute_fstar(&f1.scale(delta), budget)?;
    let scaling = rel_diff(&gd, &g.scale(delta * delta)).max(rel_diff(&fsd, &fs.scale(delta * delta)));
    report.push(Check::at_most("delta-squared-scaling", scaling, tol::BILINEARITY));

    if cfg.beta == 0.0 {
        let spot = h_spot_check(&rec.times, &rec.snapshots, &dec, &cfg)?;
        report.push(
            Check::new("h-time-quadrature", pass_if(spot.passed()), spot.max_error, format!("<= {:.3e}", spot.quadrature_error))
                .detail(format!("|h|_inf = {:.3e}, |h_3|_inf = {:.3e}", spot.h_sup, spot.h3_sup)),
        );
    }
    report.set_detail("calibration", serde_json::to_value(cal)?);
    report.fields.push(("profile_final".into(), rec.final_profile().expect("snapshots kept").clone()));
    Ok(report)
}

// --------------------------------------------------------------------- output

/// Lowercase hex SHA-256 of the canonical JSON of `(study, spec)`.
pub fn spec_hash(name: StudyName, spec: &StudySpec) -> Result<String, StudyError> {
    let canonical = serde_json::to_string(&json!({"study": name, "spec": spec}))?;
    Ok(Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `data.csv`, `summary.json`, `manifest.json` and any fields.
pub fn write_outputs(report: &StudyReport, spec: &StudySpec, dir: &Path) -> Result<Vec<PathBuf>, StudyError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let data = dir.join("data.csv");
    let mut w = csv::Writer::from_path(&data)?;
    w.write_record(&report.columns)?;
    for r in &report.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    written.push(data);
    for (stem, field) in &report.fields {
        let p = dir.join(format!("{stem}.field"));
        save_field(&p, field)?;
        written.push(p);
    }
    let summary = json!({
        "study": report.study,
        "verdict": report.verdict(),
        "checks": report.checks,
        "details": report.details,
        "runtime_seconds": report.runtime_seconds,
    });
    let sp = dir.join("summary.json");
    fs::write(&sp, serde_json::to_string_pretty(&summary)?)?;
    written.push(sp);
    let manifest = json!({
        "study": report.study,
        "spec": spec,
        "spec_sha256": spec_hash(report.study, spec)?,
        "seed": report.seed,
        "generator": "ChaCha8Rng::seed_from_u64",
        "version": env!("CARGO_PKG_VERSION"),
        "provenance": concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")),
        "files": written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let mp = dir.join("manifest.json");
    fs::write(&mp, serde_json::to_string_pretty(&manifest)?)?;
    written.push(mp);
    Ok(written)
}

/// Slope of a stored `(t, norm)` series graded against `expected ± tolerance`.
pub fn fit_file(path: &Path, expected: f64, tolerance: f64) -> Result<(DecayFit, Verdict), StudyError> {
    Ok(crate::fit::fit_and_verdict(path, expected, tolerance)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Space;

    #[test]
    fn spec_validation() {
        let bad = StudySpec::from_toml("n = 48").unwrap();
        assert!(matches!(bad.validate(), Err(StudyError::Validation(_))));
        assert!(StudySpec::from_toml("grid = 4").is_err());
        let ok = StudySpec::from_toml("dim = 2\nn = 64\ndata = \"gaussian\"\nt_max = 50.0").unwrap();
        ok.validate().unwrap();
        assert!(StudySpec::from_toml("t_min = 5.0\nt_max = 2.0").unwrap().validate().is_err());
        assert!(StudySpec::from_toml("data = \"band\"").unwrap().validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for n in StudyName::ALL {
            assert_eq!(n.as_str().parse::<StudyName>().unwrap(), n);
        }
        assert!("bogus".parse::<StudyName>().is_err());
    }

    #[test]
    fn hash_depends_on_spec() {
        let a = StudySpec::default();
        let b = StudySpec { n: Some(64), ..Default::default() };
        let ha = spec_hash(StudyName::LinearDecay, &a).unwrap();
        assert_eq!(ha.len(), 64);
        assert_eq!(ha, spec_hash(StudyName::LinearDecay, &a).unwrap());
        assert_ne!(ha, spec_hash(StudyName::LinearDecay, &b).unwrap());
        assert_ne!(ha, spec_hash(StudyName::BandedDecay, &a).unwrap());
    }

    #[test]
    fn verdict_ignores_recorded_checks() {
        let mut r = StudyReport::new(StudyName::LinearDecay, 0, &["t"]);
        r.push(Check::at_most("a", 1.0, 2.0));
        r.push(Check::at_most("b", 3.0, 2.0).recorded());
        assert_eq!(r.verdict(), Verdict::Pass);
        r.push(Check::new("c", Verdict::Untrusted, 0.0, ""));
        assert_eq!(exit_code(r.verdict()), 3);
        r.push(Check::at_most("d", 3.0, 2.0));
        assert_eq!(exit_code(r.verdict()), 2);
    }

    #[test]
    fn oversized_grid_is_a_budget_error() {
        let spec = StudySpec { n: Some(1 << 20), dim: Some(2), ..Default::default() };
        assert!(matches!(run_study(StudyName::LinearDecay, &spec, None), Err(StudyError::Budget(_))));
    }

    #[test]
    fn random_recipe_is_seeded() {
        let g = Grid::new(1, 32, 10.0).unwrap();
        let a = make_data(DataRecipe::Random, &g, 1.0, 1.0, 0, 9);
        let b = make_data(DataRecipe::Random, &g, 1.0, 1.0, 0, 9);
        let c = make_data(DataRecipe::Random, &g, 1.0, 1.0, 0, 10);
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert_eq!(a.space(), Space::Frequency);
    }
}
