//! Time integration of `i u_t - Δ²u + α u² + β ū² = 0` from `t = 1`.
//!
//! The primary integrator advances the profile `f^ = e^{it|xi|^4} u^`,
//! which is constant under the free flow and obeys
//! `∂_t f^ = i e^{it|xi|^4} F[α u² + β ū²]`, by classical RK4. The oracle is a
//! Strang split-step scheme on `u` itself.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, Space, SpectralField};
use crate::grid::Grid;
use crate::linear::{effective_bandwidth, Propagator, BANDWIDTH_THRESHOLD};

/// Moduli above this count as blow-up.
pub const BLOWUP_LIMIT: f64 = 1e100;

/// Upper bound of `|phi(xi, eta)|` over `|xi - eta|, |eta| <= 1` is 14, so a
/// profile band-limited to `xi_eff` oscillates at rate at most `14 xi_eff^4`.
const PHASE_RATE_FACTOR: f64 = 14.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("non-finite or runaway state at t = {t}")]
    BlowUp { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TimeStep {
    Fixed { dt: f64 },
    /// Halves the step when one step changes the profile by more than
    /// `change_tol` relative, grows it when the change is far below, and caps
    /// it at `0.01 (1 + t)` and `kappa / (14 xi_eff^4)`.
    Adaptive { initial: f64, change_tol: f64, kappa: f64 },
}

impl TimeStep {
    pub fn adaptive(initial: f64) -> Self {
        TimeStep::Adaptive {
            initial,
            change_tol: 1e-3,
            kappa: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub time_step: TimeStep,
    pub dealias: bool,
    /// Times at which the state is recorded; `t_start` and `t_end` are always
    /// included.
    pub checkpoints: Vec<f64>,
    pub keep_snapshots: bool,
    /// Initial data with `||f^||_inf` above this gets a small-data warning.
    pub small_data_threshold: f64,
}

impl SolverConfig {
    pub fn new(alpha: f64, beta: f64, t_end: f64, time_step: TimeStep) -> Self {
        SolverConfig {
            alpha,
            beta,
            t_start: 1.0,
            t_end,
            time_step,
            dealias: true,
            checkpoints: Vec::new(),
            keep_snapshots: true,
            small_data_threshold: 1e-2,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::Config(msg));
        if !(self.t_start > 0.0 && self.t_end > self.t_start) {
            return bad(format!("need 0 < t_start < t_end, got [{}, {}]", self.t_start, self.t_end));
        }
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        match self.time_step {
            TimeStep::Fixed { dt } if !(dt > 0.0) => return bad(format!("dt must be positive, got {dt}")),
            TimeStep::Adaptive {
                initial,
                change_tol,
                kappa,
            } if !(initial > 0.0 && change_tol > 0.0 && kappa > 0.0) => {
                return bad("adaptive step parameters must be positive".into())
            }
            _ => {}
        }
        if let Some(t) = self.checkpoints.iter().find(|t| !(**t >= self.t_start && **t <= self.t_end)) {
            return bad(format!("checkpoint {t} outside [{}, {}]", self.t_start, self.t_end));
        }
        Ok(())
    }

    fn schedule(&self) -> Vec<f64> {
        let mut times = self.checkpoints.clone();
        times.push(self.t_start);
        times.push(self.t_end);
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// Profiles `f^(t)` in frequency space, when snapshots are kept.
    #[serde(skip)]
    pub snapshots: Vec<SpectralField>,
    /// `||u(t)||_inf`.
    pub sup_u: Vec<f64>,
    /// `||f(t)||_2 = ||u(t)||_2`.
    pub l2: Vec<f64>,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Set when the run stopped early on a non-finite state.
    pub blowup_time: Option<f64>,
    pub warnings: Vec<String>,
}

impl TrajectoryRecord {
    fn new() -> Self {
        TrajectoryRecord {
            times: Vec::new(),
            snapshots: Vec::new(),
            sup_u: Vec::new(),
            l2: Vec::new(),
            steps: 0,
            rejected_steps: 0,
            blowup_time: None,
            warnings: Vec::new(),
        }
    }

    fn record(&mut self, t: f64, fhat: &SpectralField, prop: &Propagator, keep: bool) {
        self.times.push(t);
        self.sup_u.push(prop.evolve_physical(fhat, -t).sup_norm());
        self.l2.push(fhat.l2_norm());
        if keep {
            self.snapshots.push(fhat.clone());
        }
    }

    pub fn final_profile(&self) -> Option<&SpectralField> {
        self.snapshots.last()
    }
}

/// Right-hand side of the profile equation with cached tables.
pub struct ProfileRhs {
    prop: Propagator,
    mask: Option<Vec<bool>>,
    alpha: f64,
    beta: f64,
}

impl ProfileRhs {
    pub fn new(grid: &Arc<Grid>, cfg: &SolverConfig) -> Self {
        ProfileRhs {
            prop: Propagator::new(grid),
            mask: cfg.dealias.then(|| grid.dealias_mask()),
            alpha: cfg.alpha,
            beta: cfg.beta,
        }
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    fn masked(&self, mut field: SpectralField) -> SpectralField {
        if let Some(mask) = &self.mask {
            debug_assert_eq!(field.space(), Space::Frequency);
            field
                .values_mut()
                .par_iter_mut()
                .zip(mask.par_iter())
                .for_each(|(v, keep)| {
                    if !keep {
                        *v = Complex64::default();
                    }
                });
        }
        field
    }

    /// `F[α u² + β ū²]` (dealiased when configured) for `u` given in frequency space.
    fn nonlinearity(&self, uhat: SpectralField) -> SpectralField {
        let u = self.masked(uhat).to_physical();
        let (a, b) = (self.alpha, self.beta);
        let values: Vec<Complex64> = u.values().par_iter().map(|v| a * v * v + b * (v.conj() * v.conj())).collect();
        let n = SpectralField::from_values(u.grid(), values, Space::Physical).expect("same grid");
        self.masked(n.to_frequency())
    }

    pub fn eval(&self, fhat: &SpectralField, t: f64) -> Result<SpectralField, SolverError> {
        if self.alpha == 0.0 && self.beta == 0.0 {
            return Ok(SpectralField::zeros(fhat.grid(), Space::Frequency));
        }
        let nhat = self.nonlinearity(self.prop.apply(fhat, -t));
        let mut out = self.prop.apply(&nhat, t);
        out.values_mut().par_iter_mut().for_each(|v| *v *= Complex64::i());
        check_finite(&out, t)?;
        Ok(out)
    }
}

fn check_finite(field: &SpectralField, t: f64) -> Result<(), SolverError> {
    if field.values().par_iter().any(|v| !(v.re.is_finite() && v.im.is_finite()) || v.norm() > BLOWUP_LIMIT) {
        Err(SolverError::BlowUp { t })
    } else {
        Ok(())
    }
}

/// `i e^{it|xi|^4} F[α u² + β ū²]` with `u^ = e^{-it|xi|^4} f^`.
pub fn profile_rhs(fhat: &SpectralField, t: f64, cfg: &SolverConfig) -> Result<SpectralField, SolverError> {
    ProfileRhs::new(fhat.grid(), cfg).eval(&fhat.to_frequency(), t)
}

fn axpy(f: &SpectralField, a: f64, k: &SpectralField) -> SpectralField {
    f.axpy(Complex64::new(a, 0.0), k).expect("same grid")
}

/// One classical RK4 step of the profile equation.
pub fn rk4_step(rhs: &ProfileRhs, f: &SpectralField, t: f64, dt: f64) -> Result<SpectralField, SolverError> {
    let k1 = rhs.eval(f, t)?;
    let k2 = rhs.eval(&axpy(f, 0.5 * dt, &k1), t + 0.5 * dt)?;
    let k3 = rhs.eval(&axpy(f, 0.5 * dt, &k2), t + 0.5 * dt)?;
    let k4 = rhs.eval(&axpy(f, dt, &k3), t + dt)?;
    let w = dt / 6.0;
    let values = f
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, v)| v + w * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i]))
        .collect();
    Ok(SpectralField::from_values(f.grid(), values, Space::Frequency)?)
}

fn relative_change(a: &SpectralField, b: &SpectralField) -> f64 {
    let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = a.values().iter().map(|x| x.norm_sqr()).sum();
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Step cap from the oscillation of `e^{it phi}` over the current band.
fn oscillation_cap(f: &SpectralField, kappa: f64) -> f64 {
    let xi = effective_bandwidth(f, BANDWIDTH_THRESHOLD);
    if xi == 0.0 {
        f64::INFINITY
    } else {
        kappa / (PHASE_RATE_FACTOR * xi.powi(4))
    }
}

fn small_data_warning(f: &SpectralField, cfg: &SolverConfig, rec: &mut TrajectoryRecord) {
    let size = f.sup_norm();
    if size > cfg.small_data_threshold {
        rec.warnings.push(format!(
            "initial ||f^||_inf = {size:.3e} exceeds the small-data threshold {:.1e}",
            cfg.small_data_threshold
        ));
    }
}

/// Integrates the profile equation from `f1 = f^(t_start)` with RK4.
pub fn integrate_profile(f1: &SpectralField, cfg: &SolverConfig) -> Result<TrajectoryRecord, SolverError> {
    cfg.validate()?;
    let rhs = ProfileRhs::new(f1.grid(), cfg);
    let mut f = f1.to_frequency();
    let mut rec = TrajectoryRecord::new();
    small_data_warning(&f, cfg, &mut rec);
    let schedule = cfg.schedule();
    let mut t = cfg.t_start;
    rec.record(t, &f, rhs.propagator(), cfg.keep_snapshots);
    let mut dt = match cfg.time_step {
        TimeStep::Fixed { dt } => dt,
        TimeStep::Adaptive { initial, .. } => initial,
    };
    let mut cap = match cfg.time_step {
        TimeStep::Adaptive { kappa, .. } => oscillation_cap(&f, kappa),
        TimeStep::Fixed { .. } => f64::INFINITY,
    };
    for &target in &schedule[1..] {
        while t < target {
            let remaining = target - t;
            let (step, last) = if let TimeStep::Adaptive { .. } = cfg.time_step {
                dt = dt.min(0.01 * (1.0 + t)).min(cap);
                if dt >= remaining * (1.0 - 1e-12) {
                    (remaining, true)
                } else {
                    (dt, false)
                }
            } else if dt >= remaining * (1.0 - 1e-9) {
                (remaining, true)
            } else {
                // land on the checkpoint with equal steps
                let n = (remaining / dt).ceil();
                (remaining / n, false)
            };
            let next = match rk4_step(&rhs, &f, t, step) {
                Ok(next) => next,
                Err(SolverError::BlowUp { t: tb }) => {
                    rec.blowup_time = Some(tb);
                    return Ok(rec);
                }
                Err(e) => return Err(e),
            };
            if let TimeStep::Adaptive { change_tol, kappa, .. } = cfg.time_step {
                let change = relative_change(&f, &next);
                if change > change_tol && step > 1e-12 {
                    dt = 0.5 * step;
                    rec.rejected_steps += 1;
                    continue;
                }
                if change < change_tol / 32.0 {
                    dt = 2.0 * step.max(dt);
                }
                cap = oscillation_cap(&next, kappa);
            }
            f = next;
            t = if last { target } else { t + step };
            rec.steps += 1;
        }
        rec.record(target, &f, rhs.propagator(), cfg.keep_snapshots);
    }
    Ok(rec)
}

/// Strang split-step on `u`: half a nonlinear step, a full linear step, half
/// a nonlinear step. The nonlinear flow `u_t = i(α u² + β ū²)` is taken by
/// one RK4 step, dealiased through the transform when configured. Only fixed
/// steps are supported; snapshots are stored as profiles.
pub fn split_step_oracle(u1: &SpectralField, cfg: &SolverConfig) -> Result<TrajectoryRecord, SolverError> {
    cfg.validate()?;
    let dt = match cfg.time_step {
        TimeStep::Fixed { dt } => dt,
        TimeStep::Adaptive { .. } => return Err(SolverError::Config("split-step oracle needs a fixed step".into())),
    };
    let rhs = ProfileRhs::new(u1.grid(), cfg);
    let prop = rhs.propagator();
    let free = cfg.alpha == 0.0 && cfg.beta == 0.0;
    let nonlinear = |u: &SpectralField| -> SpectralField {
        let mut n = rhs.nonlinearity(u.clone());
        n.values_mut().par_iter_mut().for_each(|v| *v *= Complex64::i());
        n
    };
    let half = |u: &SpectralField, h: f64| -> SpectralField {
        if free {
            return u.clone();
        }
        let k1 = nonlinear(u);
        let k2 = nonlinear(&axpy(u, 0.5 * h, &k1));
        let k3 = nonlinear(&axpy(u, 0.5 * h, &k2));
        let k4 = nonlinear(&axpy(u, h, &k3));
        let w = h / 6.0;
        let values = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v + w * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i]))
            .collect();
        SpectralField::from_values(u.grid(), values, Space::Frequency).expect("same grid")
    };
    let mut u = u1.to_frequency();
    let mut rec = TrajectoryRecord::new();
    let mut t = cfg.t_start;
    let profile = |u: &SpectralField, t: f64| prop.apply(u, t);
    small_data_warning(&profile(&u, t), cfg, &mut rec);
    rec.record(t, &profile(&u, t), prop, cfg.keep_snapshots);
    let schedule = cfg.schedule();
    for &target in &schedule[1..] {
        let n = ((target - t) / dt * (1.0 - 1e-9)).ceil().max(1.0);
        let h = (target - t) / n;
        for _ in 0..n as usize {
            let a = half(&u, 0.5 * h);
            let b = prop.apply(&a, -h);
            u = half(&b, 0.5 * h);
            if let Err(SolverError::BlowUp { t: tb }) = check_finite(&u, t) {
                rec.blowup_time = Some(tb);
                return Ok(rec);
            }
            t += h;
            rec.steps += 1;
        }
        t = target;
        rec.record(t, &profile(&u, t), prop, cfg.keep_snapshots);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{bump_data, evolve_linear};

    fn ci_problem(amp: f64) -> SpectralField {
        let grid = Grid::new(1, 64, 8.0 * std::f64::consts::PI).unwrap();
        bump_data(&grid, 1.0, amp)
    }

    fn fixed(alpha: f64, beta: f64, t_end: f64, dt: f64) -> SolverConfig {
        SolverConfig::new(alpha, beta, t_end, TimeStep::Fixed { dt })
    }

    #[test]
    fn free_profile_is_constant() {
        let f1 = ci_problem(0.3);
        let rhs = profile_rhs(&f1, 1.3, &fixed(0.0, 0.0, 2.0, 0.1)).unwrap();
        assert_eq!(rhs.sup_norm(), 0.0);
        let rec = integrate_profile(&f1, &fixed(0.0, 0.0, 2.0, 0.1)).unwrap();
        assert!(rec.final_profile().unwrap().max_abs_diff(&f1) <= 1e-12 * f1.sup_norm());
    }

    #[test]
    fn free_split_step_matches_linear_flow() {
        let f1 = ci_problem(0.3);
        let u1 = evolve_linear(&f1, -1.0);
        let rec = split_step_oracle(&u1, &fixed(0.0, 0.0, 2.0, 0.05)).unwrap();
        assert!(rec.final_profile().unwrap().max_abs_diff(&f1) <= 1e-12);
    }

    #[test]
    fn rhs_matches_definition_for_real_u() {
        // at an instant where u is real: u^ = e^{-it|xi|^4} f^ real-valued in x
        let f1 = ci_problem(0.4);
        let t = 1.7;
        let fhat = evolve_linear(&f1, t);
        let cfg = fixed(0.8, 0.0, 2.0, 0.1);
        let rhs = profile_rhs(&fhat, t, &cfg).unwrap();
        let u = f1.to_physical();
        assert!(u.values().iter().all(|v| v.im.abs() < 1e-12));
        let mut expect = evolve_linear(&u.pointwise_mul(&u).unwrap().scale(Complex64::new(0.0, 0.8)), t).to_frequency();
        let mask = f1.grid().dealias_mask();
        for (v, keep) in expect.values_mut().iter_mut().zip(mask) {
            if !keep {
                *v = Complex64::default();
            }
        }
        assert!(rhs.max_abs_diff(&expect) < 1e-13);
    }

    fn final_of(rec: &TrajectoryRecord) -> SpectralField {
        rec.final_profile().unwrap().clone()
    }

    #[test]
    fn rk4_self_convergence_is_fourth_order() {
        let f1 = ci_problem(1.0);
        let run = |dt: f64| final_of(&integrate_profile(&f1, &fixed(1.0, 0.5, 2.0, dt)).unwrap());
        let (a, b, c) = (run(0.02), run(0.01), run(0.005));
        let ratio = a.max_abs_diff(&b) / b.max_abs_diff(&c);
        assert!((ratio.log2() - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn split_step_is_second_order_and_agrees_with_rk4() {
        let f1 = ci_problem(1.0);
        let u1 = evolve_linear(&f1, -1.0);
        let run = |dt: f64| final_of(&split_step_oracle(&u1, &fixed(1.0, 0.5, 2.0, dt)).unwrap());
        let (a, b, c) = (run(0.02), run(0.01), run(0.005));
        let ratio = a.max_abs_diff(&b) / b.max_abs_diff(&c);
        assert!((ratio.log2() - 2.0).abs() < 0.3, "ratio {ratio}");
        let reference = final_of(&integrate_profile(&f1, &fixed(1.0, 0.5, 2.0, 0.005)).unwrap());
        let e1 = a.max_abs_diff(&reference) / 0.02f64.powi(2);
        let e2 = c.max_abs_diff(&reference) / 0.005f64.powi(2);
        assert!(e2 < 1.5 * e1 && e2 > 0.5 * e1, "{e1} {e2}");
    }

    #[test]
    fn rhs_matches_oracle_difference_quotient() {
        let f1 = ci_problem(1.0);
        let u1 = evolve_linear(&f1, -1.0);
        let rhs = profile_rhs(&f1, 1.0, &fixed(1.0, 0.0, 2.0, 0.1)).unwrap();
        let mut errs = Vec::new();
        for dt in [1e-2, 5e-3] {
            let rec = split_step_oracle(&u1, &fixed(1.0, 0.0, 1.0 + dt, dt)).unwrap();
            let quotient = axpy(&final_of(&rec), -1.0, &f1).scale(Complex64::new(1.0 / dt, 0.0));
            errs.push(quotient.max_abs_diff(&rhs));
        }
        // first order: halving dt halves the mismatch
        assert!(errs[1] < 0.6 * errs[0] && errs[1] > 0.4 * errs[0], "{errs:?}");
    }

    #[test]
    fn adaptive_run_lands_on_checkpoints() {
        let f1 = ci_problem(0.01);
        let cfg = SolverConfig::new(1.0, 0.0, 3.0, TimeStep::adaptive(0.01)).with_checkpoints(vec![1.5, 2.25]);
        let rec = integrate_profile(&f1, &cfg).unwrap();
        assert_eq!(rec.times, vec![1.0, 1.5, 2.25, 3.0]);
        assert!(rec.warnings.is_empty());
        assert!(rec.blowup_time.is_none());
    }

    #[test]
    fn validation_and_blowup() {
        let f1 = ci_problem(1.0);
        let mut cfg = fixed(1.0, 0.0, 0.5, 0.1);
        assert!(matches!(integrate_profile(&f1, &cfg), Err(SolverError::Config(_))));
        cfg.t_end = 2.0;
        cfg.checkpoints = vec![5.0];
        assert!(cfg.validate().is_err());
        // large data: u_t = i u^2 blows up in finite time
        let big = ci_problem(1e3);
        let rec = integrate_profile(&big, &fixed(1.0, 0.0, 50.0, 0.01)).unwrap();
        assert!(rec.blowup_time.is_some());
        assert!(!rec.warnings.is_empty());
    }
}
