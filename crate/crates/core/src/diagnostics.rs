//! Profile decomposition `f^ = f^_1 + c (f^_* + g^ + h^)` along a trajectory,
//! the seven-component X-norm, and growth-exponent fits.
//!
//! With `F = f^(xi - eta) f^(eta)` and `A_s = 1/s + iZ`, integrating the
//! Duhamel term by parts in time gives
//! - `g^(t) = i T_{e^{itphi}/A_t}(f, f)`, the boundary term at `t`;
//! - `f^_* = -i T_{e^{iphi}/A_1}(f_1, f_1)`, the boundary term at `1`;
//! - `h^`, everything else, taken here as the residual.
//!
//! The prefactor `c` is `α` under this crate's conventions; it is measured
//! by [`calibrate_constant`] rather than assumed.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Space, SpectralField};
use crate::fit::{fit_window, DecayFit, FitError};
use crate::linear::Propagator;
use crate::norms::{sobolev_norm, weighted_norm, NormError};
use crate::pseudoproduct::{bilinear_apply, OperatorError, QuadratureBudget};
use crate::resonance::{grad_eta_phase2, p_field};
use crate::solver::{profile_rhs, rk4_step, ProfileRhs, SolverConfig, SolverError, TimeStep};
use crate::symbols::{self, inv_a, phase2_fast, MultiplierSymbol};

/// Exponent of the `x^3` weight, `1/2 + 1/47`.
pub const X3_EXPONENT: f64 = 0.5 + 1.0 / 47.0;

pub const DEFAULT_SOBOLEV_INDEX: f64 = 10.0;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("{0}")]
    Input(String),
}

fn i_times(field: SpectralField) -> SpectralField {
    field.scale(Complex64::i())
}

/// `g^(xi, t) = i ∫ e^{itphi} / (1/t + iZ) f^(xi - eta) f^(eta) d eta`.
pub fn compute_g(fhat: &SpectralField, t: f64, budget: QuadratureBudget) -> Result<SpectralField, OperatorError> {
    Ok(i_times(bilinear_apply(&symbols::g_kernel(), fhat, fhat, t, budget)?))
}

/// `f^_*(xi) = -i ∫ e^{iphi} / (1 + iZ) f^_1(xi - eta) f^_1(eta) d eta`.
pub fn compute_fstar(f1hat: &SpectralField, budget: QuadratureBudget) -> Result<SpectralField, OperatorError> {
    Ok(bilinear_apply(&symbols::g_kernel(), f1hat, f1hat, 1.0, budget)?.scale(-Complex64::i()))
}

#[derive(Debug, Clone)]
pub struct ProfileState {
    pub t: f64,
    pub fhat: SpectralField,
    pub f1hat: Arc<SpectralField>,
    pub fstar_hat: Arc<SpectralField>,
    pub ghat: SpectralField,
    pub hhat: SpectralField,
    pub constant: f64,
}

impl ProfileState {
    /// `max |f^ - f^_1 - c (f^_* + g^ + h^)|` relative to `max |f^|`.
    pub fn reconstruction_error(&self) -> f64 {
        let c = Complex64::new(self.constant, 0.0);
        let f = self.fhat.values();
        let scale = self.fhat.sup_norm().max(f64::MIN_POSITIVE);
        (0..f.len())
            .map(|i| {
                let sum = self.fstar_hat.values()[i] + self.ghat.values()[i] + self.hhat.values()[i];
                (f[i] - self.f1hat.values()[i] - c * sum).norm()
            })
            .fold(0.0, f64::max)
            / scale
    }
}

/// `h^ = (f^ - f^_1) / c - f^_* - g^`.
pub fn compute_h(
    fhat: &SpectralField,
    f1hat: &SpectralField,
    fstar_hat: &SpectralField,
    ghat: &SpectralField,
    constant: f64,
) -> SpectralField {
    let inv = 1.0 / constant;
    let values = (0..fhat.values().len())
        .map(|i| {
            (fhat.values()[i] - f1hat.values()[i]) * inv - fstar_hat.values()[i] - ghat.values()[i]
        })
        .collect();
    SpectralField::from_values(fhat.grid(), values, Space::Frequency).expect("same grid")
}

/// Decomposes profiles of one run; `f^_*` is computed once.
pub struct Decomposer {
    pub f1hat: Arc<SpectralField>,
    pub fstar_hat: Arc<SpectralField>,
    pub constant: f64,
    pub budget: QuadratureBudget,
}

impl Decomposer {
    pub fn new(f1hat: &SpectralField, constant: f64, budget: QuadratureBudget) -> Result<Self, DiagnosticsError> {
        if constant == 0.0 {
            return Err(DiagnosticsError::Input("decomposition needs a nonzero Duhamel constant".into()));
        }
        let f1 = f1hat.to_frequency();
        let fstar = compute_fstar(&f1, budget)?;
        Ok(Decomposer {
            f1hat: Arc::new(f1),
            fstar_hat: Arc::new(fstar),
            constant,
            budget,
        })
    }

    pub fn state(&self, fhat: &SpectralField, t: f64) -> Result<ProfileState, DiagnosticsError> {
        let fhat = fhat.to_frequency();
        let ghat = compute_g(&fhat, t, self.budget)?;
        let hhat = compute_h(&fhat, &self.f1hat, &self.fstar_hat, &ghat, self.constant);
        Ok(ProfileState {
            t,
            fhat,
            f1hat: Arc::clone(&self.f1hat),
            fstar_hat: Arc::clone(&self.fstar_hat),
            ghat,
            hhat,
            constant: self.constant,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub constant: f64,
    pub alpha: f64,
    pub step: f64,
    /// `||Δ - c b|| / ||Δ||` for the extrapolated difference quotient `Δ`.
    pub relative_residual: f64,
}

/// Fits `c` in `∂_t f^ |_{t=1} = c i T_{e^{iphi}}(f_1, f_1)` by least squares.
/// The left side is a Richardson-extrapolated difference quotient of single
/// solver steps (FFT path, dealiased), the right side comes from frequency
/// quadrature, so the two computations share no code.
pub fn calibrate_constant(f1hat: &SpectralField, alpha: f64, budget: QuadratureBudget) -> Result<Calibration, DiagnosticsError> {
    let step = 1e-3;
    let cfg = SolverConfig::new(alpha, 0.0, 1.0 + step, TimeStep::Fixed { dt: step });
    let rhs = ProfileRhs::new(f1hat.grid(), &cfg);
    let f1 = f1hat.to_frequency();
    let quotient = |h: f64| -> Result<Vec<Complex64>, SolverError> {
        let next = rk4_step(&rhs, &f1, 1.0, h)?;
        Ok(next.values().iter().zip(f1.values()).map(|(a, b)| (a - b) / h).collect())
    };
    let (q1, q2) = (quotient(step)?, quotient(0.5 * step)?);
    let delta: Vec<Complex64> = q1.iter().zip(&q2).map(|(a, b)| 2.0 * b - a).collect();
    let mut basis = i_times(bilinear_apply(&symbols::duhamel_phase(), &f1, &f1, 1.0, budget)?);
    let mask = f1.grid().dealias_mask();
    for (v, keep) in basis.values_mut().iter_mut().zip(&mask) {
        if !keep {
            *v = Complex64::default();
        }
    }
    let b = basis.values();
    let bb: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    if bb == 0.0 {
        return Err(DiagnosticsError::Input("calibration needs nonzero initial data".into()));
    }
    let constant = b.iter().zip(&delta).map(|(x, y)| (x.conj() * y).re).sum::<f64>() / bb;
    let dd: f64 = delta.iter().map(|v| v.norm_sqr()).sum();
    let res: f64 = b.iter().zip(&delta).map(|(x, y)| (y - constant * x).norm_sqr()).sum();
    Ok(Calibration {
        constant,
        alpha,
        step,
        relative_residual: (res / dd.max(f64::MIN_POSITIVE)).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XNormReport {
    pub t: f64,
    /// `||f^||_inf`.
    pub fhat_sup: f64,
    pub f_l2: f64,
    pub xf_l2: f64,
    /// `||x^2 f||_2 / max(log t, 1)`.
    pub x2f_scaled: f64,
    /// `||x^3 f||_2 / t^{1/2 + 1/47}`.
    pub x3f_scaled: f64,
    /// `t^{d/4} ||u||_inf`.
    pub u_sup_scaled: f64,
    pub sobolev: f64,
    pub total: f64,
    /// Set when a weighted norm has mass in the boundary shell.
    pub boundary_flag: bool,
}

impl XNormReport {
    pub fn components(&self) -> [f64; 7] {
        [
            self.fhat_sup,
            self.f_l2,
            self.xf_l2,
            self.x2f_scaled,
            self.x3f_scaled,
            self.u_sup_scaled,
            self.sobolev,
        ]
    }

    pub const COMPONENT_NAMES: [&'static str; 7] =
        ["fhat_sup", "f_l2", "xf_l2", "x2f_scaled", "x3f_scaled", "u_sup_scaled", "sobolev"];
}

/// X-norm of the profile `fhat` at time `t`. The `log t` divisor is floored
/// at one so the component stays finite near `t = 1`.
pub fn xnorm_report(fhat: &SpectralField, t: f64, sobolev_index: f64) -> Result<XNormReport, DiagnosticsError> {
    let fhat = fhat.to_frequency();
    let phys = fhat.to_physical();
    let dim = fhat.grid().dim() as f64;
    let w1 = weighted_norm(&phys, 1, 2.0)?;
    let w2 = weighted_norm(&phys, 2, 2.0)?;
    let w3 = weighted_norm(&phys, 3, 2.0)?;
    let u_sup = Propagator::new(fhat.grid()).evolve_physical(&fhat, -t).sup_norm();
    let mut r = XNormReport {
        t,
        fhat_sup: fhat.sup_norm(),
        f_l2: fhat.l2_norm(),
        xf_l2: w1.value,
        x2f_scaled: w2.value / t.ln().max(1.0),
        x3f_scaled: w3.value / t.powf(X3_EXPONENT),
        u_sup_scaled: t.powf(dim / 4.0) * u_sup,
        sobolev: sobolev_norm(&fhat, sobolev_index)?,
        total: 0.0,
        boundary_flag: w1.boundary_flag || w2.boundary_flag || w3.boundary_flag,
    };
    r.total = r.components().iter().cloned().fold(0.0, f64::max);
    Ok(r)
}

/// Monitored quantities at one checkpoint.
#[derive(Debug, Clone, Serialize)]
pub struct MonitorRow {
    pub t: f64,
    pub xnorm: XNormReport,
    /// `||x^k g||_2` for `k = 0..=3`.
    pub g_moments: [f64; 4],
    pub h_moments: [f64; 4],
    /// `||e^{-itΔ²} g||_inf` and the same for `h`.
    pub free_g_sup: f64,
    pub free_h_sup: f64,
    pub reconstruction_error: f64,
    pub boundary_flag: bool,
}

impl MonitorRow {
    pub fn header() -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(XNormReport::COMPONENT_NAMES.iter().map(|s| s.to_string()));
        h.push("xnorm_total".into());
        h.extend((0..4).map(|k| format!("x{k}g_l2")));
        h.extend((0..4).map(|k| format!("x{k}h_l2")));
        h.extend(["free_g_sup", "free_h_sup", "reconstruction_error", "boundary_flag"].map(String::from));
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![format!("{:.17e}", self.t)];
        r.extend(self.xnorm.components().iter().map(|v| format!("{v:.17e}")));
        r.push(format!("{:.17e}", self.xnorm.total));
        r.extend(self.g_moments.iter().chain(&self.h_moments).map(|v| format!("{v:.17e}")));
        r.push(format!("{:.17e}", self.free_g_sup));
        r.push(format!("{:.17e}", self.free_h_sup));
        r.push(format!("{:.3e}", self.reconstruction_error));
        r.push(self.boundary_flag.to_string());
        r
    }
}

fn moments(field: &SpectralField) -> Result<([f64; 4], bool), NormError> {
    let phys = field.to_physical();
    let mut out = [0.0; 4];
    let mut flag = false;
    for (k, slot) in out.iter_mut().enumerate() {
        let w = weighted_norm(&phys, k as u32, 2.0)?;
        *slot = w.value;
        flag |= w.boundary_flag;
    }
    Ok((out, flag))
}

pub fn monitor_state(state: &ProfileState, sobolev_index: f64) -> Result<MonitorRow, DiagnosticsError> {
    let xnorm = xnorm_report(&state.fhat, state.t, sobolev_index)?;
    let (g_moments, gf) = moments(&state.ghat)?;
    let (h_moments, hf) = moments(&state.hhat)?;
    let prop = Propagator::new(state.fhat.grid());
    Ok(MonitorRow {
        t: state.t,
        xnorm,
        g_moments,
        h_moments,
        free_g_sup: prop.evolve_physical(&state.ghat, -state.t).sup_norm(),
        free_h_sup: prop.evolve_physical(&state.hhat, -state.t).sup_norm(),
        reconstruction_error: state.reconstruction_error(),
        boundary_flag: xnorm.boundary_flag || gf || hf,
    })
}

/// Log-log growth exponent of a monitored series over `t >= t_from`.
pub fn fit_growth_exponents(times: &[f64], values: &[f64], t_from: f64) -> Result<DecayFit, FitError> {
    fit_window(times, values, t_from)
}

/// The time-integrated remainder evaluated by direct quadrature.
#[derive(Debug, Clone)]
pub struct HSpotCheck {
    pub t: f64,
    /// `max |h_residual - h_simpson|` over the dealiased band.
    pub max_error: f64,
    /// `max |h_simpson - h_trapezoid|`, the time-quadrature error scale.
    pub quadrature_error: f64,
    pub h_sup: f64,
    /// `max |h_3|`, the `1/s`-weighted term alone.
    pub h3_sup: f64,
    pub h_simpson: SpectralField,
}

impl HSpotCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.quadrature_error.max(1e-12 * self.h_sup)
    }
}

/// Symbol `e^{isphi}[(1/s + i P.phi_eta)/A - 1/(s^2 A^2)]`.
fn remainder_symbol() -> MultiplierSymbol {
    MultiplierSymbol::new("h_kernel", 2, None, "time-IBP remainder", |x, e, _, s| {
        let p = p_field(x, e);
        let grad = grad_eta_phase2(x, e);
        let pg: f64 = p.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let inv = inv_a(x, e, s);
        let osc = Complex64::from_polar(1.0, s * phase2_fast(x, e));
        osc * (Complex64::new(1.0 / s, pg) * inv - inv * inv / (s * s))
    })
}

/// Integrates `h^ = i ∫_1^t K(s) ds` directly, where
/// `K = T_W(f, f) - T_G(∂f, f) - T_G(f, ∂f)`, `G = e^{isphi}/A_s` and `W` is
/// the remainder symbol, using Simpson and trapezoid rules over uniformly
/// spaced snapshots starting at `t = 1`. Compares with the residual `h^` on
/// the dealiased band, where the residual identity holds exactly.
pub fn h_spot_check(
    times: &[f64],
    profiles: &[SpectralField],
    decomposer: &Decomposer,
    cfg: &SolverConfig,
) -> Result<HSpotCheck, DiagnosticsError> {
    let n = times.len();
    if n < 3 || n % 2 == 0 || profiles.len() != n || times[0] != 1.0 {
        return Err(DiagnosticsError::Input("need an odd number (>= 3) of snapshots from t = 1".into()));
    }
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(DiagnosticsError::Input("snapshot times must be uniformly spaced".into()));
    }
    if cfg.beta != 0.0 {
        return Err(DiagnosticsError::Input("spot check covers beta = 0 only".into()));
    }
    let budget = decomposer.budget;
    let w_sym = remainder_symbol();
    let g_sym = symbols::g_kernel();
    let mut integrand = Vec::with_capacity(n);
    let mut h3_integrand = Vec::with_capacity(n);
    for (s, f) in times.iter().zip(profiles) {
        let f = f.to_frequency();
        let df = profile_rhs(&f, *s, cfg)?;
        let tw = bilinear_apply(&w_sym, &f, &f, *s, budget)?;
        let t1 = bilinear_apply(&g_sym, &df, &f, *s, budget)?;
        let t2 = bilinear_apply(&g_sym, &f, &df, *s, budget)?;
        let k: Vec<Complex64> = (0..tw.values().len())
            .map(|i| tw.values()[i] - t1.values()[i] - t2.values()[i])
            .collect();
        let g = bilinear_apply(&g_sym, &f, &f, *s, budget)?;
        h3_integrand.push(g.values().iter().map(|v| v / *s).collect::<Vec<_>>());
        integrand.push(k);
    }
    let len = integrand[0].len();
    let rule = |data: &[Vec<Complex64>], simpson: bool| -> Vec<Complex64> {
        (0..len)
            .map(|i| {
                let mut acc = Complex64::default();
                for (j, row) in data.iter().enumerate() {
                    let w = if simpson {
                        if j == 0 || j == n - 1 {
                            1.0 / 3.0
                        } else if j % 2 == 1 {
                            4.0 / 3.0
                        } else {
                            2.0 / 3.0
                        }
                    } else if j == 0 || j == n - 1 {
                        0.5
                    } else {
                        1.0
                    };
                    acc += row[i] * w;
                }
                Complex64::i() * acc * h
            })
            .collect()
    };
    let simpson = rule(&integrand, true);
    let trapezoid = rule(&integrand, false);
    let h3 = rule(&h3_integrand, true);
    let state = decomposer.state(&profiles[n - 1], times[n - 1])?;
    let mask = state.fhat.grid().dealias_mask();
    let (mut max_error, mut quad_error, mut h_sup, mut h3_sup) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..len {
        if !mask[i] {
            continue;
        }
        max_error = max_error.max((state.hhat.values()[i] - simpson[i]).norm());
        quad_error = quad_error.max((simpson[i] - trapezoid[i]).norm());
        h_sup = h_sup.max(state.hhat.values()[i].norm());
        h3_sup = h3_sup.max(h3[i].norm());
    }
    let grid = state.fhat.grid();
    Ok(HSpotCheck {
        t: times[n - 1],
        max_error,
        quadrature_error: quad_error,
        h_sup,
        h3_sup,
        h_simpson: SpectralField::from_values(grid, simpson, Space::Frequency).expect("same grid"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::linear::bump_data;
    use crate::solver::integrate_profile;

    fn small() -> SpectralField {
        let grid = Grid::new(1, 64, 8.0 * std::f64::consts::PI).unwrap();
        bump_data(&grid, 1.0, 0.5)
    }

    fn budget() -> QuadratureBudget {
        QuadratureBudget::bilinear(1)
    }

    #[test]
    fn zero_data_gives_zero_pieces() {
        let z = SpectralField::zeros(small().grid(), Space::Frequency);
        assert_eq!(compute_g(&z, 3.0, budget()).unwrap().sup_norm(), 0.0);
        assert_eq!(compute_fstar(&z, budget()).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn g_is_quadratic_and_parity_symmetric() {
        let f = small();
        let a = compute_g(&f, 2.0, budget()).unwrap();
        let b = compute_g(&f.scale(Complex64::new(1e-3, 0.0)), 2.0, budget()).unwrap();
        assert!(b.max_abs_diff(&a.scale(Complex64::new(1e-6, 0.0))) <= 1e-10 * 1e-6 * a.sup_norm());
        // phi and Z are even under (xi, eta) -> (-xi, -eta), so even data give
        // an even g; the symbol is complex, so there is no conjugation symmetry
        let grid = f.grid();
        let n = grid.n_per_axis();
        for i in 1..n {
            if crate::grid::signed_offset(i, n).unsigned_abs() < (n / 3) as u64 {
                let j = grid.negated(i);
                assert!((a.values()[i] - a.values()[j]).norm() <= 1e-13 * a.sup_norm());
            }
        }
    }

    #[test]
    fn calibration_recovers_alpha() {
        for alpha in [1.0, -0.7] {
            let cal = calibrate_constant(&small(), alpha, budget()).unwrap();
            assert!((cal.constant / alpha - 1.0).abs() < 1e-7, "{cal:?}");
            assert!(cal.relative_residual < 1e-6);
        }
    }

    #[test]
    fn residual_decomposition_identities() {
        let f1 = small();
        let dec = Decomposer::new(&f1, 1.0, budget()).unwrap();
        // at t = 1 with f = f1: h = -f* - g exactly
        let s = dec.state(&f1, 1.0).unwrap();
        assert!(s.reconstruction_error() <= 1e-12);
        let expect = s.fstar_hat.add(&s.ghat).unwrap().scale(Complex64::new(-1.0, 0.0));
        assert!(s.hhat.max_abs_diff(&expect) <= 1e-14 * expect.sup_norm());
        // f* is g at t = 1 with the opposite sign
        assert!(s.fstar_hat.add(&s.ghat).unwrap().sup_norm() <= 1e-14 * s.ghat.sup_norm());
    }

    #[test]
    fn h_matches_direct_time_quadrature() {
        let f1 = small();
        let cfg = SolverConfig::new(1.0, 0.0, 1.4, TimeStep::Fixed { dt: 0.0025 })
            .with_checkpoints((0..=16).map(|k| 1.0 + 0.025 * k as f64).collect());
        let rec = integrate_profile(&f1, &cfg).unwrap();
        let dec = Decomposer::new(&f1, 1.0, budget()).unwrap();
        let check = h_spot_check(&rec.times, &rec.snapshots, &dec, &cfg).unwrap();
        assert!(check.passed(), "{} vs {}", check.max_error, check.quadrature_error);
        assert!(check.max_error < 1e-3 * check.h_sup);
        assert!(check.h3_sup > 0.0);
    }

    #[test]
    fn xnorm_of_free_flow() {
        let grid = Grid::new(1, 1024, 200.0).unwrap();
        let f = crate::linear::gaussian_data(&grid, 1e-3);
        let a = xnorm_report(&f, 1.0, 10.0).unwrap();
        let b = xnorm_report(&f, 1.0, 10.0).unwrap();
        assert_eq!(a, b);
        let scaled = xnorm_report(&f.scale(Complex64::new(2.0, 0.0)), 1.0, 10.0).unwrap();
        for (x, y) in a.components().iter().zip(scaled.components()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y);
        }
        assert!(!a.boundary_flag);
        let late = xnorm_report(&f, 100.0, 10.0).unwrap();
        assert_eq!(late.f_l2, a.f_l2);
        assert!(late.x3f_scaled < a.x3f_scaled);
    }
}
