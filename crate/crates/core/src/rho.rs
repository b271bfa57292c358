//! The localized stationary-phase kernel
//! `rho(x, t) = ∫ e^{i(t|xi|^4 + x.xi)} chi(|xi| / |xi - xi*|) dxi`
//! in one dimension, by contour-deformed adaptive quadrature.
//!
//! `chi` equals one on `[0, 1]`, zero on `[2, inf)` and falls smoothly in
//! between, so the integrand vanishes where `|xi| >= 2|xi - xi*|`.
//!
//! With `x > 0` the critical point is `xi* = -a`, `a = (x / 4t)^(1/3)`. The
//! real line splits into
//! - `[0, inf)`, where `chi = 1`, taken along the ray `r e^{i pi/8}`;
//! - `[-a/2, 0]`, where `chi = 1`;
//! - `[-2a/3, -a/2]` and `[-3a, -2a]`, where `chi` is in transition;
//! - `[-2a, -2a/3]`, where `chi = 0`;
//! - `(-inf, -3a]`, taken along `u = 3a + r e^{i pi/8}` (with `xi = -u`) using
//!   the analytic continuation of `chi`, which has no poles on that ray.
//!
//! On both rays every term of `Im(t zeta^4 -+ x zeta)` is nonnegative, so the
//! integrand decays like `e^{-t r^4}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::dyadic::smooth_step;
use crate::quad::{integrate, integrate_panels, QuadResult};

const RAY_ANGLE: f64 = PI / 8.0;

/// Rays are cut where `t r^4` reaches this value; the dropped tail is below
/// `e^{-RAY_DECAY}`.
const RAY_DECAY: f64 = 50.0;

pub const DEFAULT_QUAD_BUDGET: usize = 400_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RhoError {
    #[error("rho quadrature is implemented for d = 1, got d = {0}")]
    Dimension(usize),
    #[error("time must be positive, got {0}")]
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoValue {
    pub value: Complex64,
    pub error: f64,
    pub evals: usize,
    /// False when the budget ran out before the error target.
    pub converged: bool,
}

/// The real cutoff `chi(r)`.
pub fn chi(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        smooth_step(2.0 - r)
    }
}

/// `chi(|xi| / |xi - xi*|)`; the ratio is taken as 1 when `xi = xi* = 0`.
pub fn cutoff(xi: &[f64], xi_star: &[f64]) -> f64 {
    let num: f64 = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
    let den: f64 = xi
        .iter()
        .zip(xi_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if den == 0.0 {
        return if num == 0.0 { 1.0 } else { 0.0 };
    }
    chi(num / den)
}

/// Analytic continuation of `chi(u / (u - a))` off the real half-line `u > 2a`.
fn chi_continued(u: Complex64, a: f64) -> Complex64 {
    // chi = S(tau), tau = 1 - a/(u - a), S = 1/(1 + e^{1/tau - 1/(1 - tau)})
    let inv_tau = (u - a) / (u - 2.0 * a);
    let inv_one_minus_tau = (u - a) / a;
    let g = inv_tau - inv_one_minus_tau;
    1.0 / (1.0 + g.exp())
}

/// Integrates along `[0, reach]` from geometrically refined panels at 0, so a
/// fast decay near the start of a ray is always sampled.
fn ray<F: Fn(f64) -> Complex64>(f: F, reach: f64, abs_tol: f64, budget: usize) -> QuadResult {
    let mut breaks: Vec<f64> = (0..48).rev().map(|k| reach * 0.5f64.powi(k)).collect();
    breaks.insert(0, 0.0);
    integrate_panels(&f, &breaks, abs_tol, 0.0, budget)
}

struct Totals {
    value: Complex64,
    error: f64,
    evals: usize,
    converged: bool,
}

impl Totals {
    fn add(&mut self, r: QuadResult) {
        self.value += r.value;
        self.error += r.error;
        self.evals += r.evals;
        self.converged &= r.converged;
    }
}

/// Evaluates `rho(x, t)` for `x` of length one.
pub fn rho_kernel(x: &[f64], t: f64, quad_budget: usize) -> Result<RhoValue, RhoError> {
    if x.len() != 1 {
        return Err(RhoError::Dimension(x.len()));
    }
    if !(t > 0.0) {
        return Err(RhoError::Time(t));
    }
    // rho is even in x
    let x = x[0].abs();
    let scale = t.powf(-0.25);
    let abs_tol = 1e-11 * scale;
    let share = quad_budget / 6;
    let dir = Complex64::from_polar(1.0, RAY_ANGLE);
    let reach = (RAY_DECAY / t).powf(0.25);
    let mut tot = Totals {
        value: Complex64::default(),
        error: 0.0,
        evals: 0,
        converged: true,
    };

    // [0, inf) along the ray
    tot.add(ray(
        |r: f64| {
            let z = dir * r;
            (Complex64::i() * (t * z.powi(4) + x * z)).exp() * dir
        },
        reach,
        abs_tol,
        share,
    ));

    if x == 0.0 {
        // chi = 1 everywhere and the left half mirrors the right
        let right = tot.value;
        tot.value = right + right;
        tot.error *= 2.0;
        return Ok(RhoValue {
            value: tot.value,
            error: tot.error,
            evals: tot.evals,
            converged: tot.converged,
        });
    }

    let a = (x / (4.0 * t)).cbrt();
    let real_integrand = |xi: f64| {
        let r = xi.abs() / (xi + a).abs();
        Complex64::from_polar(chi(r), t * xi.powi(4) + x * xi)
    };
    tot.add(integrate(real_integrand, -0.5 * a, 0.0, abs_tol, 0.0, share));
    tot.add(integrate(real_integrand, -2.0 * a / 3.0, -0.5 * a, abs_tol, 0.0, share));
    tot.add(integrate(real_integrand, -3.0 * a, -2.0 * a, abs_tol, 0.0, share));

    // (-inf, -3a] with xi = -u, u = 3a + r e^{i pi/8}
    let tail_reach = reach.max(a);
    tot.add(ray(
        |r: f64| {
            let u = 3.0 * a + dir * r;
            (Complex64::i() * (t * u.powi(4) - x * u)).exp() * chi_continued(u, a) * dir
        },
        tail_reach,
        abs_tol,
        share,
    ));

    Ok(RhoValue {
        value: tot.value,
        error: tot.error,
        evals: tot.evals,
        converged: tot.converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoSweep {
    pub t: f64,
    pub sup_abs: f64,
    pub argmax_x: f64,
    pub all_converged: bool,
}

/// `sup_x |rho(x, t)|` over `x = t^{1/4} s`, `s` uniform on `[0, s_max]`.
pub fn rho_sup(t: f64, s_max: f64, points: usize, quad_budget: usize) -> Result<RhoSweep, RhoError> {
    use rayon::prelude::*;
    let scale = t.powf(0.25);
    let values: Vec<(f64, RhoValue)> = (0..points)
        .into_par_iter()
        .map(|i| {
            let x = scale * s_max * i as f64 / (points - 1).max(1) as f64;
            rho_kernel(&[x], t, quad_budget).map(|v| (x, v))
        })
        .collect::<Result<_, _>>()?;
    let mut sweep = RhoSweep {
        t,
        sup_abs: 0.0,
        argmax_x: 0.0,
        all_converged: true,
    };
    for (x, v) in values {
        sweep.all_converged &= v.converged;
        if v.value.norm() > sweep.sup_abs {
            sweep.sup_abs = v.value.norm();
            sweep.argmax_x = x;
        }
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma_5_4() -> f64 {
        0.906_402_477_055_477_f64
    }

    #[test]
    fn origin_matches_closed_form() {
        for t in [1.0, 10.0, 1000.0] {
            let r = rho_kernel(&[0.0], t, DEFAULT_QUAD_BUDGET).unwrap();
            let exact = Complex64::from_polar(2.0 * gamma_5_4() * t.powf(-0.25), PI / 8.0);
            assert!(r.converged);
            assert!((r.value - exact).norm() < 1e-10, "{t}: {} vs {exact}", r.value);
        }
    }

    #[test]
    fn cutoff_vanishes_beyond_twice_the_distance() {
        let star = [-0.7];
        for i in 0..2000 {
            let xi = -3.0 + 0.003 * i as f64;
            let c = cutoff(&[xi], &star);
            if xi.abs() >= 2.0 * (xi - star[0]).abs() {
                assert_eq!(c, 0.0);
            }
            if xi.abs() < (xi - star[0]).abs() {
                assert_eq!(c, 1.0);
            }
        }
    }

    #[test]
    fn continuation_agrees_with_real_cutoff() {
        let a = 0.8;
        for u in [2.1 * a, 3.0 * a, 7.0 * a, 40.0 * a] {
            let real = chi(u / (u - a));
            let cont = chi_continued(Complex64::new(u, 0.0), a);
            assert!((cont.re - real).abs() < 1e-14 && cont.im.abs() < 1e-14);
        }
    }

    /// Oracle: straight real-line quadrature on `[-R, R]` with the two tails
    /// beyond `R` along rays, where `chi = 1` to machine precision.
    fn real_line_oracle(x: f64, t: f64) -> Complex64 {
        let a = (x / (4.0 * t)).cbrt();
        // 1 - chi < 1e-13 beyond 32a
        let big = 35.0 * a;
        // panels no wider than a quarter oscillation at the ends
        let width = PI / (2.0 * (4.0 * t * big.powi(3) + x));
        let panels = (2.0 * big / width).ceil() as usize;
        let breaks: Vec<f64> = (0..=panels)
            .map(|k| -big + 2.0 * big * k as f64 / panels as f64)
            .collect();
        let real = integrate_panels(
            &|xi: f64| {
                let r = xi.abs() / (xi + a).abs();
                Complex64::from_polar(chi(r), t * xi.powi(4) + x * xi)
            },
            &breaks,
            1e-9,
            0.0,
            200_000_000,
        );
        assert!(real.converged, "oracle error {}", real.error);
        let dir = Complex64::from_polar(1.0, PI / 8.0);
        let reach = (60.0 / t).powf(0.25) + big;
        let right = ray(
            |r: f64| {
                let z = big + dir * r;
                (Complex64::i() * (t * z.powi(4) + x * z)).exp() * dir
            },
            reach,
            1e-13,
            1_000_000,
        );
        let left = ray(
            |r: f64| {
                let u = big + dir * r;
                (Complex64::i() * (t * u.powi(4) - x * u)).exp() * dir
            },
            reach,
            1e-13,
            1_000_000,
        );
        real.value + right.value + left.value
    }

    #[test]
    fn matches_real_line_oracle() {
        for (x, t) in [(1.0, 1.0), (3.0, 2.0), (0.2, 1.0)] {
            let r = rho_kernel(&[x], t, DEFAULT_QUAD_BUDGET).unwrap();
            let o = real_line_oracle(x, t);
            assert!(r.converged);
            assert!((r.value - o).norm() < 1e-8, "x={x} t={t}: {} vs {o}", r.value);
            let mirrored = rho_kernel(&[-x], t, DEFAULT_QUAD_BUDGET).unwrap();
            assert_eq!(mirrored.value, r.value);
        }
    }

    #[test]
    fn rejects_higher_dimensions() {
        assert_eq!(rho_kernel(&[1.0, 0.0], 1.0, 1000).unwrap_err(), RhoError::Dimension(2));
    }
}
