//! The free flow `e^{itΔ²}`, its stationary-phase geometry, and dispersive
//! decay measurements.
//!
//! Exponents are dimension-parameterised: generic data decay like `t^{-d/4}`
//! in sup norm, and an `L^1`-normalised band at `|xi| ~ 2^j` like
//! `2^{-dj} t^{-d/2}`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dyadic::{band_symbol, Family};
use crate::field::{Space, SpectralField};
use crate::fit::{fit_window, DecayFit, FitError};
use crate::grid::{Grid, GridError};

/// Applies `e^{it|xi|^4}` in frequency space; the result keeps the input's space.
pub fn evolve_linear(field: &SpectralField, t: f64) -> SpectralField {
    let out = field.apply_multiplier(|xi| {
        let r2: f64 = xi.iter().map(|c| c * c).sum();
        Complex64::from_polar(1.0, t * r2 * r2)
    });
    out.in_space(field.space())
}

/// Cached `|xi|^4` table for repeated flows on one grid.
pub struct Propagator {
    grid: Arc<Grid>,
    xi4: Vec<f64>,
}

impl Propagator {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let xi4 = (0..grid.len()).map(|i| grid.freq_norm2(i).powi(2)).collect();
        Propagator {
            grid: Arc::clone(grid),
            xi4,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn xi4(&self) -> &[f64] {
        &self.xi4
    }

    /// `e^{it|xi|^4} fhat`, returned in frequency space.
    pub fn apply(&self, fhat: &SpectralField, t: f64) -> SpectralField {
        let mut out = fhat.in_space(Space::Frequency);
        out.values_mut()
            .par_iter_mut()
            .zip(self.xi4.par_iter())
            .for_each(|(v, k)| *v *= Complex64::from_polar(1.0, t * k));
        out
    }

    /// `e^{itΔ²}` applied and brought back to physical space.
    pub fn evolve_physical(&self, fhat: &SpectralField, t: f64) -> SpectralField {
        self.apply(fhat, t).to_physical()
    }
}

/// Critical point of `phi_{t,x}(xi) = |xi|^4 + xi.x/t`:
/// `xi* = -(|x|/4t)^{1/3} x/|x|`, and `0` at `x = 0`.
pub fn stationary_point(x: &[f64], t: f64) -> Vec<f64> {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r == 0.0 {
        return vec![0.0; x.len()];
    }
    let m = (r / (4.0 * t)).cbrt();
    x.iter().map(|c| -m * c / r).collect()
}

/// `grad phi_{t,x}(xi) = 4|xi|^2 xi + x/t`.
pub fn phase_gradient(xi: &[f64], x: &[f64], t: f64) -> Vec<f64> {
    let r2: f64 = xi.iter().map(|c| c * c).sum();
    xi.iter().zip(x).map(|(k, y)| 4.0 * r2 * k + y / t).collect()
}

/// Hessian of `|xi|^4`: `4|xi|^2 I + 8 xi xi^T`, row-major.
pub fn phase_hessian(xi: &[f64]) -> Vec<f64> {
    let d = xi.len();
    let r2: f64 = xi.iter().map(|c| c * c).sum();
    let mut h = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            h[a * d + b] = 8.0 * xi[a] * xi[b] + if a == b { 4.0 * r2 } else { 0.0 };
        }
    }
    h
}

/// Largest `|xi|` where `|fhat|` exceeds `threshold` times its maximum.
pub fn effective_bandwidth(field: &SpectralField, threshold: f64) -> f64 {
    let fhat = field.in_space(Space::Frequency);
    let grid = fhat.grid();
    let peak = fhat.sup_norm();
    fhat.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > threshold * peak)
        .map(|(i, _)| grid.freq_norm2(i).sqrt())
        .fold(0.0, f64::max)
}

/// Relative amplitude defining the effective bandwidth for window checks.
pub const BANDWIDTH_THRESHOLD: f64 = 1e-3;

/// Last time before the fastest packet, moving at `4|xi|^3`, crosses half
/// the box: `4 xi^3 t < L/2`.
pub fn window_limit(grid: &Grid, xi_eff: f64) -> f64 {
    if xi_eff == 0.0 {
        f64::INFINITY
    } else {
        grid.box_length() / (8.0 * xi_eff.powi(3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Sup,
    L2,
}

#[derive(Debug, Error)]
pub enum DecayError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("band {0} is not resolvable within the point budget")]
    Band(i32),
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayMeasurement {
    pub fit: DecayFit,
    /// Every sampled norm, including the excluded first decade.
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub t_limit: f64,
    pub xi_eff: f64,
}

fn norm_of(u: &SpectralField, kind: NormKind) -> f64 {
    match kind {
        NormKind::Sup => u.to_physical().sup_norm(),
        NormKind::L2 => u.l2_norm(),
    }
}

/// Norm of `e^{itΔ²} f` at each time, fitted over `t >= 10 t_0`. The fit is
/// untrusted if any time leaves the wrap-around-safe window.
pub fn measure_linear_decay(
    initial: &SpectralField,
    times: &[f64],
    norm: NormKind,
) -> Result<DecayMeasurement, DecayError> {
    let fhat = initial.to_frequency();
    let prop = Propagator::new(fhat.grid());
    let xi_eff = effective_bandwidth(&fhat, BANDWIDTH_THRESHOLD);
    let t_limit = window_limit(fhat.grid(), xi_eff);
    let norms: Vec<f64> = times
        .iter()
        .map(|&t| match norm {
            NormKind::Sup => prop.evolve_physical(&fhat, t).sup_norm(),
            NormKind::L2 => norm_of(&prop.apply(&fhat, t), NormKind::L2),
        })
        .collect();
    let t_from = times.first().copied().unwrap_or(1.0) * 10.0;
    let mut fit = fit_window(times, &norms, t_from)?;
    if times.iter().any(|t| *t > t_limit) {
        fit.trusted = false;
    }
    Ok(DecayMeasurement {
        fit,
        times: times.to_vec(),
        norms,
        t_limit,
        xi_eff,
    })
}

/// Smooth radial bump equal to one on `|xi| < r0/2` and vanishing beyond `r0`.
pub fn compact_bump(r: f64, r0: f64) -> f64 {
    crate::dyadic::smooth_step(2.0 - 2.0 * r / r0)
}

/// Frequency-space data `fhat = amplitude * bump(|xi|)`.
pub fn bump_data(grid: &Arc<Grid>, r0: f64, amplitude: f64) -> SpectralField {
    SpectralField::from_frequency_fn(grid, |xi| {
        let r = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
        Complex64::new(amplitude * compact_bump(r, r0), 0.0)
    })
}

/// Grid on which `bump_data(r0)` stays wrap-free up to `t_max`.
pub fn bump_grid(dim: usize, r0: f64, t_max: f64, max_points: usize) -> Result<Arc<Grid>, GridError> {
    // Nyquist stays above r0 with a 10% margin
    Grid::auto_scaled(dim, r0, t_max, 1.1, 0.0, max_points)
}

/// Physical Gaussian `amplitude * e^{-|x|^2/2}`.
pub fn gaussian_data(grid: &Arc<Grid>, amplitude: f64) -> SpectralField {
    SpectralField::from_physical_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        Complex64::new(amplitude * (-0.5 * r2).exp(), 0.0)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BandedDecay {
    pub j: i32,
    pub dim: usize,
    pub measurement: DecayMeasurement,
    pub grid_points: usize,
    pub box_length: f64,
}

/// Band-limited datum `fhat = phi_j(|xi|)` scaled to unit physical `L^1` mass.
pub fn band_data(grid: &Arc<Grid>, j: i32) -> SpectralField {
    let raw = SpectralField::from_frequency_fn(grid, |xi| {
        let r = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
        Complex64::new(band_symbol(Family::Plain, j, r), 0.0)
    });
    let mass = raw.lp_norm(1.0);
    raw.scale(Complex64::new(1.0 / mass, 0.0))
}

fn band_grid(j: i32, dim: usize, t_max: f64, max_points: usize) -> Result<Arc<Grid>, DecayError> {
    let xi_max = crate::dyadic::OUTER_EDGE * 2f64.powi(j);
    Grid::auto_scaled(dim, xi_max, t_max, 1.1, 0.0, max_points).map_err(|e| match e {
        GridError::Budget { .. } => DecayError::Band(j),
        other => DecayError::Grid(other),
    })
}

/// Sup-norm decay of an `L^1`-normalised band at `2^j`, on a grid sized so that
/// every time is wrap-free.
pub fn measure_banded_decay(j: i32, dim: usize, times: &[f64], max_points: usize) -> Result<BandedDecay, DecayError> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let grid = band_grid(j, dim, t_max, max_points)?;
    let data = band_data(&grid, j);
    let measurement = measure_linear_decay(&data, times, NormKind::Sup)?;
    Ok(BandedDecay {
        j,
        dim,
        measurement,
        grid_points: grid.len(),
        box_length: grid.box_length(),
    })
}

/// Sup norm of `e^{itΔ²} f_j` at one time, on a wrap-free grid.
pub fn banded_sup_at(j: i32, dim: usize, t: f64, max_points: usize) -> Result<f64, DecayError> {
    let grid = band_grid(j, dim, t, max_points)?;
    let data = band_data(&grid, j);
    Ok(Propagator::new(&grid).evolve_physical(&data, t).sup_norm())
}
