//! Weighted Lebesgue and Sobolev norms of lattice fields.

use thiserror::Error;

use crate::field::{Space, SpectralField};

/// Points with some `|x_a| >= BOUNDARY_SHELL * L` form the boundary shell.
pub const BOUNDARY_SHELL: f64 = 0.45;

/// Weighted mass allowed in the boundary shell before the result is flagged.
pub const BOUNDARY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorm {
    pub value: f64,
    /// Share of the weighted `p`-mass (or of the sup for `p = inf`) in the shell.
    pub boundary_fraction: f64,
    pub boundary_flag: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("Sobolev weight overflows for s = {0}")]
    Overflow(f64),
    #[error("exponent p = {0} must lie in [1, inf]")]
    Exponent(f64),
}

/// `‖ |x|^k f ‖_p` by lattice quadrature, with a truncation flag for mass
/// sitting near the periodic boundary.
pub fn weighted_norm(field: &SpectralField, weight_power: u32, p: f64) -> Result<WeightedNorm, NormError> {
    if !(p >= 1.0) {
        return Err(NormError::Exponent(p));
    }
    let phys = field.in_space(Space::Physical);
    let grid = phys.grid();
    let shell = BOUNDARY_SHELL * grid.box_length();
    let mut x = [0.0; crate::grid::MAX_DIM];
    let dim = grid.dim();
    let (mut total, mut edge) = (0.0f64, 0.0f64);
    for (i, v) in phys.values().iter().enumerate() {
        grid.position_at(i, &mut x);
        let r2: f64 = x[..dim].iter().map(|c| c * c).sum();
        let w = v.norm() * r2.powf(0.5 * weight_power as f64);
        let on_edge = x[..dim].iter().any(|c| c.abs() >= shell);
        if p.is_infinite() {
            total = total.max(w);
            if on_edge {
                edge = edge.max(w);
            }
        } else {
            let m = w.powf(p);
            total += m;
            if on_edge {
                edge += m;
            }
        }
    }
    let boundary_fraction = if total > 0.0 { edge / total } else { 0.0 };
    let value = if p.is_infinite() {
        total
    } else {
        (total * grid.cell_volume()).powf(1.0 / p)
    };
    Ok(WeightedNorm {
        value,
        boundary_fraction,
        boundary_flag: boundary_fraction > BOUNDARY_TOLERANCE,
    })
}

/// `‖<xi>^s f^‖_2` with `<xi> = (1 + |xi|^2)^(1/2)`.
pub fn sobolev_norm(field: &SpectralField, s: f64) -> Result<f64, NormError> {
    let freq = field.in_space(Space::Frequency);
    let grid = freq.grid();
    // factor out the largest weight so only the final rescale can overflow
    let logs: Vec<f64> = (0..grid.len())
        .map(|i| 0.5 * s * (1.0 + grid.freq_norm2(i)).ln())
        .collect();
    let top = logs
        .iter()
        .zip(freq.values())
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(l, _)| *l)
        .fold(0.0f64, f64::max);
    let sum: f64 = logs
        .iter()
        .zip(freq.values())
        .map(|(l, v)| v.norm_sqr() * (2.0 * (l - top)).exp())
        .sum();
    let value = top.exp() * (sum * grid.freq_cell_volume()).sqrt();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(NormError::Overflow(s))
    }
}
