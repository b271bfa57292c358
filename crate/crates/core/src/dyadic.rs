//! Littlewood–Paley pieces built from one smooth radial bump.
//!
//! The base bump `b` rises on `[3/4, 1]`, equals one on `[1, 2]` and falls on
//! `[2, 8/3]`. The squared family is `psi = b / sqrt(sum_k b(r/2^k)^2)` and the
//! plain family is `phi = b / sum_k b(r/2^k)`, so both partitions are exact at
//! every `r > 0` and keep the support of `b`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::field::{Space, SpectralField};
use crate::grid::Grid;

/// `C^∞` transition: 0 for `tau <= 0`, 1 for `tau >= 1`.
pub fn smooth_step(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / tau).exp();
        let b = (-1.0 / (1.0 - tau)).exp();
        a / (a + b)
    }
}

pub const INNER_EDGE: f64 = 0.75;
pub const OUTER_EDGE: f64 = 8.0 / 3.0;

fn base_bump(r: f64) -> f64 {
    if r <= INNER_EDGE || r >= OUTER_EDGE {
        0.0
    } else if r < 1.0 {
        smooth_step((r - INNER_EDGE) / (1.0 - INNER_EDGE))
    } else if r <= 2.0 {
        1.0
    } else {
        smooth_step((OUTER_EDGE - r) / (OUTER_EDGE - 2.0))
    }
}

/// Dyadic exponents `k` with `b(r / 2^k) != 0`.
fn active_scales(r: f64) -> std::ops::RangeInclusive<i32> {
    let lo = (r / OUTER_EDGE).log2().floor() as i32;
    let hi = (r / INNER_EDGE).log2().ceil() as i32;
    lo..=hi
}

fn sums(r: f64) -> (f64, f64) {
    active_scales(r).fold((0.0, 0.0), |(s1, s2), k| {
        let b = base_bump(r / 2f64.powi(k));
        (s1 + b, s2 + b * b)
    })
}

/// Squared-family bump: `sum_j psi(r/2^j)^2 = 1` for `r > 0`.
pub fn psi(r: f64) -> f64 {
    let b = base_bump(r);
    if b == 0.0 {
        return 0.0;
    }
    b / sums(r).1.sqrt()
}

/// Plain-family bump: `sum_j phi(r/2^j) = 1` for `r > 0`.
pub fn phi(r: f64) -> f64 {
    let b = base_bump(r);
    if b == 0.0 {
        return 0.0;
    }
    b / sums(r).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `P_j` multiplies by `psi_j`; `sum_j P_j^2 = 1` away from DC.
    Squared,
    /// `P_j` multiplies by `phi_j`; `sum_j P_j = 1` away from DC.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectMode {
    /// The single band `P_j`.
    Band,
    /// `P_{<=j}`, the sum of bands up to `j`; keeps the DC mode.
    Below,
}

/// Band cutoff `psi_j` or `phi_j` at frequency modulus `r`.
pub fn band_symbol(family: Family, j: i32, r: f64) -> f64 {
    let s = r / 2f64.powi(j);
    match family {
        Family::Squared => psi(s),
        Family::Plain => phi(s),
    }
}

/// Symbol of `P_{<=j}`. For the squared family this is `sum_{k<=j} psi_k^2`,
/// which is the low-pass companion of `sum P_k^2 = 1`.
pub fn below_symbol(family: Family, j: i32, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let s = r / 2f64.powi(j);
    if s <= INNER_EDGE * 2.0 {
        // every band above j vanishes here
        return 1.0;
    }
    let mut acc = 0.0;
    for k in active_scales(r) {
        if k > j {
            continue;
        }
        let v = band_symbol(family, k, r);
        acc += match family {
            Family::Squared => v * v,
            Family::Plain => v,
        };
    }
    acc
}

#[derive(Debug, Clone)]
pub struct DyadicFamily {
    pub j_min: i32,
    pub j_max: i32,
}

impl DyadicFamily {
    /// Band limits whose supports meet the nonzero lattice frequencies.
    pub fn for_grid(grid: &Grid) -> Self {
        let smallest = grid.freq_spacing();
        let largest = grid.nyquist() * (grid.dim() as f64).sqrt();
        // band j lives in (3/4, 8/3) * 2^j
        let j_min = (smallest / OUTER_EDGE).log2().floor() as i32;
        let j_max = (largest / INNER_EDGE).log2().ceil() as i32;
        DyadicFamily { j_min, j_max }
    }

    pub fn bands(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    pub fn contains(&self, j: i32) -> bool {
        self.bands().contains(&j)
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub field: SpectralField,
    /// Set when `j` lies outside the grid's representable bands.
    pub outside_band: bool,
}

/// Littlewood–Paley projection in frequency space.
pub fn lp_project(field: &SpectralField, j: i32, mode: ProjectMode, family: Family) -> Projection {
    let grid: Arc<Grid> = Arc::clone(field.grid());
    let bands = DyadicFamily::for_grid(&grid);
    let outside_band = match mode {
        ProjectMode::Band => !bands.contains(j),
        ProjectMode::Below => j < bands.j_min,
    };
    let mut out = field.in_space(Space::Frequency);
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let r = grid.freq_norm2(i).sqrt();
        let m = match mode {
            ProjectMode::Band => band_symbol(family, j, r),
            ProjectMode::Below => below_symbol(family, j, r),
        };
        *v *= m;
    }
    Projection {
        field: out,
        outside_band,
    }
}

/// Value of the DC mode, which belongs to no band.
pub fn dc_component(field: &SpectralField) -> Complex64 {
    field.in_space(Space::Frequency).values()[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_are_exact_on_a_fine_radius_sweep() {
        for i in 1..20000 {
            let r = 1e-3 * 1.0008f64.powi(i);
            let (mut s1, mut s2) = (0.0, 0.0);
            for j in -20..30 {
                s1 += band_symbol(Family::Plain, j, r);
                s2 += band_symbol(Family::Squared, j, r).powi(2);
            }
            assert!((s1 - 1.0).abs() < 1e-12, "r={r}: {s1}");
            assert!((s2 - 1.0).abs() < 1e-12, "r={r}: {s2}");
        }
    }

    #[test]
    fn supports_stay_inside_shoulders() {
        for j in -2..4 {
            let scale = 2f64.powi(j);
            for i in 0..4000 {
                let r = i as f64 * 1e-3 * scale;
                let inside = r > 0.75 * scale && r < 8.0 / 3.0 * scale;
                if !inside {
                    assert_eq!(band_symbol(Family::Squared, j, r), 0.0);
                    assert_eq!(band_symbol(Family::Plain, j, r), 0.0);
                }
            }
        }
    }

    #[test]
    fn below_symbol_matches_band_sum() {
        for i in 1..3000 {
            let r = i as f64 * 0.01;
            for j in -3..4 {
                let direct: f64 = (-40..=j).map(|k| band_symbol(Family::Plain, k, r)).sum();
                assert!((below_symbol(Family::Plain, j, r) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smooth_step_is_monotone_and_symmetric() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let s = smooth_step(t);
            assert!(s >= prev);
            assert!((s + smooth_step(1.0 - t) - 1.0).abs() < 1e-14);
            prev = s;
        }
    }
}
