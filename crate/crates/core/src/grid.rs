//! Periodic lattices in one to five dimensions.
//!
//! Physical points sit at `x_j = -L/2 + j * L/N` along each axis. Frequency
//! arrays are stored in FFT order, so storage index `i` on an axis maps to the
//! signed offset `k = i` for `i < N/2` and `k = i - N` otherwise, with
//! wavenumber `2 * pi * k / L`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

pub const MAX_DIM: usize = 5;

/// Default cap on `n_per_axis^dim`: 2^24 complex points (256 MiB per field).
pub const DEFAULT_MAX_POINTS: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension {0} outside 1..=5")]
    Dimension(usize),
    #[error("points per axis {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("box length must be positive and finite, got {0}")]
    BoxLength(f64),
    #[error("grid {n}^{dim} = {points} points exceeds the memory budget of {budget}")]
    Budget {
        dim: usize,
        n: usize,
        points: u128,
        budget: usize,
    },
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

pub struct Grid {
    dim: usize,
    n: usize,
    box_length: f64,
    wavenumbers: Vec<f64>,
    positions: Vec<f64>,
    plans: OnceLock<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.box_length == other.box_length
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, box_length: f64) -> Result<Arc<Grid>, GridError> {
        Self::with_budget(dim, n, box_length, DEFAULT_MAX_POINTS)
    }

    pub fn with_budget(
        dim: usize,
        n: usize,
        box_length: f64,
        max_points: usize,
    ) -> Result<Arc<Grid>, GridError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(GridError::Dimension(dim));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(GridError::NotPowerOfTwo(n));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(GridError::BoxLength(box_length));
        }
        let points = (n as u128).pow(dim as u32);
        if points > max_points as u128 {
            return Err(GridError::Budget {
                dim,
                n,
                points,
                budget: max_points,
            });
        }
        let dk = 2.0 * PI / box_length;
        let dx = box_length / n as f64;
        let wavenumbers = (0..n).map(|i| signed_offset(i, n) as f64 * dk).collect();
        let positions = (0..n).map(|j| -0.5 * box_length + j as f64 * dx).collect();
        Ok(Arc::new(Grid {
            dim,
            n,
            box_length,
            wavenumbers,
            positions,
            plans: OnceLock::new(),
        }))
    }

    /// Smallest power-of-two grid whose box keeps a signal of bandwidth
    /// `xi_max` free of periodic wrap-around up to `t_max`, i.e.
    /// `4 xi_max^3 t_max < L / 2`, while resolving `oversample * xi_max`.
    pub fn auto_scaled(
        dim: usize,
        xi_max: f64,
        t_max: f64,
        oversample: f64,
        min_box: f64,
        max_points: usize,
    ) -> Result<Arc<Grid>, GridError> {
        let travel = 8.0 * xi_max.powi(3) * t_max;
        let box_length = (1.05 * travel).max(min_box);
        let needed = (oversample * xi_max * box_length / PI).ceil() as usize;
        let n = needed.max(2).next_power_of_two();
        Self::with_budget(dim, n, box_length, max_points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn freq_spacing(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Largest representable wavenumber along one axis.
    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.box_length
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one physical cell, `(L/N)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Quadrature weight of one frequency cell, `(2 pi / L)^d`.
    pub fn freq_cell_volume(&self) -> f64 {
        self.freq_spacing().powi(self.dim as i32)
    }

    pub fn axis_wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn axis_positions(&self) -> &[f64] {
        &self.positions
    }

    /// Per-axis storage indices of a flat (row-major) index.
    pub fn unravel(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.dim]
            .iter()
            .fold(0usize, |acc, &i| acc * self.n + i)
    }

    /// Fills `out[..dim]` with the wavenumber vector at a flat index.
    pub fn freq_at(&self, flat: usize, out: &mut [f64]) {
        let idx = self.unravel(flat);
        for a in 0..self.dim {
            out[a] = self.wavenumbers[idx[a]];
        }
    }

    /// Fills `out[..dim]` with the physical position at a flat index.
    pub fn position_at(&self, flat: usize, out: &mut [f64]) {
        let idx = self.unravel(flat);
        for a in 0..self.dim {
            out[a] = self.positions[idx[a]];
        }
    }

    pub fn freq_norm2(&self, flat: usize) -> f64 {
        let idx = self.unravel(flat);
        (0..self.dim).map(|a| self.wavenumbers[idx[a]].powi(2)).sum()
    }

    pub fn position_norm2(&self, flat: usize) -> f64 {
        let idx = self.unravel(flat);
        (0..self.dim).map(|a| self.positions[idx[a]].powi(2)).sum()
    }

    /// `|xi|^2` for every lattice point, in storage order.
    pub fn freq_norm2_table(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.freq_norm2(i)).collect()
    }

    /// Flat index of `-xi` for the lattice point at `flat`.
    ///
    /// The offset `-N/2` has no negative partner and maps to itself.
    pub fn negated(&self, flat: usize) -> usize {
        let idx = self.unravel(flat);
        let mut out = [0usize; MAX_DIM];
        for a in 0..self.dim {
            out[a] = (self.n - idx[a]) % self.n;
        }
        self.ravel(&out)
    }

    /// Flat index of `xi_a - xi_b` with periodic wrap.
    pub fn difference(&self, a: usize, b: usize) -> usize {
        let ia = self.unravel(a);
        let ib = self.unravel(b);
        let mut out = [0usize; MAX_DIM];
        for ax in 0..self.dim {
            out[ax] = (ia[ax] + self.n - ib[ax]) % self.n;
        }
        self.ravel(&out)
    }

    /// 2/3-rule mask: true where every axis offset satisfies `|k| < N/3`.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cut = self.n as f64 / 3.0;
        (0..self.len())
            .map(|flat| {
                let idx = self.unravel(flat);
                (0..self.dim).all(|a| (signed_offset(idx[a], self.n).abs() as f64) < cut)
            })
            .collect()
    }

    /// `(-1)^(sum of axis indices)`, the phase linking FFT output to the
    /// centred physical lattice.
    pub(crate) fn checkerboard(&self, flat: usize) -> f64 {
        let idx = self.unravel(flat);
        if idx[..self.dim].iter().sum::<usize>() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn plans(&self) -> &Plans {
        self.plans.get_or_init(|| {
            let mut planner = FftPlanner::new();
            Plans {
                forward: planner.plan_fft_forward(self.n),
                inverse: planner.plan_fft_inverse(self.n),
            }
        })
    }

    /// Unnormalised multidimensional DFT in place (row-major layout).
    pub(crate) fn fft_in_place(&self, data: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(data.len(), self.len());
        let plans = self.plans();
        let plan = if inverse { &plans.inverse } else { &plans.forward };
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // innermost axis is contiguous
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::default(); n];
        for axis in (0..self.dim.saturating_sub(1)).rev() {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (i, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, value) in line.iter().enumerate() {
                        data[base + i * stride] = *value;
                    }
                }
            }
        }
    }
}

pub fn signed_offset(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
