//! Fractional integration `(1/t + Δ²)^{-α/4}`, bilinear and trilinear
//! pseudo-products by brute-force frequency quadrature, and a finite
//! difference probe of the Coifman–Meyer multiplier norm.
//!
//! `T_m(f, g)^(xi) = c Σ_eta m(xi, eta) f^(xi - eta) g^(eta)` with
//! `c = (dxi / sqrt(2 pi))^d`, so `m = 1` reproduces `f g` exactly; the
//! trilinear form carries `c^2`. Index differences wrap periodically. The
//! symbol sees the lattice frequencies of `xi` and `eta`, so aliased terms
//! are weighted with the unwrapped `xi - eta`; inputs supported in
//! `|k| < N/4` per axis (or `N/6` for trilinear) are alias-free.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, Space, SpectralField};
use crate::grid::{Grid, MAX_DIM};
use crate::symbols::MultiplierSymbol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("symbol {name} has arity {got}, operator needs {expected}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("quadrature needs about {work} symbol evaluations, budget is {max_work}")]
    Budget { work: u64, max_work: u64 },
}

/// Work limit for the frequency quadrature, in symbol evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureBudget {
    pub max_work: u64,
    /// Input coefficients with `|v| <= active_tol * max|v|` are skipped.
    /// Zero keeps every nonzero coefficient, which keeps `m = 1` exact.
    pub active_tol: f64,
}

impl QuadratureBudget {
    /// Full-lattice cost at the default size gates: `N = 512` in one
    /// dimension and `N = 64` per axis in two.
    pub fn bilinear(dim: usize) -> Self {
        let max_work = if dim == 1 { 512u64.pow(2) } else { 64u64.pow(4) };
        QuadratureBudget { max_work, active_tol: 0.0 }
    }

    /// Full-lattice cost at `N = 128` in one dimension.
    pub fn trilinear() -> Self {
        QuadratureBudget {
            max_work: 128u64.pow(3),
            active_tol: 0.0,
        }
    }

    pub fn with_max_work(mut self, max_work: u64) -> Self {
        self.max_work = max_work;
        self
    }

    pub fn with_active_tol(mut self, tol: f64) -> Self {
        self.active_tol = tol;
        self
    }
}

/// Multiplies by `(1/t + |xi|^4)^{-alpha/4}`; the result is in frequency space.
pub fn frac_integrate(field: &SpectralField, alpha: f64, t: f64) -> SpectralField {
    assert!(alpha >= 0.0 && t > 0.0, "need alpha >= 0 and t > 0");
    if alpha == 0.0 {
        return field.to_frequency();
    }
    let inv_t = 1.0 / t;
    field.apply_multiplier(|xi| {
        let r2: f64 = xi.iter().map(|c| c * c).sum();
        Complex64::new((inv_t + r2 * r2).powf(-alpha / 4.0), 0.0)
    })
}

/// Nonzero frequency coefficients with their axis indices and wavenumbers.
struct Active {
    idx: Vec<[usize; MAX_DIM]>,
    freq: Vec<[f64; MAX_DIM]>,
    val: Vec<Complex64>,
}

fn active(hat: &SpectralField, tol: f64) -> Active {
    let grid = hat.grid();
    let peak = hat.sup_norm();
    let cut = tol * peak;
    let mut out = Active {
        idx: Vec::new(),
        freq: Vec::new(),
        val: Vec::new(),
    };
    for (flat, v) in hat.values().iter().enumerate() {
        if v.norm() > cut && *v != Complex64::default() {
            let mut xi = [0.0; MAX_DIM];
            grid.freq_at(flat, &mut xi);
            out.idx.push(grid.unravel(flat));
            out.freq.push(xi);
            out.val.push(*v);
        }
    }
    out
}

#[inline]
fn wrap_sub(grid: &Grid, a: &[usize; MAX_DIM], b: &[usize; MAX_DIM]) -> usize {
    let n = grid.n_per_axis();
    let mut flat = 0;
    for ax in 0..grid.dim() {
        flat = flat * n + (a[ax] + n - b[ax]) % n;
    }
    flat
}

#[inline]
fn wrap_add(grid: &Grid, a: &[usize; MAX_DIM], b: &[usize; MAX_DIM]) -> [usize; MAX_DIM] {
    let n = grid.n_per_axis();
    let mut out = [0; MAX_DIM];
    for ax in 0..grid.dim() {
        out[ax] = (a[ax] + b[ax]) % n;
    }
    out
}

fn check_arity(m: &MultiplierSymbol, expected: usize) -> Result<(), OperatorError> {
    if m.arity != expected {
        return Err(OperatorError::Arity {
            name: m.name.clone(),
            expected,
            got: m.arity,
        });
    }
    Ok(())
}

fn conv_weight(grid: &Grid) -> f64 {
    (grid.freq_spacing() / (2.0 * std::f64::consts::PI).sqrt()).powi(grid.dim() as i32)
}

/// Bilinear pseudo-product `T_m(f, g)`, returned in frequency space.
pub fn bilinear_apply(
    m: &MultiplierSymbol,
    f: &SpectralField,
    g: &SpectralField,
    t: f64,
    budget: QuadratureBudget,
) -> Result<SpectralField, OperatorError> {
    check_arity(m, 2)?;
    f.check_compatible(g)?;
    if let Some(c) = m.constant {
        return Ok(f.pointwise_mul(g)?.scale(c).to_frequency());
    }
    let grid = Arc::clone(f.grid());
    let fh = f.to_frequency();
    let gh = active(&g.to_frequency(), budget.active_tol);
    let work = grid.len() as u64 * gh.val.len() as u64;
    if work > budget.max_work {
        return Err(OperatorError::Budget {
            work,
            max_work: budget.max_work,
        });
    }
    let dim = grid.dim();
    let c = conv_weight(&grid);
    let fv = fh.values();
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|out| {
            let oi = grid.unravel(out);
            let mut xi = [0.0; MAX_DIM];
            grid.freq_at(out, &mut xi);
            let mut acc = Complex64::default();
            for k in 0..gh.val.len() {
                let fa = fv[wrap_sub(&grid, &oi, &gh.idx[k])];
                if fa == Complex64::default() {
                    continue;
                }
                acc += m.eval(&xi[..dim], &gh.freq[k][..dim], &[], t) * fa * gh.val[k];
            }
            acc * c
        })
        .collect();
    Ok(SpectralField::from_values(&grid, values, Space::Frequency)?)
}

/// Trilinear pseudo-product `T_m(f, g, h)`, returned in frequency space.
pub fn trilinear_apply(
    m: &MultiplierSymbol,
    f: &SpectralField,
    g: &SpectralField,
    h: &SpectralField,
    t: f64,
    budget: QuadratureBudget,
) -> Result<SpectralField, OperatorError> {
    check_arity(m, 3)?;
    f.check_compatible(g)?;
    f.check_compatible(h)?;
    if let Some(c) = m.constant {
        return Ok(f.pointwise_mul(g)?.pointwise_mul(h)?.scale(c).to_frequency());
    }
    let grid = Arc::clone(f.grid());
    let fh = f.to_frequency();
    let gh = active(&g.to_frequency(), budget.active_tol);
    let hh = active(&h.to_frequency(), budget.active_tol);
    let work = grid.len() as u64 * gh.val.len() as u64 * hh.val.len() as u64;
    if work > budget.max_work {
        return Err(OperatorError::Budget {
            work,
            max_work: budget.max_work,
        });
    }
    let dim = grid.dim();
    let c = conv_weight(&grid);
    // eta = (eta - sigma) + sigma for every active pair, computed once
    let pairs: Vec<([usize; MAX_DIM], [f64; MAX_DIM], Complex64, usize)> = (0..gh.val.len())
        .flat_map(|b| (0..hh.val.len()).map(move |s| (b, s)))
        .map(|(b, s)| {
            let ei = wrap_add(&grid, &gh.idx[b], &hh.idx[s]);
            let mut eta = [0.0; MAX_DIM];
            grid.freq_at(grid.ravel(&ei), &mut eta);
            (ei, eta, gh.val[b] * hh.val[s], s)
        })
        .collect();
    let fv = fh.values();
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|out| {
            let oi = grid.unravel(out);
            let mut xi = [0.0; MAX_DIM];
            grid.freq_at(out, &mut xi);
            let mut acc = Complex64::default();
            for (ei, eta, gh_hh, s) in &pairs {
                let fa = fv[wrap_sub(&grid, &oi, ei)];
                if fa == Complex64::default() {
                    continue;
                }
                acc += m.eval(&xi[..dim], &eta[..dim], &hh.freq[*s][..dim], t) * fa * gh_hh;
            }
            acc * c * c
        })
        .collect();
    Ok(SpectralField::from_values(&grid, values, Space::Frequency)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMNormProbe {
    pub max_order: usize,
    /// Sup over samples and `|alpha| <= max_order` of `|zeta|^|alpha| |d^alpha m|`.
    pub value: f64,
    pub sample_count: usize,
    /// `(k, sup)` for each shell `|zeta| = 2^k`.
    pub shells: Vec<(i32, f64)>,
    /// Sup for each derivative order `0..=max_order`.
    pub orders: Vec<f64>,
}

pub const PROBE_SHELLS: std::ops::RangeInclusive<i32> = -5..=5;

/// Relative finite-difference step.
const PROBE_STEP: f64 = 1e-2;

/// Multi-indices over `vars` variables with total order at most `max_order`.
fn multi_indices(vars: usize, max_order: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, vars: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == vars {
            out.push(prefix.clone());
            return;
        }
        for a in 0..=left {
            prefix.push(a);
            fill(prefix, vars, left - a, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(&mut Vec::new(), vars, max_order, &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Tensor-product central difference `d^alpha m` at `zeta` with step `h`.
fn mixed_difference(m: &MultiplierSymbol, dim: usize, zeta: &[f64], alpha: &[usize], h: f64, t: f64) -> Complex64 {
    let vars = zeta.len();
    let mut k = vec![0usize; vars];
    let mut total = Complex64::default();
    let mut point = zeta.to_vec();
    loop {
        let mut weight = 1.0;
        for v in 0..vars {
            let sign = if k[v] % 2 == 0 { 1.0 } else { -1.0 };
            weight *= sign * binomial(alpha[v], k[v]);
            point[v] = zeta[v] + (alpha[v] as f64 / 2.0 - k[v] as f64) * h;
        }
        let (xi, rest) = point.split_at(dim);
        let (eta, sigma) = rest.split_at(dim);
        total += m.eval(xi, eta, sigma, t) * weight;
        // odometer over k_v in 0..=alpha_v
        let mut v = 0;
        while v < vars {
            k[v] += 1;
            if k[v] <= alpha[v] {
                break;
            }
            k[v] = 0;
            v += 1;
        }
        if v == vars {
            break;
        }
    }
    let order: usize = alpha.iter().sum();
    total / h.powi(order as i32)
}

/// Estimates the multiplier norm of `m` in `arity * dim` variables by
/// central differences at `samples` random points spread over the shells
/// `|zeta| = 2^k`, `k in -5..=5`. Growth across shells signals a symbol
/// outside the class.
pub fn cm_norm_probe(m: &MultiplierSymbol, dim: usize, max_order: usize, samples: usize, t: f64, seed: u64) -> CMNormProbe {
    assert!(max_order <= 4, "finite differences degrade beyond order 4");
    let vars = m.arity * dim;
    let alphas = multi_indices(vars, max_order);
    let shells: Vec<i32> = PROBE_SHELLS.collect();
    let per_shell = samples.div_ceil(shells.len()).max(1);
    let rows: Vec<(i32, Vec<f64>)> = shells
        .par_iter()
        .map(|&k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k + 64) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let radius = 2f64.powi(k);
            let h = PROBE_STEP * radius;
            let mut best = vec![0.0; max_order + 1];
            for _ in 0..per_shell {
                let mut zeta: Vec<f64> = (0..vars).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let len = zeta.iter().map(|c| c * c).sum::<f64>().sqrt();
                zeta.iter_mut().for_each(|c| *c *= radius / len);
                for alpha in &alphas {
                    let order: usize = alpha.iter().sum();
                    let d = mixed_difference(m, dim, &zeta, alpha, h, t).norm() * radius.powi(order as i32);
                    best[order] = f64::max(best[order], d);
                }
            }
            (k, best)
        })
        .collect();
    let mut orders = vec![0.0; max_order + 1];
    let mut shell_sup = Vec::new();
    for (k, best) in &rows {
        for (o, v) in best.iter().enumerate() {
            orders[o] = f64::max(orders[o], *v);
        }
        shell_sup.push((*k, best.iter().cloned().fold(0.0, f64::max)));
    }
    CMNormProbe {
        max_order,
        value: orders.iter().cloned().fold(0.0, f64::max),
        sample_count: per_shell * shells.len(),
        shells: shell_sup,
        orders,
    }
}

/// Seeded random field with a Gaussian envelope `e^{-|xi|^2/8}`, supported
/// in `|k| < cap N` per axis.
pub fn random_band_limited(grid: &Arc<Grid>, cap: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_per_axis() as f64;
    let dk = grid.freq_spacing();
    SpectralField::from_frequency_fn(grid, |xi| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let inside = xi.iter().all(|c| (c / dk).abs() < cap * n);
        if inside {
            Complex64::new(re, im) * (-xi.iter().map(|c| c * c).sum::<f64>() / 8.0).exp()
        } else {
            Complex64::default()
        }
    })
}
