//! Bilinear and trilinear phases, the resonance vector fields, and the
//! coercive quantities `Z`, `X`, `Y` together with sampling audits of their
//! lower bounds.
//!
//! All functions take frequency vectors as slices of a common length and
//! panic on a length mismatch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
fn norm4(a: &[f64]) -> f64 {
    let n = norm2(a);
    n * n
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `4 |v|^2 v`, the gradient of `|v|^4`.
fn quartic_grad(v: &[f64]) -> Vec<f64> {
    let n = norm2(v);
    v.iter().map(|c| 4.0 * n * c).collect()
}

/// `phi(xi, eta) = |xi|^4 - |eta|^4 - |xi - eta|^4`.
pub fn phase2(xi: &[f64], eta: &[f64]) -> f64 {
    let d = diff(xi, eta);
    norm4(xi) - norm4(eta) - norm4(&d)
}

/// `d phi / d eta = 4|xi-eta|^2 (xi-eta) - 4|eta|^2 eta`; zero on `xi = 2 eta`.
pub fn grad_eta_phase2(xi: &[f64], eta: &[f64]) -> Vec<f64> {
    let d = quartic_grad(&diff(xi, eta));
    let e = quartic_grad(eta);
    d.iter().zip(&e).map(|(a, b)| a - b).collect()
}

/// `d phi / d xi = 4|xi|^2 xi - 4|xi-eta|^2 (xi-eta)`.
pub fn grad_xi_phase2(xi: &[f64], eta: &[f64]) -> Vec<f64> {
    let x = quartic_grad(xi);
    let d = quartic_grad(&diff(xi, eta));
    x.iter().zip(&d).map(|(a, b)| a - b).collect()
}

/// `P = -eta + xi/5`.
pub fn p_field(xi: &[f64], eta: &[f64]) -> Vec<f64> {
    assert_eq!(xi.len(), eta.len(), "dimension mismatch");
    xi.iter().zip(eta).map(|(x, e)| -e + x / 5.0).collect()
}

/// `Z = phi + P . d_eta phi`.
pub fn z_direct(xi: &[f64], eta: &[f64]) -> f64 {
    phase2(xi, eta) + dot(&p_field(xi, eta), &grad_eta_phase2(xi, eta))
}

/// Polynomial expansion of `Z` in the invariants `|xi|^2`, `|eta|^2`, `eta.xi`.
pub fn z_expanded(xi: &[f64], eta: &[f64]) -> f64 {
    let x2 = norm2(xi);
    let e2 = norm2(eta);
    let m = dot(eta, xi);
    6.0 * e2 * e2 + 0.8 * x2 * x2 + 5.6 * m * m - 9.6 * e2 * m - 2.4 * x2 * m + 2.8 * e2 * x2
}

/// Completed-square form
/// `|a eta - b xi|^4 + 6/5|eta|^4 + 1/2|xi|^4 + 4/5(eta.xi)^2 + 2/5|eta|^2|xi|^2`
/// with `a^2 = 12/sqrt(30)`, `b^2 = 3/sqrt(30)`; every term is nonnegative.
pub fn z_completed_square(xi: &[f64], eta: &[f64]) -> f64 {
    let s30 = 30f64.sqrt();
    let a = (12.0 / s30).sqrt();
    let b = (3.0 / s30).sqrt();
    let w: Vec<f64> = eta.iter().zip(xi).map(|(e, x)| a * e - b * x).collect();
    let x2 = norm2(xi);
    let e2 = norm2(eta);
    let m = dot(eta, xi);
    norm4(&w) + 1.2 * e2 * e2 + 0.5 * x2 * x2 + 0.8 * m * m + 0.4 * e2 * x2
}

/// Relative tolerance for agreement of the two `Z` evaluations.
pub const Z_CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResonanceError {
    #[error("Z evaluations disagree: direct {direct}, expanded {expanded}")]
    Inconsistent { direct: f64, expanded: f64 },
}

/// Relative disagreement of two evaluations, scaled by `|xi|^4 + |eta|^4`.
fn relative_gap(a: f64, b: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// `Z` by both the direct and the expanded formula; errors if they disagree.
pub fn z_quantity(xi: &[f64], eta: &[f64]) -> Result<f64, ResonanceError> {
    let direct = z_direct(xi, eta);
    let expanded = z_expanded(xi, eta);
    let scale = norm4(xi) + norm4(eta);
    if relative_gap(direct, expanded, scale) > Z_CONSISTENCY_TOL {
        return Err(ResonanceError::Inconsistent { direct, expanded });
    }
    Ok(direct)
}

/// `psi(xi, eta, sigma) = |xi|^4 - |xi-eta|^4 - |eta-sigma|^4 - |sigma|^4`.
pub fn phase3(xi: &[f64], eta: &[f64], sigma: &[f64]) -> f64 {
    norm4(xi) - norm4(&diff(xi, eta)) - norm4(&diff(eta, sigma)) - norm4(sigma)
}

/// `d psi / d eta = 4|xi-eta|^2 (xi-eta) - 4|eta-sigma|^2 (eta-sigma)`.
pub fn grad_eta_phase3(xi: &[f64], eta: &[f64], sigma: &[f64]) -> Vec<f64> {
    let a = quartic_grad(&diff(xi, eta));
    let b = quartic_grad(&diff(eta, sigma));
    a.iter().zip(&b).map(|(x, y)| x - y).collect()
}

/// `d psi / d sigma = 4|eta-sigma|^2 (eta-sigma) - 4|sigma|^2 sigma`.
pub fn grad_sigma_phase3(_xi: &[f64], eta: &[f64], sigma: &[f64]) -> Vec<f64> {
    let a = quartic_grad(&diff(eta, sigma));
    let b = quartic_grad(sigma);
    a.iter().zip(&b).map(|(x, y)| x - y).collect()
}

/// `Q = 2 xi - 3 eta`.
pub fn q_field(xi: &[f64], eta: &[f64]) -> Vec<f64> {
    assert_eq!(xi.len(), eta.len(), "dimension mismatch");
    xi.iter().zip(eta).map(|(x, e)| 2.0 * x - 3.0 * e).collect()
}

/// `S = xi - 3 sigma`.
pub fn s_field(xi: &[f64], sigma: &[f64]) -> Vec<f64> {
    assert_eq!(xi.len(), sigma.len(), "dimension mismatch");
    xi.iter().zip(sigma).map(|(x, s)| x - 3.0 * s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YValue {
    pub value: f64,
    /// `Y - 4(|xi-eta|^4 + |eta-sigma|^4 + |sigma|^4)`.
    pub margin: f64,
}

/// `Y = psi + Q . psi_eta + S . psi_sigma`.
pub fn y_quantity(xi: &[f64], eta: &[f64], sigma: &[f64]) -> YValue {
    let value = phase3(xi, eta, sigma)
        + dot(&q_field(xi, eta), &grad_eta_phase3(xi, eta, sigma))
        + dot(&s_field(xi, sigma), &grad_sigma_phase3(xi, eta, sigma));
    let floor = 4.0 * (norm4(&diff(xi, eta)) + norm4(&diff(eta, sigma)) + norm4(sigma));
    YValue {
        value,
        margin: value - floor,
    }
}

/// `X(eta, sigma) = phi(eta, sigma) + P(eta, sigma) . phi_sigma(eta, sigma)`,
/// i.e. `Z` with `(xi, eta)` replaced by `(eta, sigma)`.
pub fn x_quantity(eta: &[f64], sigma: &[f64]) -> f64 {
    z_direct(eta, sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceAudit {
    pub sample_count: usize,
    /// Smallest margin over the samples, on the unit sphere of the
    /// concatenated frequency vector.
    pub min_margin: f64,
    pub violation_count: usize,
    pub worst_point: Vec<Vec<f64>>,
    /// Largest relative disagreement between redundant evaluations, where the
    /// audit has one.
    pub max_consistency_error: f64,
}

impl ResonanceAudit {
    pub fn passed(&self) -> bool {
        self.violation_count == 0 && self.max_consistency_error <= Z_CONSISTENCY_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// `Z >= (|xi|^4 + |eta|^4) / 2`.
    Z,
    /// `Y >= 4(|xi-eta|^4 + |eta-sigma|^4 + |sigma|^4)`.
    Y,
    /// `X >= (|eta|^4 + |sigma|^4) / 2`.
    X,
}

struct Sample {
    margin: f64,
    consistency: f64,
    point: Vec<Vec<f64>>,
}

const CHUNK: usize = 4096;

fn unit_sphere(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&v).sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

fn evaluate(kind: BoundKind, dim: usize, v: &[f64]) -> Sample {
    match kind {
        BoundKind::Z => {
            let (xi, eta) = v.split_at(dim);
            let direct = z_direct(xi, eta);
            let expanded = z_expanded(xi, eta);
            let scale = norm4(xi) + norm4(eta);
            Sample {
                margin: direct - 0.5 * scale,
                consistency: relative_gap(direct, expanded, scale)
                    .max(relative_gap(direct, z_completed_square(xi, eta), scale)),
                point: vec![xi.to_vec(), eta.to_vec()],
            }
        }
        BoundKind::X => {
            let (eta, sigma) = v.split_at(dim);
            Sample {
                margin: x_quantity(eta, sigma) - 0.5 * (norm4(eta) + norm4(sigma)),
                consistency: 0.0,
                point: vec![eta.to_vec(), sigma.to_vec()],
            }
        }
        BoundKind::Y => {
            let (xi, rest) = v.split_at(dim);
            let (eta, sigma) = rest.split_at(dim);
            Sample {
                margin: y_quantity(xi, eta, sigma).margin,
                consistency: 0.0,
                point: vec![xi.to_vec(), eta.to_vec(), sigma.to_vec()],
            }
        }
    }
}

fn reduce(samples: impl Iterator<Item = Sample>, count: usize, violated: impl Fn(f64) -> bool) -> ResonanceAudit {
    let mut audit = ResonanceAudit {
        sample_count: count,
        min_margin: f64::INFINITY,
        violation_count: 0,
        worst_point: Vec::new(),
        max_consistency_error: 0.0,
    };
    for s in samples {
        if violated(s.margin) {
            audit.violation_count += 1;
        }
        audit.max_consistency_error = audit.max_consistency_error.max(s.consistency);
        if s.margin < audit.min_margin {
            audit.min_margin = s.margin;
            audit.worst_point = s.point;
        }
    }
    audit
}

/// Samples the unit sphere of the concatenated frequency vector and checks the
/// chosen lower bound. Homogeneity of degree four makes radial sampling
/// redundant.
pub fn audit_bound(kind: BoundKind, dim: usize, samples: usize, seed: u64) -> ResonanceAudit {
    let arity = match kind {
        BoundKind::Y => 3,
        _ => 2,
    };
    let chunks = samples.div_ceil(CHUNK);
    let results: Vec<Sample> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len)
                .map(|_| {
                    let v = unit_sphere(&mut rng, arity * dim);
                    evaluate(kind, dim, &v)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    reduce(results.into_iter(), samples, |m| m < 0.0)
}

/// Joint resonance margin `|phi| + |d_eta phi|` on `{|xi| + |eta| = 1}`.
pub fn joint_margin(xi: &[f64], eta: &[f64]) -> f64 {
    phase2(xi, eta).abs() + norm2(&grad_eta_phase2(xi, eta)).sqrt()
}

/// Margins below this count as a joint space-time resonance.
pub const JOINT_RESONANCE_FLOOR: f64 = 1e-9;

/// Checks that time and space resonances meet only at the origin. In one
/// dimension the normalised set is a diamond swept deterministically; in
/// higher dimensions `|xi| = s`, `|eta| = 1 - s` with random directions.
pub fn audit_resonance_sets(dim: usize, sample_budget: usize, seed: u64) -> ResonanceAudit {
    assert!(sample_budget >= 10_000, "sample budget below 10^4");
    let samples: Vec<Sample> = if dim == 1 {
        (0..sample_budget)
            .into_par_iter()
            .map(|i| {
                // perimeter parameter in [0, 4)
                let u = 4.0 * (i as f64 + 0.5) / sample_budget as f64;
                let (q, s) = (u.floor() as usize, u.fract());
                let (sx, se) = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)][q];
                let xi = [sx * s];
                let eta = [se * (1.0 - s)];
                Sample {
                    margin: joint_margin(&xi, &eta),
                    consistency: 0.0,
                    point: vec![xi.to_vec(), eta.to_vec()],
                }
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..sample_budget)
            .map(|_| {
                let s: f64 = rng.random();
                let xi: Vec<f64> = unit_sphere(&mut rng, dim).iter().map(|c| c * s).collect();
                let eta: Vec<f64> = unit_sphere(&mut rng, dim).iter().map(|c| c * (1.0 - s)).collect();
                Sample {
                    margin: joint_margin(&xi, &eta),
                    consistency: 0.0,
                    point: vec![xi, eta],
                }
            })
            .collect()
    };
    reduce(samples.into_iter(), sample_budget, |m| m <= JOINT_RESONANCE_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phase2_examples() {
        assert_eq!(phase2(&[2.0], &[1.0]), 14.0);
        assert_eq!(phase2(&[1.3, -0.2], &[1.3, -0.2]), 0.0);
        let eta = [0.7, -1.1];
        assert!((phase2(&[0.0, 0.0], &eta) + 2.0 * norm4(&eta)).abs() < 1e-14);
    }

    #[test]
    fn space_resonance_at_xi_equals_two_eta() {
        let eta = [1.0, 0.0, 0.0];
        let xi = [2.0, 0.0, 0.0];
        assert!(norm2(&grad_eta_phase2(&xi, &eta)) < 1e-28);
        assert_eq!(grad_eta_phase2(&[1.0, 0.0], &[0.0, 0.0]), vec![4.0, 0.0]);
        // space resonant but not time resonant
        assert_eq!(phase2(&xi, &eta), 14.0);
    }

    #[test]
    fn p_field_examples() {
        assert_eq!(p_field(&[5.0, -5.0], &[1.0, -1.0]), vec![0.0, 0.0]);
        assert_eq!(p_field(&[0.0], &[1.0]), vec![-1.0]);
    }

    #[test]
    fn z_at_origin_and_on_axis() {
        assert_eq!(z_quantity(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        // phi = -2, P = -1, phi_eta = -8
        assert_eq!(z_quantity(&[0.0], &[1.0]).unwrap(), 6.0);
    }

    #[test]
    fn trilinear_space_resonance() {
        let sigma = [0.5, 0.25];
        let xi = [1.5, 0.75];
        let eta = [1.0, 0.5];
        assert!(norm2(&grad_eta_phase3(&xi, &eta, &sigma)) < 1e-28);
        assert!(norm2(&grad_sigma_phase3(&xi, &eta, &sigma)) < 1e-28);
        let o = [0.0; 3];
        assert_eq!(phase3(&o, &o, &o), 0.0);
        assert_eq!(y_quantity(&o, &o, &o).value, 0.0);
        assert_eq!(x_quantity(&o, &o), 0.0);
    }

    #[test]
    fn bound_audits_pass_small() {
        for dim in [1, 2, 5] {
            for kind in [BoundKind::Z, BoundKind::X, BoundKind::Y] {
                let a = audit_bound(kind, dim, 5000, 7);
                assert!(a.passed(), "{kind:?} d={dim}: {a:?}");
                assert!(a.min_margin > 0.0);
            }
        }
    }

    #[test]
    fn resonance_set_audit_small() {
        for dim in [1, 2] {
            let a = audit_resonance_sets(dim, 10_000, 3);
            assert_eq!(a.violation_count, 0);
            assert!(a.min_margin > 0.0);
        }
    }

    fn vecs(dim: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), k)
    }

    fn finite_diff<F: Fn(&[f64]) -> f64>(f: F, at: &[f64], h: f64) -> Vec<f64> {
        (0..at.len())
            .map(|a| {
                let mut p = at.to_vec();
                let mut m = at.to_vec();
                p[a] += h;
                m[a] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn z_forms_agree(v in (1usize..=5).prop_flat_map(|d| vecs(d, 2))) {
            let (xi, eta) = (&v[0], &v[1]);
            let scale = norm4(xi) + norm4(eta) + 1e-300;
            prop_assert!((z_direct(xi, eta) - z_expanded(xi, eta)).abs() / scale < 1e-12);
            prop_assert!((z_direct(xi, eta) - z_completed_square(xi, eta)).abs() / scale < 1e-12);
        }

        #[test]
        fn gradients_match_finite_differences(v in (1usize..=5).prop_flat_map(|d| vecs(d, 3))) {
            let (xi, eta, sigma) = (&v[0], &v[1], &v[2]);
            let scale = (norm2(xi) + norm2(eta) + norm2(sigma)).sqrt().max(1e-3);
            let h = 1e-5 * scale;
            let tol = 1e-6 * scale.powi(3);
            let checks = [
                (grad_eta_phase2(xi, eta), finite_diff(|e| phase2(xi, e), eta, h)),
                (grad_xi_phase2(xi, eta), finite_diff(|x| phase2(x, eta), xi, h)),
                (grad_eta_phase3(xi, eta, sigma), finite_diff(|e| phase3(xi, e, sigma), eta, h)),
                (grad_sigma_phase3(xi, eta, sigma), finite_diff(|s| phase3(xi, eta, s), sigma, h)),
            ];
            for (exact, fd) in checks {
                for (a, b) in exact.iter().zip(&fd) {
                    prop_assert!((a - b).abs() <= tol, "{a} vs {b}");
                }
            }
        }

        #[test]
        fn homogeneity(v in (1usize..=5).prop_flat_map(|d| vecs(d, 3)), lambda in 0.1f64..10.0) {
            let (xi, eta, sigma) = (&v[0], &v[1], &v[2]);
            let s = |w: &Vec<f64>| w.iter().map(|c| c * lambda).collect::<Vec<f64>>();
            let (lx, le, ls) = (s(xi), s(eta), s(sigma));
            let l4 = lambda.powi(4);
            let scale = l4 * (norm4(xi) + norm4(eta) + norm4(sigma)) + 1e-300;
            prop_assert!((phase2(&lx, &le) - l4 * phase2(xi, eta)).abs() / scale < 1e-10);
            prop_assert!((z_direct(&lx, &le) - l4 * z_direct(xi, eta)).abs() / scale < 1e-10);
            prop_assert!((x_quantity(&le, &ls) - l4 * x_quantity(eta, sigma)).abs() / scale < 1e-10);
            prop_assert!((y_quantity(&lx, &le, &ls).value - l4 * y_quantity(xi, eta, sigma).value).abs() / scale < 1e-10);
            let pscale = lambda * (norm2(xi) + norm2(eta) + norm2(sigma)).sqrt() + 1e-300;
            for (a, b) in p_field(&lx, &le).iter().zip(p_field(xi, eta)) {
                prop_assert!((a - lambda * b).abs() / pscale < 1e-10);
            }
            for (a, b) in q_field(&lx, &le).iter().zip(q_field(xi, eta)) {
                prop_assert!((a - lambda * b).abs() / pscale < 1e-10);
            }
            for (a, b) in s_field(&lx, &ls).iter().zip(s_field(xi, sigma)) {
                prop_assert!((a - lambda * b).abs() / pscale < 1e-10);
            }
        }

        #[test]
        fn lower_bounds_hold(v in (1usize..=5).prop_flat_map(|d| vecs(d, 3))) {
            let (xi, eta, sigma) = (&v[0], &v[1], &v[2]);
            prop_assert!(z_direct(xi, eta) >= 0.5 * (norm4(xi) + norm4(eta)) - 1e-12);
            prop_assert!(x_quantity(eta, sigma) >= 0.5 * (norm4(eta) + norm4(sigma)) - 1e-12);
            prop_assert!(y_quantity(xi, eta, sigma).margin >= -1e-9);
        }
    }
}
