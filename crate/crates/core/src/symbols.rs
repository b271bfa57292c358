//! Multiplier symbols for pseudo-products, the cutoff partitions, and a
//! name registry used by experiment configs.
//!
//! Symbols are evaluated as `m(xi, eta, sigma, t)`; bilinear symbols receive
//! an empty `sigma`. Hot paths use allocation-free formulas in the invariants
//! `|xi|^2`, `|eta|^2`, `xi.eta`, which agree with the reference functions in
//! [`crate::resonance`].

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::dyadic::smooth_step;

pub type SymbolFn = dyn Fn(&[f64], &[f64], &[f64], f64) -> Complex64 + Send + Sync;

#[derive(Clone)]
pub struct MultiplierSymbol {
    pub name: String,
    pub arity: usize,
    /// Degree under `(xi, eta, sigma) -> lambda (xi, eta, sigma)` in the
    /// `1/t = 0` limit, when the symbol is homogeneous there.
    pub homogeneity_degree: Option<i32>,
    pub description: String,
    /// Powers of `A = 1/t + iZ(xi, eta)`, `B` and `C = 1/t + iZ(eta, sigma)`
    /// in the denominator.
    pub denominator_powers: [u32; 3],
    /// Set for constant symbols, which take the pointwise fast path.
    pub constant: Option<Complex64>,
    eval: Arc<SymbolFn>,
}

impl fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiplierSymbol")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("homogeneity_degree", &self.homogeneity_degree)
            .finish()
    }
}

impl MultiplierSymbol {
    pub fn new<F>(name: &str, arity: usize, degree: Option<i32>, description: &str, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], &[f64], f64) -> Complex64 + Send + Sync + 'static,
    {
        assert!(arity == 2 || arity == 3, "arity must be 2 or 3");
        MultiplierSymbol {
            name: name.to_string(),
            arity,
            homogeneity_degree: degree,
            description: description.to_string(),
            denominator_powers: [0; 3],
            constant: None,
            eval: Arc::new(f),
        }
    }

    pub fn with_denominators(mut self, a: u32, b: u32, c: u32) -> Self {
        self.denominator_powers = [a, b, c];
        self
    }

    #[inline]
    pub fn eval(&self, xi: &[f64], eta: &[f64], sigma: &[f64], t: f64) -> Complex64 {
        (self.eval)(xi, eta, sigma, t)
    }

    pub fn eval2(&self, xi: &[f64], eta: &[f64], t: f64) -> Complex64 {
        (self.eval)(xi, eta, &[], t)
    }

    /// Pointwise product `self * other` (same arity).
    pub fn product(&self, other: &MultiplierSymbol) -> MultiplierSymbol {
        assert_eq!(self.arity, other.arity, "arity mismatch");
        let (a, b) = (Arc::clone(&self.eval), Arc::clone(&other.eval));
        let degree = match (self.homogeneity_degree, other.homogeneity_degree) {
            (Some(p), Some(q)) => Some(p + q),
            _ => None,
        };
        let mut out = MultiplierSymbol::new(
            &format!("{}*{}", self.name, other.name),
            self.arity,
            degree,
            &format!("({}) * ({})", self.description, other.description),
            move |x, e, s, t| a(x, e, s, t) * b(x, e, s, t),
        );
        for k in 0..3 {
            out.denominator_powers[k] = self.denominator_powers[k] + other.denominator_powers[k];
        }
        out.constant = match (self.constant, other.constant) {
            (Some(p), Some(q)) => Some(p * q),
            _ => None,
        };
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `phi(xi, eta)` from the invariants.
#[inline]
pub fn phase2_fast(xi: &[f64], eta: &[f64]) -> f64 {
    let x2 = dot(xi, xi);
    let e2 = dot(eta, eta);
    let d2 = x2 - 2.0 * dot(xi, eta) + e2;
    x2 * x2 - e2 * e2 - d2 * d2
}

/// `Z(xi, eta)` from the expanded polynomial.
#[inline]
pub fn z_fast(xi: &[f64], eta: &[f64]) -> f64 {
    let x2 = dot(xi, xi);
    let e2 = dot(eta, eta);
    let m = dot(eta, xi);
    6.0 * e2 * e2 + 0.8 * x2 * x2 + 5.6 * m * m - 9.6 * e2 * m - 2.4 * x2 * m + 2.8 * e2 * x2
}

/// `1 / (1/t + i Z(xi, eta))`.
#[inline]
pub fn inv_a(xi: &[f64], eta: &[f64], t: f64) -> Complex64 {
    1.0 / Complex64::new(1.0 / t, z_fast(xi, eta))
}

pub fn one(arity: usize) -> MultiplierSymbol {
    let mut m = MultiplierSymbol::new("one", arity, Some(0), "1", |_, _, _, _| Complex64::new(1.0, 0.0));
    m.constant = Some(Complex64::new(1.0, 0.0));
    m
}

/// `e^{it phi(xi, eta)}`, the oscillation in the Duhamel integrand.
pub fn duhamel_phase() -> MultiplierSymbol {
    MultiplierSymbol::new("duhamel_phase", 2, None, "e^{it phi(xi,eta)}", |x, e, _, t| {
        Complex64::from_polar(1.0, t * phase2_fast(x, e))
    })
}

/// `1/A = 1/(1/t + iZ(xi, eta))`; `|1/A| <= t`.
pub fn one_over_a() -> MultiplierSymbol {
    MultiplierSymbol::new("one_over_A", 2, Some(-4), "1/(1/t + iZ(xi,eta))", |x, e, _, t| inv_a(x, e, t))
        .with_denominators(1, 0, 0)
}

/// `e^{it phi} / A`, the symbol of the `g` piece of the profile.
pub fn g_kernel() -> MultiplierSymbol {
    MultiplierSymbol::new("g_kernel", 2, None, "e^{it phi(xi,eta)} / (1/t + iZ(xi,eta))", |x, e, _, t| {
        Complex64::from_polar(1.0, t * phase2_fast(x, e)) * inv_a(x, e, t)
    })
    .with_denominators(1, 0, 0)
}

/// `Q_k(xi, eta) = xi_1^k`, a degree-`k` polynomial in the output frequency.
pub fn q_poly(k: u32) -> MultiplierSymbol {
    MultiplierSymbol::new(&format!("Q{k}"), 2, Some(k as i32), &format!("xi_1^{k}"), move |x, _, _, _| {
        Complex64::new(x[0].powi(k as i32), 0.0)
    })
}

/// `Q_k / A` with `Q_k = xi_1^k`.
pub fn q_over_a(k: u32) -> MultiplierSymbol {
    let mut m = q_poly(k).product(&one_over_a());
    m.name = format!("Q{k}_over_A");
    m
}

/// `|xi|^4 / Z(xi, eta)`, the `t -> inf` limit of `|xi|^4 / A` up to `-i`;
/// homogeneous of degree zero.
pub fn q4_over_z() -> MultiplierSymbol {
    MultiplierSymbol::new("Q4_over_Z", 2, Some(0), "|xi|^4 / Z(xi,eta)", |x, e, _, _| {
        let x2 = dot(x, x);
        // Z vanishes only at the origin, where the degree-zero limit is taken as 0
        let z = z_fast(x, e);
        Complex64::new(if z == 0.0 { 0.0 } else { x2 * x2 / z }, 0.0)
    })
}

/// `|xi|^4 / A * Psi_1(xi, eta)`, the normalised symbol whose multiplier norm
/// is independent of `t`.
pub fn q4_over_a_psi1() -> MultiplierSymbol {
    let psi1 = cutoff_families(CutoffKind::Psi2).remove(0);
    let q4 = MultiplierSymbol::new("Q4abs", 2, Some(4), "|xi|^4", |x, _, _, _| {
        let x2 = dot(x, x);
        Complex64::new(x2 * x2, 0.0)
    });
    let mut m = q4.product(&one_over_a()).product(&psi1);
    m.name = "Q4_over_A_Psi1".to_string();
    m
}

/// Trilinear flag symbol `(1/A(xi, eta)) (1/C(eta, sigma))`.
pub fn flag_a_c() -> MultiplierSymbol {
    MultiplierSymbol::new("flag_A_C", 3, Some(-8), "1/A(xi,eta) * 1/C(eta,sigma)", |x, e, s, t| {
        inv_a(x, e, t) * inv_a(e, s, t)
    })
    .with_denominators(1, 0, 1)
}

/// Trilinear Duhamel oscillation `e^{it psi} = e^{it phi(xi,eta)} e^{it phi(eta,sigma)}`.
pub fn trilinear_phase() -> MultiplierSymbol {
    MultiplierSymbol::new("trilinear_phase", 3, None, "e^{it psi(xi,eta,sigma)}", |x, e, s, t| {
        Complex64::from_polar(1.0, t * (phase2_fast(x, e) + phase2_fast(e, s)))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffKind {
    /// `Psi_1 + Psi_2 = 1` on sizes `(|xi - eta|, |eta|)`.
    Psi2,
    /// `Psi~_1 + Psi~_2 = 1` on sizes `(|xi - eta|, |xi|)`.
    PsiTilde2,
    /// `phi_1 + phi_2 + phi_3 = 1` on sizes `(|xi - eta|, |eta - sigma|, |sigma|)`.
    Phi3,
}

/// Weight of a size relative to `M = (sum a_i^8)^{1/8}`: zero below `M/4`,
/// one above `M/2`. The largest size always exceeds `M/2`, so the weights
/// never all vanish away from the origin.
fn size_weight(a: f64, big: f64) -> f64 {
    smooth_step((a / big - 0.25) / 0.25)
}

/// Smooth degree-zero partition subordinate to the sizes; the `i`-th piece
/// vanishes where `a_i < M/4`.
pub fn partition(sizes: &[f64], i: usize) -> f64 {
    let big = sizes.iter().map(|a| a.powi(8)).sum::<f64>().powf(0.125);
    if big == 0.0 {
        return 1.0 / sizes.len() as f64;
    }
    let w: Vec<f64> = sizes.iter().map(|a| size_weight(*a, big)).collect();
    w[i] / w.iter().sum::<f64>()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cutoff_families(kind: CutoffKind) -> Vec<MultiplierSymbol> {
    match kind {
        CutoffKind::Psi2 => (0..2)
            .map(|i| {
                MultiplierSymbol::new(&format!("Psi{}", i + 1), 2, Some(0), "sizes (|xi-eta|, |eta|)", move |x, e, _, _| {
                    Complex64::new(partition(&[dist(x, e), norm(e)], i), 0.0)
                })
            })
            .collect(),
        CutoffKind::PsiTilde2 => (0..2)
            .map(|i| {
                MultiplierSymbol::new(&format!("PsiTilde{}", i + 1), 2, Some(0), "sizes (|xi-eta|, |xi|)", move |x, e, _, _| {
                    Complex64::new(partition(&[dist(x, e), norm(x)], i), 0.0)
                })
            })
            .collect(),
        CutoffKind::Phi3 => (0..3)
            .map(|i| {
                MultiplierSymbol::new(
                    &format!("phi{}", i + 1),
                    3,
                    Some(0),
                    "sizes (|xi-eta|, |eta-sigma|, |sigma|)",
                    move |x, e, s, _| Complex64::new(partition(&[dist(x, e), dist(e, s), norm(s)], i), 0.0),
                )
            })
            .collect(),
    }
}

/// Names accepted by [`lookup`].
pub const REGISTRY: &[&str] = &[
    "one",
    "one3",
    "duhamel_phase",
    "one_over_A",
    "g_kernel",
    "Q0_over_A",
    "Q1_over_A",
    "Q2_over_A",
    "Q3_over_A",
    "Q4_over_A",
    "Q6_over_A",
    "Q4_over_Z",
    "Q4_over_A_Psi1",
    "flag_A_C",
    "trilinear_phase",
];

/// Looks up a symbol by registry name.
pub fn lookup(name: &str) -> Option<MultiplierSymbol> {
    Some(match name {
        "one" => one(2),
        "one3" => one(3),
        "duhamel_phase" => duhamel_phase(),
        "one_over_A" => one_over_a(),
        "g_kernel" => g_kernel(),
        "Q4_over_Z" => q4_over_z(),
        "Q4_over_A_Psi1" => q4_over_a_psi1(),
        "flag_A_C" => flag_a_c(),
        "trilinear_phase" => trilinear_phase(),
        other => {
            let k: u32 = other.strip_prefix('Q')?.strip_suffix("_over_A")?.parse().ok()?;
            q_over_a(k)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resonance;
    use proptest::prelude::*;

    #[test]
    fn registry_resolves_every_name() {
        for name in REGISTRY {
            let m = lookup(name).unwrap_or_else(|| panic!("{name}"));
            assert!(m.arity == 2 || m.arity == 3);
        }
        assert!(lookup("nope").is_none());
    }

    #[test]
    fn psi1_vanishes_far_from_its_support() {
        let fam = cutoff_families(CutoffKind::Psi2);
        // |eta| = 10 |xi - eta|
        let eta = [1.0];
        let xi = [1.1];
        assert_eq!(fam[0].eval2(&xi, &eta, 1.0).re, 0.0);
        assert!((fam[1].eval2(&xi, &eta, 1.0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_over_a_bounded_by_t() {
        for t in [0.5, 1.0, 10.0] {
            let v = one_over_a().eval2(&[0.3, -0.1], &[0.2, 0.7], t);
            assert!(v.norm() <= t);
            assert!((one_over_a().eval2(&[0.0], &[0.0], t) - t).norm() < 1e-14 * t);
        }
    }

    fn vecs(dim: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), k)
    }

    proptest! {
        #[test]
        fn fast_forms_match_reference(v in (1usize..=5).prop_flat_map(|d| vecs(d, 2))) {
            let (xi, eta) = (&v[0], &v[1]);
            let scale = resonance::norm2(xi).powi(2) + resonance::norm2(eta).powi(2) + 1e-300;
            prop_assert!((phase2_fast(xi, eta) - resonance::phase2(xi, eta)).abs() / scale < 1e-12);
            prop_assert!((z_fast(xi, eta) - resonance::z_direct(xi, eta)).abs() / scale < 1e-12);
        }

        #[test]
        fn partitions_sum_to_one(v in (1usize..=5).prop_flat_map(|d| vecs(d, 3))) {
            let (xi, eta, sigma) = (&v[0], &v[1], &v[2]);
            for kind in [CutoffKind::Psi2, CutoffKind::PsiTilde2] {
                let s: f64 = cutoff_families(kind).iter().map(|m| m.eval2(xi, eta, 1.0).re).sum();
                prop_assert!((s - 1.0).abs() < 1e-10);
            }
            let s: f64 = cutoff_families(CutoffKind::Phi3).iter().map(|m| m.eval(xi, eta, sigma, 1.0).re).sum();
            prop_assert!((s - 1.0).abs() < 1e-10);
        }

        #[test]
        fn psi1_support_constraint(v in (1usize..=5).prop_flat_map(|d| vecs(d, 2))) {
            let (xi, eta) = (&v[0], &v[1]);
            let fam = cutoff_families(CutoffKind::Psi2);
            if fam[0].eval2(xi, eta, 1.0).re > 0.0 {
                prop_assert!(norm(eta) <= 4.0 * dist(xi, eta));
            }
        }

        #[test]
        fn degree_zero_and_declared_homogeneity(v in (1usize..=5).prop_flat_map(|d| vecs(d, 3)), lam in 0.1f64..10.0) {
            let (xi, eta, sigma) = (&v[0], &v[1], &v[2]);
            let s = |w: &Vec<f64>| w.iter().map(|c| c * lam).collect::<Vec<f64>>();
            let (lx, le, ls) = (s(xi), s(eta), s(sigma));
            let mut symbols: Vec<MultiplierSymbol> = Vec::new();
            for kind in [CutoffKind::Psi2, CutoffKind::PsiTilde2, CutoffKind::Phi3] {
                symbols.extend(cutoff_families(kind));
            }
            symbols.push(q4_over_z());
            symbols.push(q_poly(3));
            for m in symbols {
                let deg = m.homogeneity_degree.unwrap();
                let a = m.eval(&lx, &le, &ls, 1.0);
                let b = m.eval(xi, eta, sigma, 1.0) * lam.powi(deg);
                prop_assert!((a - b).norm() <= 1e-8 * (b.norm() + 1e-12), "{}", m.name);
            }
        }
    }
}
