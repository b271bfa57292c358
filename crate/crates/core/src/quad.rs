//! Adaptive Gauss–Kronrod (7/15) quadrature for complex integrands of one
//! real variable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

/// One Kronrod panel: integral estimate and `|K15 - G7|`.
pub fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[i];
        if i % 2 == 1 {
            g += s * WG[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |value|)` or `max_evals` is spent.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> QuadResult {
    integrate_panels(&f, &[a, b], abs_tol, rel_tol, max_evals)
}

/// As [`integrate`], starting from the panels between consecutive `breaks`.
pub fn integrate_panels<F: Fn(f64) -> Complex64>(
    f: &F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> QuadResult {
    let mut heap = BinaryHeap::new();
    let mut value = Complex64::default();
    let mut error = 0.0;
    let mut evals = 0;
    for w in breaks.windows(2) {
        let (v, e) = gk15(f, w[0], w[1]);
        evals += 15;
        value += v;
        error += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    loop {
        let target = abs_tol.max(rel_tol * value.norm());
        if error <= target {
            return QuadResult {
                value,
                error,
                evals,
                converged: true,
            };
        }
        if evals + 30 > max_evals {
            return QuadResult {
                value,
                error,
                evals,
                converged: false,
            };
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further in floating point
            return QuadResult {
                value,
                error,
                evals,
                converged: false,
            };
        }
        let (v1, e1) = gk15(f, worst.a, mid);
        let (v2, e2) = gk15(f, mid, worst.b);
        evals += 30;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact_on_one_panel() {
        let (v, e) = gk15(&|x: f64| Complex64::new(x.powi(10), 0.0), 0.0, 1.0);
        assert!((v.re - 1.0 / 11.0).abs() < 1e-15);
        assert!(e < 1e-6);
    }

    #[test]
    fn oscillatory_integrand() {
        // int_0^{2 pi} e^{i 40 x} cos x dx = 0 up to rounding
        let r = integrate(
            |x: f64| Complex64::from_polar(1.0, 40.0 * x) * x.cos(),
            0.0,
            2.0 * PI,
            1e-13,
            0.0,
            100_000,
        );
        assert!(r.converged);
        assert!(r.value.norm() < 1e-12);
        let r = integrate(|x: f64| Complex64::new(0.0, 1.0) * x.sqrt(), 0.0, 1.0, 1e-12, 0.0, 100_000);
        assert!((r.value.im - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let r = integrate(|x: f64| Complex64::from_polar(1.0, 1e6 * x * x), 0.0, 10.0, 1e-14, 0.0, 200);
        assert!(!r.converged);
        assert!(r.evals <= 200);
    }
}
