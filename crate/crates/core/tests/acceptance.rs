//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned
//! here independently of the study defaults, and every graded number is
//! re-checked against them.
//!
//! Criteria listed in `KNOWN_FAILURES` are expected to print FAIL; the target
//! exits nonzero on any other failure, or when a known failure starts passing.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use resonance_lab::dyadic::{band_symbol, dc_component, DyadicFamily, Family};
use resonance_lab::fit::Verdict;
use resonance_lab::pseudoproduct::random_band_limited;
use resonance_lab::study::{run_study, StudyName, StudyReport, StudySpec};
use resonance_lab::{Grid, Space, SpectralField};

const ROUND_TRIP: f64 = 1e-12;
const PLANCHEREL: f64 = 1e-10;
const PARTITION: f64 = 1e-10;
const Z_AGREEMENT: f64 = 1e-9;
const SLOPE_D1: (f64, f64) = (-0.25, 0.03);
const SLOPE_D2: (f64, f64) = (-0.50, 0.05);
const BAND_SLOPE: (f64, f64) = (-0.5, 0.05);
const BAND_PREFACTOR: f64 = 3.0;
const STATIONARY: f64 = 1e-9;
const RHO_BAND: f64 = 3.0;
const UNIT_PRODUCT: f64 = 1e-10;
const FRAC_RATIO: f64 = 10.0;
const NEG_DEGREE_SPREAD: f64 = 10.0;
const RK4_ORDER: (f64, f64) = (4.0, 0.3);
const SPLIT_ORDER: (f64, f64) = (2.0, 0.3);
/// `|split - rk4| / dt^2` at the finest step over the coarsest.
const MUTUAL_DT2: f64 = 1.5;
const FREE_EXACT: f64 = 1e-12;
const U_BAND: f64 = 3.0;
const XNORM_GROWTH: f64 = 0.02;
const G_GAP: f64 = 0.15;
const RECONSTRUCTION: f64 = 1e-12;
const BILINEARITY: f64 = 1e-10;

/// Runtime budgets in seconds.
const BUDGETS: [f64; 10] = [60.0, 120.0, 300.0, 300.0, 600.0, 600.0, 300.0, 1800.0, 600.0, 1800.0];

/// The one-dimensional small-data run does not scatter: the resonant
/// interaction at zero frequency grows the profile there like t^{3/4}.
const KNOWN_FAILURES: &[usize] = &[8];

struct Outcome {
    pass: bool,
    summary: String,
}

fn grade(parts: Vec<(String, bool)>) -> Outcome {
    let pass = parts.iter().all(|(_, ok)| *ok);
    let summary = parts
        .iter()
        .map(|(s, ok)| if *ok { s.clone() } else { format!("{s} [FAIL]") })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { pass, summary }
}

fn check_value(r: &StudyReport, name: &str) -> (f64, bool) {
    let c = r.check(name).unwrap_or_else(|| panic!("missing check {name}"));
    (c.measured, c.verdict == Verdict::Pass)
}

fn within(r: &StudyReport, name: &str, (target, tol): (f64, f64)) -> (String, bool) {
    let (v, ok) = check_value(r, name);
    (format!("{name} {v:.4} (target {target} ± {tol})"), ok && (v - target).abs() <= tol)
}

fn at_most(r: &StudyReport, name: &str, bound: f64) -> (String, bool) {
    let (v, ok) = check_value(r, name);
    (format!("{name} {v:.3e} (<= {bound:e})"), ok && v <= bound)
}

fn run(name: StudyName, spec: StudySpec) -> StudyReport {
    run_study(name, &spec, None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn criterion_1() -> Outcome {
    let mut round = 0.0f64;
    let mut planch = 0.0f64;
    let mut part = 0.0f64;
    for (dim, n, l) in [(1, 256, 40.0), (2, 64, 20.0), (3, 16, 10.0)] {
        let grid = Grid::new(dim, n, l).unwrap();
        let fhat = random_band_limited(&grid, 0.5, 7 + dim as u64);
        let phys = fhat.to_physical();
        let back = phys.to_frequency();
        round = round.max(back.max_abs_diff(&fhat) / fhat.sup_norm());
        planch = planch.max((phys.l2_norm() - fhat.l2_norm()).abs() / fhat.l2_norm());
        // both families reassemble the field outside DC
        let bands = DyadicFamily::for_grid(&grid);
        for family in [Family::Plain, Family::Squared] {
            let mut sum = vec![Complex64::default(); grid.len()];
            sum[0] = dc_component(&fhat);
            for j in bands.bands() {
                for (i, s) in sum.iter_mut().enumerate().skip(1) {
                    let m = band_symbol(family, j, grid.freq_norm2(i).sqrt());
                    *s += fhat.values()[i] * if family == Family::Plain { m } else { m * m };
                }
            }
            let rebuilt = SpectralField::from_values(&grid, sum, Space::Frequency).unwrap();
            part = part.max(rebuilt.max_abs_diff(&fhat) / fhat.sup_norm());
        }
    }
    grade(vec![
        (format!("round trip {round:.1e} (<= {ROUND_TRIP:e})"), round <= ROUND_TRIP),
        (format!("Plancherel {planch:.1e} (<= {PLANCHEREL:e})"), planch <= PLANCHEREL),
        (format!("partition {part:.1e} (<= {PARTITION:e})"), part <= PARTITION),
    ])
}

fn all_pass(r: &StudyReport, prefix: &str) -> (String, bool) {
    let checks: Vec<_> = r.checks_with_prefix(prefix).filter(|c| c.asserted).collect();
    let failed: Vec<&str> = checks.iter().filter(|c| c.verdict != Verdict::Pass).map(|c| c.name.as_str()).collect();
    (
        format!("{} `{prefix}*` checks, failing: {failed:?}", checks.len()),
        !checks.is_empty() && failed.is_empty(),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut timed = |k: usize, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut o = f();
        let secs = start.elapsed().as_secs_f64();
        let in_budget = secs <= BUDGETS[k - 1];
        o.summary.push_str(&format!("; {secs:.1} s (budget {} s)", BUDGETS[k - 1]));
        o.pass &= in_budget;
        let label = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {k:>2}: {label} {}", o.summary);
        results.push((k, o, secs));
    };

    timed(1, &mut criterion_1);

    timed(2, &mut || {
        let r = run(StudyName::ResonanceAudit, StudySpec::default());
        let mut parts = vec![all_pass(&r, "")];
        for d in [1, 2, 5] {
            parts.push(at_most(&r, &format!("z-consistency-d{d}"), Z_AGREEMENT));
            let samples = r.details.get("samples").and_then(|v| v.as_u64()).unwrap_or(100_000);
            parts.push((format!("d = {d} with {samples} samples"), samples >= 100_000));
        }
        grade(parts)
    });

    let mut linear_d1 = None;
    timed(3, &mut || {
        let d1 = run(StudyName::LinearDecay, StudySpec { dim: Some(1), ..Default::default() });
        let d2 = run(StudyName::LinearDecay, StudySpec { dim: Some(2), ..Default::default() });
        let parts = vec![within(&d1, "sup-slope", SLOPE_D1), within(&d2, "sup-slope", SLOPE_D2)];
        linear_d1 = Some((d1, d2));
        grade(parts)
    });

    timed(4, &mut || {
        let r = run(StudyName::BandedDecay, StudySpec::default());
        let mut parts: Vec<_> = (1..=3).map(|j| within(&r, &format!("band-{j}-slope"), BAND_SLOPE)).collect();
        parts.push(at_most(&r, "prefactor-spread", BAND_PREFACTOR));
        grade(parts)
    });

    timed(5, &mut || {
        let (d1, d2) = linear_d1.as_ref().expect("criterion 3 ran");
        let mut o = grade(vec![
            at_most(d1, "stationary-point", STATIONARY),
            at_most(d2, "stationary-point", STATIONARY),
            at_most(d1, "rho-decay-band", RHO_BAND),
        ]);
        o.summary.push_str(&format!("; reuses the criterion 3 runs ({:.1} s)", d1.runtime_seconds + d2.runtime_seconds));
        o
    });

    timed(6, &mut || {
        let r = run(StudyName::OperatorSuite, StudySpec::default());
        let mut parts = vec![
            at_most(&r, "unit-bilinear", UNIT_PRODUCT),
            at_most(&r, "unit-trilinear", UNIT_PRODUCT),
            at_most(&r, "frac-identity", 1e-14),
        ];
        for name in ["frac-ratio-pinf-q2-a3", "frac-ratio-p2-q2-a1", "frac-ratio-pinf-q1-a2"] {
            parts.push(at_most(&r, name, FRAC_RATIO));
        }
        for k in 0..=4 {
            parts.push(at_most(&r, &format!("q{k}-over-a-stability"), NEG_DEGREE_SPREAD));
        }
        grade(parts)
    });

    // criteria 7 and 8 share one run of the nonlinear study, timed under 7
    let mut scatter_run: Option<StudyReport> = None;
    timed(7, &mut || {
        let scatter = scatter_run.insert(run(StudyName::NonlinearScatter, StudySpec::default()));
        let mut parts = Vec::new();
        for p in ["d1", "d2"] {
            parts.push(within(scatter, &format!("rk4-order-{p}"), RK4_ORDER));
            parts.push(within(scatter, &format!("split-order-{p}"), SPLIT_ORDER));
            parts.push(at_most(scatter, &format!("mutual-dt2-{p}"), MUTUAL_DT2));
            parts.push(at_most(scatter, &format!("free-exact-{p}"), FREE_EXACT));
        }
        grade(parts)
    });

    timed(8, &mut || {
        let scatter = scatter_run.as_ref().expect("criterion 7 ran");
        let (gap, ok) = check_value(scatter, "g-slope-gap");
        let (inc, mono) = check_value(scatter, "scattering-proxy-monotone");
        let mut o = grade(vec![
            at_most(scatter, "u-decay-band", U_BAND),
            at_most(scatter, "xnorm-growth", XNORM_GROWTH),
            (format!("proxy increases after t = 10: {inc}"), mono && inc == 0.0),
            (format!("g-slope-gap {gap:.3} (>= {G_GAP})"), ok && gap >= G_GAP),
        ]);
        o.summary.push_str(&format!("; run shared with criterion 7, study time {:.1} s", scatter.runtime_seconds));
        o.pass &= scatter.runtime_seconds <= BUDGETS[7];
        o
    });

    timed(9, &mut || {
        let r = run(StudyName::ProfileMonitor, StudySpec::default());
        let (err, quad) = check_value(&r, "h-time-quadrature");
        grade(vec![
            at_most(&r, "reconstruction", RECONSTRUCTION),
            at_most(&r, "g-bilinearity", BILINEARITY),
            at_most(&r, "delta-squared-scaling", BILINEARITY),
            (format!("h quadrature mismatch {err:.2e} within quadrature error"), quad),
        ])
    });

    timed(10, &mut || {
        let r = run(StudyName::LinearDecay, StudySpec { dim: Some(5), n: Some(16), ..Default::default() });
        let (slope, _) = check_value(&r, "smoke-sup-slope");
        let (change, stable) = check_value(&r, "smoke-nonlinear-3-steps");
        // recorded only: running to completion with finite output is the bar
        Outcome {
            pass: slope.is_finite() && stable,
            summary: format!("recorded 5-D slope {slope:.4} (asymptote -1.25); 3-step relative change {change:.2e}"),
        }
    });

    let mut status = ExitCode::SUCCESS;
    for (k, o, _) in &results {
        let known = KNOWN_FAILURES.contains(k);
        if !o.pass && !known {
            println!("criterion {k} failed");
            status = ExitCode::FAILURE;
        }
        if o.pass && known {
            println!("criterion {k} is listed as a known failure but passed; update KNOWN_FAILURES");
            status = ExitCode::FAILURE;
        }
        if !o.pass && known {
            println!("criterion {k} failed as documented");
        }
    }
    status
}
