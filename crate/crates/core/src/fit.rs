//! Log-log power-law fits and PASS/FAIL/UNTRUSTED verdicts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A fit needs at least this many rows.
pub const MIN_ROWS: usize = 8;

/// A fit needs its times to span at least this many decades.
pub const MIN_DECADES: f64 = 1.5;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least two positive samples, got {0}")]
    TooFew(usize),
    #[error("times must be strictly increasing and positive")]
    Times,
    #[error("norms must be positive and finite")]
    Norms,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Untrusted,
}

impl Verdict {
    /// Worst of two verdicts: any FAIL wins, then any UNTRUSTED.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Untrusted, _) | (_, Untrusted) => Untrusted,
            _ => Pass,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Untrusted => "UNTRUSTED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Fitted `d log(norm) / d log(t)`.
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|log norm - fit|` over the samples.
    pub max_residual: f64,
    /// False when the span rule fails or an upstream window check flagged the
    /// data.
    pub trusted: bool,
}

impl DecayFit {
    pub fn decades(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => (b / a).log10(),
            _ => 0.0,
        }
    }

    pub fn verdict(&self, expected: f64, tolerance: f64) -> Verdict {
        if !self.trusted {
            Verdict::Untrusted
        } else if (self.slope - expected).abs() <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// PASS when the slope does not exceed `bound`.
    pub fn verdict_at_most(&self, bound: f64) -> Verdict {
        if !self.trusted {
            Verdict::Untrusted
        } else if self.slope <= bound {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Value of the fitted power law at `t`.
    pub fn predict(&self, t: f64) -> f64 {
        (self.intercept + self.slope * t.ln()).exp()
    }
}

/// Weighted least squares on `(ln t, ln norm)`. Each sample is weighted by its
/// share of the `ln t` range, so uneven sampling does not bias the slope.
pub fn fit_power_law(times: &[f64], norms: &[f64]) -> Result<DecayFit, FitError> {
    let n = times.len().min(norms.len());
    if n < 2 {
        return Err(FitError::TooFew(n));
    }
    if times[0] <= 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FitError::Times);
    }
    if norms.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(FitError::Norms);
    }
    let x: Vec<f64> = times[..n].iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = norms[..n].iter().map(|v| v.ln()).collect();
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let lo = x[i.saturating_sub(1)];
            let hi = x[(i + 1).min(n - 1)];
            0.5 * (hi - lo)
        })
        .collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(a, b)| a * (b - mx).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - mx) * (y[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = (0..n)
        .map(|i| (y[i] - intercept - slope * x[i]).abs())
        .fold(0.0, f64::max);
    let decades = (times[n - 1] / times[0]).log10();
    Ok(DecayFit {
        times: times[..n].to_vec(),
        norms: norms[..n].to_vec(),
        slope,
        intercept,
        max_residual,
        trusted: n >= MIN_ROWS && decades >= MIN_DECADES,
    })
}

/// Keeps samples with `t >= t_from`.
pub fn fit_window(times: &[f64], norms: &[f64], t_from: f64) -> Result<DecayFit, FitError> {
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t >= t_from)
        .map(|(a, b)| (*a, *b))
        .unzip();
    fit_power_law(&t, &v)
}

/// `n` log-spaced times from `t0` to `t1` inclusive.
pub fn log_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    (0..n)
        .map(|i| t0 * (t1 / t0).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Reads the first two columns `(t, norm)` of a headed CSV file.
pub fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>), FitError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut times = Vec::new();
    let mut norms = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |k: usize| -> Result<f64, FitError> {
            record
                .get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or(FitError::Norms)
        };
        times.push(parse(0)?);
        norms.push(parse(1)?);
    }
    Ok((times, norms))
}

/// Fits the series stored at `path` and grades the slope.
pub fn fit_and_verdict(path: &Path, expected: f64, tolerance: f64) -> Result<(DecayFit, Verdict), FitError> {
    let (times, norms) = read_series(path)?;
    match fit_power_law(&times, &norms) {
        Ok(fit) => {
            let v = fit.verdict(expected, tolerance);
            Ok((fit, v))
        }
        Err(FitError::TooFew(_)) => Ok((
            DecayFit {
                times,
                norms,
                slope: f64::NAN,
                intercept: f64::NAN,
                max_residual: f64::NAN,
                trusted: false,
            },
            Verdict::Untrusted,
        )),
        Err(e) => Err(e),
    }
}

/// Writes `(t, norm)` rows under a header.
pub fn write_series(path: &Path, header: [&str; 2], times: &[f64], norms: &[f64]) -> Result<(), FitError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (t, v) in times.iter().zip(norms) {
        w.write_record([format!("{t:.17e}"), format!("{v:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}
