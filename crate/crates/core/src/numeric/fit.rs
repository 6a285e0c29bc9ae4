//! Least-squares decay rates of remainders against `ln ψ(t)`.

use serde::Serialize;

use crate::engine::Base;
use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 10;
/// Remainders at or below this are treated as exact zeros and skipped.
pub const REMAINDER_FLOOR: f64 = 1e-300;
/// Trailing 40% of the abscissa range.
pub const DEFAULT_WINDOW: (f64, f64) = (0.6, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// Time range of the samples used.
    pub t_window: (f64, f64),
    pub used: usize,
}

/// Slope of `ln r` against `ln ψ(t)` over the part of the abscissa range
/// selected by `window` (fractions of the range, e.g. `(0.6, 1.0)`).
pub fn decay_exponent_fit(samples: &[(f64, f64)], base: Base, window: (f64, f64)) -> Result<DecayFit> {
    let mut pts = Vec::with_capacity(samples.len());
    for &(t, r) in samples {
        pts.push((base.ln_psi(t)?, t, r));
    }
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let span = hi - lo;
    let (x0, x1) = (lo + window.0 * span, lo + window.1 * span);
    let tol = 1e-12 * span.abs().max(1.0);
    let sel: Vec<(f64, f64, f64)> = pts
        .into_iter()
        .filter(|&(x, _, r)| x >= x0 - tol && x <= x1 + tol && r.is_finite() && r.max(REMAINDER_FLOOR) > REMAINDER_FLOOR)
        .map(|(x, t, r)| (x, t, r.ln()))
        .collect();
    if sel.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            got: sel.len(),
        });
    }
    let n = sel.len() as f64;
    let mx = sel.iter().map(|p| p.0).sum::<f64>() / n;
    let my = sel.iter().map(|p| p.2).sum::<f64>() / n;
    let sxx: f64 = sel.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = sel.iter().map(|p| (p.0 - mx) * (p.2 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::IllConditionedFit(f64::INFINITY));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = sel.iter().map(|p| (p.2 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    let t_window = sel
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    Ok(DecayFit {
        slope,
        stderr,
        intercept,
        t_window,
        used: sel.len(),
    })
}
