//! Numerical check of the remainder orders `|y - s_M| = O(ψ^{-μ_M - ε})`.
//!
//! The deviation `v = y - s_N` is integrated directly from
//! `v' = -Av + [G(s_N + v) - G(s_N)] - R_N(t)`, where `R_N` is the symbolic
//! residual of `s_N`. This keeps the small remainders above roundoff, which
//! integrating `y` and subtracting `s_M` afterwards would not.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{Base, Engine, Expansion, ProblemSpec};
use crate::error::{Error, Result};
use crate::exponents::Regime;
use crate::numeric::calibrate::{calibrate_along, CalibrationFit};
use crate::numeric::fit::{decay_exponent_fit, DEFAULT_WINDOW};
use crate::numeric::integrate::{integrate_rhs, IntegratorOptions};
use crate::numeric::series::SeriesEvaluator;
use crate::numeric::IntegratorStats;
use crate::nonlinear::eval_difference;
use crate::scalar::Scalar;

pub const DEFAULT_MARGIN: f64 = 0.25;
/// Relative precision of a calibrated resonant constant at best.
pub const CONSTANT_RESOLUTION: f64 = 1e-14;
/// Remainders within this factor of the constant-resolution floor are not fitted.
pub const FLOOR_FACTOR: f64 = 100.0;
/// Log-regime margin: slopes in `ln ln t` resolve poorly.
pub const LOG_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
    DoubleLog,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `y(t0) = s_N(t0)`.
    OnExpansion,
    /// `y(t0) = s_N(t0) + offset`.
    Offset { offset: Vec<f64> },
    Explicit { y0: Vec<f64> },
    /// `s_N(t0)` plus a uniform perturbation of the given size per component.
    Random { amplitude: f64, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyProtocol {
    pub t0: f64,
    /// First sample time.
    pub t_start: f64,
    pub t_max: f64,
    pub samples: usize,
    pub spacing: Spacing,
    pub margin: f64,
    /// Fit window as fractions of the `ln ψ` range.
    pub window: (f64, f64),
    pub initial: InitialCondition,
    pub integrator: IntegratorOptions,
    /// Calibrate uncalibrated resonant constants before verifying.
    pub calibrate: bool,
    /// Time window of the calibration regression.
    pub calibration_window: (f64, f64),
}

impl VerifyProtocol {
    pub fn for_regime(regime: Regime) -> Self {
        let integrator = IntegratorOptions {
            atol: 1e-40,
            norm_fraction: 1.0,
            ..Default::default()
        };
        let base = VerifyProtocol {
            t0: 1e3,
            t_start: 1e3,
            t_max: 1e6,
            samples: 400,
            spacing: Spacing::Log,
            margin: DEFAULT_MARGIN,
            window: DEFAULT_WINDOW,
            initial: InitialCondition::OnExpansion,
            integrator,
            calibrate: false,
            calibration_window: (30.0, 60.0),
        };
        match regime {
            // s_N(0) is O(1) and can sit outside the basin of attraction
            Regime::Exp => VerifyProtocol {
                integrator: IntegratorOptions {
                    rtol: 1e-12,
                    ..base.integrator.clone()
                },
                t0: 5.0,
                t_start: 5.0,
                t_max: 40.0,
                spacing: Spacing::Linear,
                ..base
            },
            Regime::Pow | Regime::Mixed => base,
            // explicit steps are capped near 1/λ_max, so longer horizons cost
            // proportionally more steps
            Regime::Log | Regime::IterLog => VerifyProtocol {
                spacing: Spacing::DoubleLog,
                margin: LOG_MARGIN,
                ..base
            },
        }
    }

    pub fn sample_times(&self) -> Result<Vec<f64>> {
        let n = self.samples;
        if n < 2 || !(self.t_max > self.t_start) || self.t_start < self.t0 {
            return Err(Error::Validation(format!(
                "need t0 ≤ t_start < t_max and at least 2 samples (t0 = {}, t_start = {}, t_max = {}, samples = {})",
                self.t0, self.t_start, self.t_max, n
            )));
        }
        let (a, b) = (self.t_start, self.t_max);
        let frac = |i: usize| i as f64 / (n - 1) as f64;
        let mut ts: Vec<f64> = match self.spacing {
            Spacing::Linear => (0..n).map(|i| a + (b - a) * frac(i)).collect(),
            Spacing::Log => {
                if a <= 0.0 {
                    return Err(Error::Validation("log spacing needs t_start > 0".into()));
                }
                (0..n).map(|i| a * (b / a).powf(frac(i))).collect()
            }
            Spacing::DoubleLog => {
                if a <= 1.0 {
                    return Err(Error::Validation("double-log spacing needs t_start > 1".into()));
                }
                let (la, lb) = (a.ln().ln(), b.ln().ln());
                (0..n).map(|i| (la + (lb - la) * frac(i)).exp().exp()).collect()
            }
        };
        ts[0] = a;
        ts[n - 1] = b;
        ts.dedup();
        Ok(ts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderRecord {
    pub order: usize,
    pub predicted_exponent: f64,
    pub next_exponent: Option<f64>,
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub margin: f64,
    /// Pass when the slope is at most this.
    pub threshold: f64,
    /// Leading exponent of the symbolic residual of `s_M`.
    pub residual_order: f64,
    pub verdict: Verdict,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub regime: Regime,
    pub m_star: usize,
    pub base: Base,
    pub t_range: (f64, f64),
    pub samples: usize,
    pub rtol: f64,
    pub atol: f64,
    pub initial_state: Vec<f64>,
    /// Only the symbolic residual was checked.
    pub symbolic_only: bool,
    pub records: Vec<OrderRecord>,
    pub calibration: Vec<CalibrationFit>,
    pub integrator_stats: IntegratorStats,
    pub passed: bool,
}

/// Remainder norms per truncation order at each sample.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    /// `remainders[i][M-1] = |y(t_i) - s_M(t_i)|`.
    pub remainders: Vec<Vec<f64>>,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.remainders.first().map_or(0, Vec::len);
        let mut header = String::from("t,psi");
        for m in 1..=n {
            header.push_str(&format!(",r_{m}"));
        }
        writeln!(out, "{header}")?;
        for ((t, p), r) in self.times.iter().zip(&self.psi).zip(&self.remainders) {
            write!(out, "{t:.16e},{p:.16e}")?;
            for x in r {
                write!(out, ",{x:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub report: VerificationReport,
    pub trace: Trace,
    /// The expansion actually verified (after calibration, if any).
    pub expansion: Expansion<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn initial_state(initial: &InitialCondition, s0: &[f64]) -> Result<Vec<f64>> {
    let n = s0.len();
    let check = |v: &[f64]| {
        if v.len() != n {
            Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            })
        } else {
            Ok(())
        }
    };
    Ok(match initial {
        InitialCondition::OnExpansion => s0.to_vec(),
        InitialCondition::Offset { offset } => {
            check(offset)?;
            s0.iter().zip(offset).map(|(a, b)| a + b).collect()
        }
        InitialCondition::Explicit { y0 } => {
            check(y0)?;
            y0.clone()
        }
        InitialCondition::Random { amplitude, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            s0.iter().map(|a| a + amplitude * rng.gen_range(-1.0..=1.0)).collect()
        }
    })
}

/// Integrates `v = y - s` from `y(t0) = y0`, where `s` sums every term of
/// `exp`: `v' = -Av + [G(s + v) - G(s)] - R(t)` with `R` the symbolic
/// residual of `s`. Returns the trajectory of `v` and the evaluator of `s`.
pub(crate) fn integrate_deviation(
    spec: &ProblemSpec<f64>,
    engine: &Engine<f64>,
    exp: &Expansion<f64>,
    y0: &[f64],
    t0: f64,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<(crate::numeric::Trajectory, SeriesEvaluator)> {
    let n = spec.dimension;
    let series = SeriesEvaluator::from_expansion(exp, n);
    let residual = engine.symbolic_residual(exp, exp.order())?;
    let r_series = SeriesEvaluator::from_residual(spec, &residual);
    let guard = series.guard().max(r_series.guard());
    if !(t0 >= guard) {
        return Err(Error::Validation(format!(
            "t0 = {t0} is inside the domain guard (needs t0 ≥ {guard})"
        )));
    }
    let s_t0 = series.sum(t0)?;
    let v0: Vec<f64> = y0.iter().zip(&s_t0).map(|(a, b)| a - b).collect();
    let a = &spec.matrix_a;
    let nl = &spec.nonlinearity;
    let rhs = |t: f64, v: &[f64], out: &mut [f64]| {
        let s = series.sum(t).unwrap_or_else(|_| vec![f64::NAN; n]);
        let r = r_series.sum(t).unwrap_or_else(|_| vec![f64::NAN; n]);
        let g = eval_difference(nl, &s, v);
        for i in 0..n {
            let av: f64 = a[i].iter().zip(v).map(|(x, y)| x * y).sum();
            out[i] = -av + g[i] - r[i];
        }
    };
    let traj = integrate_rhs(rhs, &v0, t0, times, opts)?;
    Ok((traj, series))
}

/// Integrates, measures `|y - s_M|` for `M = 1..=order` and fits decay
/// slopes against `ln ψ`. Order `M` passes when its slope is at most
/// `-(μ_M + margin_M) + 2·stderr` with `margin_M = min(½(μ_{M+1} - μ_M), margin)`.
pub fn verify<S: Scalar>(
    spec: &ProblemSpec<S>,
    exp: &Expansion<S>,
    order: usize,
    protocol: &VerifyProtocol,
) -> Result<Verification> {
    if order == 0 || order > exp.order() {
        return Err(Error::TruncationTooDeep {
            order,
            available: exp.order(),
        });
    }
    let spec = spec.to_f64();
    let engine = Engine::new(spec.clone())?;
    let n = spec.dimension;
    let mut expansion = exp.to_f64();
    expansion.terms.truncate(order);
    let base = expansion.base();
    let times = protocol.sample_times()?;
    let mut calibration = Vec::new();

    let deep = base.psi_depth().is_some_and(|m| m >= 2);
    let symbolic_only = deep;
    let resonant_pending = expansion
        .resonance_notes
        .iter()
        .any(|nt| nt.k <= order && nt.resonant && nt.source == crate::engine::ConstantSource::Default);

    let s_full = SeriesEvaluator::from_expansion(&expansion, n);
    let s0 = if symbolic_only { vec![0.0; n] } else { s_full.sum(protocol.t0)? };
    let y0 = initial_state(&protocol.initial, &s0)?;

    if !symbolic_only && resonant_pending {
        if !protocol.calibrate {
            let keys: Vec<String> = expansion
                .resonance_notes
                .iter()
                .filter(|nt| nt.k <= order && nt.resonant && nt.source == crate::engine::ConstantSource::Default)
                .map(|nt| format!("(k = {}, j = {})", nt.k, nt.j))
                .collect();
            return Err(Error::ResonanceUncalibrated(keys.join(", ")));
        }
        let (a, b) = protocol.calibration_window;
        let cal = calibrate_along(
            &spec,
            &expansion,
            &y0,
            protocol.t0,
            (protocol.t0 + a, protocol.t0 + b),
            200,
            &protocol.integrator,
        )?;
        expansion = cal.expansion;
        expansion.terms.truncate(order);
        calibration = cal.fits;
    }

    let mut records = Vec::with_capacity(order);
    let mut residual_orders = Vec::with_capacity(order);
    for m in 1..=order {
        residual_orders.push(engine.symbolic_residual(&expansion, m)?.leading_order);
    }
    let margin_for = |m: usize| -> (f64, Option<f64>, f64) {
        let mu = expansion.terms[m - 1].mu;
        let next = expansion.next_exponent(m);
        let margin = next.map_or(protocol.margin, |nx| (0.5 * (nx - mu)).min(protocol.margin));
        (mu, next, margin)
    };

    if symbolic_only {
        for m in 1..=order {
            let (mu, next, margin) = margin_for(m);
            let ok = residual_orders[m - 1] > mu;
            records.push(OrderRecord {
                order: m,
                predicted_exponent: mu,
                next_exponent: next,
                fitted_slope: None,
                slope_stderr: None,
                window: None,
                margin,
                threshold: -(mu + margin),
                residual_order: residual_orders[m - 1],
                verdict: if ok { Verdict::Pass } else { Verdict::Fail },
                note: Some(format!(
                    "ψ = L_{} grows too slowly to separate orders numerically; symbolic residual check only",
                    base.psi_depth().unwrap_or(0)
                )),
            });
        }
        let passed = records.iter().all(|r| r.verdict == Verdict::Pass);
        return Ok(Verification {
            report: VerificationReport {
                regime: spec.regime,
                m_star: spec.m_star,
                base,
                t_range: (protocol.t_start, protocol.t_max),
                samples: 0,
                rtol: protocol.integrator.rtol,
                atol: protocol.integrator.atol,
                initial_state: Vec::new(),
                symbolic_only: true,
                records,
                calibration,
                integrator_stats: IntegratorStats::default(),
                passed,
            },
            trace: Trace::default(),
            expansion,
        });
    }

    let (traj, series) = integrate_deviation(&spec, &engine, &expansion, &y0, protocol.t0, &times, &protocol.integrator)?;

    // Integration error relative to |v| leaks into each calibrated mode as a
    // constant error of about rtol·max|v ψ^{μ_k}|, which surfaces in every
    // r_M with M ≥ k as a term of that size times ψ^{-μ_k}.
    let resolution: Vec<(usize, f64, f64)> = calibration
        .iter()
        .map(|f| {
            let mu = expansion.terms[f.k - 1].mu;
            let c = f.constant.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let leak = traj
                .times
                .iter()
                .zip(&traj.states)
                .map(|(t, v)| norm(v) * base.psi(*t).map_or(0.0, |p| p.powf(mu)))
                .fold(0.0f64, f64::max);
            (f.k, mu, protocol.integrator.rtol * leak + CONSTANT_RESOLUTION * (1.0 + c))
        })
        .collect();
    let mut trace = Trace::default();
    for (t, v) in traj.times.iter().zip(&traj.states) {
        let vals = series.term_values(*t)?;
        // r_M = |v + Σ_{k>M} y_k|, accumulated from the top
        let mut acc = v.clone();
        let mut row = vec![0.0; order];
        for m in (1..=order).rev() {
            row[m - 1] = norm(&acc);
            for (x, y) in acc.iter_mut().zip(&vals[m - 1]) {
                *x += y;
            }
        }
        trace.times.push(*t);
        trace.psi.push(base.psi(*t)?);
        trace.remainders.push(row);
    }

    for m in 1..=order {
        let (mu, next, margin) = margin_for(m);
        let threshold = -(mu + margin);
        let all: Vec<(f64, f64)> = trace
            .times
            .iter()
            .zip(&trace.remainders)
            .map(|(t, r)| (*t, r[m - 1]))
            .collect();
        let resolvable = |&(t, r): &(f64, f64)| -> bool {
            let floor: f64 = resolution
                .iter()
                .filter(|(k, _, _)| *k <= m)
                .map(|(_, mu, amp)| amp * base.psi(t).map_or(f64::NAN, |p| p.powf(-mu)))
                .sum();
            r > FLOOR_FACTOR * floor
        };
        let samples: Vec<(f64, f64)> = all.iter().copied().filter(resolvable).collect();
        let dropped = all.len() - samples.len();
        let record = match decay_exponent_fit(&samples, base, protocol.window) {
            Ok(fit) => OrderRecord {
                order: m,
                predicted_exponent: mu,
                next_exponent: next,
                fitted_slope: Some(fit.slope),
                slope_stderr: Some(fit.stderr),
                window: Some(fit.t_window),
                margin,
                threshold,
                residual_order: residual_orders[m - 1],
                verdict: if fit.slope <= threshold + 2.0 * fit.stderr {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
                note: (dropped > 0).then(|| {
                    format!("{dropped} samples below the resolution of the calibrated constants excluded")
                }),
            },
            Err(Error::InsufficientSamples { got, .. }) => {
                let all_tiny = samples.iter().all(|(_, r)| *r <= crate::numeric::fit::REMAINDER_FLOOR);
                OrderRecord {
                    order: m,
                    predicted_exponent: mu,
                    next_exponent: next,
                    fitted_slope: None,
                    slope_stderr: None,
                    window: None,
                    margin,
                    threshold,
                    residual_order: residual_orders[m - 1],
                    verdict: if all_tiny { Verdict::Pass } else { Verdict::Fail },
                    note: Some(if all_tiny {
                        "remainder below the numerical floor at every sample".into()
                    } else {
                        format!("only {got} usable samples in the fit window")
                    }),
                }
            }
            Err(e) => return Err(e),
        };
        records.push(record);
    }
    let passed = records.iter().all(|r| r.verdict == Verdict::Pass);
    Ok(Verification {
        report: VerificationReport {
            regime: spec.regime,
            m_star: spec.m_star,
            base,
            t_range: (protocol.t_start, protocol.t_max),
            samples: trace.times.len(),
            rtol: protocol.integrator.rtol,
            atol: protocol.integrator.atol,
            initial_state: y0,
            symbolic_only: false,
            records,
            calibration,
            integrator_stats: traj.stats,
            passed,
        },
        trace,
        expansion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacings() {
        let mut p = VerifyProtocol::for_regime(Regime::Pow);
        p.samples = 4;
        let ts = p.sample_times().unwrap();
        assert_eq!(ts.len(), 4);
        assert!((ts[1] - 1e4).abs() < 1e-6 && (ts[2] - 1e5).abs() < 1e-5);
        p.spacing = Spacing::DoubleLog;
        let ts = p.sample_times().unwrap();
        let ll: Vec<f64> = ts.iter().map(|t| t.ln().ln()).collect();
        assert!(((ll[1] - ll[0]) - (ll[3] - ll[2])).abs() < 1e-12);
        p.t_start = 0.5;
        assert!(p.sample_times().is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let tr = Trace {
            times: vec![1.0],
            psi: vec![2.0],
            remainders: vec![vec![0.5, 0.25]],
        };
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,psi,r_1,r_2"));
        assert_eq!(
            lines.next(),
            Some("1.0000000000000000e0,2.0000000000000000e0,5.0000000000000000e-1,2.5000000000000000e-1")
        );
    }
}
