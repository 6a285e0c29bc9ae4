//! Recovers the free constants of resonant exponential-regime terms from a
//! computed trajectory.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::engine::{ConstantSource, Engine, Expansion, ProblemSpec, ResonanceConstants};
use crate::genpoly::GenPoly;
use crate::numeric::integrate::IntegratorOptions;
use crate::numeric::verify::integrate_deviation;
use crate::error::{Error, Result};
use crate::numeric::series::SeriesEvaluator;
use crate::numeric::Trajectory;
use crate::scalar::Scalar;

/// Fits with a larger condition number are rejected.
pub const MAX_FIT_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationFit {
    pub k: usize,
    pub j: usize,
    pub constant: Vec<f64>,
    /// RMS of the regression residual.
    pub residual_rms: f64,
    /// Largest gap between fitted and predicted non-constant coefficients.
    pub coefficient_gap: f64,
    pub condition: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub constants: ResonanceConstants<f64>,
    pub expansion: Expansion<f64>,
    pub fits: Vec<CalibrationFit>,
}

/// Least-squares polynomial of degree `deg` through `(t, w)`, on a centered
/// and scaled abscissa. Returns monomial coefficients in `t`, the residual
/// RMS and the design-matrix condition number.
fn poly_fit(ts: &[f64], ws: &[f64], deg: usize) -> Result<(Vec<f64>, f64, f64)> {
    let n = ts.len();
    let center = ts.iter().sum::<f64>() / n as f64;
    let half = ts.iter().map(|t| (t - center).abs()).fold(0.0, f64::max).max(1e-300);
    let design = DMatrix::from_fn(n, deg + 1, |i, p| ((ts[i] - center) / half).powi(p as i32));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_FIT_CONDITION) {
        return Err(Error::IllConditionedFit(condition));
    }
    let rhs = DVector::from_column_slice(ws);
    let coef = svd.solve(&rhs, 0.0).map_err(|e| Error::Format(e.to_string()))?;
    let fitted = &design * &coef;
    let rms = ((&fitted - &rhs).norm_squared() / n as f64).sqrt();
    // expand Σ c_p ((t - m)/s)^p into powers of t
    let mut mono = vec![0.0; deg + 1];
    for (p, c) in coef.iter().enumerate() {
        let scale = c / half.powi(p as i32);
        let mut binom = 1.0;
        for i in 0..=p {
            // coefficient of t^i in (t - m)^p
            mono[i] += scale * binom * (-center).powi((p - i) as i32);
            binom = binom * (p - i) as f64 / (i + 1) as f64;
        }
    }
    Ok((mono, rms, condition))
}

/// For each resonant `(k, j)` whose constant is still the default, regresses
/// `e^{μ_k t} R_j (y(t) - s_{k-1}(t))` on polynomials of the degree of
/// `R_j q_k` over samples with `t` in `window` and takes the intercept.
/// Orders are processed in increasing `k`, each using the constants found
/// before it.
pub fn calibrate_resonance<S: Scalar>(
    spec: &ProblemSpec<S>,
    exp: &Expansion<S>,
    traj: &Trajectory,
    window: (f64, f64),
) -> Result<Calibration> {
    let spec = spec.to_f64();
    let engine = Engine::new(spec.clone())?;
    let order = exp.order();
    let mut constants = spec.resonance_constants.clone();
    let mut free: Vec<(usize, usize)> = exp
        .resonance_notes
        .iter()
        .filter(|n| n.resonant && n.source == ConstantSource::Default && n.k <= order)
        .map(|n| (n.k, n.j))
        .collect();
    free.sort_unstable();
    if free.is_empty() {
        return Ok(Calibration {
            constants,
            expansion: exp.to_f64(),
            fits: Vec::new(),
        });
    }
    let samples: Vec<(f64, &Vec<f64>)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, y)| (*t, y))
        .collect();
    let projections = &engine.spectral().projections;
    let n = spec.dimension;
    let mut fits = Vec::new();
    for &(k, j) in &free {
        let current = engine.expand_type1(order, Some(&constants))?;
        let series = SeriesEvaluator::from_expansion(&current, n);
        let term = &current.terms[k - 1];
        let mu = term.mu;
        let r = &projections[j - 1];
        let rq = term.q.apply_matrix(r);
        let deg = rq.degree()?.unwrap_or(0);
        if samples.len() < deg + 2 {
            return Err(Error::InsufficientSamples {
                needed: deg + 2,
                got: samples.len(),
            });
        }
        let ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let mut ws: Vec<Vec<f64>> = vec![Vec::with_capacity(ts.len()); n];
        for &(t, y) in &samples {
            let vals = series.term_values(t)?;
            let mut diff = y.clone();
            for v in &vals[..k - 1] {
                for (d, x) in diff.iter_mut().zip(v) {
                    *d -= x;
                }
            }
            let weight = (mu * t).exp();
            for (row, w) in r.iter().zip(ws.iter_mut()) {
                w.push(weight * row.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>());
            }
        }
        let (constant, fit) = regress_component(k, j, &ts, &ws, deg, &rq)?;
        fits.push(fit);
        constants.insert((k, j), constant);
    }
    let mut expansion = engine.expand_type1(order, Some(&constants))?;
    for note in &mut expansion.resonance_notes {
        if free.contains(&(note.k, note.j)) {
            note.source = ConstantSource::Calibrated;
        }
    }
    Ok(Calibration {
        constants,
        expansion,
        fits,
    })
}

/// Fits each component of `ws` by a polynomial of degree `deg` in `t` and
/// returns the intercepts, with the gap to the non-constant coefficients
/// predicted by `rq`.
fn regress_component(
    k: usize,
    j: usize,
    ts: &[f64],
    ws: &[Vec<f64>],
    deg: usize,
    rq: &GenPoly<f64>,
) -> Result<(Vec<f64>, CalibrationFit)> {
    let predicted = rq.dense()?;
    let n = ws.len();
    let mut constant = vec![0.0; n];
    let mut rms: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let mut condition: f64 = 1.0;
    for c in 0..n {
        let (coef, res, cond) = poly_fit(ts, &ws[c], deg)?;
        constant[c] = coef[0];
        rms = rms.max(res);
        condition = condition.max(cond);
        for (p, v) in coef.iter().enumerate().skip(1) {
            let want = predicted.get(p).map_or(0.0, |row| row[c]);
            gap = gap.max((v - want).abs());
        }
    }
    let fit = CalibrationFit {
        k,
        j,
        constant: constant.clone(),
        residual_rms: rms,
        coefficient_gap: gap,
        condition,
        samples: ts.len(),
    };
    Ok((constant, fit))
}

fn pending(exp: &Expansion<f64>) -> Vec<(usize, usize)> {
    let order = exp.order();
    let mut free: Vec<(usize, usize)> = exp
        .resonance_notes
        .iter()
        .filter(|n| n.resonant && n.source == ConstantSource::Default && n.k <= order)
        .map(|n| (n.k, n.j))
        .collect();
    free.sort_unstable();
    free
}

/// Largest number of Newton iterations in [`calibrate_along`].
pub const MAX_NEWTON_STEPS: usize = 8;

/// Window means of `e^{μ_k t} R_j v(t)` for every free `(k, j)`, with `v`
/// the deviation from the expansion built on `constants`.
#[allow(clippy::too_many_arguments)]
fn intercepts(
    spec: &ProblemSpec<f64>,
    engine: &Engine<f64>,
    order: usize,
    free: &[(usize, usize)],
    constants: &ResonanceConstants<f64>,
    y0: &[f64],
    t0: f64,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<(Vec<f64>, Vec<CalibrationFit>)> {
    let current = engine.expand_type1(order, Some(constants))?;
    let (traj, _) = integrate_deviation(spec, engine, &current, y0, t0, times, opts)?;
    let projections = &engine.spectral().projections;
    let mut out = Vec::new();
    let mut fits = Vec::new();
    for &(k, j) in free {
        let term = &current.terms[k - 1];
        let r = &projections[j - 1];
        // only the constant of q_k is free, so v carries a constant error
        if traj.times.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: traj.times.len(),
            });
        }
        let ws: Vec<Vec<f64>> = r
            .iter()
            .map(|row| {
                traj.times
                    .iter()
                    .zip(&traj.states)
                    .map(|(t, v)| (term.mu * t).exp() * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
                    .collect()
            })
            .collect();
        let (step, fit) = regress_component(k, j, &traj.times, &ws, 0, &GenPoly::zero(1, spec.dimension))?;
        out.extend(step);
        fits.push(fit);
    }
    Ok((out, fits))
}

/// Calibrates the free resonant constants of the solution through `y0` at
/// `t0`. With `v = y - s_N` integrated for trial constants `c`, the
/// mean `F(c)` of `e^{μ_k t} R_j v` over `window` is the constant error; `F(c) = 0` is solved by Newton's method with a
/// finite-difference Jacobian and a least-squares step. `v` is integrated
/// directly, so late windows keep full relative precision.
pub fn calibrate_along(
    spec: &ProblemSpec<f64>,
    exp: &Expansion<f64>,
    y0: &[f64],
    t0: f64,
    window: (f64, f64),
    samples: usize,
    opts: &IntegratorOptions,
) -> Result<Calibration> {
    let engine = Engine::new(spec.clone())?;
    let order = exp.order();
    let free = pending(exp);
    let n = spec.dimension;
    let mut constants = spec.resonance_constants.clone();
    if free.is_empty() {
        return Ok(Calibration {
            constants,
            expansion: exp.clone(),
            fits: Vec::new(),
        });
    }
    let samples = samples.max(2);
    let times: Vec<f64> = (0..samples)
        .map(|i| window.0 + (window.1 - window.0) * i as f64 / (samples - 1) as f64)
        .collect();
    let pack = |x: &[f64]| -> ResonanceConstants<f64> {
        let mut c = constants.clone();
        for (i, key) in free.iter().enumerate() {
            c.insert(*key, x[i * n..(i + 1) * n].to_vec());
        }
        c
    };
    let eval = |x: &[f64]| intercepts(spec, &engine, order, &free, &pack(x), y0, t0, &times, opts);
    let dim = free.len() * n;
    let mut x = vec![0.0; dim];
    let (mut fx, mut fits) = eval(&x)?;
    for step in 0..MAX_NEWTON_STEPS {
        let size = fx.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        log::debug!("calibration step {step}: residual {size:e}");
        if size <= 1e-10 * scale {
            break;
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let h = 1e-6 * (1.0 + x[c].abs());
            let mut xh = x.clone();
            xh[c] += h;
            let (fh, _) = eval(&xh)?;
            for r in 0..dim {
                jac[(r, c)] = (fh[r] - fx[r]) / h;
            }
        }
        let svd = jac.svd(true, true);
        let tol = 1e-9 * svd.singular_values.max();
        let dx = svd
            .solve(&DVector::from_column_slice(&fx), tol)
            .map_err(|e| Error::Format(e.to_string()))?;
        for (xi, d) in x.iter_mut().zip(dx.iter()) {
            *xi -= d;
        }
        let next = eval(&x)?;
        fx = next.0;
        fits = next.1;
    }
    constants = pack(&x);
    for (fit, key) in fits.iter_mut().zip(&free) {
        fit.constant = constants[key].clone();
    }
    let mut expansion = engine.expand_type1(order, Some(&constants))?;
    for note in &mut expansion.resonance_notes {
        if free.contains(&(note.k, note.j)) {
            note.source = ConstantSource::Calibrated;
        }
    }
    Ok(Calibration {
        constants,
        expansion,
        fits,
    })
}
