//! Dormand–Prince 5(4) with Hairer's continuous extension for output at
//! prescribed sample times.

use serde::Serialize;

use crate::engine::ProblemSpec;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nonlinear::{eval_truncated, HomogeneousTerm, MAX_DEGREE};
use crate::numeric::series::SeriesEvaluator;
use crate::numeric::Trajectory;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Error scale floor as a fraction of `‖y‖_∞`; 0 gives the usual
    /// componentwise scaling.
    pub norm_fraction: f64,
    /// Abort with [`Error::Diverged`] once `‖y‖_∞` exceeds this.
    pub divergence_bound: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Constant step size without error control.
    pub fixed_step: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-13,
            norm_fraction: 0.0,
            divergence_bound: 1e6,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
            fixed_step: None,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Stepper<F> {
    rhs: F,
    n: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl<F: FnMut(f64, &[f64], &mut [f64])> Stepper<F> {
    /// One trial step; fills `y_new`, `k[6]` and returns the scaled error.
    fn step(&mut self, t: f64, y: &[f64], h: f64, opts: &IntegratorOptions) -> f64 {
        let n = self.n;
        let stages: [(f64, &[f64]); 5] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
        ];
        for (s, (c, a)) in stages.iter().enumerate() {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, aj) in a.iter().enumerate() {
                    acc += aj * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            let (_, rest) = self.k.split_at_mut(s + 1);
            (self.rhs)(t + c * h, &self.tmp, &mut rest[0]);
        }
        for i in 0..n {
            self.y_new[i] = y[i]
                + h * (A71 * self.k[0][i] + A73 * self.k[2][i] + A74 * self.k[3][i] + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        let (head, tail) = self.k.split_at_mut(6);
        (self.rhs)(t + h, &self.y_new, &mut tail[0]);
        let k7 = &tail[0];
        let scale_floor = opts.norm_fraction * inf_norm(y).max(inf_norm(&self.y_new));
        let mut sum = 0.0;
        for i in 0..n {
            self.err[i] = h
                * (E1 * head[0][i] + E3 * head[2][i] + E4 * head[3][i] + E5 * head[4][i] + E6 * head[5][i]
                    + E7 * k7[i]);
            let sk = opts.atol + opts.rtol * y[i].abs().max(self.y_new[i].abs()).max(scale_floor);
            sum += (self.err[i] / sk).powi(2);
        }
        (sum / n as f64).sqrt()
    }

    /// Coefficients of the continuous extension over `[t, t + h]`.
    fn dense(&self, y: &[f64], h: f64) -> [Vec<f64>; 5] {
        let n = self.n;
        let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * self.k[0][i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * self.k[6][i] - bspl;
            r[4][i] = h
                * (D1 * self.k[0][i] + D3 * self.k[2][i] + D4 * self.k[3][i] + D5 * self.k[4][i]
                    + D6 * self.k[5][i]
                    + D7 * self.k[6][i]);
        }
        r
    }
}

fn interpolate(r: &[Vec<f64>; 5], theta: f64) -> Vec<f64> {
    let th1 = 1.0 - theta;
    (0..r[0].len())
        .map(|i| r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i]))))
        .collect()
}

/// Integrates `y' = rhs(t, y)` from `(t0, y0)` and samples the solution at
/// `sample_times` (increasing, all `≥ t0`).
pub fn integrate_rhs<F>(mut rhs: F, y0: &[f64], t0: f64, sample_times: &[f64], opts: &IntegratorOptions) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if sample_times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Validation("sample times must be strictly increasing".into()));
    }
    if let Some(&first) = sample_times.first() {
        if first < t0 {
            return Err(Error::Validation(format!("first sample {first} precedes t0 = {t0}")));
        }
    }
    let n = y0.len();
    let mut traj = Trajectory::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut next = 0;
    while next < sample_times.len() && sample_times[next] == t0 {
        traj.times.push(t0);
        traj.states.push(y.clone());
        next += 1;
    }
    let Some(&t_end) = sample_times.last() else {
        return Ok(traj);
    };
    if next == sample_times.len() {
        return Ok(traj);
    }
    let mut k0 = vec![0.0; n];
    rhs(t, &y, &mut k0);
    let mut st = Stepper {
        rhs,
        n,
        k: std::array::from_fn(|_| vec![0.0; n]),
        tmp: vec![0.0; n],
        y_new: vec![0.0; n],
        err: vec![0.0; n],
    };
    st.k[0] = k0;

    let mut h = match opts.fixed_step {
        Some(h) => h,
        None => initial_step(&mut st, t, &y, t_end - t, opts),
    };
    let mut fac_old: f64 = 1e-4;
    let mut rejected_last = false;
    let diverged = |traj: Trajectory, t: f64, norm: f64| Error::Diverged {
        t,
        norm,
        partial: Box::new(traj),
    };

    while t < t_end {
        if traj.stats.steps + traj.stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= t_end || (t_end - t - h) < 1e-12 * t_end.abs().max(1.0);
        if last {
            h = t_end - t;
        }
        let err = st.step(t, &y, h, opts);
        let accept = opts.fixed_step.is_some() || err <= 1.0;
        if !err.is_finite() && opts.fixed_step.is_none() {
            h *= 0.1;
            traj.stats.rejected += 1;
            if h < opts.h_min {
                return Err(Error::StepUnderflow { t, h });
            }
            continue;
        }
        if accept {
            let norm = inf_norm(&st.y_new);
            let dense = st.dense(&y, h);
            let t_new = if last { t_end } else { t + h };
            while next < sample_times.len() && sample_times[next] <= t_new {
                let theta = ((sample_times[next] - t) / h).clamp(0.0, 1.0);
                traj.times.push(sample_times[next]);
                traj.states.push(if sample_times[next] == t_new {
                    st.y_new.clone()
                } else {
                    interpolate(&dense, theta)
                });
                next += 1;
            }
            traj.stats.steps += 1;
            traj.stats.max_error = traj.stats.max_error.max(err);
            t = t_new;
            y.copy_from_slice(&st.y_new);
            let k7 = std::mem::take(&mut st.k[6]);
            st.k[0] = k7;
            st.k[6] = vec![0.0; n];
            if !(norm <= opts.divergence_bound) {
                return Err(diverged(traj, t, norm));
            }
            if opts.fixed_step.is_none() {
                let fac11 = err.max(1e-16).powf(0.17);
                let mut fac = fac11 / fac_old.powf(0.04);
                fac = (fac / 0.9).clamp(0.1, 5.0);
                let mut h_new = (h / fac).min(opts.h_max);
                if rejected_last {
                    h_new = h_new.min(h);
                }
                fac_old = err.max(1e-4);
                rejected_last = false;
                h = h_new;
            }
        } else {
            let fac11 = err.powf(0.17);
            h /= (fac11 / 0.9).min(5.0);
            traj.stats.rejected += 1;
            rejected_last = true;
            if h < opts.h_min {
                return Err(Error::StepUnderflow { t, h });
            }
        }
    }
    Ok(traj)
}

fn initial_step<F: FnMut(f64, &[f64], &mut [f64])>(
    st: &mut Stepper<F>,
    t: f64,
    y: &[f64],
    span: f64,
    opts: &IntegratorOptions,
) -> f64 {
    let n = st.n;
    let floor = opts.norm_fraction * inf_norm(y);
    let sk: Vec<f64> = y.iter().map(|x| opts.atol + opts.rtol * x.abs().max(floor)).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sk).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let dnf = rms(&st.k[0]);
    let dny = rms(y);
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
    h = h.min(opts.h_max).min(span);
    let y1: Vec<f64> = y.iter().zip(&st.k[0]).map(|(a, b)| a + h * b).collect();
    let mut f1 = vec![0.0; n];
    (st.rhs)(t + h, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(&st.k[0]).map(|(a, b)| a - b).collect();
    let der2 = rms(&diff) / h;
    let der = der2.max(dnf);
    let h1 = if der <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der).powf(0.2)
    };
    (100.0 * h).min(h1).min(opts.h_max).min(span).max(opts.h_min)
}

/// Right-hand side `-Ay + G(y) + f(t)` of a problem, with `f` evaluated
/// from its term list.
pub struct SystemRhs {
    matrix: Matrix<f64>,
    nonlinearity: Vec<HomogeneousTerm<f64>>,
    forcing: SeriesEvaluator,
}

impl SystemRhs {
    pub fn new<S: Scalar>(spec: &ProblemSpec<S>) -> Self {
        let spec = spec.to_f64();
        SystemRhs {
            forcing: SeriesEvaluator::from_forcing(&spec),
            matrix: spec.matrix_a,
            nonlinearity: spec.nonlinearity,
        }
    }

    pub fn guard(&self) -> f64 {
        self.forcing.guard()
    }

    pub fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let g = eval_truncated(&self.nonlinearity, y, MAX_DEGREE);
        let f = self.forcing.sum(t).unwrap_or_else(|_| vec![f64::NAN; y.len()]);
        for (i, o) in out.iter_mut().enumerate() {
            let ay: f64 = self.matrix[i].iter().zip(y).map(|(a, x)| a * x).sum();
            *o = -ay + g[i] + f[i];
        }
    }
}

/// Integrates the problem's own equation.
pub fn integrate<S: Scalar>(
    spec: &ProblemSpec<S>,
    y0: &[f64],
    t0: f64,
    sample_times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if y0.len() != spec.dimension {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension,
            got: y0.len(),
        });
    }
    let rhs = SystemRhs::new(spec);
    let guard = rhs.guard();
    if !(t0 >= guard) {
        return Err(Error::Validation(format!("t0 = {t0} is inside the domain guard (needs t0 ≥ {guard})")));
    }
    integrate_rhs(|t, y, out| rhs.eval(t, y, out), y0, t0, sample_times, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ForcingTerm;
    use crate::exponents::Regime;
    use crate::genpoly::GenPoly;

    fn linear(a: f64) -> ProblemSpec<f64> {
        let f = ForcingTerm {
            exponent: 1.0,
            poly: GenPoly::zero(1, 1),
        };
        ProblemSpec::new(vec![vec![a]], vec![], Regime::Exp, 0, vec![f])
    }

    #[test]
    fn linear_decay() {
        let tr = integrate(&linear(1.0), &[1.0], 0.0, &[0.5, 1.0], &IntegratorOptions::default()).unwrap();
        assert!((tr.states[1][0] - (-1.0f64).exp()).abs() < 1e-9);
        assert!((tr.states[0][0] - (-0.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_stays_put() {
        let tr = integrate(&linear(1.0), &[0.0], 0.0, &[1.0, 5.0], &IntegratorOptions::default()).unwrap();
        assert!(tr.states.iter().all(|s| s[0] == 0.0));
    }

    #[test]
    fn dense_output_is_accurate() {
        let times: Vec<f64> = (1..=200).map(|i| i as f64 * 0.05).collect();
        let tr = integrate(&linear(1.0), &[1.0], 0.0, &times, &IntegratorOptions::default()).unwrap();
        for (t, y) in tr.times.iter().zip(&tr.states) {
            assert!((y[0] - (-t).exp()).abs() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn fifth_order_under_step_halving() {
        let err = |h: f64| {
            let opts = IntegratorOptions {
                fixed_step: Some(h),
                ..Default::default()
            };
            let tr = integrate_rhs(
                |t, y, out| out[0] = -y[0] + t.cos(),
                &[1.0],
                0.0,
                &[2.0],
                &opts,
            )
            .unwrap();
            // y = (cos t + sin t)/2 + e^{-t}/2
            let exact = (2f64.cos() + 2f64.sin()) / 2.0 + (-2f64).exp() / 2.0;
            (tr.states[0][0] - exact).abs()
        };
        let e1 = err(0.2);
        let e2 = err(0.1);
        assert!(e1 / e2 >= 16.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn blow_up_is_reported() {
        let res = integrate_rhs(|_, y, out| out[0] = y[0] * y[0], &[1.0], 0.0, &[0.5, 2.0], &IntegratorOptions::default());
        match res {
            Err(Error::Diverged { t, partial, .. }) => {
                assert!(t < 1.0);
                assert_eq!(partial.times, vec![0.5]);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
