//! Adaptive Gauss–Kronrod quadrature and convolution-kernel checks.

use crate::error::Result;
use crate::numeric::iterlog;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point
/// Gauss rule.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫_a^b f` to relative tolerance `rel_tol` by recursive bisection.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
        let (v, err) = whole;
        if err <= tol || depth >= 48 || (b - a) <= 1e-14 * a.abs().max(1.0) {
            return v;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        rec(f, a, m, left, 0.5 * tol, depth + 1) + rec(f, m, b, right, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    let whole = gk15(&f, a, b);
    let tol = rel_tol * whole.0.abs().max(1e-300);
    rec(&f, a, b, whole, tol, 0)
}

/// `∫_0^t e^{-σ(t-τ)} L_m(T_*+τ)^{-λ} dτ`.
pub fn kernel_convolution(m: usize, lambda: f64, sigma: f64, t_star: f64, t: f64) -> Result<f64> {
    iterlog::iterated_log(m, t_star)?;
    Ok(integrate_adaptive(
        |tau| (-sigma * (t - tau)).exp() * iterlog::iterated_log(m, t_star + tau).unwrap_or(f64::NAN).powf(-lambda),
        0.0,
        t,
        1e-10,
    ))
}

/// Largest ratio of the convolution to `L_m(T_*+t)^{-λ}` over the grid.
pub fn kernel_convolution_check(m: usize, lambda: f64, sigma: f64, t_star: f64, t_grid: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        let i = kernel_convolution(m, lambda, sigma, t_star, t)?;
        worst = worst.max(i / iterlog::iterated_log(m, t_star + t)?.powf(-lambda));
    }
    Ok(worst)
}

/// `σ ∫_0^t e^{-σ(t-τ)} Π_j L_{k_j}(T_*+τ)^{α_j} dτ` divided by
/// `Π_j L_{k_j}(T_*+t)^{α_j}`; tends to 1 as `t` grows.
pub fn log_product_ratio(depths: &[usize], alphas: &[f64], sigma: f64, t_star: f64, t: f64) -> Result<f64> {
    let weight = |s: f64| -> Result<f64> {
        let mut w = 1.0;
        for (&k, &a) in depths.iter().zip(alphas) {
            w *= iterlog::iterated_log(k, s)?.powf(a);
        }
        Ok(w)
    };
    weight(t_star)?;
    let i = integrate_adaptive(
        |tau| (-sigma * (t - tau)).exp() * weight(t_star + tau).unwrap_or(f64::NAN),
        0.0,
        t,
        1e-11,
    );
    Ok(sigma * i / weight(t_star + t)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate_adaptive(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand() {
        let v = integrate_adaptive(|x| (-1e3 * (1.0 - x)).exp(), 0.0, 1.0, 1e-10);
        assert!((v - (1.0 - (-1e3f64).exp()) / 1e3).abs() < 1e-12);
    }

    #[test]
    fn closed_form_convolution() {
        // λ = 0 (outside the supported range) still has a closed form, (1 - e^{-σt})/σ
        let v = kernel_convolution(0, 0.0, 2.0, 1.0, 3.0).unwrap();
        assert!((v - (1.0 - (-6f64).exp()) / 2.0).abs() < 1e-12);
    }
}
