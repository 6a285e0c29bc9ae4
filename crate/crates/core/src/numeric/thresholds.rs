//! Smallness thresholds for global existence and the a priori decay rate.

use serde::Serialize;

use crate::engine::ProblemSpec;
use crate::error::Result;
use crate::exponents::Regime;
use crate::nonlinear::quadratic_bound;
use crate::scalar::Scalar;

/// Radius on which `|G(y)| ≤ c_* |y|^2` is estimated unless told otherwise.
pub const DEFAULT_R_STAR: f64 = 1.0;
/// Lower cap for `c_*`, hit when the nonlinearity vanishes.
pub const C_STAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct Thresholds {
    pub lambda_1: f64,
    pub c_star: f64,
    /// `c_*` was raised to [`C_STAR_FLOOR`].
    pub c_star_capped: bool,
    pub r_star: f64,
    /// Condition number of the eigenvector matrix.
    pub condition: f64,
    pub c0: f64,
    /// Bound on `|y(0)|`.
    pub epsilon_0: f64,
    /// Bound on `sup |f|`.
    pub epsilon_1: f64,
}

/// `C_0 = min(r_*, λ_1/(4c_*))`, `ε_0 = min(C_0/2, c_*)`,
/// `ε_1 = λ_1 C_0 / (2√2)`, both thresholds divided by `cond(S)^2` when `A`
/// is not normal.
///
/// With `G = 0` the `c_*` branch of `ε_0` is dropped: it only feeds the
/// decay estimate, and keeping it would collapse `ε_0` to the cap.
pub fn smallness_thresholds<S: Scalar>(spec: &ProblemSpec<S>, r_star: f64) -> Result<Thresholds> {
    let dec = spec.validate()?;
    let lambda_1 = dec.smallest_eigenvalue();
    let bound = quadratic_bound(&spec.nonlinearity, r_star);
    let capped = bound.c_star < C_STAR_FLOOR;
    let c_star = bound.c_star.max(C_STAR_FLOOR);
    let c0 = r_star.min(lambda_1 / (4.0 * c_star));
    let mut epsilon_0 = if capped { c0 / 2.0 } else { (c0 / 2.0).min(c_star) };
    let mut epsilon_1 = lambda_1 * c0 / (2.0 * 2f64.sqrt());
    let condition = dec.condition.max(1.0);
    if condition > 1.0 + 1e-9 {
        epsilon_0 /= condition * condition;
        epsilon_1 /= condition * condition;
    }
    Ok(Thresholds {
        lambda_1,
        c_star,
        c_star_capped: capped,
        r_star,
        condition,
        c0,
        epsilon_0,
        epsilon_1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriDecay {
    /// `y = O(ψ^{-exponent})`.
    pub exponent: f64,
    /// The bound carries an extra factor `t` (exponential regime with
    /// `α = λ_1`).
    pub t_factor: bool,
}

/// First-order decay predicted from the smallest forcing exponent `α`.
pub fn apriori_decay<S: Scalar>(spec: &ProblemSpec<S>) -> Result<AprioriDecay> {
    let dec = spec.validate()?;
    let alpha = spec.forcing[0].exponent.to_f64();
    Ok(match spec.regime {
        Regime::Exp => {
            let lambda = dec.smallest_eigenvalue();
            AprioriDecay {
                exponent: lambda.min(alpha),
                t_factor: (lambda - alpha).abs() < 1e-9,
            }
        }
        _ => AprioriDecay {
            exponent: alpha,
            t_factor: false,
        },
    })
}
