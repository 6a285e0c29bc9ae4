//! Iterated logarithms `L_0 = t, L_{m+1} = ln L_m` and iterated
//! exponentials `E_0 = t, E_{m+1} = exp E_m`.

use crate::error::{Error, Result};

/// Margin added to `E_m(0)` by the domain guard.
pub const GUARD_MARGIN: f64 = 1e-9;

pub fn iterated_exp(m: usize, t: f64) -> f64 {
    (0..m).fold(t, |x, _| x.exp())
}

/// `E_m(0)`, the point where `L_m` crosses zero.
pub fn guard_point(m: usize) -> f64 {
    if m == 0 {
        0.0
    } else {
        iterated_exp(m, 0.0)
    }
}

fn check_guard(m: usize, t: f64) -> Result<()> {
    let bound = guard_point(m);
    if !(t > bound + GUARD_MARGIN) {
        return Err(Error::DomainGuard { m, t, bound });
    }
    Ok(())
}

/// `L_m(t)`, requiring `t > E_m(0)` so that the result is positive.
pub fn iterated_log(m: usize, t: f64) -> Result<f64> {
    check_guard(m, t)?;
    Ok((0..m).fold(t, |x, _| x.ln()))
}

/// `(L_start(t), ..., L_{start+count-1}(t))`, all positive.
pub fn log_tower(start: usize, count: usize, t: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    check_guard(start + count - 1, t)?;
    let mut x = t;
    for _ in 0..start {
        x = x.ln();
    }
    let mut out = Vec::with_capacity(count);
    out.push(x);
    for _ in 1..count {
        x = x.ln();
        out.push(x);
    }
    Ok(out)
}

/// `ln L_m(t)`, computed without forming `L_m` when `m = 0`.
pub fn log_of_iterated_log(m: usize, t: f64) -> Result<f64> {
    if m == 0 {
        if !(t > 0.0) {
            return Err(Error::DomainGuard { m, t, bound: 0.0 });
        }
        return Ok(t.ln());
    }
    Ok(iterated_log(m, t)?.ln())
}

/// `L_m'(t) = 1 / (t L_1(t) ... L_{m-1}(t))`.
pub fn iterated_log_derivative(m: usize, t: f64) -> Result<f64> {
    if m == 0 {
        return Ok(1.0);
    }
    let tower = log_tower(0, m, t)?;
    Ok(1.0 / tower.iter().product::<f64>())
}
