use serde::Serialize;

use crate::error::Result;
use crate::exponents::Regime;
use crate::numeric::iterlog;

/// Base functions of a regime: the primary scale `ψ` and the secondary
/// variables fed to the coefficient polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Base {
    /// `ψ = e^t`, variable `t`.
    Exp,
    /// `ψ = t`, variable `ln t`.
    Pow,
    /// `ψ = L_{m_star}`, variable `L_{n_star}`.
    Log { m_star: usize, n_star: usize },
    /// `ψ = L_{m_star}`, variables `L_{m_star+1}, L_{m_star+2}, ...`.
    IterLog { m_star: usize },
    /// `ψ = t`, variables `L_1, L_2, ...`.
    Mixed,
}

impl Base {
    pub fn new(regime: Regime, m_star: usize, n_star: Option<usize>) -> Self {
        match regime {
            Regime::Exp => Base::Exp,
            Regime::Pow => Base::Pow,
            Regime::Log => Base::Log {
                m_star,
                n_star: n_star.unwrap_or(m_star + 1),
            },
            Regime::IterLog => Base::IterLog { m_star },
            Regime::Mixed => Base::Mixed,
        }
    }

    /// Depth `m` of `ψ = L_m` (`None` for the exponential base).
    pub fn psi_depth(self) -> Option<usize> {
        match self {
            Base::Exp => None,
            Base::Pow | Base::Mixed => Some(0),
            Base::Log { m_star, .. } | Base::IterLog { m_star } => Some(m_star),
        }
    }

    /// Iterated-log depth of each secondary variable, for `arity` variables.
    pub fn secondary_depths(self, arity: usize) -> Option<Vec<usize>> {
        match self {
            Base::Exp => None,
            Base::Pow => Some(vec![1]),
            Base::Log { n_star, .. } => Some(vec![n_star]),
            Base::IterLog { m_star } => Some((m_star + 1..=m_star + arity).collect()),
            Base::Mixed => Some((1..=arity).collect()),
        }
    }

    /// `ln ψ(t)`, the abscissa for decay fits.
    pub fn ln_psi(self, t: f64) -> Result<f64> {
        match self.psi_depth() {
            None => Ok(t),
            Some(m) => iterlog::log_of_iterated_log(m, t),
        }
    }

    /// `ψ(t)` (may overflow to infinity for the exponential base).
    pub fn psi(self, t: f64) -> Result<f64> {
        match self.psi_depth() {
            None => Ok(t.exp()),
            Some(m) => iterlog::iterated_log(m, t),
        }
    }

    /// Values of the secondary variables at `t`.
    pub fn secondaries(self, t: f64, arity: usize) -> Result<Vec<f64>> {
        match self.secondary_depths(arity) {
            None => Ok(vec![t]),
            Some(depths) => depths
                .into_iter()
                .map(|d| iterlog::iterated_log(d, t))
                .collect(),
        }
    }

    /// Smallest admissible time for polynomials of the given arity.
    pub fn guard(self, arity: usize) -> f64 {
        let deepest = self
            .secondary_depths(arity)
            .map(|d| d.into_iter().max().unwrap_or(0))
            .into_iter()
            .chain(self.psi_depth())
            .max();
        match deepest {
            None => f64::NEG_INFINITY,
            Some(m) => iterlog::guard_point(m) + iterlog::GUARD_MARGIN,
        }
    }
}
