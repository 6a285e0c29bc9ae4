//! Numeric evaluation of finite sums `Σ ψ(t)^{-μ} q(z(t))` in a regime's
//! base functions, optionally carrying an `L_r'(t)` factor per term.

use crate::engine::{Base, Expansion, ProblemSpec, Residual};
use crate::error::Result;
use crate::genpoly::GenPoly;
use crate::numeric::iterlog;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
struct Term {
    exponent: f64,
    rate: Option<usize>,
    poly: GenPoly<f64>,
}

#[derive(Debug, Clone)]
pub struct SeriesEvaluator {
    base: Base,
    arity: usize,
    codim: usize,
    terms: Vec<Term>,
}

impl SeriesEvaluator {
    fn build(base: Base, codim: usize, terms: Vec<Term>) -> Self {
        let arity = terms.iter().map(|t| t.poly.arity()).max().unwrap_or(1);
        SeriesEvaluator {
            base,
            arity,
            codim,
            terms,
        }
    }

    /// The truncations `s_1, ..., s_N` of an expansion, term by term.
    pub fn from_expansion<S: Scalar>(exp: &Expansion<S>, codim: usize) -> Self {
        let terms = exp
            .terms
            .iter()
            .map(|t| Term {
                exponent: t.mu.to_f64(),
                rate: None,
                poly: t.q.to_f64(),
            })
            .collect();
        Self::build(exp.base(), codim, terms)
    }

    pub fn from_forcing<S: Scalar>(spec: &ProblemSpec<S>) -> Self {
        let terms = spec
            .forcing
            .iter()
            .map(|f| Term {
                exponent: f.exponent.to_f64(),
                rate: None,
                poly: f.poly.to_f64(),
            })
            .collect();
        Self::build(Base::new(spec.regime, spec.m_star, spec.n_star), spec.dimension, terms)
    }

    pub fn from_residual<S: Scalar>(spec: &ProblemSpec<S>, res: &Residual<S>) -> Self {
        let terms = res
            .terms
            .iter()
            .map(|t| Term {
                exponent: t.exponent.to_f64(),
                rate: t.rate,
                poly: t.poly.to_f64(),
            })
            .collect();
        Self::build(Base::new(spec.regime, spec.m_star, spec.n_star), spec.dimension, terms)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn base(&self) -> Base {
        self.base
    }

    /// Smallest admissible time.
    pub fn guard(&self) -> f64 {
        let rates = self
            .terms
            .iter()
            .filter_map(|t| t.rate)
            .map(|r| iterlog::guard_point(r.saturating_sub(1)) + iterlog::GUARD_MARGIN);
        rates.fold(self.base.guard(self.arity), f64::max)
    }

    /// Value of every term at `t`.
    pub fn term_values(&self, t: f64) -> Result<Vec<Vec<f64>>> {
        let ln_psi = self.base.ln_psi(t)?;
        let z = self.base.secondaries(t, self.arity)?;
        self.terms
            .iter()
            .map(|term| {
                let mut w = (-term.exponent * ln_psi).exp();
                if let Some(r) = term.rate {
                    w *= iterlog::iterated_log_derivative(r, t)?;
                }
                let mut v = term.poly.evaluate_unchecked(&z[..term.poly.arity()]);
                v.iter_mut().for_each(|x| *x *= w);
                Ok(v)
            })
            .collect()
    }

    /// Sum of all terms at `t`.
    pub fn sum(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.codim];
        for v in self.term_values(t)? {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
        Ok(out)
    }
}
