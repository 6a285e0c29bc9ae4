//! `s_M' + A s_M - G(s_M) - f` in the graded algebra of a regime: a finite
//! list of terms `poly(z) ψ^{-exponent}`, optionally times `L_rate'(t)`.
//!
//! `G(s_M)` is expanded here by multiplying out each monomial `y^β` of the
//! nonlinearity directly, independently of the polarized forms used by the
//! recursions.

use crate::error::{Error, Result};
use crate::exponents::Regime;
use crate::genpoly::GenPoly;
use crate::scalar::Scalar;

use super::{Expansion, ProblemSpec};

/// Relative floor under which float residual coefficients count as roundoff.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ResidualTerm<S> {
    pub exponent: S,
    /// When set, the term carries the extra factor `L_rate'(t)`, which decays
    /// faster than any power of `ψ`.
    pub rate: Option<usize>,
    pub poly: GenPoly<S>,
}

#[derive(Debug, Clone)]
pub struct Residual<S> {
    pub terms: Vec<ResidualTerm<S>>,
    /// Smallest surviving algebraic exponent (`+∞` when none survive).
    pub leading_order: f64,
    pub leading_exponent: Option<S>,
}

struct Entry<S> {
    exponent: S,
    rate: Option<usize>,
    poly: GenPoly<S>,
    scale: f64,
}

struct Graded<S> {
    entries: Vec<Entry<S>>,
}

impl<S: Scalar> Graded<S> {
    fn add(&mut self, exponent: S, rate: Option<usize>, poly: GenPoly<S>) -> Result<()> {
        if poly.is_zero() {
            return Ok(());
        }
        let scale = poly.max_coeff();
        match self
            .entries
            .iter_mut()
            .find(|e| e.rate == rate && e.exponent.approx_eq(&exponent))
        {
            Some(e) => {
                e.poly = e.poly.add_embedded(&poly)?;
                e.scale = e.scale.max(scale);
            }
            None => self.entries.push(Entry {
                exponent,
                rate,
                poly,
                scale,
            }),
        }
        Ok(())
    }
}

type Series<S> = Vec<(S, GenPoly<S>)>;

fn series_mul<S: Scalar>(a: &Series<S>, b: &Series<S>) -> Result<Series<S>> {
    let mut out: Series<S> = Vec::new();
    for (ea, pa) in a {
        for (eb, pb) in b {
            let e = ea.clone() + eb.clone();
            let p = GenPoly::scalar_multiply(pa, pb)?;
            match out.iter_mut().find(|(x, _)| x.approx_eq(&e)) {
                Some((_, acc)) => *acc = acc.add(&p)?,
                None => out.push((e, p)),
            }
        }
    }
    Ok(out)
}

pub(super) fn symbolic_residual<S: Scalar>(
    spec: &ProblemSpec<S>,
    exp: &Expansion<S>,
    order: usize,
) -> Result<Residual<S>> {
    if order > exp.terms.len() {
        return Err(Error::TruncationTooDeep {
            order,
            available: exp.terms.len(),
        });
    }
    let n = spec.dimension;
    let arity = exp.terms[..order]
        .iter()
        .map(|t| t.q.arity())
        .chain(spec.forcing.iter().map(|f| f.poly.arity()))
        .max()
        .unwrap_or(1);
    let terms: Vec<(S, GenPoly<S>)> = exp.terms[..order]
        .iter()
        .map(|t| Ok((t.mu.clone(), t.q.embed(arity)?)))
        .collect::<Result<_>>()?;

    let mut acc = Graded { entries: Vec::new() };

    // time derivative of each ψ^{-μ} q(z(t))
    for (mu, q) in &terms {
        let one = S::one();
        match spec.regime {
            Regime::Exp => {
                acc.add(mu.clone(), None, q.partial_derivative(0)?.sub(&q.scale(mu))?)?;
            }
            Regime::Pow | Regime::Mixed => {
                let mut d = q.scale(&-mu.clone());
                for j in 0..arity {
                    let mut powers = vec![S::zero(); arity];
                    for p in powers.iter_mut().take(j) {
                        *p = -one.clone();
                    }
                    d = d.add(&q.partial_derivative(j)?.shift(&powers, &one))?;
                }
                acc.add(mu.clone() + one, None, d)?;
            }
            Regime::Log => {
                acc.add(mu.clone() + one, Some(spec.m_star), q.scale(&-mu.clone()))?;
                acc.add(mu.clone(), Some(spec.secondary_depth()), q.partial_derivative(0)?)?;
            }
            Regime::IterLog => {
                acc.add(mu.clone() + one, Some(spec.m_star), q.scale(&-mu.clone()))?;
                for j in 0..arity {
                    acc.add(mu.clone(), Some(spec.m_star + 1 + j), q.partial_derivative(j)?)?;
                }
            }
        }
    }

    // A s_M
    for (mu, q) in &terms {
        acc.add(mu.clone(), None, q.apply_matrix(&spec.matrix_a))?;
    }

    // -G(s_M), monomial by monomial from the component series
    let components: Vec<Series<S>> = (0..n)
        .map(|r| {
            terms
                .iter()
                .map(|(mu, q)| (mu.clone(), q.component(r)))
                .filter(|(_, p)| !p.is_zero())
                .collect()
        })
        .collect();
    let mut powers: Vec<Vec<Series<S>>> = components
        .iter()
        .map(|c| vec![vec![(S::zero(), GenPoly::constant(arity, vec![S::one()]))], c.clone()])
        .collect();
    for term in &spec.nonlinearity {
        for (beta, coeff) in term.monomials() {
            let mut prod: Series<S> = vec![(S::zero(), GenPoly::constant(arity, vec![S::one()]))];
            for (r, &b) in beta.iter().enumerate() {
                while powers[r].len() <= b as usize {
                    let next = series_mul(powers[r].last().unwrap(), &components[r])?;
                    powers[r].push(next);
                }
                prod = series_mul(&prod, &powers[r][b as usize])?;
            }
            for (e, p) in prod {
                acc.add(e, None, p.times_vector(coeff)?.neg())?;
            }
        }
    }

    // -f
    for f in &spec.forcing {
        acc.add(f.exponent.clone(), None, f.poly.embed(arity)?.neg())?;
    }

    let mut out = Vec::new();
    for e in acc.entries {
        let poly = e.poly.pruned_below(RESIDUAL_FLOOR * (1.0 + e.scale));
        if !poly.is_zero() {
            out.push(ResidualTerm {
                exponent: e.exponent,
                rate: e.rate,
                poly,
            });
        }
    }
    out.sort_by(|a, b| {
        a.exponent
            .partial_cmp(&b.exponent)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.rate.cmp(&b.rate))
    });
    let leading_exponent = out
        .iter()
        .filter(|t| t.rate.is_none())
        .map(|t| t.exponent.clone())
        .next();
    Ok(Residual {
        terms: out,
        leading_order: leading_exponent.as_ref().map_or(f64::INFINITY, Scalar::to_f64),
        leading_exponent,
    })
}
