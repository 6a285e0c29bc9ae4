//! Generalized polynomials: finite sums `Σ c_α z^α` with real exponent
//! vectors `α` and vector coefficients `c_α ∈ R^n`, in positive variables.
//!
//! Variables are indexed from 0. A single-variable polynomial with
//! nonnegative integer exponents is an ordinary polynomial.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::numeric::iterlog;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial<S> {
    pub powers: Vec<S>,
    pub coeff: Vec<S>,
}

/// Structural equality on canonical forms; see `approx_eq` for tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct GenPoly<S> {
    arity: usize,
    codim: usize,
    monomials: Vec<Monomial<S>>,
}

fn powers_eq<S: Scalar>(a: &[S], b: &[S]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.approx_eq(y))
}

fn powers_cmp<S: Scalar>(a: &[S], b: &[S]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if x.approx_eq(y) {
            continue;
        }
        return x.partial_cmp(y).unwrap_or(Ordering::Equal);
    }
    Ordering::Equal
}

fn add_into<S: Scalar>(acc: &mut [S], v: &[S]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a = a.clone() + b.clone();
    }
}

impl<S: Scalar> GenPoly<S> {
    pub fn zero(arity: usize, codim: usize) -> Self {
        GenPoly {
            arity,
            codim,
            monomials: Vec::new(),
        }
    }

    pub fn constant(arity: usize, coeff: Vec<S>) -> Self {
        let codim = coeff.len();
        Self::canonical(arity, codim, vec![Monomial {
            powers: vec![S::zero(); arity],
            coeff,
        }])
    }

    /// Scalar (codim 1) monomial `c z^powers`.
    pub fn scalar_monomial(powers: Vec<S>, c: S) -> Self {
        let arity = powers.len();
        Self::canonical(arity, 1, vec![Monomial {
            powers,
            coeff: vec![c],
        }])
    }

    pub fn monomial(powers: Vec<S>, coeff: Vec<S>) -> Self {
        let arity = powers.len();
        let codim = coeff.len();
        Self::canonical(arity, codim, vec![Monomial { powers, coeff }])
    }

    /// Single-variable polynomial from dense coefficients, lowest degree first.
    pub fn from_dense(coeffs: Vec<Vec<S>>, codim: usize) -> Self {
        let monos = coeffs
            .into_iter()
            .enumerate()
            .map(|(d, c)| Monomial {
                powers: vec![S::from_i64(d as i64)],
                coeff: c,
            })
            .collect();
        Self::canonical(1, codim, monos)
    }

    /// Builds a polynomial, checking shapes, merging equal exponents and
    /// pruning negligible coefficients.
    pub fn new(arity: usize, codim: usize, monomials: Vec<Monomial<S>>) -> Result<Self> {
        for m in &monomials {
            if m.powers.len() != arity {
                return Err(Error::ArityMismatch(arity, m.powers.len()));
            }
            if m.coeff.len() != codim {
                return Err(Error::CodimMismatch(codim, m.coeff.len()));
            }
        }
        Ok(Self::canonical(arity, codim, monomials))
    }

    fn canonical(arity: usize, codim: usize, raw: Vec<Monomial<S>>) -> Self {
        let mut merged: Vec<Monomial<S>> = Vec::with_capacity(raw.len());
        for m in raw {
            match merged.iter_mut().find(|e| powers_eq(&e.powers, &m.powers)) {
                Some(e) => add_into(&mut e.coeff, &m.coeff),
                None => merged.push(m),
            }
        }
        let scale = merged
            .iter()
            .flat_map(|m| m.coeff.iter())
            .fold(0.0f64, |acc, c| acc.max(c.to_f64().abs()));
        for m in merged.iter_mut() {
            for c in m.coeff.iter_mut() {
                if c.negligible(scale) {
                    *c = S::zero();
                }
            }
        }
        merged.retain(|m| m.coeff.iter().any(|c| !c.is_zero()));
        merged.sort_by(|a, b| powers_cmp(&a.powers, &b.powers));
        GenPoly {
            arity,
            codim,
            monomials: merged,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn monomials(&self) -> &[Monomial<S>] {
        &self.monomials
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.arity != other.arity {
            return Err(Error::ArityMismatch(self.arity, other.arity));
        }
        if self.codim != other.codim {
            return Err(Error::CodimMismatch(self.codim, other.codim));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let monos = self.monomials.iter().chain(&other.monomials).cloned().collect();
        Ok(Self::canonical(self.arity, self.codim, monos))
    }

    /// Adds after embedding both operands into the larger arity.
    pub fn add_embedded(&self, other: &Self) -> Result<Self> {
        let k = self.arity.max(other.arity);
        self.embed(k)?.add(&other.embed(k)?)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&-S::one())
    }

    pub fn scale(&self, s: &S) -> Self {
        let monos = self
            .monomials
            .iter()
            .map(|m| Monomial {
                powers: m.powers.clone(),
                coeff: m.coeff.iter().map(|c| c.clone() * s.clone()).collect(),
            })
            .collect();
        Self::canonical(self.arity, self.codim, monos)
    }

    /// Pads exponent vectors with zeros up to `target` variables.
    pub fn embed(&self, target: usize) -> Result<Self> {
        if target < self.arity {
            return Err(Error::ArityShrink {
                from: self.arity,
                to: target,
            });
        }
        if target == self.arity {
            return Ok(self.clone());
        }
        let monomials = self
            .monomials
            .iter()
            .map(|m| {
                let mut powers = m.powers.clone();
                powers.resize(target, S::zero());
                Monomial {
                    powers,
                    coeff: m.coeff.clone(),
                }
            })
            .collect();
        Ok(GenPoly {
            arity: target,
            codim: self.codim,
            monomials,
        })
    }

    /// `∂/∂z_j` for a 0-based variable index `j`.
    pub fn partial_derivative(&self, j: usize) -> Result<Self> {
        if j >= self.arity {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.arity,
            });
        }
        let monos = self
            .monomials
            .iter()
            .filter(|m| !m.powers[j].is_zero())
            .map(|m| {
                let a = m.powers[j].clone();
                let mut powers = m.powers.clone();
                powers[j] = a.clone() - S::one();
                Monomial {
                    powers,
                    coeff: m.coeff.iter().map(|c| c.clone() * a.clone()).collect(),
                }
            })
            .collect();
        Ok(Self::canonical(self.arity, self.codim, monos))
    }

    /// Product of a scalar-valued polynomial `s` with `p`.
    pub fn scalar_multiply(s: &GenPoly<S>, p: &GenPoly<S>) -> Result<Self> {
        if s.codim != 1 {
            return Err(Error::CodimMismatch(1, s.codim));
        }
        if s.arity != p.arity {
            return Err(Error::ArityMismatch(s.arity, p.arity));
        }
        let mut monos = Vec::with_capacity(s.len() * p.len());
        for a in &s.monomials {
            for b in &p.monomials {
                monos.push(Monomial {
                    powers: a.powers.iter().zip(&b.powers).map(|(x, y)| x.clone() + y.clone()).collect(),
                    coeff: b.coeff.iter().map(|c| c.clone() * a.coeff[0].clone()).collect(),
                });
            }
        }
        Ok(Self::canonical(p.arity, p.codim, monos))
    }

    /// Multiplies every monomial by `c z^powers` (scalar `c`).
    pub fn shift(&self, powers: &[S], c: &S) -> Self {
        let monos = self
            .monomials
            .iter()
            .map(|m| Monomial {
                powers: m.powers.iter().zip(powers).map(|(x, y)| x.clone() + y.clone()).collect(),
                coeff: m.coeff.iter().map(|x| x.clone() * c.clone()).collect(),
            })
            .collect();
        Self::canonical(self.arity, self.codim, monos)
    }

    /// The scalar polynomial formed by coefficient component `r`.
    pub fn component(&self, r: usize) -> Self {
        let monos = self
            .monomials
            .iter()
            .map(|m| Monomial {
                powers: m.powers.clone(),
                coeff: vec![m.coeff[r].clone()],
            })
            .collect();
        Self::canonical(self.arity, 1, monos)
    }

    /// `s(z) v` for a scalar polynomial `s` and a fixed vector `v`.
    pub fn times_vector(&self, v: &[S]) -> Result<Self> {
        if self.codim != 1 {
            return Err(Error::CodimMismatch(1, self.codim));
        }
        let monos = self
            .monomials
            .iter()
            .map(|m| Monomial {
                powers: m.powers.clone(),
                coeff: v.iter().map(|x| x.clone() * m.coeff[0].clone()).collect(),
            })
            .collect();
        Ok(Self::canonical(self.arity, v.len(), monos))
    }

    /// `M p(z)` for a matrix acting on the coefficients.
    pub fn apply_matrix(&self, m: &Matrix<S>) -> Self {
        let monos = self
            .monomials
            .iter()
            .map(|mono| Monomial {
                powers: mono.powers.clone(),
                coeff: linalg::mat_vec(m, &mono.coeff),
            })
            .collect();
        Self::canonical(self.arity, m.len(), monos)
    }

    /// Numeric value at positive arguments.
    pub fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.arity {
            return Err(Error::ArityMismatch(self.arity, z.len()));
        }
        if let Some(&bad) = z.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::NonPositiveArgument(bad));
        }
        Ok(self.evaluate_unchecked(z))
    }

    pub(crate) fn evaluate_unchecked(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.codim];
        for m in &self.monomials {
            let mut w = 1.0;
            for (a, x) in m.powers.iter().zip(z) {
                if !a.is_zero() {
                    w *= pow(*x, a);
                }
            }
            for (o, c) in out.iter_mut().zip(&m.coeff) {
                *o += c.to_f64() * w;
            }
        }
        out
    }

    /// Value at `(L_{m*+1}(t), ..., L_{m*+k}(t))`.
    pub fn eval_at_logs(&self, m_star: usize, t: f64) -> Result<Vec<f64>> {
        let z = iterlog::log_tower(m_star + 1, self.arity, t)?;
        self.evaluate(&z)
    }

    /// Whether every exponent is a nonnegative integer.
    pub fn is_polynomial(&self) -> bool {
        self.monomials
            .iter()
            .flat_map(|m| m.powers.iter())
            .all(|a| a.as_integer().is_some_and(|d| d >= 0))
    }

    /// Degree of a single-variable polynomial (`None` for the zero polynomial).
    pub fn degree(&self) -> Result<Option<usize>> {
        let mut deg = None;
        for m in &self.monomials {
            let d = integer_power(&m.powers[0])?;
            deg = Some(deg.map_or(d, |e: usize| e.max(d)));
        }
        Ok(deg)
    }

    /// Dense coefficient vectors of a single-variable polynomial.
    pub fn dense(&self) -> Result<Vec<Vec<S>>> {
        if self.arity != 1 {
            return Err(Error::ArityMismatch(1, self.arity));
        }
        let deg = match self.degree()? {
            Some(d) => d,
            None => return Ok(Vec::new()),
        };
        let mut out = vec![vec![S::zero(); self.codim]; deg + 1];
        for m in &self.monomials {
            out[integer_power(&m.powers[0])?] = m.coeff.clone();
        }
        Ok(out)
    }

    /// Termwise comparison: equal exponents and coefficients within
    /// `rel_tol * (1 + |c|)`; exact scalars compare exactly.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        if self.arity != other.arity || self.codim != other.codim || self.len() != other.len() {
            return false;
        }
        self.monomials.iter().all(|m| {
            other.monomials.iter().any(|o| {
                powers_eq(&m.powers, &o.powers)
                    && m.coeff.iter().zip(&o.coeff).all(|(a, b)| {
                        if S::EXACT {
                            a == b
                        } else {
                            let (x, y) = (a.to_f64(), b.to_f64());
                            (x - y).abs() <= rel_tol * (1.0 + x.abs().max(y.abs()))
                        }
                    })
            })
        })
    }

    /// Drops float coefficients below `threshold` in magnitude (exact
    /// scalars are returned unchanged).
    pub fn pruned_below(&self, threshold: f64) -> Self {
        if S::EXACT {
            return self.clone();
        }
        let monos = self
            .monomials
            .iter()
            .map(|m| Monomial {
                powers: m.powers.clone(),
                coeff: m
                    .coeff
                    .iter()
                    .map(|c| if c.to_f64().abs() < threshold { S::zero() } else { c.clone() })
                    .collect(),
            })
            .collect();
        Self::canonical(self.arity, self.codim, monos)
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.monomials
            .iter()
            .flat_map(|m| m.coeff.iter())
            .fold(0.0f64, |acc, c| acc.max(c.to_f64().abs()))
    }

    pub fn convert<T: Scalar>(&self) -> Option<GenPoly<T>> {
        let monos = self
            .monomials
            .iter()
            .map(|m| {
                Some(Monomial {
                    powers: m.powers.iter().map(|x| T::from_f64(x.to_f64())).collect::<Option<_>>()?,
                    coeff: m.coeff.iter().map(|x| T::from_f64(x.to_f64())).collect::<Option<_>>()?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GenPoly::canonical(self.arity, self.codim, monos))
    }

    pub fn to_f64(&self) -> GenPoly<f64> {
        let monomials = self
            .monomials
            .iter()
            .map(|m| Monomial {
                powers: m.powers.iter().map(Scalar::to_f64).collect(),
                coeff: m.coeff.iter().map(Scalar::to_f64).collect(),
            })
            .collect();
        GenPoly::canonical(self.arity, self.codim, monomials)
    }
}

fn pow<S: Scalar>(x: f64, a: &S) -> f64 {
    match a.as_integer() {
        Some(k) if k.abs() < 64 => x.powi(k as i32),
        _ => x.powf(a.to_f64()),
    }
}

fn integer_power<S: Scalar>(a: &S) -> Result<usize> {
    match a.as_integer() {
        Some(d) if d >= 0 => Ok(d as usize),
        _ => Err(Error::NonIntegerExponent(a.to_f64())),
    }
}

/// Polynomial solution of `q' + β q = p` for a single-variable polynomial
/// `p`. For `β ≠ 0` the unique polynomial solution; for `β = 0` the
/// antiderivative plus `constant`.
pub fn solve_linear_poly_ode<S: Scalar>(beta: &S, p: &GenPoly<S>, constant: &[S]) -> Result<GenPoly<S>> {
    if p.arity() != 1 {
        return Err(Error::ArityMismatch(1, p.arity()));
    }
    if constant.len() != p.codim() {
        return Err(Error::CodimMismatch(p.codim(), constant.len()));
    }
    let n = p.codim();
    let dense = p.dense()?;
    if beta.approx_eq(&S::zero()) {
        let mut q = vec![constant.to_vec()];
        for (j, c) in dense.iter().enumerate() {
            let d = S::from_i64(j as i64 + 1);
            q.push(c.iter().map(|x| x.clone() / d.clone()).collect());
        }
        return Ok(GenPoly::from_dense(q, n));
    }
    // β q_j + (j+1) q_{j+1} = p_j, solved from the top degree down.
    let deg = dense.len();
    let mut q = vec![vec![S::zero(); n]; deg];
    for j in (0..deg).rev() {
        let above = if j + 1 < deg { q[j + 1].clone() } else { vec![S::zero(); n] };
        let f = S::from_i64(j as i64 + 1);
        q[j] = dense[j]
            .iter()
            .zip(&above)
            .map(|(pj, qa)| (pj.clone() - f.clone() * qa.clone()) / beta.clone())
            .collect();
    }
    Ok(GenPoly::from_dense(q, n))
}
