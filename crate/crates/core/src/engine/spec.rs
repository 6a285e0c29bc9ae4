use crate::error::{Error, Result};
use crate::exponents::Regime;
use crate::genpoly::GenPoly;
use crate::linalg::{self, Matrix};
use crate::nonlinear::HomogeneousTerm;
use crate::scalar::Scalar;
use crate::spectral::{self, SpectralDecomposition};

use super::ResonanceConstants;

/// One forcing term `p(z) ψ(t)^{-exponent}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingTerm<S> {
    pub exponent: S,
    pub poly: GenPoly<S>,
}

/// The system `y' = -Ay + G(y) + f(t)` with `f` given as a finite expansion.
#[derive(Debug, Clone)]
pub struct ProblemSpec<S> {
    pub dimension: usize,
    pub matrix_a: Matrix<S>,
    pub nonlinearity: Vec<HomogeneousTerm<S>>,
    pub regime: Regime,
    /// Depth of the primary base `ψ = L_{m*}` (0 means `ψ = t`).
    pub m_star: usize,
    /// Depth of the secondary variable in the log regime (default `m* + 1`).
    pub n_star: Option<usize>,
    pub forcing: Vec<ForcingTerm<S>>,
    pub exponent_sequence: Option<Vec<S>>,
    pub resonance_constants: ResonanceConstants<S>,
}

impl<S: Scalar> ProblemSpec<S> {
    pub fn new(
        matrix_a: Matrix<S>,
        nonlinearity: Vec<HomogeneousTerm<S>>,
        regime: Regime,
        m_star: usize,
        forcing: Vec<ForcingTerm<S>>,
    ) -> Self {
        ProblemSpec {
            dimension: matrix_a.len(),
            matrix_a,
            nonlinearity,
            regime,
            m_star,
            n_star: None,
            forcing,
            exponent_sequence: None,
            resonance_constants: ResonanceConstants::new(),
        }
    }

    /// Depth of the secondary variable for the log regime.
    pub fn secondary_depth(&self) -> usize {
        self.n_star.unwrap_or(self.m_star + 1)
    }

    /// Sorts forcing terms by exponent and sums terms sharing an exponent,
    /// so any listing of the same forcing gives the same spec.
    pub fn normalize_forcing(&mut self) -> Result<()> {
        let mut terms = std::mem::take(&mut self.forcing);
        terms.sort_by(|a, b| a.exponent.partial_cmp(&b.exponent).unwrap_or(std::cmp::Ordering::Equal));
        let mut merged: Vec<ForcingTerm<S>> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.exponent.approx_eq(&t.exponent) => {
                    last.poly = last.poly.add_embedded(&t.poly)?;
                }
                _ => merged.push(t),
            }
        }
        self.forcing = merged;
        Ok(())
    }

    /// Checks every structural assumption and diagonalizes `A`.
    pub fn validate(&self) -> Result<SpectralDecomposition> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        if self.matrix_a.len() != n || !linalg::is_square(&self.matrix_a) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.matrix_a.len(),
            });
        }
        for t in &self.nonlinearity {
            if t.codim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.codim(),
                });
            }
        }
        if self.forcing.is_empty() {
            return Err(Error::EmptyGenerators);
        }
        for f in &self.forcing {
            if f.poly.codim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: f.poly.codim(),
                });
            }
            if !f.exponent.is_positive() {
                return Err(Error::NonPositiveGenerator(f.exponent.to_f64()));
            }
        }
        for w in self.forcing.windows(2) {
            if !(w[0].exponent < w[1].exponent) || w[0].exponent.approx_eq(&w[1].exponent) {
                return Err(Error::Validation(format!(
                    "forcing exponents must be strictly increasing ({} then {})",
                    w[0].exponent, w[1].exponent
                )));
            }
        }
        match self.regime {
            Regime::Exp | Regime::Pow | Regime::Log => {
                for f in &self.forcing {
                    if f.poly.arity() != 1 {
                        return Err(Error::Validation(format!(
                            "{} regime needs single-variable forcing polynomials, got arity {}",
                            self.regime,
                            f.poly.arity()
                        )));
                    }
                    if !f.poly.is_polynomial() {
                        let bad = f
                            .poly
                            .monomials()
                            .iter()
                            .map(|m| m.powers[0].to_f64())
                            .find(|a| a.fract() != 0.0 || *a < 0.0)
                            .unwrap_or(f64::NAN);
                        return Err(Error::NonIntegerExponent(bad));
                    }
                }
            }
            Regime::IterLog | Regime::Mixed => {
                for w in self.forcing.windows(2) {
                    if w[1].poly.arity() < w[0].poly.arity() {
                        return Err(Error::ArityNonMonotone(format!(
                            "arity {} at exponent {} follows arity {} at exponent {}",
                            w[1].poly.arity(),
                            w[1].exponent,
                            w[0].poly.arity(),
                            w[0].exponent
                        )));
                    }
                }
            }
        }
        match self.regime {
            Regime::Pow | Regime::Mixed if self.m_star != 0 => {
                return Err(Error::Validation(format!(
                    "{} regime uses ψ = t, so m_star must be 0",
                    self.regime
                )));
            }
            Regime::Log | Regime::IterLog if self.m_star == 0 => {
                return Err(Error::Validation(format!("{} regime needs m_star ≥ 1", self.regime)));
            }
            Regime::Log if self.secondary_depth() <= self.m_star => {
                return Err(Error::Validation("n_star must exceed m_star".into()));
            }
            _ => {}
        }
        if let Some(seq) = &self.exponent_sequence {
            if seq.is_empty() {
                return Err(Error::Validation("exponent_sequence is empty".into()));
            }
        }
        for ((k, _), c) in &self.resonance_constants {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
            if *k == 0 {
                return Err(Error::Validation("resonance constants use 1-based orders".into()));
            }
        }
        let float: Matrix<f64> = self
            .matrix_a
            .iter()
            .map(|r| r.iter().map(Scalar::to_f64).collect())
            .collect();
        spectral::decompose(&float)
    }

    /// The same problem in floating point.
    pub fn to_f64(&self) -> ProblemSpec<f64> {
        let conv = |v: &[S]| v.iter().map(Scalar::to_f64).collect::<Vec<f64>>();
        ProblemSpec {
            dimension: self.dimension,
            matrix_a: self.matrix_a.iter().map(|r| conv(r)).collect(),
            nonlinearity: self.nonlinearity.iter().map(HomogeneousTerm::to_f64).collect(),
            regime: self.regime,
            m_star: self.m_star,
            n_star: self.n_star,
            forcing: self
                .forcing
                .iter()
                .map(|f| ForcingTerm {
                    exponent: f.exponent.to_f64(),
                    poly: f.poly.to_f64(),
                })
                .collect(),
            exponent_sequence: self.exponent_sequence.as_ref().map(|s| conv(s)),
            resonance_constants: self
                .resonance_constants
                .iter()
                .map(|(k, v)| (*k, conv(v)))
                .collect(),
        }
    }
}
