//! Expansion terms `q_k` for the five base regimes, resonance bookkeeping,
//! and the symbolic residual self-check.

mod base;
mod double;
mod residual;
mod spec;

use std::collections::BTreeMap;

use serde::Serialize;

pub use base::Base;
pub use double::{expand_double_indexed, DoubleForcing, DoubleIndexedExpansion, DoubleIndexedSpec};
pub use residual::{Residual, ResidualTerm};
pub use spec::{ForcingTerm, ProblemSpec};

use crate::error::{Error, Result};
use crate::exponents::{self, ExponentLattice, Regime};
use crate::genpoly::{solve_linear_poly_ode, GenPoly};
use crate::linalg::{self, Matrix};
use crate::nonlinear::{polarize, MultiForm};
use crate::scalar::Scalar;
use crate::spectral::{self, SpectralDecomposition};

/// Free constants of resonant Type-1 terms, keyed by 1-based `(k, j)`.
pub type ResonanceConstants<S> = BTreeMap<(usize, usize), Vec<S>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantSource {
    Default,
    Supplied,
    Calibrated,
}

/// One eigencomponent of one Type-1 term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceNote<S> {
    pub k: usize,
    pub j: usize,
    pub resonant: bool,
    pub constant: Vec<S>,
    pub source: ConstantSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerm<S> {
    pub mu: S,
    pub q: GenPoly<S>,
}

#[derive(Debug, Clone)]
pub struct Expansion<S> {
    pub regime: Regime,
    pub m_star: usize,
    pub n_star: Option<usize>,
    pub lattice: ExponentLattice<S>,
    pub terms: Vec<ExpansionTerm<S>>,
    pub resonance_notes: Vec<ResonanceNote<S>>,
}

impl<S: Scalar> Expansion<S> {
    pub fn base(&self) -> Base {
        Base::new(self.regime, self.m_star, self.n_star)
    }

    pub fn order(&self) -> usize {
        self.terms.len()
    }

    pub fn mu(&self) -> Vec<S> {
        self.terms.iter().map(|t| t.mu.clone()).collect()
    }

    /// Exponent following `μ_k` in the lattice (1-based `k`).
    pub fn next_exponent(&self, k: usize) -> Option<S> {
        self.lattice.mu.get(k).cloned()
    }

    pub fn has_uncalibrated_resonance(&self) -> bool {
        self.resonance_notes
            .iter()
            .any(|n| n.resonant && n.source == ConstantSource::Default)
    }

    /// Termwise comparison of the expansion terms.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(&other.terms)
                .all(|(a, b)| a.mu.approx_eq(&b.mu) && a.q.approx_eq(&b.q, rel_tol))
    }

    pub fn to_f64(&self) -> Expansion<f64> {
        let conv = |v: &[S]| v.iter().map(Scalar::to_f64).collect::<Vec<f64>>();
        Expansion {
            regime: self.regime,
            m_star: self.m_star,
            n_star: self.n_star,
            lattice: ExponentLattice {
                regime: self.lattice.regime,
                eigen_generators: conv(&self.lattice.eigen_generators),
                forcing_generators: conv(&self.lattice.forcing_generators),
                cutoff: self.lattice.cutoff.to_f64(),
                mu: conv(&self.lattice.mu),
            },
            terms: self
                .terms
                .iter()
                .map(|t| ExpansionTerm {
                    mu: t.mu.to_f64(),
                    q: t.q.to_f64(),
                })
                .collect(),
            resonance_notes: self
                .resonance_notes
                .iter()
                .map(|n| ResonanceNote {
                    k: n.k,
                    j: n.j,
                    resonant: n.resonant,
                    constant: conv(&n.constant),
                    source: n.source,
                })
                .collect(),
        }
    }
}

/// A validated problem with its spectral data and polarized nonlinearity.
#[derive(Debug, Clone)]
pub struct Engine<S> {
    spec: ProblemSpec<S>,
    spectral: SpectralDecomposition,
    inverse: Matrix<S>,
    forms: Vec<MultiForm<S>>,
}

impl<S: Scalar> Engine<S> {
    pub fn new(spec: ProblemSpec<S>) -> Result<Self> {
        let spectral = spec.validate()?;
        let inverse = spectral::inverse_in(&spec.matrix_a, &spectral)?;
        let forms = spec.nonlinearity.iter().map(polarize).collect();
        Ok(Engine {
            spec,
            spectral,
            inverse,
            forms,
        })
    }

    pub fn spec(&self) -> &ProblemSpec<S> {
        &self.spec
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    /// Exponent lattice holding at least `count` exponents.
    pub fn lattice(&self, count: usize) -> Result<ExponentLattice<S>> {
        let spec = &self.spec;
        let forcing: Vec<S> = spec.forcing.iter().map(|f| f.exponent.clone()).collect();
        let eigen: Vec<S> = if spec.regime == Regime::Exp {
            self.spectral
                .eigenvalues_distinct
                .iter()
                .map(|&x| {
                    S::from_f64(x).ok_or_else(|| {
                        Error::ExactUnavailable(format!("eigenvalue {x} is not rational"))
                    })
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let lat = match &spec.exponent_sequence {
            Some(seq) => {
                let lat = exponents::from_sequence(spec.regime, &eigen, &forcing, seq.clone())?;
                if lat.len() < count.saturating_sub(1) {
                    return Err(Error::Validation(format!(
                        "exponent sequence has {} entries, {} needed",
                        lat.len(),
                        count.saturating_sub(1)
                    )));
                }
                lat
            }
            None => exponents::generate_at_least(spec.regime, &eigen, &forcing, count)?,
        };
        // every forcing exponent below the horizon must be a lattice point
        for f in &spec.forcing {
            if f.exponent <= lat.cutoff && lat.position(&f.exponent).is_none() {
                return Err(Error::GridNotClosed(format!(
                    "forcing exponent {} is not in the exponent sequence",
                    f.exponent
                )));
            }
        }
        Ok(lat)
    }

    /// Dispatches to the recursion of the spec's regime.
    pub fn expand(&self, order: usize) -> Result<Expansion<S>> {
        match self.spec.regime {
            Regime::Exp => self.expand_type1(order, Some(&self.spec.resonance_constants)),
            Regime::Pow => self.expand_type2(order),
            Regime::Log => self.expand_type3(order),
            Regime::IterLog => self.expand_iterlog(order),
            Regime::Mixed => self.expand_mixed(order),
        }
    }

    fn require(&self, regime: Regime) -> Result<()> {
        if self.spec.regime != regime {
            return Err(Error::RegimeMismatch {
                expected: regime.name().into(),
                got: self.spec.regime.name().into(),
            });
        }
        Ok(())
    }

    /// Forcing polynomial at each of the first `order` lattice points.
    fn forcing_on(&self, lat: &ExponentLattice<S>, order: usize) -> Vec<Option<&GenPoly<S>>> {
        let mut out = vec![None; order];
        for f in &self.spec.forcing {
            if let Some(p) = lat.position(&f.exponent) {
                if p < order {
                    out[p] = Some(&f.poly);
                }
            }
        }
        out
    }

    /// Running maximum of forcing arities, per lattice point.
    fn arities(&self, lat: &ExponentLattice<S>, order: usize) -> Vec<usize> {
        let mut out = vec![1; order];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self
                .spec
                .forcing
                .iter()
                .filter(|f| f.exponent < lat.mu[k] || f.exponent.approx_eq(&lat.mu[k]))
                .map(|f| f.poly.arity())
                .max()
                .unwrap_or(1);
        }
        out
    }

    /// `Q_k = Σ_m Σ_{μ_{j_1}+...+μ_{j_m} = μ_k} 𝒢_m(q_{j_1}, ..., q_{j_m})`,
    /// summed over index multisets weighted by their number of orderings.
    fn nonlinear_sum(&self, lat: &ExponentLattice<S>, k0: usize, qs: &[GenPoly<S>], arity: usize) -> Result<GenPoly<S>> {
        let n = self.spec.dimension;
        let mut total = GenPoly::zero(arity, n);
        if self.forms.is_empty() {
            return Ok(total);
        }
        for ms in lat.multisets(k0) {
            let matching: Vec<&MultiForm<S>> = self.forms.iter().filter(|f| f.degree() == ms.len()).collect();
            if matching.is_empty() || ms.iter().any(|&j| qs[j].is_zero()) {
                continue;
            }
            let args: Vec<GenPoly<S>> = ms.iter().map(|&j| qs[j].clone()).collect();
            let count = S::from_i64(exponents::permutation_count(&ms) as i64);
            for f in matching {
                total = total.add_embedded(&f.apply_to_genpolys(&args)?.scale(&count))?;
            }
        }
        total.embed(arity.max(total.arity()))
    }

    fn expansion(&self, lat: ExponentLattice<S>, qs: Vec<GenPoly<S>>, notes: Vec<ResonanceNote<S>>) -> Expansion<S> {
        let terms = qs
            .into_iter()
            .enumerate()
            .map(|(k, q)| ExpansionTerm {
                mu: lat.mu[k].clone(),
                q,
            })
            .collect();
        Expansion {
            regime: self.spec.regime,
            m_star: self.spec.m_star,
            n_star: self.spec.n_star,
            lattice: lat,
            terms,
            resonance_notes: notes,
        }
    }

    /// Exponential regime: `q_k' + (A - μ_k) q_k = Q_k + p_k`, solved in each
    /// eigenspace with `β = λ_j - μ_k`. When `β = 0` the free constant is
    /// taken from `constants` (default zero) and the term is flagged.
    pub fn expand_type1(&self, order: usize, constants: Option<&ResonanceConstants<S>>) -> Result<Expansion<S>> {
        self.require(Regime::Exp)?;
        let lat = self.lattice(order + 1)?;
        if lat.len() < order {
            return Err(Error::TruncationTooDeep {
                order,
                available: lat.len(),
            });
        }
        let projectors = spectral::projectors_in(&self.spec.matrix_a, &self.spectral)?;
        if let Some((lam, _)) = projectors.first() {
            if lat.mu[0] > *lam && !lat.mu[0].approx_eq(lam) {
                return Err(Error::LatticeMissingEigenvalue(lam.to_f64()));
            }
        }
        let n = self.spec.dimension;
        let forcing = self.forcing_on(&lat, order);
        let mut qs: Vec<GenPoly<S>> = Vec::with_capacity(order);
        let mut notes = Vec::new();
        for k0 in 0..order {
            let mut rhs = self.nonlinear_sum(&lat, k0, &qs, 1)?;
            if let Some(p) = forcing[k0] {
                rhs = rhs.add(p)?;
            }
            let mut q = GenPoly::zero(1, n);
            for (j0, (lam, r)) in projectors.iter().enumerate() {
                let beta = lam.clone() - lat.mu[k0].clone();
                let resonant = beta.approx_eq(&S::zero());
                let key = (k0 + 1, j0 + 1);
                let (raw, source) = match constants.and_then(|c| c.get(&key)) {
                    Some(c) if resonant => (c.clone(), ConstantSource::Supplied),
                    _ => (vec![S::zero(); n], ConstantSource::Default),
                };
                let c = linalg::mat_vec(r, &raw);
                let part = solve_linear_poly_ode(&beta, &rhs.apply_matrix(r), &c)?;
                q = q.add(&part)?;
                notes.push(ResonanceNote {
                    k: k0 + 1,
                    j: j0 + 1,
                    resonant,
                    constant: if resonant { c } else { vec![S::zero(); n] },
                    source,
                });
            }
            qs.push(q);
        }
        Ok(self.expansion(lat, qs, notes))
    }

    /// Recursion `q_k = A^{-1}(Q_k + p_k + χ_k)` shared by the algebraic
    /// regimes; `chi` supplies the correction from `q_λ` with `μ_λ + 1 = μ_k`.
    fn algebraic_recursion(
        &self,
        order: usize,
        chi: Option<fn(&S, &GenPoly<S>) -> Result<GenPoly<S>>>,
    ) -> Result<Expansion<S>> {
        let lat = self.lattice(order + 1)?;
        if lat.len() < order {
            return Err(Error::TruncationTooDeep {
                order,
                available: lat.len(),
            });
        }
        let forcing = self.forcing_on(&lat, order);
        let arities = self.arities(&lat, order);
        let mut qs: Vec<GenPoly<S>> = Vec::with_capacity(order);
        for k0 in 0..order {
            let arity = arities[k0];
            let mut rhs = self.nonlinear_sum(&lat, k0, &qs, arity)?;
            if let Some(p) = forcing[k0] {
                rhs = rhs.add_embedded(p)?;
            }
            if let Some(chi) = chi {
                let below = lat.mu[k0].clone() - S::one();
                if let Some(l) = lat.position(&below).filter(|&l| l < k0) {
                    rhs = rhs.add_embedded(&chi(&lat.mu[l], &qs[l])?)?;
                }
            }
            qs.push(rhs.embed(arity)?.apply_matrix(&self.inverse));
        }
        Ok(self.expansion(lat, qs, Vec::new()))
    }

    /// Power regime: `χ_k = μ_λ q_λ - q_λ'` (derivative in `ln t`).
    pub fn expand_type2(&self, order: usize) -> Result<Expansion<S>> {
        self.require(Regime::Pow)?;
        self.algebraic_recursion(order, Some(pow_chi))
    }

    /// Logarithmic regime: no derivative correction.
    pub fn expand_type3(&self, order: usize) -> Result<Expansion<S>> {
        self.require(Regime::Log)?;
        self.algebraic_recursion(order, None)
    }

    /// Iterated-log regime with generalized-polynomial coefficients.
    pub fn expand_iterlog(&self, order: usize) -> Result<Expansion<S>> {
        self.require(Regime::IterLog)?;
        self.algebraic_recursion(order, None)
    }

    /// Mixed power/iterated-log regime:
    /// `χ_k = μ_λ q_λ - Σ_j (z_1 ... z_{j-1})^{-1} ∂q_λ/∂z_j`.
    pub fn expand_mixed(&self, order: usize) -> Result<Expansion<S>> {
        self.require(Regime::Mixed)?;
        self.algebraic_recursion(order, Some(mixed_chi))
    }

    /// Symbolic residual `s_M' + A s_M - G(s_M) - f` of the first `order` terms.
    pub fn symbolic_residual(&self, exp: &Expansion<S>, order: usize) -> Result<Residual<S>> {
        residual::symbolic_residual(&self.spec, exp, order)
    }
}

fn pow_chi<S: Scalar>(mu: &S, q: &GenPoly<S>) -> Result<GenPoly<S>> {
    q.scale(mu).sub(&q.partial_derivative(0)?)
}

fn mixed_chi<S: Scalar>(mu: &S, q: &GenPoly<S>) -> Result<GenPoly<S>> {
    let k = q.arity();
    let mut out = q.scale(mu);
    for j in 0..k {
        let mut powers = vec![S::zero(); k];
        for p in powers.iter_mut().take(j) {
            *p = -S::one();
        }
        let d = q.partial_derivative(j)?.shift(&powers, &S::one());
        out = out.sub(&d)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
