//! JSON documents for problem specs and expansions.
//!
//! Numbers are plain decimals or `{"num", "den"}` rationals. Exact values
//! are written as integers or rationals, floats in shortest round-trip form,
//! so write-then-read is lossless.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::engine::{ConstantSource, Engine, Expansion, ExpansionTerm, ForcingTerm, ProblemSpec, ResonanceConstants, ResonanceNote};
use crate::error::{Error, Result};
use crate::exponents::Regime;
use crate::genpoly::{GenPoly, Monomial};
use crate::nonlinear::HomogeneousTerm;
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Integer {
    Small(i64),
    /// Decimal digits, for values outside `i64`.
    Big(String),
}

impl Integer {
    fn to_big(&self) -> Result<BigInt> {
        match self {
            Integer::Small(v) => Ok(BigInt::from(*v)),
            Integer::Big(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("not an integer: {s:?}"))),
        }
    }

    fn from_big(v: &BigInt) -> Self {
        i64::try_from(v).map_or_else(|_| Integer::Big(v.to_string()), Integer::Small)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioDoc {
    pub num: Integer,
    pub den: Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Integer(i64),
    Decimal(f64),
    Ratio(RatioDoc),
}

impl Number {
    pub fn to_scalar<S: Scalar>(&self) -> Result<S> {
        let v = match self {
            Number::Integer(v) => Some(S::from_i64(*v)),
            Number::Decimal(x) => S::from_f64(*x),
            Number::Ratio(r) => S::from_big_ratio(r.num.to_big()?, r.den.to_big()?),
        };
        v.ok_or_else(|| Error::ExactUnavailable(format!("cannot represent {self:?}")))
    }

    pub fn from_scalar<S: Scalar>(s: &S) -> Self {
        match s.ratio_parts() {
            Some((num, den)) if den == BigInt::from(1) => match i64::try_from(&num) {
                Ok(v) => Number::Integer(v),
                Err(_) => Number::Ratio(RatioDoc {
                    num: Integer::from_big(&num),
                    den: Integer::Small(1),
                }),
            },
            Some((num, den)) => Number::Ratio(RatioDoc {
                num: Integer::from_big(&num),
                den: Integer::from_big(&den),
            }),
            None => Number::Decimal(s.to_f64()),
        }
    }
}

fn scalars<S: Scalar>(v: &[Number]) -> Result<Vec<S>> {
    v.iter().map(Number::to_scalar).collect()
}

fn numbers<S: Scalar>(v: &[S]) -> Vec<Number> {
    v.iter().map(Number::from_scalar).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialDoc {
    pub powers: Vec<Number>,
    pub coeff: Vec<Number>,
}

/// A generalized polynomial. An empty monomial list is the zero polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenPolyDoc {
    pub arity: usize,
    pub monomials: Vec<MonomialDoc>,
}

impl GenPolyDoc {
    pub fn from_poly<S: Scalar>(p: &GenPoly<S>) -> Self {
        GenPolyDoc {
            arity: p.arity(),
            monomials: p
                .monomials()
                .iter()
                .map(|m| MonomialDoc {
                    powers: numbers(&m.powers),
                    coeff: numbers(&m.coeff),
                })
                .collect(),
        }
    }

    pub fn to_poly<S: Scalar>(&self, codim: usize) -> Result<GenPoly<S>> {
        let monomials = self
            .monomials
            .iter()
            .map(|m| {
                Ok(Monomial {
                    powers: scalars(&m.powers)?,
                    coeff: scalars(&m.coeff)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GenPoly::new(self.arity, codim, monomials)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermMonomialDoc {
    /// Integer exponent of each component of `y`.
    pub powers: Vec<u32>,
    pub coeff: Vec<Number>,
}

/// One homogeneous degree-`m` part of the nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogeneousTermDoc {
    pub degree: usize,
    pub monomials: Vec<TermMonomialDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingDoc {
    pub exponent: Number,
    pub poly: GenPolyDoc,
}

/// Supplied free constant for a resonant exponential-regime term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceConstantDoc {
    pub order: usize,
    pub eigen_index: usize,
    pub value: Vec<Number>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpecFile {
    pub dimension: usize,
    pub matrix_a: Vec<Vec<Number>>,
    #[serde(default)]
    pub nonlinearity: Vec<HomogeneousTermDoc>,
    pub regime: Regime,
    #[serde(default)]
    pub m_star: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_star: Option<usize>,
    pub forcing: Vec<ForcingDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_sequence: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resonance_constants: Vec<ResonanceConstantDoc>,
}

impl ProblemSpecFile {
    pub fn from_spec<S: Scalar>(spec: &ProblemSpec<S>) -> Self {
        ProblemSpecFile {
            dimension: spec.dimension,
            matrix_a: spec.matrix_a.iter().map(|r| numbers(r)).collect(),
            nonlinearity: spec
                .nonlinearity
                .iter()
                .map(|t| HomogeneousTermDoc {
                    degree: t.degree(),
                    monomials: t
                        .monomials()
                        .iter()
                        .map(|(b, c)| TermMonomialDoc {
                            powers: b.clone(),
                            coeff: numbers(c),
                        })
                        .collect(),
                })
                .collect(),
            regime: spec.regime,
            m_star: spec.m_star,
            n_star: spec.n_star,
            forcing: spec
                .forcing
                .iter()
                .map(|f| ForcingDoc {
                    exponent: Number::from_scalar(&f.exponent),
                    poly: GenPolyDoc::from_poly(&f.poly),
                })
                .collect(),
            exponent_sequence: spec.exponent_sequence.as_ref().map(|s| numbers(s)),
            resonance_constants: spec
                .resonance_constants
                .iter()
                .map(|(&(k, j), v)| ResonanceConstantDoc {
                    order: k,
                    eigen_index: j,
                    value: numbers(v),
                })
                .collect(),
        }
    }

    /// Builds the spec in scalar type `S`, with forcing terms sorted and
    /// merged. Structural checks are left to [`ProblemSpec::validate`].
    pub fn to_spec<S: Scalar>(&self) -> Result<ProblemSpec<S>> {
        let n = self.dimension;
        let matrix_a = self.matrix_a.iter().map(|r| scalars(r)).collect::<Result<Vec<_>>>()?;
        let nonlinearity = self
            .nonlinearity
            .iter()
            .map(|t| {
                let monos = t
                    .monomials
                    .iter()
                    .map(|m| Ok((m.powers.clone(), scalars(&m.coeff)?)))
                    .collect::<Result<Vec<_>>>()?;
                HomogeneousTerm::new(t.degree, n, monos)
            })
            .collect::<Result<Vec<_>>>()?;
        let forcing = self
            .forcing
            .iter()
            .map(|f| {
                Ok(ForcingTerm {
                    exponent: f.exponent.to_scalar()?,
                    poly: f.poly.to_poly(n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut constants = ResonanceConstants::new();
        for c in &self.resonance_constants {
            if c.value.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.value.len(),
                });
            }
            constants.insert((c.order, c.eigen_index), scalars(&c.value)?);
        }
        let mut spec = ProblemSpec {
            dimension: n,
            matrix_a,
            nonlinearity,
            regime: self.regime,
            m_star: self.m_star,
            n_star: self.n_star,
            forcing,
            exponent_sequence: self.exponent_sequence.as_ref().map(|s| scalars(s)).transpose()?,
            resonance_constants: constants,
        };
        spec.normalize_forcing()?;
        Ok(spec)
    }
}

/// A spec in the most precise number type its data allows.
#[derive(Debug, Clone)]
pub enum LoadedSpec {
    Exact(ProblemSpec<Rational>),
    Float(ProblemSpec<f64>),
}

impl LoadedSpec {
    pub fn is_exact(&self) -> bool {
        matches!(self, LoadedSpec::Exact(_))
    }

    pub fn regime(&self) -> Regime {
        match self {
            LoadedSpec::Exact(s) => s.regime,
            LoadedSpec::Float(s) => s.regime,
        }
    }

    pub fn to_f64(&self) -> ProblemSpec<f64> {
        match self {
            LoadedSpec::Exact(s) => s.to_f64(),
            LoadedSpec::Float(s) => s.clone(),
        }
    }
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    serde_json::to_string_pretty(doc).map_err(|e| Error::Format(e.to_string()))
}

/// Parses a spec document. Rational arithmetic is used when every number
/// is an exact rational (decimals up to denominator 10⁶), unless
/// `force_float` is set.
pub fn parse_spec(text: &str, force_float: bool) -> Result<LoadedSpec> {
    let doc: ProblemSpecFile = from_json(text)?;
    if !force_float {
        match doc.to_spec::<Rational>() {
            Ok(spec) => return Ok(LoadedSpec::Exact(spec)),
            Err(Error::ExactUnavailable(_)) => {}
            Err(e) => return Err(e),
        }
    }
    doc.to_spec::<f64>().map(LoadedSpec::Float)
}

pub fn spec_to_json<S: Scalar>(spec: &ProblemSpec<S>) -> Result<String> {
    to_json(&ProblemSpecFile::from_spec(spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceNoteDoc {
    pub k: usize,
    pub j: usize,
    pub resonant: bool,
    pub constant: Vec<Number>,
    pub source: ConstantSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionFile {
    pub regime: Regime,
    pub m_star: usize,
    pub mu: Vec<Number>,
    pub terms: Vec<GenPolyDoc>,
    #[serde(default)]
    pub resonance_notes: Vec<ResonanceNoteDoc>,
}

impl ExpansionFile {
    pub fn from_expansion<S: Scalar>(exp: &Expansion<S>) -> Self {
        ExpansionFile {
            regime: exp.regime,
            m_star: exp.m_star,
            mu: numbers(&exp.mu()),
            terms: exp.terms.iter().map(|t| GenPolyDoc::from_poly(&t.q)).collect(),
            resonance_notes: exp
                .resonance_notes
                .iter()
                .map(|n| ResonanceNoteDoc {
                    k: n.k,
                    j: n.j,
                    resonant: n.resonant,
                    constant: numbers(&n.constant),
                    source: n.source,
                })
                .collect(),
        }
    }

    /// Rebuilds the expansion against the spec it was computed for. The
    /// regime, base depth, dimension and exponents must all agree.
    pub fn to_expansion<S: Scalar>(&self, spec: &ProblemSpec<S>) -> Result<Expansion<S>> {
        if self.regime != spec.regime {
            return Err(Error::RegimeMismatch {
                expected: spec.regime.to_string(),
                got: self.regime.to_string(),
            });
        }
        if self.m_star != spec.m_star {
            return Err(Error::Validation(format!(
                "expansion has m_star {}, spec has {}",
                self.m_star, spec.m_star
            )));
        }
        if self.mu.len() != self.terms.len() {
            return Err(Error::Format(format!(
                "{} exponents for {} terms",
                self.mu.len(),
                self.terms.len()
            )));
        }
        let n = spec.dimension;
        let lattice = Engine::new(spec.clone())?.lattice(self.terms.len() + 1)?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for (k, (mu, doc)) in self.mu.iter().zip(&self.terms).enumerate() {
            let mu: S = mu.to_scalar()?;
            match lattice.mu.get(k) {
                Some(want) if want.approx_eq(&mu) => {}
                other => {
                    return Err(Error::Validation(format!(
                        "exponent μ_{} = {mu} does not match the spec's exponent sequence ({})",
                        k + 1,
                        other.map_or("absent".to_string(), |w| w.to_string())
                    )))
                }
            }
            for m in &doc.monomials {
                if m.coeff.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.coeff.len(),
                    });
                }
            }
            terms.push(ExpansionTerm {
                mu,
                q: doc.to_poly(n)?,
            });
        }
        let resonance_notes = self
            .resonance_notes
            .iter()
            .map(|r| {
                Ok(ResonanceNote {
                    k: r.k,
                    j: r.j,
                    resonant: r.resonant,
                    constant: scalars(&r.constant)?,
                    source: r.source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Expansion {
            regime: spec.regime,
            m_star: spec.m_star,
            n_star: spec.n_star,
            lattice,
            terms,
            resonance_notes,
        })
    }
}

pub fn expansion_to_json<S: Scalar>(exp: &Expansion<S>) -> Result<String> {
    to_json(&ExpansionFile::from_expansion(exp))
}

pub fn parse_expansion_file(text: &str) -> Result<ExpansionFile> {
    from_json(text)
}
