//! Double-indexed recursion for forcing of the form
//! `Σ_k t^{-μ_k} Σ_j p_{k,j}(ln ln t) (ln t)^{-β_j}`.
//!
//! Coefficients `q_{k,j}` are single-variable polynomials in `ln ln t`;
//! `q_k(z_1, z_2) = Σ_j q_{k,j}(z_2) z_1^{-β_j}` reassembles the mixed-regime
//! term. Nonlinear sums run over ordered index tuples in both directions, so
//! this path shares no summation code with the mixed recursion.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exponents::{ExponentLattice, Regime};
use crate::genpoly::{GenPoly, Monomial};
use crate::linalg::Matrix;
use crate::nonlinear::{polarize, HomogeneousTerm};
use crate::scalar::Scalar;
use crate::spectral;

use super::{Expansion, ExpansionTerm, ForcingTerm, ProblemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleForcing<S> {
    pub mu: S,
    pub beta: S,
    /// Polynomial in `ln ln t`.
    pub poly: GenPoly<S>,
}

#[derive(Debug, Clone)]
pub struct DoubleIndexedSpec<S> {
    pub matrix_a: Matrix<S>,
    pub nonlinearity: Vec<HomogeneousTerm<S>>,
    /// Strictly increasing, closed under addition and `+1`, positive.
    pub mu_grid: Vec<S>,
    /// Strictly increasing, closed under addition and `+1`, nonnegative.
    pub beta_grid: Vec<S>,
    pub forcing: Vec<DoubleForcing<S>>,
}

#[derive(Debug, Clone)]
pub struct DoubleIndexedExpansion<S> {
    /// `coefficients[(k, j)]` is `q_{k,j}` for 1-based grid indices.
    pub coefficients: BTreeMap<(usize, usize), GenPoly<S>>,
    /// The assembled two-variable terms.
    pub expansion: Expansion<S>,
}

fn check_grid<S: Scalar>(grid: &[S], name: &str, allow_zero: bool) -> Result<()> {
    let Some(first) = grid.first() else {
        return Err(Error::GridNotClosed(format!("{name} grid is empty")));
    };
    if first.to_f64() < 0.0 || (!allow_zero && !first.is_positive()) {
        return Err(Error::GridNotClosed(format!("{name} grid starts at {first}")));
    }
    let last = grid.last().unwrap();
    let member = |x: &S| grid.iter().any(|g| g.approx_eq(x));
    let within = |x: &S| x < last || x.approx_eq(last);
    for (i, a) in grid.iter().enumerate() {
        if i > 0 && (grid[i - 1] >= *a || grid[i - 1].approx_eq(a)) {
            return Err(Error::GridNotClosed(format!("{name} grid is not strictly increasing")));
        }
        for b in grid {
            let s = a.clone() + b.clone();
            if within(&s) && !member(&s) {
                return Err(Error::GridNotClosed(format!("{name} grid: {a} + {b} missing")));
            }
        }
        let s = a.clone() + S::one();
        if within(&s) && !member(&s) {
            return Err(Error::GridNotClosed(format!("{name} grid: {a} + 1 missing")));
        }
    }
    Ok(())
}

fn position<S: Scalar>(grid: &[S], x: &S) -> Option<usize> {
    grid.iter().position(|g| g.approx_eq(x))
}

impl<S: Scalar> DoubleIndexedSpec<S> {
    fn validate(&self) -> Result<()> {
        check_grid(&self.mu_grid, "μ", false)?;
        check_grid(&self.beta_grid, "β", true)?;
        let n = self.matrix_a.len();
        for f in &self.forcing {
            if position(&self.mu_grid, &f.mu).is_none() {
                return Err(Error::GridNotClosed(format!("forcing μ = {} not on the grid", f.mu)));
            }
            if position(&self.beta_grid, &f.beta).is_none() {
                return Err(Error::GridNotClosed(format!("forcing β = {} not on the grid", f.beta)));
            }
            if f.poly.arity() != 1 || !f.poly.is_polynomial() {
                return Err(Error::Validation("p_{k,j} must be polynomials in one variable".into()));
            }
            if f.poly.codim() != n {
                return Err(Error::CodimMismatch(n, f.poly.codim()));
            }
        }
        Ok(())
    }

    fn assemble(&self, parts: &[(S, GenPoly<S>)], n: usize) -> GenPoly<S> {
        let monos = parts
            .iter()
            .flat_map(|(beta, p)| {
                p.monomials().iter().map(move |m| Monomial {
                    powers: vec![-beta.clone(), m.powers[0].clone()],
                    coeff: m.coeff.clone(),
                })
            })
            .collect();
        GenPoly::new(2, n, monos).expect("shapes are consistent")
    }

    /// The equivalent mixed-regime problem with two-variable forcing
    /// `p_k(z_1, z_2) = Σ_j p_{k,j}(z_2) z_1^{-β_j}`.
    pub fn to_mixed(&self) -> Result<ProblemSpec<S>> {
        self.validate()?;
        let n = self.matrix_a.len();
        let mut by_mu: Vec<(S, Vec<(S, GenPoly<S>)>)> = Vec::new();
        for f in &self.forcing {
            match by_mu.iter_mut().find(|(m, _)| m.approx_eq(&f.mu)) {
                Some((_, parts)) => parts.push((f.beta.clone(), f.poly.clone())),
                None => by_mu.push((f.mu.clone(), vec![(f.beta.clone(), f.poly.clone())])),
            }
        }
        by_mu.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let forcing = by_mu
            .into_iter()
            .map(|(mu, parts)| ForcingTerm {
                exponent: mu,
                poly: self.assemble(&parts, n),
            })
            .collect();
        let mut spec = ProblemSpec::new(self.matrix_a.clone(), self.nonlinearity.clone(), Regime::Mixed, 0, forcing);
        spec.exponent_sequence = Some(self.mu_grid.clone());
        Ok(spec)
    }
}

/// Ordered tuples of 1-based grid indices, length ≥ 2, summing to `grid[target]`.
fn ordered_tuples<S: Scalar>(grid: &[S], target: usize, allow_single: bool) -> Vec<Vec<usize>> {
    fn rec<S: Scalar>(grid: &[S], rest: &S, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for (i, g) in grid.iter().enumerate() {
            if !(g < rest || g.approx_eq(rest)) {
                break;
            }
            let r = rest.clone() - g.clone();
            cur.push(i);
            if r.approx_eq(&S::zero()) {
                out.push(cur.clone());
            } else if !g.approx_eq(&S::zero()) {
                rec(grid, &r, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(&grid[..target], &grid[target], &mut Vec::new(), &mut out);
    if !allow_single {
        out.retain(|t| t.len() >= 2);
    }
    out
}

/// Computes `q_{k,j}` for `k ≤ order` and assembles the two-variable terms.
///
/// `q_{1,j} = A^{-1} p_{1,j}`; for `k ≥ 2`
/// `q_{k,j} = A^{-1}(Σ 𝒢_m(q_{j_1,l_1}, ...) + p_{k,j} + χ_{k,j})` where, when
/// `μ_λ + 1 = μ_k`, `χ_{k,j} = μ_λ q_{λ,j} + β_ℓ q_{λ,ℓ} - q'_{λ,ℓ}` with the
/// last two terms present only if some `β_ℓ + 1 = β_j`.
pub fn expand_double_indexed<S: Scalar>(
    spec: &DoubleIndexedSpec<S>,
    order: usize,
) -> Result<DoubleIndexedExpansion<S>> {
    spec.validate()?;
    let n = spec.matrix_a.len();
    if spec.mu_grid.len() < order {
        return Err(Error::GridNotClosed(format!(
            "μ grid has {} points, order {} requested",
            spec.mu_grid.len(),
            order
        )));
    }
    let float: Matrix<f64> = spec.matrix_a.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect();
    let dec = spectral::decompose(&float)?;
    let inverse = spectral::inverse_in(&spec.matrix_a, &dec)?;
    let forms: Vec<_> = spec.nonlinearity.iter().map(polarize).collect();
    let mu = &spec.mu_grid;
    let beta = &spec.beta_grid;
    let nb = beta.len();

    // Largest β index that can carry a nonzero coefficient at each order.
    let mut reach: Vec<Option<usize>> = Vec::with_capacity(order);
    let mut q: BTreeMap<(usize, usize), GenPoly<S>> = BTreeMap::new();
    let zero = GenPoly::zero(1, n);
    let get = |q: &BTreeMap<(usize, usize), GenPoly<S>>, k: usize, j: usize| -> GenPoly<S> {
        q.get(&(k, j)).cloned().unwrap_or_else(|| GenPoly::zero(1, n))
    };

    for k in 0..order {
        let forcing: Vec<&DoubleForcing<S>> = spec.forcing.iter().filter(|f| f.mu.approx_eq(&mu[k])).collect();
        let mu_tuples = ordered_tuples(mu, k, false);
        let lambda = position(mu, &(mu[k].clone() - S::one())).filter(|&l| l < k);

        let mut bound = forcing.iter().filter_map(|f| position(beta, &f.beta)).max();
        for t in &mu_tuples {
            let parts: Option<Vec<usize>> = t.iter().map(|&j| reach[j]).collect();
            if let Some(parts) = parts {
                let s = parts.iter().fold(S::zero(), |acc, &l| acc + beta[l].clone());
                let idx = position(beta, &s).ok_or_else(|| {
                    Error::GridNotClosed(format!("β grid too short: needs {s}"))
                })?;
                bound = bound.max(Some(idx));
            }
        }
        if let Some(l) = lambda.and_then(|l| reach[l]) {
            let up = beta[l].clone() + S::one();
            let idx = position(beta, &up)
                .ok_or_else(|| Error::GridNotClosed(format!("β grid too short: needs {up}")))?;
            bound = bound.max(Some(idx));
        }
        reach.push(bound);
        let Some(bound) = bound else { continue };

        for j in 0..=bound.min(nb - 1) {
            let mut rhs = zero.clone();
            for f in &forcing {
                if f.beta.approx_eq(&beta[j]) {
                    rhs = rhs.add(&f.poly)?;
                }
            }
            for t in &mu_tuples {
                let form_list: Vec<_> = forms.iter().filter(|f| f.degree() == t.len()).collect();
                if form_list.is_empty() {
                    continue;
                }
                for ls in ordered_tuples_fixed_len(beta, j, t.len()) {
                    let args: Vec<GenPoly<S>> = t.iter().zip(&ls).map(|(&a, &b)| get(&q, a, b)).collect();
                    if args.iter().any(GenPoly::is_zero) {
                        continue;
                    }
                    for f in &form_list {
                        rhs = rhs.add(&f.apply_to_genpolys(&args)?)?;
                    }
                }
            }
            if let Some(l) = lambda {
                rhs = rhs.add(&get(&q, l, j).scale(&mu[l]))?;
                if let Some(ell) = position(beta, &(beta[j].clone() - S::one())).filter(|&e| e < j) {
                    let prev = get(&q, l, ell);
                    rhs = rhs.add(&prev.scale(&beta[ell]))?.sub(&prev.partial_derivative(0)?)?;
                }
            }
            let value = rhs.apply_matrix(&inverse);
            if !value.is_zero() {
                q.insert((k, j), value);
            }
        }
    }

    let mut terms = Vec::with_capacity(order);
    for k in 0..order {
        let parts: Vec<(S, GenPoly<S>)> = q
            .range((k, 0)..(k + 1, 0))
            .map(|(&(_, j), p)| (beta[j].clone(), p.clone()))
            .collect();
        terms.push(ExpansionTerm {
            mu: mu[k].clone(),
            q: spec.assemble(&parts, n),
        });
    }
    let lattice = ExponentLattice {
        regime: Regime::Mixed,
        eigen_generators: Vec::new(),
        forcing_generators: spec.forcing.iter().map(|f| f.mu.clone()).collect(),
        cutoff: mu.last().unwrap().clone(),
        mu: mu.clone(),
    };
    let coefficients = q.into_iter().map(|((k, j), p)| ((k + 1, j + 1), p)).collect();
    Ok(DoubleIndexedExpansion {
        coefficients,
        expansion: Expansion {
            regime: Regime::Mixed,
            m_star: 0,
            n_star: None,
            lattice,
            terms,
            resonance_notes: Vec::new(),
        },
    })
}

/// Ordered tuples of `len` 0-based β indices (zeros allowed) summing to `beta[target]`.
fn ordered_tuples_fixed_len<S: Scalar>(beta: &[S], target: usize, len: usize) -> Vec<Vec<usize>> {
    fn rec<S: Scalar>(beta: &[S], rest: &S, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            if rest.approx_eq(&S::zero()) {
                out.push(cur.clone());
            }
            return;
        }
        for (i, b) in beta.iter().enumerate() {
            if !(b < rest || b.approx_eq(rest)) {
                break;
            }
            cur.push(i);
            rec(beta, &(rest.clone() - b.clone()), left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(beta, &beta[target], len, &mut Vec::new(), &mut out);
    out
}
