//! Exponent sets `μ_1 < μ_2 < ...` and the index decompositions that drive
//! the nonlinear sums of the recursions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `ψ = e^t`, coefficients polynomial in `t`.
    Exp,
    /// `ψ = t`, coefficients polynomial in `ln t`.
    Pow,
    /// `ψ = L_m`, coefficients polynomial in a deeper iterated log.
    Log,
    /// `ψ = L_m`, coefficients generalized polynomials in `L_{m+1}, L_{m+2}, ...`.
    IterLog,
    /// `ψ = t`, coefficients generalized polynomials in `ln t, ln ln t, ...`.
    Mixed,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Exp => "exp",
            Regime::Pow => "pow",
            Regime::Log => "log",
            Regime::IterLog => "iterlog",
            Regime::Mixed => "mixed",
        }
    }

    /// Whether the exponent set must also be closed under `μ ↦ μ + 1`.
    pub fn unit_closed(self) -> bool {
        matches!(self, Regime::Pow | Regime::Mixed)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentLattice<S> {
    pub regime: Regime,
    pub eigen_generators: Vec<S>,
    pub forcing_generators: Vec<S>,
    pub cutoff: S,
    pub mu: Vec<S>,
}

fn le_tol<S: Scalar>(a: &S, b: &S) -> bool {
    a < b || a.approx_eq(b)
}

/// Sorted, tolerance-deduplicated set of scalars.
#[derive(Debug, Clone, Default)]
struct SortedSet<S> {
    items: Vec<S>,
}

impl<S: Scalar> SortedSet<S> {
    fn position(&self, x: &S) -> std::result::Result<usize, usize> {
        let p = self.items.partition_point(|y| y < x);
        if p < self.items.len() && self.items[p].approx_eq(x) {
            return Ok(p);
        }
        if p > 0 && self.items[p - 1].approx_eq(x) {
            return Ok(p - 1);
        }
        Err(p)
    }

    fn insert(&mut self, x: S) -> bool {
        match self.position(&x) {
            Ok(_) => false,
            Err(p) => {
                self.items.insert(p, x);
                true
            }
        }
    }
}

/// Additive semigroup generated by `gens`, intersected with `(0, cutoff]`.
fn semigroup<S: Scalar>(gens: &[S], cutoff: &S) -> SortedSet<S> {
    let mut set = SortedSet { items: Vec::new() };
    let mut queue: Vec<S> = gens.iter().filter(|g| le_tol(*g, cutoff)).cloned().collect();
    while let Some(x) = queue.pop() {
        if !set.insert(x.clone()) {
            continue;
        }
        for g in gens {
            let y = x.clone() + g.clone();
            if le_tol(&y, cutoff) && set.position(&y).is_err() {
                queue.push(y);
            }
        }
    }
    set
}

fn validate_generators<S: Scalar>(gens: &[S]) -> Result<()> {
    for g in gens {
        if !g.is_positive() {
            return Err(Error::NonPositiveGenerator(g.to_f64()));
        }
    }
    Ok(())
}

fn rational_generators<S: Scalar>(xs: &[S]) -> Option<Vec<Rational>> {
    xs.iter().map(|x| Rational::from_f64(x.to_f64())).collect()
}

/// Builds the regime's exponent semigroup up to `cutoff`.
///
/// Exp: generated by eigenvalues and forcing exponents. Pow/Mixed:
/// `{k + Σ α : k ≥ 0, at least one α}`. Log/IterLog: generated by the
/// forcing exponents alone.
pub fn generate<S: Scalar>(
    regime: Regime,
    eigen_generators: &[S],
    forcing_generators: &[S],
    cutoff: S,
) -> Result<ExponentLattice<S>> {
    if forcing_generators.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    if regime == Regime::Exp && eigen_generators.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    validate_generators(forcing_generators)?;
    validate_generators(eigen_generators)?;
    let max_gen = forcing_generators
        .iter()
        .chain(if regime == Regime::Exp { eigen_generators } else { &[] })
        .fold(S::zero(), |m, g| if *g > m { g.clone() } else { m });
    if !le_tol(&max_gen, &cutoff) {
        return Err(Error::CutoffTooSmall {
            cutoff: cutoff.to_f64(),
            max: max_gen.to_f64(),
        });
    }

    let mu: Vec<S> = if !S::EXACT {
        // Rational fast path: exact closure, then back to floats.
        let all: Vec<S> = eigen_generators
            .iter()
            .chain(forcing_generators)
            .cloned()
            .chain(std::iter::once(cutoff.clone()))
            .collect();
        match rational_generators(&all) {
            Some(_) => {
                let eig = rational_generators(eigen_generators).unwrap();
                let frc = rational_generators(forcing_generators).unwrap();
                let cut = Rational::from_f64(cutoff.to_f64()).unwrap();
                closure(regime, &eig, &frc, &cut)
                    .into_iter()
                    .map(|x| S::from_f64(x.to_f64()).unwrap())
                    .collect()
            }
            None => closure(regime, eigen_generators, forcing_generators, &cutoff),
        }
    } else {
        closure(regime, eigen_generators, forcing_generators, &cutoff)
    };

    Ok(ExponentLattice {
        regime,
        eigen_generators: eigen_generators.to_vec(),
        forcing_generators: forcing_generators.to_vec(),
        cutoff,
        mu,
    })
}

fn closure<S: Scalar>(regime: Regime, eigen: &[S], forcing: &[S], cutoff: &S) -> Vec<S> {
    match regime {
        Regime::Exp => {
            let gens: Vec<S> = eigen.iter().chain(forcing).cloned().collect();
            semigroup(&gens, cutoff).items
        }
        Regime::Log | Regime::IterLog => semigroup(forcing, cutoff).items,
        Regime::Pow | Regime::Mixed => {
            let base = semigroup(forcing, cutoff);
            let mut out = base.clone();
            for s in &base.items {
                let mut x = s.clone() + S::one();
                while le_tol(&x, cutoff) {
                    out.insert(x.clone());
                    x = x + S::one();
                }
            }
            out.items
        }
    }
}

/// Generates a lattice holding at least `count` exponents, doubling the
/// cutoff as needed.
pub fn generate_at_least<S: Scalar>(
    regime: Regime,
    eigen_generators: &[S],
    forcing_generators: &[S],
    count: usize,
) -> Result<ExponentLattice<S>> {
    let start = forcing_generators
        .iter()
        .chain(if regime == Regime::Exp { eigen_generators } else { &[] })
        .fold(S::one(), |m, g| if *g > m { g.clone() } else { m });
    let mut cutoff = start;
    loop {
        let lat = generate(regime, eigen_generators, forcing_generators, cutoff.clone())?;
        if lat.mu.len() >= count {
            return Ok(lat);
        }
        cutoff = cutoff.clone() + cutoff;
    }
}

/// Wraps a user-supplied exponent sequence, checking the closure properties
/// up to its last element.
pub fn from_sequence<S: Scalar>(
    regime: Regime,
    eigen_generators: &[S],
    forcing_generators: &[S],
    sequence: Vec<S>,
) -> Result<ExponentLattice<S>> {
    let cutoff = sequence.last().cloned().ok_or(Error::EmptyGenerators)?;
    if !sequence[0].is_positive() {
        return Err(Error::NonPositiveGenerator(sequence[0].to_f64()));
    }
    for w in sequence.windows(2) {
        if !(w[0] < w[1]) || w[0].approx_eq(&w[1]) {
            return Err(Error::GridNotClosed(format!(
                "sequence must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    let set = SortedSet {
        items: sequence.clone(),
    };
    for (i, a) in sequence.iter().enumerate() {
        for b in &sequence[i..] {
            let s = a.clone() + b.clone();
            if le_tol(&s, &cutoff) && set.position(&s).is_err() {
                return Err(Error::GridNotClosed(format!("{a} + {b} missing")));
            }
        }
        if regime.unit_closed() {
            let s = a.clone() + S::one();
            if le_tol(&s, &cutoff) && set.position(&s).is_err() {
                return Err(Error::GridNotClosed(format!("{a} + 1 missing")));
            }
        }
    }
    if regime == Regime::Exp {
        for e in eigen_generators {
            if le_tol(e, &cutoff) && set.position(e).is_err() {
                return Err(Error::LatticeMissingEigenvalue(e.to_f64()));
            }
        }
    }
    for f in forcing_generators {
        if le_tol(f, &cutoff) && set.position(f).is_err() {
            return Err(Error::GridNotClosed(format!("forcing exponent {f} missing")));
        }
    }
    Ok(ExponentLattice {
        regime,
        eigen_generators: eigen_generators.to_vec(),
        forcing_generators: forcing_generators.to_vec(),
        cutoff,
        mu: sequence,
    })
}

impl<S: Scalar> ExponentLattice<S> {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// 0-based position of `value`, if present.
    pub fn position(&self, value: &S) -> Option<usize> {
        let set = SortedSet {
            items: self.mu.clone(),
        };
        set.position(value).ok()
    }

    /// 1-based index `k` with `μ_k = value`.
    pub fn index_of(&self, value: &S) -> Option<usize> {
        self.position(value).map(|p| p + 1)
    }

    /// Nondecreasing 0-based index multisets `(j_1 ≤ ... ≤ j_m)`, `m ≥ 2`,
    /// whose exponents sum to the exponent at 0-based position `k0`.
    pub fn multisets(&self, k0: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        if k0 >= self.mu.len() {
            return out;
        }
        let target = self.mu[k0].clone();
        let mut current = Vec::new();
        self.multiset_search(k0, 0, &target, &mut current, &mut out);
        out
    }

    fn multiset_search(
        &self,
        k0: usize,
        start: usize,
        remaining: &S,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        for i in start..k0 {
            let m = &self.mu[i];
            if !le_tol(m, remaining) {
                break;
            }
            let rest = remaining.clone() - m.clone();
            current.push(i);
            if rest.approx_eq(&S::zero()) {
                if current.len() >= 2 {
                    out.push(current.clone());
                }
            } else if le_tol(&self.mu[i], &rest) {
                self.multiset_search(k0, i, &rest, current, out);
            }
            current.pop();
        }
    }

    /// Every ordered tuple `(j_1, ..., j_m)` of 1-based indices, `m ≥ 2`,
    /// with `μ_{j_1} + ... + μ_{j_m} = μ_k`.
    pub fn decompositions(&self, k: usize) -> Result<Vec<Vec<usize>>> {
        if k == 0 || k > self.mu.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.mu.len(),
            });
        }
        let mut out = Vec::new();
        for ms in self.multisets(k - 1) {
            let base: Vec<usize> = ms.iter().map(|j| j + 1).collect();
            out.extend(distinct_permutations(&base));
        }
        Ok(out)
    }
}

/// All distinct orderings of a sorted sequence, in lexicographic order.
pub fn distinct_permutations(sorted: &[usize]) -> Vec<Vec<usize>> {
    let mut cur = sorted.to_vec();
    let mut out = vec![cur.clone()];
    loop {
        let n = cur.len();
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
        out.push(cur.clone());
    }
}

/// Number of distinct orderings of a multiset given as a sorted sequence.
pub fn permutation_count(sorted: &[usize]) -> u64 {
    let mut count: u64 = 1;
    let mut placed: u64 = 0;
    let mut run: u64 = 0;
    for (i, x) in sorted.iter().enumerate() {
        run = if i > 0 && sorted[i - 1] == *x { run + 1 } else { 1 };
        placed += 1;
        // multiply by placed / run, kept integral at each step
        count = count * placed / run;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(regime: Regime, eig: &[f64], frc: &[f64], cutoff: f64) -> Vec<f64> {
        generate(regime, eig, frc, cutoff).unwrap().mu
    }

    fn assert_seq(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn generate_examples() {
        assert_seq(&lat(Regime::Exp, &[1.0], &[1.0], 5.0), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_seq(&lat(Regime::Pow, &[], &[1.0], 4.0), &[1.0, 2.0, 3.0, 4.0]);
        assert_seq(
            &lat(Regime::Exp, &[1.0, 2.0], &[0.5], 3.0),
            &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        );
    }

    #[test]
    fn pow_needs_a_forcing_exponent() {
        // 1 is not in {k + Σα} when the only α is 2
        assert_seq(&lat(Regime::Pow, &[], &[2.0], 5.0), &[2.0, 3.0, 4.0, 5.0]);
        assert_seq(&lat(Regime::Log, &[], &[2.0], 7.0), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn irrational_generators_merge() {
        let s = 2f64.sqrt();
        let mu = lat(Regime::Log, &[], &[s, 2.0 * s], 3.0 * s + 1e-12);
        assert_eq!(mu.len(), 3);
    }

    #[test]
    fn generate_errors() {
        assert!(matches!(
            generate::<f64>(Regime::Pow, &[], &[], 3.0),
            Err(Error::EmptyGenerators)
        ));
        assert!(matches!(
            generate(Regime::Pow, &[], &[-1.0], 3.0),
            Err(Error::NonPositiveGenerator(_))
        ));
        assert!(matches!(
            generate(Regime::Pow, &[], &[4.0], 3.0),
            Err(Error::CutoffTooSmall { .. })
        ));
    }

    #[test]
    fn index_of_examples() {
        let l = generate(Regime::Pow, &[], &[1.0], 3.0).unwrap();
        assert_eq!(l.index_of(&2.0), Some(2));
        assert_eq!(l.index_of(&2.5), None);
        let l = generate(Regime::Log, &[], &[0.5], 1.5).unwrap();
        assert_eq!(l.index_of(&1.5), Some(3));
    }

    #[test]
    fn decomposition_examples() {
        let l = generate(Regime::Pow, &[], &[1.0], 5.0).unwrap();
        let mut d = l.decompositions(3).unwrap();
        d.sort();
        assert_eq!(d, vec![vec![1, 1, 1], vec![1, 2], vec![2, 1]]);
        assert!(l.decompositions(1).unwrap().is_empty());
        assert!(matches!(l.decompositions(9), Err(Error::IndexOutOfRange { .. })));

        let l = generate(Regime::Log, &[], &[0.5], 2.0).unwrap();
        let d = l.decompositions(4).unwrap();
        assert_eq!(d.len(), 7);
    }

    #[test]
    fn permutations_and_counts() {
        assert_eq!(distinct_permutations(&[1, 1, 2]).len(), 3);
        assert_eq!(permutation_count(&[1, 1, 2]), 3);
        assert_eq!(permutation_count(&[1, 2, 3, 4]), 24);
        assert_eq!(permutation_count(&[2, 2, 2]), 1);
        assert_eq!(permutation_count(&[1, 1, 2, 2]), 6);
    }

    #[test]
    fn sequence_validation() {
        let ok = from_sequence(Regime::Pow, &[], &[1.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ok.len(), 3);
        assert!(matches!(
            from_sequence(Regime::Pow, &[], &[1.0], vec![1.0, 3.0]),
            Err(Error::GridNotClosed(_))
        ));
        assert!(matches!(
            from_sequence(Regime::Exp, &[1.5], &[1.0], vec![1.0, 2.0, 3.0]),
            Err(Error::LatticeMissingEigenvalue(_))
        ));
        assert!(matches!(
            from_sequence(Regime::Log, &[], &[0.5], vec![0.5, 0.7, 1.0, 1.2, 1.5]),
            Err(Error::GridNotClosed(_))
        ));
    }

    #[test]
    fn exact_generation() {
        let half = Rational::from_ratio(1, 2);
        let l = generate(Regime::Mixed, &[], &[half], Rational::from_i64(2)).unwrap();
        assert_eq!(l.mu.len(), 4);
        assert_eq!(l.mu[2], Rational::from_ratio(3, 2));
    }
}
