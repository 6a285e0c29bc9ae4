//! Polynomial nonlinearity `G = Σ_m G_m` as homogeneous terms, their
//! symmetric multilinear polarizations, and size bounds.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::genpoly::{GenPoly, Monomial};
use crate::scalar::Scalar;

pub const MAX_DEGREE: usize = 12;

/// Homogeneous polynomial map of degree `m`: component `i` of `G_m(y)` is
/// `Σ_β c_{β,i} y^β` over multi-indices with `|β| = m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousTerm<S> {
    degree: usize,
    codim: usize,
    monomials: Vec<(Vec<u32>, Vec<S>)>,
}

impl<S: Scalar> HomogeneousTerm<S> {
    pub fn new(degree: usize, codim: usize, monomials: Vec<(Vec<u32>, Vec<S>)>) -> Result<Self> {
        if !(2..=MAX_DEGREE).contains(&degree) {
            return Err(Error::Validation(format!(
                "nonlinearity degree {degree} outside 2..={MAX_DEGREE}"
            )));
        }
        let mut merged: Vec<(Vec<u32>, Vec<S>)> = Vec::new();
        for (beta, coeff) in monomials {
            if beta.len() != codim {
                return Err(Error::DimensionMismatch {
                    expected: codim,
                    got: beta.len(),
                });
            }
            if coeff.len() != codim {
                return Err(Error::CodimMismatch(codim, coeff.len()));
            }
            let total: u32 = beta.iter().sum();
            if total as usize != degree {
                return Err(Error::Validation(format!(
                    "monomial {beta:?} has degree {total}, term declares {degree}"
                )));
            }
            match merged.iter_mut().find(|(b, _)| *b == beta) {
                Some((_, c)) => {
                    for (x, y) in c.iter_mut().zip(coeff) {
                        *x = x.clone() + y;
                    }
                }
                None => merged.push((beta, coeff)),
            }
        }
        merged.retain(|(_, c)| c.iter().any(|x| !x.is_zero()));
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(HomogeneousTerm {
            degree,
            codim,
            monomials: merged,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn monomials(&self) -> &[(Vec<u32>, Vec<S>)] {
        &self.monomials
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    /// `G_m(y)`.
    pub fn evaluate(&self, y: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.codim];
        for (beta, c) in &self.monomials {
            let mut w = S::one();
            for (r, &b) in beta.iter().enumerate() {
                for _ in 0..b {
                    w = w * y[r].clone();
                }
            }
            for (o, ci) in out.iter_mut().zip(c) {
                *o = o.clone() + ci.clone() * w.clone();
            }
        }
        out
    }

    pub fn to_f64(&self) -> HomogeneousTerm<f64> {
        HomogeneousTerm {
            degree: self.degree,
            codim: self.codim,
            monomials: self
                .monomials
                .iter()
                .map(|(b, c)| (b.clone(), c.iter().map(Scalar::to_f64).collect()))
                .collect(),
        }
    }

    /// Variable index list `r` repeated `β_r` times.
    fn factor_list(beta: &[u32]) -> Vec<usize> {
        beta.iter()
            .enumerate()
            .flat_map(|(r, &b)| std::iter::repeat(r).take(b as usize))
            .collect()
    }
}

impl HomogeneousTerm<f64> {
    /// `G_m(s + v) - G_m(s)` accumulated into `out`, telescoped factor by
    /// factor so that no large terms cancel.
    pub fn add_difference(&self, s: &[f64], v: &[f64], out: &mut [f64]) {
        for (beta, c) in &self.monomials {
            let f = Self::factor_list(beta);
            let m = f.len();
            let mut suffix = vec![1.0; m + 1];
            for i in (0..m).rev() {
                suffix[i] = suffix[i + 1] * s[f[i]];
            }
            let mut prefix = 1.0;
            let mut diff = 0.0;
            for i in 0..m {
                diff += prefix * v[f[i]] * suffix[i + 1];
                prefix *= s[f[i]] + v[f[i]];
            }
            for (o, ci) in out.iter_mut().zip(c) {
                *o += ci * diff;
            }
        }
    }
}

/// `Σ_{m=2}^{max_degree} G_m(y)`.
pub fn eval_truncated<S: Scalar>(terms: &[HomogeneousTerm<S>], y: &[S], max_degree: usize) -> Vec<S> {
    let mut out = vec![S::zero(); y.len()];
    for t in terms.iter().filter(|t| t.degree <= max_degree) {
        for (o, x) in out.iter_mut().zip(t.evaluate(y)) {
            *o = o.clone() + x;
        }
    }
    out
}

/// `G(s + v) - G(s)` over all terms.
pub fn eval_difference(terms: &[HomogeneousTerm<f64>], s: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    for t in terms {
        t.add_difference(s, v, &mut out);
    }
    out
}

/// The symmetric multilinear form whose diagonal is a homogeneous term.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiForm<S> {
    term: HomogeneousTerm<S>,
}

pub fn polarize<S: Scalar>(term: &HomogeneousTerm<S>) -> MultiForm<S> {
    MultiForm { term: term.clone() }
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

impl<S: Scalar> MultiForm<S> {
    pub fn degree(&self) -> usize {
        self.term.degree
    }

    pub fn codim(&self) -> usize {
        self.term.codim
    }

    pub fn term(&self) -> &HomogeneousTerm<S> {
        &self.term
    }

    /// Polarization identity:
    /// `(1/m!) Σ_{∅≠T⊆{1..m}} (-1)^{m-|T|} G_m(Σ_{i∈T} y_i)`.
    pub fn apply(&self, args: &[Vec<S>]) -> Result<Vec<S>> {
        let m = self.term.degree;
        if args.len() != m {
            return Err(Error::DegreeMismatch {
                expected: m,
                got: args.len(),
            });
        }
        let n = self.term.codim;
        if let Some(a) = args.iter().find(|a| a.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.len(),
            });
        }
        let mut out = vec![S::zero(); n];
        for mask in 1u32..(1 << m) {
            let mut sum = vec![S::zero(); n];
            for (i, a) in args.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    for (s, x) in sum.iter_mut().zip(a) {
                        *s = s.clone() + x.clone();
                    }
                }
            }
            let g = self.term.evaluate(&sum);
            let negative = (m - mask.count_ones() as usize) % 2 == 1;
            for (o, x) in out.iter_mut().zip(g) {
                *o = if negative { o.clone() - x } else { o.clone() + x };
            }
        }
        let mf = S::from_i64(factorial(m));
        Ok(out.into_iter().map(|x| x / mf.clone()).collect())
    }

    /// The polynomial `z ↦ 𝒢_m(p_1(z), ..., p_m(z))`.
    ///
    /// Each monomial `y^β` has symmetric form
    /// `(Π β_r! / m!) Σ_a Π_i (y_i)_{a(i)}` over the distinct ways `a` of
    /// assigning the slots to variables with multiplicities `β`.
    pub fn apply_to_genpolys(&self, ps: &[GenPoly<S>]) -> Result<GenPoly<S>> {
        let m = self.term.degree;
        if ps.len() != m {
            return Err(Error::DegreeMismatch {
                expected: m,
                got: ps.len(),
            });
        }
        let n = self.term.codim;
        if let Some(p) = ps.iter().find(|p| p.codim() != n) {
            return Err(Error::CodimMismatch(n, p.codim()));
        }
        let arity = ps.iter().map(GenPoly::arity).max().unwrap_or(1);
        if ps.iter().any(GenPoly::is_zero) {
            return Ok(GenPoly::zero(arity, n));
        }
        let embedded: Vec<GenPoly<S>> = ps.iter().map(|p| p.embed(arity)).collect::<Result<_>>()?;
        // components[i][r] = r-th component of p_i as (powers, scalar) pairs
        let components: Vec<Vec<Vec<(Vec<S>, S)>>> = embedded
            .iter()
            .map(|p| {
                (0..n)
                    .map(|r| {
                        p.monomials()
                            .iter()
                            .filter(|mono| !mono.coeff[r].is_zero())
                            .map(|mono| (mono.powers.clone(), mono.coeff[r].clone()))
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let mut out: Vec<Monomial<S>> = Vec::new();
        let mf = S::from_i64(factorial(m));
        for (beta, c) in &self.term.monomials {
            let weight = beta.iter().fold(S::one(), |acc, &b| acc * S::from_i64(factorial(b as usize))) / mf.clone();
            let mut remaining: Vec<u32> = beta.clone();
            let mut products: Vec<(Vec<S>, S)> = Vec::new();
            let start = vec![(vec![S::zero(); arity], S::one())];
            assign(0, &mut remaining, &components, start, &mut products);
            for (powers, s) in products {
                let f = s * weight.clone();
                out.push(Monomial {
                    powers,
                    coeff: c.iter().map(|ci| ci.clone() * f.clone()).collect(),
                });
            }
        }
        GenPoly::new(arity, n, out)
    }
}

/// Recursively assigns slot `i` to each variable with remaining multiplicity,
/// multiplying the running partial products by that component.
fn assign<S: Scalar>(
    i: usize,
    remaining: &mut [u32],
    components: &[Vec<Vec<(Vec<S>, S)>>],
    partial: Vec<(Vec<S>, S)>,
    out: &mut Vec<(Vec<S>, S)>,
) {
    if i == components.len() {
        out.extend(partial);
        return;
    }
    for r in 0..remaining.len() {
        if remaining[r] == 0 || components[i][r].is_empty() {
            continue;
        }
        remaining[r] -= 1;
        let mut next = Vec::with_capacity(partial.len() * components[i][r].len());
        for (pp, pc) in &partial {
            for (qp, qc) in &components[i][r] {
                next.push((
                    pp.iter().zip(qp).map(|(a, b)| a.clone() + b.clone()).collect(),
                    pc.clone() * qc.clone(),
                ));
            }
        }
        assign(i + 1, remaining, components, next, out);
        remaining[r] += 1;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadraticBound {
    pub c_star: f64,
    pub r_star: f64,
    /// Estimated multilinear norm per degree.
    pub form_norms: Vec<(usize, f64)>,
}

const NORM_SAMPLES: usize = 2000;
const NORM_SEED: u64 = 0x5eed_0f_c0ffee;

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lower estimate of `sup |𝒢_m(u_1, ..., u_m)|` over unit vectors: random
/// sampling followed by alternating slot-wise maximization (each slot's
/// optimum is the top right singular vector of the induced linear map).
pub fn estimate_form_norm(form: &MultiForm<f64>) -> f64 {
    let n = form.codim();
    let m = form.degree();
    if form.term.is_zero() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED ^ (m as u64) << 8 ^ n as u64);
    let mut best = 0.0;
    let mut best_args: Vec<Vec<f64>> = Vec::new();
    for _ in 0..NORM_SAMPLES {
        let args: Vec<Vec<f64>> = (0..m).map(|_| random_unit(&mut rng, n)).collect();
        let v = norm2(&form.apply(&args).expect("shapes match"));
        if v > best {
            best = v;
            best_args = args;
        }
    }
    let mut args = best_args;
    for _ in 0..50 {
        let before = best;
        for slot in 0..m {
            let cols: Vec<Vec<f64>> = (0..n)
                .map(|r| {
                    let mut a = args.clone();
                    a[slot] = (0..n).map(|c| if c == r { 1.0 } else { 0.0 }).collect();
                    form.apply(&a).expect("shapes match")
                })
                .collect();
            let mat = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
            let svd = mat.svd(false, true);
            let v_t = svd.v_t.expect("requested V^T");
            let (top, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, s)| if *s > acc.1 { (i, *s) } else { acc });
            args[slot] = v_t.row(top).iter().copied().collect();
            best = best.max(svd.singular_values[top]);
        }
        if best - before <= 1e-14 * best {
            break;
        }
    }
    best
}

/// Constants with `|G(y)| ≤ c_* |y|^2` on `|y| ≤ r_*`, where
/// `c_* = Σ_m ‖𝒢_m‖ r_*^{m-2}`.
pub fn quadratic_bound<S: Scalar>(terms: &[HomogeneousTerm<S>], r_star: f64) -> QuadraticBound {
    let mut c_star = 0.0;
    let mut form_norms = Vec::new();
    for t in terms {
        let norm = estimate_form_norm(&polarize(&t.to_f64()));
        c_star += norm * r_star.powi(t.degree as i32 - 2);
        form_norms.push((t.degree, norm));
    }
    QuadraticBound {
        c_star,
        r_star,
        form_norms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn square() -> HomogeneousTerm<f64> {
        HomogeneousTerm::new(2, 1, vec![(vec![2], vec![1.0])]).unwrap()
    }

    #[test]
    fn bilinear_square() {
        let f = polarize(&square());
        assert_eq!(f.apply(&[vec![3.0], vec![5.0]]).unwrap(), vec![15.0]);
    }

    #[test]
    fn mixed_product_polarization() {
        let g = HomogeneousTerm::new(2, 2, vec![(vec![1, 1], vec![1.0, 0.0])]).unwrap();
        let v = polarize(&g).apply(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(v, vec![0.5, 0.0]);
    }

    #[test]
    fn diagonal_reproduces_term() {
        let g = HomogeneousTerm::new(
            3,
            2,
            vec![(vec![2, 1], vec![1.0, -2.0]), (vec![0, 3], vec![0.5, 1.0])],
        )
        .unwrap();
        let y = vec![0.7, -1.3];
        let d = polarize(&g).apply(&[y.clone(), y.clone(), y.clone()]).unwrap();
        let direct = g.evaluate(&y);
        for (a, b) in d.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_errors() {
        let f = polarize(&square());
        assert!(matches!(f.apply(&[vec![1.0]]), Err(Error::DegreeMismatch { .. })));
        assert!(matches!(
            f.apply(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        let p = GenPoly::constant(1, vec![1.0, 1.0]);
        assert!(matches!(
            f.apply_to_genpolys(&[p.clone(), p]),
            Err(Error::CodimMismatch(1, 2))
        ));
    }

    #[test]
    fn genpoly_application_examples() {
        let f = polarize(&square());
        let zinv = GenPoly::scalar_monomial(vec![-1.0], 1.0);
        let r = f.apply_to_genpolys(&[zinv.clone(), zinv.clone()]).unwrap();
        assert!(r.approx_eq(&GenPoly::scalar_monomial(vec![-2.0], 1.0), 0.0));
        let one = GenPoly::constant(1, vec![1.0]);
        let r = f.apply_to_genpolys(&[one, zinv.clone()]).unwrap();
        assert!(r.approx_eq(&zinv, 0.0));
        let two = GenPoly::scalar_monomial(vec![-2.0], 2.0);
        let r = f.apply_to_genpolys(&[zinv.clone(), two.clone()]).unwrap();
        assert!(r.approx_eq(&GenPoly::scalar_monomial(vec![-3.0], 2.0), 0.0));
        for z in [2.0, 3.0, 5.0] {
            let lhs = r.evaluate(&[z]).unwrap()[0];
            let rhs = zinv.evaluate(&[z]).unwrap()[0] * two.evaluate(&[z]).unwrap()[0];
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn genpoly_application_embeds_arities() {
        let f = polarize(&square());
        let a = GenPoly::scalar_monomial(vec![1.0], 1.0);
        let b = GenPoly::scalar_monomial(vec![0.0, 2.0], 3.0);
        let r = f.apply_to_genpolys(&[a, b]).unwrap();
        assert_eq!(r.arity(), 2);
        assert!(r.approx_eq(&GenPoly::scalar_monomial(vec![1.0, 2.0], 3.0), 0.0));
    }

    #[test]
    fn truncated_evaluation() {
        let cube = HomogeneousTerm::new(3, 1, vec![(vec![3], vec![1.0])]).unwrap();
        assert!((eval_truncated(&[square()], &[0.1], 2)[0] - 0.01).abs() < 1e-16);
        assert_eq!(eval_truncated::<f64>(&[], &[3.0], 5), vec![0.0]);
        assert_eq!(eval_truncated(&[square(), cube.clone()], &[2.0], 3), vec![12.0]);
        assert_eq!(eval_truncated(&[square(), cube], &[2.0], 2), vec![4.0]);
    }

    #[test]
    fn telescoped_difference() {
        let g = HomogeneousTerm::new(3, 2, vec![(vec![2, 1], vec![1.0, -2.0])]).unwrap();
        let s = [0.3, -0.2];
        let v = [1e-3, 2e-3];
        let d = eval_difference(&[g.clone()], &s, &v);
        let sv = [s[0] + v[0], s[1] + v[1]];
        let direct: Vec<f64> = g.evaluate(&sv).iter().zip(g.evaluate(&s)).map(|(a, b)| a - b).collect();
        for (a, b) in d.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_bound_examples() {
        let b = quadratic_bound(&[square()], 1.0);
        assert!((b.c_star - 1.0).abs() < 1e-12);
        assert_eq!(quadratic_bound::<f64>(&[], 1.0).c_star, 0.0);
        let cube = HomogeneousTerm::new(3, 1, vec![(vec![3], vec![1.0])]).unwrap();
        let b = quadratic_bound(&[square(), cube], 1.0);
        assert!(b.c_star >= 2.0 - 1e-12);
    }

    #[test]
    fn quadratic_bound_dominates_samples() {
        let g = HomogeneousTerm::new(2, 2, vec![(vec![1, 1], vec![1.0, 0.0]), (vec![2, 0], vec![0.0, 3.0])]).unwrap();
        let b = quadratic_bound(&[g.clone()], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let y = random_unit(&mut rng, 2);
            assert!(norm2(&g.evaluate(&y)) <= b.c_star * (1.0 + 1e-9));
        }
    }

    #[test]
    fn exact_polarization() {
        let g: HomogeneousTerm<Rational> = HomogeneousTerm::new(
            2,
            2,
            vec![(vec![1, 1], vec![Rational::from_i64(1), Rational::from_i64(0)])],
        )
        .unwrap();
        let one = Rational::from_i64(1);
        let zero = Rational::from_i64(0);
        let v = polarize(&g).apply(&[vec![one.clone(), zero.clone()], vec![zero, one]]).unwrap();
        assert_eq!(v[0], Rational::from_ratio(1, 2));
    }

    #[test]
    fn degree_validation() {
        assert!(HomogeneousTerm::<f64>::new(1, 1, vec![(vec![1], vec![1.0])]).is_err());
        assert!(HomogeneousTerm::<f64>::new(2, 1, vec![(vec![3], vec![1.0])]).is_err());
    }
}
