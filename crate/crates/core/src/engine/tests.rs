use super::*;
use crate::genpoly::Monomial;
use crate::nonlinear::HomogeneousTerm;
use crate::scalar::Rational;

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn int(n: i64) -> Rational {
    Rational::from_i64(n)
}

fn square<S: Scalar>(c: S) -> HomogeneousTerm<S> {
    HomogeneousTerm::new(2, 1, vec![(vec![2], vec![c])]).unwrap()
}

fn konst<S: Scalar>(c: S) -> GenPoly<S> {
    GenPoly::constant(1, vec![c])
}

fn scalar_problem<S: Scalar>(
    a: S,
    nonlinearity: Vec<HomogeneousTerm<S>>,
    regime: Regime,
    m_star: usize,
    forcing: Vec<(S, GenPoly<S>)>,
) -> ProblemSpec<S> {
    let forcing = forcing
        .into_iter()
        .map(|(exponent, poly)| ForcingTerm { exponent, poly })
        .collect();
    ProblemSpec::new(vec![vec![a]], nonlinearity, regime, m_star, forcing)
}

fn benchmark(regime: Regime, m_star: usize) -> ProblemSpec<Rational> {
    scalar_problem(int(1), vec![square(int(1))], regime, m_star, vec![(int(1), konst(int(1)))])
}

fn constants(exp: &Expansion<Rational>) -> Vec<Rational> {
    exp.terms
        .iter()
        .map(|t| {
            assert!(t.q.len() <= 1, "expected a constant, got {:?}", t.q);
            assert!(t.q.monomials().iter().all(|m| m.powers.iter().all(Scalar::is_zero)));
            t.q.monomials().first().map_or(int(0), |m| m.coeff[0].clone())
        })
        .collect()
}

#[test]
fn type1_nonresonant_constant() {
    let spec = scalar_problem(int(1), vec![], Regime::Exp, 0, vec![(q(1, 2), konst(int(1)))]);
    let exp = Engine::new(spec).unwrap().expand(3).unwrap();
    assert_eq!(exp.mu(), vec![q(1, 2), int(1), q(3, 2)]);
    assert_eq!(constants(&exp), vec![int(2), int(0), int(0)]);
    // μ_2 = λ_1 carries the free mode c e^{-t}
    let flagged: Vec<usize> = exp.resonance_notes.iter().filter(|n| n.resonant).map(|n| n.k).collect();
    assert_eq!(flagged, vec![2]);
}

#[test]
fn type1_zero_forcing_gives_zero_terms() {
    let spec = scalar_problem(int(3), vec![], Regime::Exp, 0, vec![(int(1), GenPoly::zero(1, 1))]);
    let exp = Engine::new(spec).unwrap().expand(4).unwrap();
    assert_eq!(exp.order(), 4);
    assert!(exp.terms.iter().all(|t| t.q.is_zero()));
}

#[test]
fn type1_resonance_defaults_to_zero_and_is_flagged() {
    let spec = benchmark(Regime::Exp, 0);
    let exp = Engine::new(spec.clone()).unwrap().expand(2).unwrap();
    assert_eq!(exp.terms[0].q, GenPoly::scalar_monomial(vec![int(1)], int(1)));
    let note = &exp.resonance_notes[0];
    assert!(note.resonant && note.source == ConstantSource::Default);
    assert!(exp.has_uncalibrated_resonance());

    let mut supplied = spec;
    supplied.resonance_constants.insert((1, 1), vec![int(3)]);
    let exp = Engine::new(supplied).unwrap().expand(2).unwrap();
    let expect = GenPoly::from_dense(vec![vec![int(3)], vec![int(1)]], 1);
    assert_eq!(exp.terms[0].q, expect);
    assert_eq!(exp.resonance_notes[0].source, ConstantSource::Supplied);
    assert!(!exp.has_uncalibrated_resonance());
}

#[test]
fn type1_rejects_lattice_starting_above_eigenvalue() {
    let spec = scalar_problem(int(1), vec![], Regime::Exp, 0, vec![(int(2), konst(int(1)))]);
    let engine = Engine::new(spec).unwrap();
    // the eigenvalue generates the lattice, so μ_1 = 1 ≤ λ_1 always holds
    let exp = engine.expand(2).unwrap();
    assert_eq!(exp.mu(), vec![int(1), int(2)]);
}

#[test]
fn type2_benchmark_chain() {
    let exp = Engine::new(benchmark(Regime::Pow, 0)).unwrap().expand(3).unwrap();
    assert_eq!(exp.mu(), vec![int(1), int(2), int(3)]);
    assert_eq!(constants(&exp), vec![int(1), int(2), int(8)]);
}

#[test]
fn type2_benchmark_in_floats() {
    let spec = benchmark(Regime::Pow, 0).to_f64();
    let exp = Engine::new(spec).unwrap().expand(3).unwrap();
    let got: Vec<f64> = exp.terms.iter().map(|t| t.q.monomials()[0].coeff[0]).collect();
    assert_eq!(got, vec![1.0, 2.0, 8.0]);
}

#[test]
fn type2_constant_forcing_gives_constant_terms() {
    let spec = scalar_problem(
        int(2),
        vec![square(q(1, 3))],
        Regime::Pow,
        0,
        vec![(int(1), konst(int(5))), (int(2), konst(q(-1, 7)))],
    );
    let exp = Engine::new(spec).unwrap().expand(5).unwrap();
    constants(&exp);
}

#[test]
fn type2_linear_identity_chain() {
    let spec = scalar_problem(int(1), vec![], Regime::Pow, 0, vec![(int(1), konst(int(1)))]);
    let exp = Engine::new(spec).unwrap().expand(5).unwrap();
    // q_k = (k-1) q_{k-1}
    assert_eq!(constants(&exp), vec![int(1), int(1), int(2), int(6), int(24)]);
}

#[test]
fn type2_log_derivative_enters_chi() {
    // p_1 = φ: q_1 = φ, χ_2 = φ - 1
    let phi = GenPoly::scalar_monomial(vec![int(1)], int(1));
    let spec = scalar_problem(int(1), vec![], Regime::Pow, 0, vec![(int(1), phi.clone())]);
    let exp = Engine::new(spec).unwrap().expand(2).unwrap();
    assert_eq!(exp.terms[0].q, phi);
    assert_eq!(exp.terms[1].q, phi.sub(&konst(int(1))).unwrap());
}

#[test]
fn type3_linear_is_inverse_times_forcing() {
    let a = vec![vec![int(2), int(1)], vec![int(1), int(2)]];
    let p1 = GenPoly::from_dense(vec![vec![int(1), int(0)], vec![int(0), int(3)]], 2);
    let p2 = GenPoly::constant(1, vec![int(4), int(-1)]);
    let forcing = vec![
        ForcingTerm { exponent: int(1), poly: p1.clone() },
        ForcingTerm { exponent: int(2), poly: p2.clone() },
    ];
    let spec = ProblemSpec::new(a.clone(), vec![], Regime::Log, 1, forcing);
    let exp = Engine::new(spec).unwrap().expand(3).unwrap();
    let inv = linalg::invert(&a).unwrap();
    assert_eq!(exp.terms[0].q, p1.apply_matrix(&inv));
    assert_eq!(exp.terms[1].q, p2.apply_matrix(&inv));
    assert!(exp.terms[2].q.is_zero());
}

#[test]
fn type3_quadratic_example() {
    let spec = scalar_problem(int(2), vec![square(int(1))], Regime::Log, 1, vec![(int(1), konst(int(1)))]);
    let exp = Engine::new(spec).unwrap().expand(2).unwrap();
    assert_eq!(constants(&exp), vec![q(1, 2), q(1, 8)]);
}

#[test]
fn type3_drops_chi() {
    let exp = Engine::new(benchmark(Regime::Log, 1)).unwrap().expand(3).unwrap();
    assert_eq!(constants(&exp), vec![int(1), int(1), int(2)]);
}

#[test]
fn iterlog_real_exponents() {
    let p1 = GenPoly::scalar_monomial(vec![q(-1, 2)], int(1));
    let spec = scalar_problem(
        int(1),
        vec![square(int(1))],
        Regime::IterLog,
        1,
        vec![(int(1), p1.clone()), (int(2), GenPoly::zero(1, 1))],
    );
    let exp = Engine::new(spec).unwrap().expand(2).unwrap();
    assert_eq!(exp.terms[0].q, p1);
    assert_eq!(exp.terms[1].q, GenPoly::scalar_monomial(vec![int(-1)], int(1)));
}

#[test]
fn iterlog_embeds_lower_arity_terms() {
    let p1 = GenPoly::scalar_monomial(vec![int(1)], int(1));
    let p2 = GenPoly::scalar_monomial(vec![int(0), int(2)], int(3));
    let spec = scalar_problem(int(1), vec![square(int(1))], Regime::IterLog, 2, vec![(int(1), p1), (int(2), p2)]);
    let exp = Engine::new(spec).unwrap().expand(2).unwrap();
    assert_eq!(exp.terms[0].q.arity(), 1);
    assert_eq!(exp.terms[1].q.arity(), 2);
    let expect = GenPoly::new(
        2,
        1,
        vec![
            Monomial { powers: vec![int(2), int(0)], coeff: vec![int(1)] },
            Monomial { powers: vec![int(0), int(2)], coeff: vec![int(3)] },
        ],
    )
    .unwrap();
    assert_eq!(exp.terms[1].q, expect);
}

#[test]
fn iterlog_rejects_shrinking_arity() {
    let p1 = GenPoly::scalar_monomial(vec![int(0), int(1)], int(1));
    let p2 = konst(int(1));
    let spec = scalar_problem(int(1), vec![], Regime::IterLog, 1, vec![(int(1), p1), (int(2), p2)]);
    assert!(matches!(Engine::new(spec), Err(Error::ArityNonMonotone(_))));
}

#[test]
fn mixed_second_variable() {
    let z2 = GenPoly::scalar_monomial(vec![int(0), int(1)], int(1));
    let spec = scalar_problem(int(1), vec![], Regime::Mixed, 0, vec![(int(1), z2.clone())]);
    let exp = Engine::new(spec).unwrap().expand(2).unwrap();
    assert_eq!(exp.terms[0].q, z2);
    let inv_z1 = GenPoly::scalar_monomial(vec![int(-1), int(0)], int(1));
    assert_eq!(exp.terms[1].q, z2.sub(&inv_z1).unwrap());
}

#[test]
fn mixed_constant_chain() {
    let spec = scalar_problem(int(1), vec![], Regime::Mixed, 0, vec![(int(1), konst(int(1)))]);
    let exp = Engine::new(spec).unwrap().expand(3).unwrap();
    assert_eq!(constants(&exp), vec![int(1), int(1), int(2)]);
}

#[test]
fn mixed_matches_type2_on_single_variable_specs() {
    let phi = GenPoly::from_dense(vec![vec![int(1)], vec![q(1, 2)], vec![int(-2)]], 1);
    let forcing = vec![(int(1), phi), (int(2), konst(int(3)))];
    let mixed = scalar_problem(int(3), vec![square(int(2))], Regime::Mixed, 0, forcing.clone());
    let pow = scalar_problem(int(3), vec![square(int(2))], Regime::Pow, 0, forcing);
    let a = Engine::new(mixed).unwrap().expand(5).unwrap();
    let b = Engine::new(pow).unwrap().expand(5).unwrap();
    for (x, y) in a.terms.iter().zip(&b.terms) {
        assert_eq!(x, y);
    }
}

#[test]
fn iterlog_matches_type3_on_single_variable_specs() {
    let phi = GenPoly::from_dense(vec![vec![int(1)], vec![int(2)]], 1);
    let forcing = vec![(q(1, 2), phi), (int(1), konst(int(3)))];
    let log = scalar_problem(int(2), vec![square(int(1))], Regime::Log, 1, forcing.clone());
    let iter = scalar_problem(int(2), vec![square(int(1))], Regime::IterLog, 1, forcing);
    let a = Engine::new(log).unwrap().expand(6).unwrap();
    let b = Engine::new(iter).unwrap().expand(6).unwrap();
    assert_eq!(a.terms, b.terms);
}

#[test]
fn regime_mismatch_is_reported() {
    let engine = Engine::new(benchmark(Regime::Pow, 0)).unwrap();
    assert!(matches!(engine.expand_type3(2), Err(Error::RegimeMismatch { .. })));
    assert!(matches!(engine.expand_type1(2, None), Err(Error::RegimeMismatch { .. })));
}

#[test]
fn prefix_stability() {
    let engine = Engine::new(benchmark(Regime::Pow, 0)).unwrap();
    let short = engine.expand(3).unwrap();
    let long = engine.expand(6).unwrap();
    assert_eq!(short.terms[..], long.terms[..3]);
}

#[test]
fn monomial_order_does_not_matter() {
    let m = |p: i64, c: i64| Monomial { powers: vec![int(p)], coeff: vec![int(c)] };
    let a = GenPoly::new(1, 1, vec![m(0, 1), m(1, 2), m(2, -1)]).unwrap();
    let b = GenPoly::new(1, 1, vec![m(2, -1), m(0, 1), m(1, 2)]).unwrap();
    let run = |p: GenPoly<Rational>| {
        let spec = scalar_problem(int(1), vec![square(int(1))], Regime::Pow, 0, vec![(int(1), p)]);
        Engine::new(spec).unwrap().expand(4).unwrap().terms
    };
    assert_eq!(run(a), run(b));
}

#[test]
fn residual_of_benchmark_starts_at_four() {
    let engine = Engine::new(benchmark(Regime::Pow, 0)).unwrap();
    let exp = engine.expand(3).unwrap();
    let res = engine.symbolic_residual(&exp, 3).unwrap();
    assert_eq!(res.leading_exponent, Some(int(4)));
    let c4 = res.terms.iter().find(|t| t.exponent == int(4)).unwrap();
    let coeff = c4.poly.monomials()[0].coeff[0].clone();
    // derivative -3·8, A-term 0 at order 4, -(2 q1 q3 + q2^2) = -(16 + 4)
    assert_eq!(coeff, int(-24 - 20));
}

#[test]
fn residual_order_exceeds_truncation() {
    let engine = Engine::new(benchmark(Regime::Pow, 0)).unwrap();
    let exp = engine.expand(5).unwrap();
    for m in 1..=5 {
        let res = engine.symbolic_residual(&exp, m).unwrap();
        assert_eq!(res.leading_exponent, Some(int(m as i64 + 1)), "M = {m}");
    }
}

#[test]
fn residual_of_empty_truncation_is_minus_forcing() {
    let engine = Engine::new(benchmark(Regime::Pow, 0)).unwrap();
    let exp = engine.expand(2).unwrap();
    let res = engine.symbolic_residual(&exp, 0).unwrap();
    assert_eq!(res.terms.len(), 1);
    assert_eq!(res.leading_order, 1.0);
    assert_eq!(res.terms[0].poly, konst(int(-1)));
}

#[test]
fn residual_of_linear_type3_has_only_derivative_terms() {
    let spec = scalar_problem(int(2), vec![], Regime::Log, 1, vec![(int(1), konst(int(4)))]);
    let engine = Engine::new(spec).unwrap();
    let exp = engine.expand(1).unwrap();
    let res = engine.symbolic_residual(&exp, 1).unwrap();
    assert!(res.leading_exponent.is_none());
    assert!(res.terms.iter().all(|t| t.rate.is_some()));
}

#[test]
fn residual_too_deep() {
    let engine = Engine::new(benchmark(Regime::Pow, 0)).unwrap();
    let exp = engine.expand(2).unwrap();
    assert!(matches!(
        engine.symbolic_residual(&exp, 3),
        Err(Error::TruncationTooDeep { .. })
    ));
}

#[test]
fn residual_of_mixed_and_iterlog_terms() {
    let z2 = GenPoly::scalar_monomial(vec![int(0), int(1)], int(1));
    let spec = scalar_problem(int(1), vec![square(int(1))], Regime::Mixed, 0, vec![(int(1), z2)]);
    let engine = Engine::new(spec).unwrap();
    let exp = engine.expand(4).unwrap();
    for m in 1..=4 {
        let res = engine.symbolic_residual(&exp, m).unwrap();
        assert!(res.leading_order > m as f64, "M = {m}: {}", res.leading_order);
    }
    let p1 = GenPoly::scalar_monomial(vec![q(-1, 2)], int(1));
    let spec = scalar_problem(int(1), vec![square(int(1))], Regime::IterLog, 2, vec![(int(1), p1)]);
    let engine = Engine::new(spec).unwrap();
    let exp = engine.expand(3).unwrap();
    for m in 1..=3 {
        let res = engine.symbolic_residual(&exp, m).unwrap();
        assert!(res.leading_order > m as f64);
    }
}

#[test]
fn residual_of_exp_regime() {
    let spec = scalar_problem(
        int(1),
        vec![square(int(1))],
        Regime::Exp,
        0,
        vec![(q(1, 2), konst(int(1))), (int(1), konst(int(2)))],
    );
    let engine = Engine::new(spec).unwrap();
    let exp = engine.expand(4).unwrap();
    for m in 1..=4 {
        let res = engine.symbolic_residual(&exp, m).unwrap();
        assert!(res.leading_order > exp.terms[m - 1].mu.to_f64());
    }
}

fn beta_grid(start: i64, len: i64) -> Vec<Rational> {
    (0..len).map(|j| int(start + j)).collect()
}

fn z2_poly(coeffs: &[i64]) -> GenPoly<Rational> {
    GenPoly::from_dense(coeffs.iter().map(|&c| vec![int(c)]).collect(), 1)
}

#[test]
fn double_first_row_is_inverse_times_forcing() {
    let spec = DoubleIndexedSpec {
        matrix_a: vec![vec![int(4)]],
        nonlinearity: vec![],
        mu_grid: beta_grid(1, 3),
        beta_grid: beta_grid(1, 4),
        forcing: vec![
            DoubleForcing { mu: int(1), beta: int(1), poly: z2_poly(&[2]) },
            DoubleForcing { mu: int(1), beta: int(3), poly: z2_poly(&[0, 8]) },
        ],
    };
    let out = expand_double_indexed(&spec, 1).unwrap();
    assert_eq!(out.coefficients[&(1, 1)], z2_poly(&[1]).scale(&q(1, 2)));
    assert_eq!(out.coefficients[&(1, 3)], z2_poly(&[0, 2]));
    assert!(!out.coefficients.contains_key(&(1, 2)));
}

#[test]
fn double_chi_matches_closed_form() {
    // μ_k = k, β_j = j, G = 0, A = 1:
    // q_{k,j} = (k-1) q_{k-1,j} - q'_{k-1,j-1} + (j-1) q_{k-1,j-1}
    let spec = DoubleIndexedSpec {
        matrix_a: vec![vec![int(1)]],
        nonlinearity: vec![],
        mu_grid: beta_grid(1, 4),
        beta_grid: beta_grid(1, 6),
        forcing: vec![DoubleForcing { mu: int(1), beta: int(1), poly: z2_poly(&[1, 1, 1]) }],
    };
    let out = expand_double_indexed(&spec, 4).unwrap();
    let get = |k: usize, j: usize| out.coefficients.get(&(k, j)).cloned().unwrap_or(GenPoly::zero(1, 1));
    for k in 2..=4 {
        for j in 1..=5 {
            let mut expect = get(k - 1, j).scale(&int(k as i64 - 1));
            if j > 1 {
                let prev = get(k - 1, j - 1);
                expect = expect
                    .sub(&prev.partial_derivative(0).unwrap())
                    .unwrap()
                    .add(&prev.scale(&int(j as i64 - 1)))
                    .unwrap();
            }
            assert_eq!(get(k, j), expect, "k = {k}, j = {j}");
        }
    }
}

#[test]
fn double_chi_only_second_row() {
    let spec = DoubleIndexedSpec {
        matrix_a: vec![vec![int(1)]],
        nonlinearity: vec![],
        mu_grid: beta_grid(1, 3),
        beta_grid: beta_grid(0, 4),
        forcing: vec![DoubleForcing { mu: int(1), beta: int(0), poly: z2_poly(&[1]) }],
    };
    let out = expand_double_indexed(&spec, 2).unwrap();
    assert_eq!(out.coefficients[&(2, 1)], z2_poly(&[1]));
    assert!(!out.coefficients.contains_key(&(2, 2)));
}

#[test]
fn double_rejects_open_grids() {
    let spec = DoubleIndexedSpec {
        matrix_a: vec![vec![int(1)]],
        nonlinearity: vec![],
        mu_grid: vec![int(1), int(3)],
        beta_grid: beta_grid(1, 3),
        forcing: vec![DoubleForcing { mu: int(1), beta: int(1), poly: z2_poly(&[1]) }],
    };
    assert!(matches!(expand_double_indexed(&spec, 2), Err(Error::GridNotClosed(_))));
}

fn double_oracle_spec() -> DoubleIndexedSpec<Rational> {
    DoubleIndexedSpec {
        matrix_a: vec![vec![int(2)]],
        nonlinearity: vec![square(int(1)), HomogeneousTerm::new(3, 1, vec![(vec![3], vec![q(-1, 3)])]).unwrap()],
        mu_grid: beta_grid(1, 4),
        beta_grid: beta_grid(1, 12),
        forcing: vec![
            DoubleForcing { mu: int(1), beta: int(1), poly: z2_poly(&[1, 2]) },
            DoubleForcing { mu: int(1), beta: int(2), poly: z2_poly(&[0, 0, -1]) },
            DoubleForcing { mu: int(2), beta: int(1), poly: z2_poly(&[3]) },
            DoubleForcing { mu: int(3), beta: int(2), poly: z2_poly(&[0, 5]) },
        ],
    }
}

#[test]
fn double_indexed_agrees_with_mixed() {
    let spec = double_oracle_spec();
    let oracle = expand_double_indexed(&spec, 4).unwrap();
    let engine = Engine::new(spec.to_mixed().unwrap()).unwrap();
    let mixed = engine.expand(4).unwrap();
    for (a, b) in oracle.expansion.terms.iter().zip(&mixed.terms) {
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.q, b.q.embed(2).unwrap());
    }
    for m in 1..=4 {
        let res = engine.symbolic_residual(&mixed, m).unwrap();
        assert!(res.leading_order > m as f64);
    }
}
