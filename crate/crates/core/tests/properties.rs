use std::collections::BTreeMap;

use decaylab_core::engine::{Engine, ForcingTerm, ProblemSpec};
use decaylab_core::exponents::{self, permutation_count, Regime};
use decaylab_core::genpoly::solve_linear_poly_ode;
use decaylab_core::io::GenPolyDoc;
use decaylab_core::linalg::{invert, mat_vec};
use decaylab_core::nonlinear::polarize;
use decaylab_core::spectral;
use decaylab_core::{GenPoly, HomogeneousTerm, Monomial, Rational, Scalar};
use proptest::prelude::*;

fn r(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn spd(n: usize, entries: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| entries[k * n + i] * entries[k * n + j]).sum::<f64>() + if i == j { 0.5 } else { 0.0 })
                .collect()
        })
        .collect()
}

fn spd_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=6).prop_flat_map(|n| prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |e| spd(n, &e)))
}

const POWERS: [f64; 6] = [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0];

/// Float generalized polynomial with exponents from a small grid.
fn genpoly_strategy(arity: usize, codim: usize) -> impl Strategy<Value = GenPoly<f64>> {
    prop::collection::vec(
        (prop::collection::vec(0usize..POWERS.len(), arity), prop::collection::vec(-3.0f64..3.0, codim)),
        0..5,
    )
    .prop_map(move |ms| {
        let monos = ms
            .into_iter()
            .map(|(p, c)| Monomial {
                powers: p.into_iter().map(|i| POWERS[i]).collect(),
                coeff: c,
            })
            .collect();
        GenPoly::new(arity, codim, monos).unwrap()
    })
}

fn is_canonical<S: Scalar>(p: &GenPoly<S>) -> bool {
    let ms = p.monomials();
    let no_zero = ms.iter().all(|m| m.coeff.iter().any(|c| !c.is_zero()));
    let distinct = ms
        .windows(2)
        .all(|w| w[0].powers.iter().zip(&w[1].powers).any(|(a, b)| !a.approx_eq(b)));
    no_zero && distinct
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0, |a, x| a.max(x.abs()))
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projections_resolve_identity(a in spd_strategy()) {
        let n = a.len();
        let dec = spectral::decompose(&a).unwrap();
        let mut sum = vec![vec![0.0; n]; n];
        for (p, rp) in dec.projections.iter().enumerate() {
            let sq = matmul(rp, rp);
            let idem: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| sq[i][j] - rp[i][j]).collect()).collect();
            prop_assert!(max_abs(&idem) < 1e-10);
            let ar = matmul(&a, rp);
            let lam = dec.eigenvalues_distinct[p];
            let eig: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| ar[i][j] - lam * rp[i][j]).collect()).collect();
            prop_assert!(max_abs(&eig) < 1e-10);
            for (q, rq) in dec.projections.iter().enumerate() {
                if q != p {
                    prop_assert!(max_abs(&matmul(rp, rq)) < 1e-10);
                }
            }
            for i in 0..n {
                for j in 0..n {
                    sum[i][j] += rp[i][j];
                }
            }
        }
        for (i, row) in sum.iter_mut().enumerate() {
            row[i] -= 1.0;
        }
        prop_assert!(max_abs(&sum) < 1e-10);
    }

    #[test]
    fn inverse_undoes_matrix(a in spd_strategy(), seed in prop::collection::vec(-2.0f64..2.0, 6)) {
        let n = a.len();
        let v = &seed[..n];
        let dec = spectral::decompose(&a).unwrap();
        let back = mat_vec(&a, &dec.apply_inverse(v));
        let scale = v.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
        for (x, y) in back.iter().zip(v) {
            prop_assert!((x - y).abs() / scale < 1e-10);
        }
    }

    #[test]
    fn diagonal_projections_are_coordinate(d in prop::collection::vec(1u32..6, 1..6)) {
        let n = d.len();
        let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { d[i] as f64 } else { 0.0 }).collect()).collect();
        let dec = spectral::decompose(&a).unwrap();
        for (p, rp) in dec.projections.iter().enumerate() {
            let lam = dec.eigenvalues_distinct[p];
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j && (d[i] as f64 - lam).abs() < 1e-12 { 1.0 } else { 0.0 };
                    prop_assert_eq!(rp[i][j], want);
                }
            }
        }
    }

    #[test]
    fn decompositions_respect_sum_and_classes(
        gens in prop::collection::vec(2u32..=12, 1..=3),
        unit in any::<bool>(),
    ) {
        let gens: Vec<f64> = gens.into_iter().map(|g| g as f64 / 4.0).collect();
        let regime = if unit { Regime::Pow } else { Regime::Log };
        let lat = exponents::generate(regime, &[], &gens, 10.0).unwrap();
        for k in 1..=lat.len().min(10) {
            let tuples = lat.decompositions(k).unwrap();
            let mut classes: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
            for t in &tuples {
                prop_assert!(t.len() >= 2);
                prop_assert!(t.iter().all(|&i| (1..k).contains(&i)));
                let s: f64 = t.iter().map(|&i| lat.mu[i - 1]).sum();
                prop_assert!((s - lat.mu[k - 1]).abs() < 1e-9);
                let mut key = t.clone();
                key.sort_unstable();
                *classes.entry(key).or_default() += 1;
            }
            for (key, count) in classes {
                prop_assert_eq!(count, permutation_count(&key));
            }
        }
    }

    #[test]
    fn canonical_form_is_closed(
        p in genpoly_strategy(2, 2),
        q in genpoly_strategy(2, 2),
        s in genpoly_strategy(2, 1),
        c in -2.0f64..2.0,
    ) {
        prop_assert!(is_canonical(&p.add(&q).unwrap()));
        prop_assert!(is_canonical(&p.sub(&p).unwrap()) && p.sub(&p).unwrap().is_zero());
        prop_assert!(is_canonical(&p.scale(&c)));
        prop_assert!(is_canonical(&GenPoly::scalar_multiply(&s, &p).unwrap()));
        prop_assert!(is_canonical(&p.partial_derivative(1).unwrap()));
        prop_assert!(is_canonical(&p.embed(4).unwrap()));
    }

    #[test]
    fn polynomial_ode_solution_has_zero_residual(
        num in prop_oneof![-50i64..=-1, 1i64..=50],
        den in 1i64..=10,
        coeffs in prop::collection::vec(-9i64..=9, 1..=7),
    ) {
        let beta = r(num, den);
        let p = GenPoly::from_dense(coeffs.iter().map(|&c| vec![r(c, 1)]).collect(), 1);
        let q = solve_linear_poly_ode(&beta, &p, &[r(0, 1)]).unwrap();
        let residual = q.partial_derivative(0).unwrap().add(&q.scale(&beta)).unwrap().sub(&p).unwrap();
        prop_assert!(residual.is_zero());
    }

    #[test]
    fn float_ode_solution_residual_is_roundoff(
        beta in prop_oneof![-5.0f64..-0.5, 0.5f64..5.0],
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..=7),
    ) {
        let p = GenPoly::from_dense(coeffs.iter().map(|&c| vec![c]).collect(), 1);
        let q = solve_linear_poly_ode(&beta, &p, &[0.0]).unwrap();
        let residual = q.partial_derivative(0).unwrap().add(&q.scale(&beta)).unwrap().sub(&p).unwrap();
        prop_assert!(residual.max_coeff() < 1e-12 * (1.0 + q.max_coeff()));
    }

    #[test]
    fn embedding_ignores_new_variables(
        p in genpoly_strategy(2, 1),
        z in prop::collection::vec(0.2f64..4.0, 4),
    ) {
        let wide = p.embed(4).unwrap().evaluate(&z).unwrap();
        let narrow = p.evaluate(&z[..2]).unwrap();
        prop_assert!((wide[0] - narrow[0]).abs() <= 1e-12 * (1.0 + narrow[0].abs()));
    }

    #[test]
    fn mixed_partials_commute(p in genpoly_strategy(3, 2)) {
        let a = p.partial_derivative(0).unwrap().partial_derivative(2).unwrap();
        let b = p.partial_derivative(2).unwrap().partial_derivative(0).unwrap();
        prop_assert!(a.approx_eq(&b, 1e-12));
    }

    #[test]
    fn polarized_form_is_multilinear_and_symmetric(
        m in 2usize..=4,
        n in 1usize..=3,
        seed in prop::collection::vec(-5i64..=5, 64),
    ) {
        let mut it = seed.iter().cycle().copied();
        let mut monos = Vec::new();
        for _ in 0..3 {
            let mut beta = vec![0u32; n];
            for _ in 0..m {
                beta[it.next().unwrap().unsigned_abs() as usize % n] += 1;
            }
            monos.push((beta, (0..n).map(|_| r(it.next().unwrap(), 1)).collect::<Vec<_>>()));
        }
        let term = HomogeneousTerm::new(m, n, monos).unwrap();
        let form = polarize(&term);
        let mut vec_of = || (0..n).map(|_| r(it.next().unwrap(), 3)).collect::<Vec<Rational>>();
        let args: Vec<Vec<Rational>> = (0..m).map(|_| vec_of()).collect();
        let other = vec_of();
        let (a, b) = (r(2, 3), r(-5, 7));
        let base = form.apply(&args).unwrap();
        // diagonal identity
        let y = vec_of();
        prop_assert_eq!(form.apply(&vec![y.clone(); m]).unwrap(), term.evaluate(&y));
        // symmetry
        let mut rev = args.clone();
        rev.reverse();
        prop_assert_eq!(&form.apply(&rev).unwrap(), &base);
        // linearity in the last slot
        let mut mixed = args.clone();
        mixed[m - 1] = args[m - 1].iter().zip(&other).map(|(x, o)| a.clone() * x.clone() + b.clone() * o.clone()).collect();
        let mut swapped = args.clone();
        swapped[m - 1] = other;
        let with_other = form.apply(&swapped).unwrap();
        let want: Vec<Rational> = base.iter().zip(&with_other).map(|(x, o)| a.clone() * x.clone() + b.clone() * o.clone()).collect();
        prop_assert_eq!(form.apply(&mixed).unwrap(), want);
    }

    #[test]
    fn genpoly_document_round_trip_is_bit_identical(p in genpoly_strategy(2, 3)) {
        let text = serde_json::to_string(&GenPolyDoc::from_poly(&p)).unwrap();
        let doc: GenPolyDoc = serde_json::from_str(&text).unwrap();
        let back: GenPoly<f64> = doc.to_poly(3).unwrap();
        prop_assert_eq!(back.len(), p.len());
        for (x, y) in back.monomials().iter().zip(p.monomials()) {
            for (a, b) in x.coeff.iter().chain(&x.powers).zip(y.coeff.iter().chain(&y.powers)) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

/// Small exact specs: scalar or 2x2, a quadratic and optional cubic term,
/// and up to three forcing terms with integer or half-integer exponents.
fn spec_strategy(regime: Regime) -> impl Strategy<Value = ProblemSpec<Rational>> {
    (
        any::<bool>(),
        prop::collection::vec(-3i64..=3, 8),
        prop::collection::vec((1i64..=6, prop::collection::vec(-3i64..=3, 6)), 1..=3),
    )
        .prop_map(move |(two, nl, forcing)| {
            let n = if two { 2 } else { 1 };
            let a = if two {
                vec![vec![r(2, 1), r(1, 2)], vec![r(1, 2), r(2, 1)]]
            } else {
                vec![vec![r(3, 2)]]
            };
            let quad = if two {
                vec![(vec![2, 0], vec![r(nl[0], 1), r(nl[1], 1)]), (vec![1, 1], vec![r(nl[2], 1), r(nl[3], 2)])]
            } else {
                vec![(vec![2], vec![r(nl[0], 1)])]
            };
            let cubic = if two {
                vec![(vec![0, 3], vec![r(nl[4], 1), r(nl[5], 3)])]
            } else {
                vec![(vec![3], vec![r(nl[4], 2)])]
            };
            let nonlinearity = vec![HomogeneousTerm::new(2, n, quad).unwrap(), HomogeneousTerm::new(3, n, cubic).unwrap()];
            let arity = if regime == Regime::Mixed { 2 } else { 1 };
            let forcing = forcing
                .into_iter()
                .map(|(e, c)| {
                    let exponent = if regime == Regime::Pow || regime == Regime::Mixed { r(e.min(3), 1) } else { r(e, 2) };
                    let poly = GenPoly::new(
                        arity,
                        n,
                        vec![
                            Monomial { powers: vec![r(0, 1); arity], coeff: (0..n).map(|i| r(c[i], 1)).collect() },
                            Monomial { powers: vec![r(1, 1); arity], coeff: (0..n).map(|i| r(c[i + 2], 1)).collect() },
                        ],
                    )
                    .unwrap();
                    ForcingTerm { exponent, poly }
                })
                .collect();
            let mut spec = ProblemSpec::new(a, nonlinearity, regime, if regime == Regime::Log { 1 } else { 0 }, forcing);
            spec.normalize_forcing().unwrap();
            spec
        })
}

fn any_regime_spec() -> impl Strategy<Value = ProblemSpec<Rational>> {
    prop_oneof![
        spec_strategy(Regime::Exp),
        spec_strategy(Regime::Pow),
        spec_strategy(Regime::Log),
        spec_strategy(Regime::Mixed),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_order_exceeds_truncation_exponent(spec in any_regime_spec()) {
        let engine = Engine::new(spec).unwrap();
        let exp = engine.expand(4).unwrap();
        for m in 1..=4 {
            let res = engine.symbolic_residual(&exp, m).unwrap();
            prop_assert!(res.leading_order > exp.terms[m - 1].mu.to_f64());
        }
    }

    #[test]
    fn equivalent_forcing_lists_give_identical_terms(spec in any_regime_spec()) {
        // split the first term in two, then reverse the list
        let mut listed = spec.clone();
        let first = listed.forcing[0].clone();
        let half = first.poly.scale(&r(1, 2));
        listed.forcing[0].poly = half.clone();
        listed.forcing.push(ForcingTerm { exponent: first.exponent, poly: half });
        listed.forcing.reverse();
        listed.normalize_forcing().unwrap();
        let mut spec = spec;
        spec.normalize_forcing().unwrap();
        let a = Engine::new(spec).unwrap().expand(4).unwrap();
        let b = Engine::new(listed).unwrap().expand(4).unwrap();
        prop_assert_eq!(a.terms, b.terms);
    }

    #[test]
    fn longer_expansions_extend_shorter_ones(spec in any_regime_spec()) {
        let engine = Engine::new(spec).unwrap();
        let short = engine.expand(3).unwrap();
        let long = engine.expand(5).unwrap();
        prop_assert_eq!(&short.terms[..], &long.terms[..3]);
    }

    #[test]
    fn linear_log_terms_invert_the_matrix(spec in spec_strategy(Regime::Log)) {
        let mut spec = spec;
        spec.nonlinearity.clear();
        let inverse = invert(&spec.matrix_a).unwrap();
        let forcing = spec.forcing.clone();
        let exp = Engine::new(spec).unwrap().expand(4).unwrap();
        for t in &exp.terms {
            let p = forcing
                .iter()
                .filter(|f| f.exponent == t.mu)
                .fold(GenPoly::zero(1, inverse.len()), |acc, f| acc.add(&f.poly).unwrap());
            prop_assert_eq!(&t.q, &p.apply_matrix(&inverse));
        }
    }
}
