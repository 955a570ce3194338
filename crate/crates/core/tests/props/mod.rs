use std::collections::BTreeSet;

use grassfield::oracle::{oracle_eval, oracle_eval_raw, random_assignment};
use grassfield::{
    c_series, canonicalize, change_chart, coord_derive, equals, euler_lagrange, partial_atom, resolve_nilpotent,
    AssumptionSet, Atom, Chart, Coefficient, Exponent, Expr, Parity, Raw,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn runner() -> TestRunner {
    let config = Config {
        cases: 200,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) {
    if let Err(e) = runner().run(&s, f) {
        panic!("{e}");
    }
}

fn even(name: &str) -> Atom {
    Atom::field(name, Chart::Tx, Parity::Even)
}
fn odd(name: &str) -> Atom {
    Atom::field(name, Chart::Tx, Parity::Odd)
}

fn even_pool() -> Vec<Atom> {
    let th = even("theta");
    vec![th.clone(), th.derived(0), th.derived(1), even("phi")]
}

fn odd_pool() -> Vec<Atom> {
    let u = odd("u");
    vec![u.clone(), u.derived(0), u.derived(1), odd("v")]
}

fn pool() -> Vec<Atom> {
    let mut p = even_pool();
    p.extend(odd_pool());
    p
}

fn constant() -> impl Strategy<Value = Raw> {
    prop_oneof![
        (-3i64..=3).prop_map(|n| Raw::Const(Coefficient::integer(n))),
        prop::sample::select(vec![
            Coefficient::c_pow(1),
            Coefficient::c_pow(-1),
            Coefficient::sqrt2(),
            Coefficient::frac(1, 2),
        ])
        .prop_map(Raw::Const),
    ]
}

fn tree(leaf: BoxedStrategy<Raw>) -> impl Strategy<Value = Raw> {
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Raw::Add),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Raw::Mul),
            inner.clone().prop_map(|x| Raw::Neg(Box::new(x))),
            inner.prop_map(|x| Raw::Pow(Box::new(x), Exponent::from(2))),
        ]
    })
}

/// Mixed-parity polynomial trees over the whole atom pool.
fn raw() -> impl Strategy<Value = Raw> {
    let leaf = prop_oneof![3 => prop::sample::select(pool()).prop_map(Raw::Atom), 1 => constant()];
    tree(leaf.boxed())
}

/// Even trees: even atoms and products of two odd atoms.
fn even_raw() -> impl Strategy<Value = Raw> {
    let pair = (prop::sample::select(odd_pool()), prop::sample::select(odd_pool()))
        .prop_map(|(a, b)| Raw::Mul(vec![Raw::Atom(a), Raw::Atom(b)]));
    let leaf = prop_oneof![3 => prop::sample::select(even_pool()).prop_map(Raw::Atom), 1 => pair, 1 => constant()];
    tree(leaf.boxed())
}

/// Homogeneous expressions of either parity.
fn graded() -> impl Strategy<Value = Expr> {
    (even_raw(), prop::option::of(prop::sample::select(odd_pool()))).prop_map(|(r, o)| {
        let e = canonicalize(&r).unwrap();
        match o {
            Some(a) => &e * &Expr::atom(a),
            None => e,
        }
    })
}

fn expr() -> impl Strategy<Value = Expr> {
    raw().prop_map(|r| canonicalize(&r).unwrap())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn sign(p: &[usize]) -> i64 {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn product(atoms: &[Atom]) -> Expr {
    atoms.iter().fold(Expr::one(), |acc, a| &acc * &Expr::atom(a.clone()))
}

pub fn odd_products_are_graded_exhaustively() {
    let odds = odd_pool();
    let base = product(&odds);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let asg = random_assignment(odds.iter(), &AssumptionSet::new(), &mut rng).unwrap();
    for p in permutations(4) {
        let atoms: Vec<Atom> = p.iter().map(|&i| odds[i].clone()).collect();
        let prod = product(&atoms);
        assert_eq!(prod, base.scale(&Coefficient::integer(sign(&p))), "{p:?}");
        let raw = Raw::Mul(atoms.into_iter().map(Raw::Atom).collect());
        assert!(oracle_eval_raw(&raw, &asg).unwrap().approx_eq(&oracle_eval(&prod, &asg).unwrap()));
    }
    for a in &odds {
        for b in &odds {
            let ab = product(&[a.clone(), b.clone()]);
            let ba = product(&[b.clone(), a.clone()]);
            assert_eq!(ab, -ba);
            if a == b {
                assert!(ab.is_zero());
            }
        }
    }
}

pub fn parity_of_products_exhaustive() {
    let atoms = [even("theta"), even("phi"), odd("u"), odd("v")];
    for mask in 1u32..16 {
        let chosen: Vec<Atom> = (0..4).filter(|i| mask >> i & 1 == 1).map(|i| atoms[i].clone()).collect();
        let odd_count = chosen.iter().filter(|a| a.is_odd()).count();
        let expect = if odd_count % 2 == 1 { Parity::Odd } else { Parity::Even };
        assert_eq!(product(&chosen).parity(), Some(expect), "{chosen:?}");
    }
}

pub fn random_odd_monomials_anticommute() {
    let six: Vec<Atom> = ["a", "b", "c", "d", "e", "f"].iter().map(|n| odd(n)).collect();
    check(Just((0..6).collect::<Vec<usize>>()).prop_shuffle(), |p| {
        let atoms: Vec<Atom> = p.iter().map(|&i| six[i].clone()).collect();
        prop_assert_eq!(product(&atoms), product(&six).scale(&Coefficient::integer(sign(&p))));
        Ok(())
    });
}

pub fn canonical_form_agrees_with_oracle() {
    check((raw(), any::<u64>()), |(r, seed)| {
        let e = canonicalize(&r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let asg = random_assignment(&pool(), &AssumptionSet::new(), &mut rng).unwrap();
        let direct = oracle_eval_raw(&r, &asg).unwrap();
        prop_assert!(direct.approx_eq(&oracle_eval(&e, &asg).unwrap()), "{e}");
        Ok(())
    });
}

pub fn canonicalization_is_idempotent() {
    check(expr(), |e| {
        prop_assert_eq!(canonicalize(&e.to_raw()).unwrap(), e);
        Ok(())
    });
}

pub fn ring_laws() {
    check((expr(), expr(), expr()), |(a, b, c)| {
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert!((&a - &a.clone()).is_zero());
        Ok(())
    });
}

pub fn leibniz_rule() {
    check((expr(), expr(), 0usize..2), |(a, b, k)| {
        let lhs = coord_derive(&(&a * &b), Chart::Tx, k).unwrap();
        let rhs = &(&coord_derive(&a, Chart::Tx, k).unwrap() * &b) + &(&a * &coord_derive(&b, Chart::Tx, k).unwrap());
        prop_assert_eq!(lhs, rhs);
        Ok(())
    });
}

pub fn mixed_partials_commute() {
    check(expr(), |e| {
        let tx = coord_derive(&coord_derive(&e, Chart::Tx, 0).unwrap(), Chart::Tx, 1).unwrap();
        let xt = coord_derive(&coord_derive(&e, Chart::Tx, 1).unwrap(), Chart::Tx, 0).unwrap();
        prop_assert_eq!(tx, xt);
        Ok(())
    });
}

pub fn odd_partial_is_a_graded_derivation() {
    check((graded(), graded(), prop::sample::select(odd_pool())), |(a, b, x)| {
        let sign = if a.parity() == Some(Parity::Odd) { -1 } else { 1 };
        let lhs = partial_atom(&(&a * &b), &x).unwrap();
        let rhs = &(&partial_atom(&a, &x).unwrap() * &b)
            + &(&a * &partial_atom(&b, &x).unwrap()).scale(&Coefficient::integer(sign));
        prop_assert_eq!(lhs, rhs);
        Ok(())
    });
}

/// Expressions in undifferentiated fields only.
fn potential() -> impl Strategy<Value = Expr> {
    let atoms = vec![even("theta"), even("phi"), odd("u"), odd("v")];
    let pair = Just(Raw::Mul(vec![Raw::Atom(odd("u")), Raw::Atom(odd("v"))]));
    let leaf = prop_oneof![3 => prop::sample::select(atoms).prop_map(Raw::Atom), 1 => pair, 1 => constant()];
    (tree(leaf.boxed()), prop::option::of(Just(odd("u")))).prop_map(|(r, o)| {
        let e = canonicalize(&r).unwrap();
        // keep the total derivative parity-homogeneous
        let (even_part, _) = split_parity(&e);
        match o {
            Some(a) => &even_part * &Expr::atom(a),
            None => even_part,
        }
    })
}

fn split_parity(e: &Expr) -> (Expr, Expr) {
    let mut even = Expr::zero();
    let mut oddp = Expr::zero();
    for (k, m) in e.coefficient_terms() {
        let t = Expr::monomial(k.value.clone(), m.with_basis(k.basis));
        if m.parity() == Parity::Odd {
            oddp = &oddp + &t;
        } else {
            even = &even + &t;
        }
    }
    (even, oddp)
}

pub fn total_derivatives_are_null_lagrangians() {
    check((potential(), potential()), |(f, g)| {
        if f.parity() != g.parity() && !f.is_zero() && !g.is_zero() {
            return Ok(());
        }
        let l = &coord_derive(&f, Chart::Tx, 0).unwrap() + &coord_derive(&g, Chart::Tx, 1).unwrap();
        for field in [even("theta"), even("phi"), odd("u"), odd("v")] {
            let el = euler_lagrange(&l, &field).unwrap();
            prop_assert!(el.is_zero(), "EL[{field}] of {l} = {el}");
        }
        Ok(())
    });
}

pub fn series_reconstructs_laurent_polynomials() {
    check(expr(), |e| {
        let s = c_series(&e, -40).unwrap();
        prop_assert_eq!(s.reconstruct(), e);
        Ok(())
    });
}

pub fn chart_change_round_trip() {
    check(expr(), |e| {
        let lc = change_chart(&e, Chart::LightCone).unwrap();
        prop_assert_eq!(change_chart(&lc, Chart::Tx).unwrap(), e);
        Ok(())
    });
}

pub fn nilpotent_roots_square_back() {
    let x = even("phi");
    let assume = AssumptionSet::with([x.clone()]);
    check((even_raw(), 1i64..4, any::<u64>()), |(n, k, seed)| {
        let nil = split_parity(&canonicalize(&Raw::Mul(vec![
            n,
            Raw::Atom(odd("u")),
            Raw::Atom(odd("v")),
        ]))
        .unwrap())
        .0;
        let base = &Expr::atom(x.clone()).scale(&Coefficient::integer(k)) + &nil;
        let raw = Raw::Pow(Box::new(base.to_raw()), Exponent::new(1, 2));
        let root = resolve_nilpotent(&raw).unwrap();
        prop_assert!(equals(&(&root * &root), &base, &assume));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms: BTreeSet<Atom> = pool().into_iter().collect();
        let asg = random_assignment(&atoms, &assume, &mut rng).unwrap();
        prop_assert!(oracle_eval_raw(&raw, &asg).unwrap().approx_eq(&oracle_eval(&root, &asg).unwrap()));
        Ok(())
    });
}

#[allow(dead_code)]
pub const ALL: &[(&str, fn())] = &[
    ("odd_products_are_graded_exhaustively", odd_products_are_graded_exhaustively),
    ("parity_of_products_exhaustive", parity_of_products_exhaustive),
    ("random_odd_monomials_anticommute", random_odd_monomials_anticommute),
    ("canonical_form_agrees_with_oracle", canonical_form_agrees_with_oracle),
    ("canonicalization_is_idempotent", canonicalization_is_idempotent),
    ("ring_laws", ring_laws),
    ("leibniz_rule", leibniz_rule),
    ("mixed_partials_commute", mixed_partials_commute),
    ("odd_partial_is_a_graded_derivation", odd_partial_is_a_graded_derivation),
    ("total_derivatives_are_null_lagrangians", total_derivatives_are_null_lagrangians),
    ("series_reconstructs_laurent_polynomials", series_reconstructs_laurent_polynomials),
    ("chart_change_round_trip", chart_change_round_trip),
    ("nilpotent_roots_square_back", nilpotent_roots_square_back),
];
