use std::collections::BTreeMap;

use grassfield::canonical::{canonical_momentum, derive_eom, flux, legendre, reconstruct_lagrangian, verify_inversion, CanonicalPair};
use grassfield::gamma::{det_g, gauge_project, induced_metric, wz_term, Parameterization, Spinor};
use grassfield::symmetry::lorentz_check;
use grassfield::{
    c_limit, change_chart, equals, substitute, AssumptionSet, Atom, Chart, Coefficient, Exponent, Expr, Parity,
};

fn k(n: i64, d: i64) -> Coefficient {
    Coefficient::frac(n, d)
}
fn c(n: i32) -> Coefficient {
    Coefficient::c_pow(n)
}
fn s2() -> Coefficient {
    Coefficient::sqrt2()
}

struct Tx {
    tt: Expr,
    tx: Expr,
    uut: Expr,
    uux: Expr,
}

fn tx() -> Tx {
    let th = Atom::field("theta", Chart::Tx, Parity::Even);
    let u = Atom::field("u", Chart::Tx, Parity::Odd);
    let ue = Expr::atom(u.clone());
    Tx {
        tt: Expr::atom(th.derived(0)),
        tx: Expr::atom(th.derived(1)),
        uut: &ue * &Expr::atom(u.derived(0)),
        uux: &ue * &Expr::atom(u.derived(1)),
    }
}

fn det_expected() -> Expr {
    let v = tx();
    let terms = [
        Expr::one(),
        (&v.tt * &v.tt).scale(&c(-4).neg()),
        (&v.tx * &v.tx).scale(&c(-2)),
        v.uux.scale(&c(-1)),
        v.uut.scale(&c(-2).neg()),
        (&(&v.tt * &v.tt) * &v.uux).scale(&c(-5).neg()),
        (&(&v.tx * &v.tx) * &v.uut).scale(&c(-4).neg()),
        (&(&v.tx * &v.tt) * &v.uux).scale(&c(-4)),
        (&(&v.tx * &v.tt) * &v.uut).scale(&c(-5)),
    ];
    terms.iter().fold(Expr::zero(), |a, b| &a + b)
}

fn bi_lagrangian() -> Expr {
    let v = tx();
    let body = det_expected().scale(&c(2));
    &(&-body.sqrt().unwrap() + &v.uux.scale(&k(1, 2))) - &v.uut.scale(&k(1, 2).mul(&c(-1)))
}

fn fermionic_metric() -> grassfield::gamma::MatrixExpr {
    let th = Atom::field("theta", Chart::Tx, Parity::Even);
    let p = Parameterization::cartesian(&th);
    induced_metric(&p, &gauge_project(&Spinor::of_fields("u", "v", Chart::Tx))).unwrap()
}

#[test]
fn determinant_and_lagrangian() {
    let g = fermionic_metric();
    let d = det_g(&g).unwrap();
    assert_eq!(d, det_expected());
    let th = Atom::field("theta", Chart::Tx, Parity::Even);
    let p = Parameterization::cartesian(&th);
    let wz = wz_term(&p, &gauge_project(&Spinor::of_fields("u", "v", Chart::Tx))).unwrap();
    let l = (&d.sqrt().unwrap() + &wz).scale(&c(1).neg());
    assert!(equals(&l, &bi_lagrangian(), &AssumptionSet::new()), "{l}");
}

#[test]
fn nonrelativistic_limit() {
    let th = Atom::field("theta", Chart::Tx, Parity::Even);
    let t = Expr::atom(Atom::coordinate(Chart::Tx, 0));
    let shift: BTreeMap<Atom, Expr> = [(th.clone(), &t.scale(&c(2).neg()) + &Expr::atom(th.clone()))].into();
    let shifted = substitute(&bi_lagrangian(), &shift).unwrap();
    let lim = c_limit(&shifted).unwrap();
    let v = tx();
    let body = &(&(&v.tt.scale(&k(2, 1)) - &v.uut) + &(&v.tx * &v.tx)) - &(&v.tx * &v.uux);
    let expect = &-body.sqrt().unwrap() + &v.uux.scale(&k(1, 2));
    assert!(equals(&lim, &expect, &AssumptionSet::new()), "{lim}");
}

#[test]
fn lorentz() {
    assert!(lorentz_check(&bi_lagrangian()).unwrap().is_zero());
}

struct Lc {
    tp: Expr,
    tm: Expr,
    uup: Expr,
    uum: Expr,
    pi: Expr,
}

fn lc() -> Lc {
    let th = Atom::field("theta", Chart::LightCone, Parity::Even);
    let u = Atom::field("u", Chart::LightCone, Parity::Odd);
    let ue = Expr::atom(u.clone());
    Lc {
        tp: Expr::atom(th.derived(0)),
        tm: Expr::atom(th.derived(1)),
        uup: &ue * &Expr::atom(u.derived(0)),
        uum: &ue * &Expr::atom(u.derived(1)),
        pi: Expr::atom(Atom::field("Pi", Chart::LightCone, Parity::Even)),
    }
}

fn lc_body() -> Expr {
    let v = lc();
    let terms = [
        Expr::c_pow(2),
        (&v.tm * &v.tp).scale(&k(-2, 1)),
        v.uum.scale(&s2().mul(&c(1)).neg()),
        (&(&v.tm * &v.tm) * &v.uup).scale(&s2().mul(&c(-1)).neg()),
        (&(&v.tp * &v.tm) * &v.uum).scale(&s2().mul(&c(-1))),
    ];
    terms.iter().fold(Expr::zero(), |a, b| &a + b)
}

fn lc_lagrangian() -> Expr {
    &-lc_body().sqrt().unwrap() - &lc().uum.scale(&s2().mul(&k(1, 2)))
}

fn assume() -> AssumptionSet {
    let p = CanonicalPair::light_cone("theta", "Pi");
    AssumptionSet::with([p.transverse(), p.momentum])
}

fn inv(e: &Expr) -> Expr {
    e.pow(Exponent::from(-1)).unwrap()
}

/// `(1/(sqrt2 c)) u u_m - 1`
fn bracket() -> Expr {
    &lc().uum.scale(&s2().inv().mul(&c(-1))) - &Expr::one()
}

#[test]
fn canonical_chain() {
    let v = lc();
    let p = CanonicalPair::light_cone("theta", "Pi");
    let l26 = change_chart(&bi_lagrangian(), Chart::LightCone).unwrap();
    assert!(equals(&l26, &lc_lagrangian(), &AssumptionSet::new()), "{l26}");

    let pi_expr = canonical_momentum(&l26, &p).unwrap();
    let num = &v.tm - &(&v.tm * &v.uum).scale(&s2().inv().mul(&c(-1)));
    let expect27 = &num * &lc_body().pow(Exponent::new(-1, 2)).unwrap();
    assert!(equals(&pi_expr, &expect27, &AssumptionSet::new()), "{pi_expr}");

    // candidate velocity
    let first = &(&v.tm * &(&Expr::one() - &v.uum.scale(&s2().mul(&c(-1))))) * &inv(&(&bracket() * &(&v.pi * &v.pi)).scale(&k(2, 1)));
    let numer = &(&(&(&v.tm * &v.tm) * &v.uup).scale(&s2().mul(&c(-1))) + &v.uum.scale(&s2().mul(&c(1)))) - &Expr::c_pow(2);
    let second = &numer * &inv(&(&v.tm * &bracket()).scale(&k(2, 1)));
    let cand = &first + &second;
    let orc = grassfield::oracle::oracle_inversion(&pi_expr, &cand, &p.velocity(), &p.momentum, 200, 0, &assume()).unwrap();
    assert!(orc.equivalent && orc.exact_trials == 200, "{orc}");
    let bad = &cand + &v.tm;
    let orc_bad = grassfield::oracle::oracle_inversion(&pi_expr, &bad, &p.velocity(), &p.momentum, 200, 0, &assume()).unwrap();
    assert!(!orc_bad.equivalent);
    let rep = verify_inversion(&pi_expr, &cand, &p, &assume()).unwrap();
    assert!(rep.verified, "{}", rep.residual);

    let h = legendre(&l26, &p, &cand, &assume()).unwrap();
    let h30 = {
        let a = (&(&v.tm * &inv(&v.pi)) * &(&Expr::one() - &v.uum.scale(&s2().inv().mul(&c(-1))))).scale(&k(1, 2));
        let inner = &(&Expr::c_pow(2) - &v.uum.scale(&s2().inv().mul(&c(1)))) - &(&(&v.tm * &v.tm) * &v.uup).scale(&s2().mul(&c(-1)));
        let b = (&(&v.pi * &inv(&v.tm)) * &inner).scale(&k(1, 2));
        &(&a + &b) + &v.uum.scale(&s2().inv())
    };
    assert!(equals(&h, &h30, &assume()), "{h}");

    let l31 = reconstruct_lagrangian(&h30, &p).unwrap();
    let expect31 = {
        let a = &v.pi * &v.tp;
        let b = (&(&v.pi * &v.tm) * &v.uup).scale(&s2().inv().mul(&c(-1)));
        let f = &(&v.pi * &inv(&v.tm)).scale(&k(1, 2).mul(&c(2))) + &(&v.tm * &inv(&v.pi)).scale(&k(1, 2));
        &(&(&a + &b) + &(&f * &bracket())) - &v.uum.scale(&s2().inv())
    };
    assert!(equals(&l31, &expect31, &assume()), "{l31}");

    let (e_pi, e_th) = derive_eom(&expect31, &p).unwrap();
    let eq32 = {
        let f = &inv(&v.tm).scale(&k(1, 2).mul(&c(2))) - &(&v.tm * &v.pi.pow(Exponent::from(-2)).unwrap()).scale(&k(1, 2));
        &(&v.tp + &(&v.tm * &v.uup).scale(&s2().inv().mul(&c(-1)))) + &(&f * &bracket())
    };
    assert!(equals(&e_pi, &eq32, &assume()), "{e_pi}");
    let j = {
        let f = &inv(&v.pi).scale(&k(1, 2)) - &(&v.pi * &v.tm.pow(Exponent::from(-2)).unwrap()).scale(&k(1, 2).mul(&c(2)));
        &(&v.pi * &v.uup).scale(&s2().inv().mul(&c(-1))) + &(&f * &bracket())
    };
    assert!(equals(&flux(&expect31, &p).unwrap(), &j, &assume()));
    let pi_p = Expr::atom(p.momentum.derived(0));
    let eq33 = &pi_p + &grassfield::coord_derive(&j, Chart::LightCone, 1).unwrap();
    assert!(equals(&(&e_th + &eq33), &Expr::zero(), &assume()), "{e_th}");
}
