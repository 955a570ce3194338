//! 2x2 matrix and spinor algebra over expressions: gamma matrices, bilinears,
//! gauge projection, the induced worldsheet metric and the supplementary term.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::atom::{Atom, Chart, Parity};
use crate::calculus::coord_derive;
use crate::coeff::Coefficient;
use crate::error::{Error, Result};
use crate::expr::Expr;

/// A 2x2 matrix with expression entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatrixExpr {
    pub entries: [[Expr; 2]; 2],
}

impl MatrixExpr {
    pub fn new(entries: [[Expr; 2]; 2]) -> MatrixExpr {
        MatrixExpr { entries }
    }

    pub fn from_coefficients(k: [[Coefficient; 2]; 2]) -> MatrixExpr {
        let [[a, b], [c, d]] = k;
        MatrixExpr::new([
            [Expr::coefficient(a), Expr::coefficient(b)],
            [Expr::coefficient(c), Expr::coefficient(d)],
        ])
    }

    pub fn identity() -> MatrixExpr {
        MatrixExpr::new([[Expr::one(), Expr::zero()], [Expr::zero(), Expr::one()]])
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i][j]
    }

    pub fn scale(&self, k: &Coefficient) -> MatrixExpr {
        MatrixExpr::new(self.entries.clone().map(|row| row.map(|e| e.scale(k))))
    }

    pub fn transpose(&self) -> MatrixExpr {
        let e = &self.entries;
        MatrixExpr::new([[e[0][0].clone(), e[1][0].clone()], [e[0][1].clone(), e[1][1].clone()]])
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries[0][1] == self.entries[1][0]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(Expr::is_zero)
    }

    /// Applies the matrix to a column of expressions.
    pub fn apply(&self, v: &Spinor) -> Spinor {
        let e = &self.entries;
        let [a, b] = &v.0;
        Spinor([&(&e[0][0] * a) + &(&e[0][1] * b), &(&e[1][0] * a) + &(&e[1][1] * b)])
    }
}

impl Add for &MatrixExpr {
    type Output = MatrixExpr;
    fn add(self, o: &MatrixExpr) -> MatrixExpr {
        let mut out = self.clone();
        for i in 0..2 {
            for j in 0..2 {
                out.entries[i][j] = &self.entries[i][j] + &o.entries[i][j];
            }
        }
        out
    }
}

impl Sub for &MatrixExpr {
    type Output = MatrixExpr;
    fn sub(self, o: &MatrixExpr) -> MatrixExpr {
        self + &o.scale(&Coefficient::integer(-1))
    }
}

impl Mul for &MatrixExpr {
    type Output = MatrixExpr;
    fn mul(self, o: &MatrixExpr) -> MatrixExpr {
        let mut out = MatrixExpr::default();
        for i in 0..2 {
            for j in 0..2 {
                out.entries[i][j] =
                    &(&self.entries[i][0] * &o.entries[0][j]) + &(&self.entries[i][1] * &o.entries[1][j]);
            }
        }
        out
    }
}

impl fmt::Display for MatrixExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.entries;
        write!(f, "[[{}, {}], [{}, {}]]", e[0][0], e[0][1], e[1][0], e[1][1])
    }
}

fn k(n: i64) -> Coefficient {
    Coefficient::integer(n)
}

fn ik(n: i64) -> Coefficient {
    Coefficient::imag().mul(&k(n))
}

/// Pauli matrix `sigma^n`, with `sigma^0` the identity.
pub fn sigma(n: usize) -> MatrixExpr {
    let z = Coefficient::zero;
    MatrixExpr::from_coefficients(match n {
        0 => [[k(1), z()], [z(), k(1)]],
        1 => [[z(), k(1)], [k(1), z()]],
        2 => [[z(), ik(-1)], [ik(1), z()]],
        3 => [[k(1), z()], [z(), k(-1)]],
        _ => panic!("no sigma^{n}"),
    })
}

/// `gamma^0 = sigma^1`, `gamma^1 = i sigma^2`, `gamma^2 = i sigma^3`.
pub fn gamma(mu: usize) -> MatrixExpr {
    match mu {
        0 => sigma(1),
        1 => sigma(2).scale(&Coefficient::imag()),
        2 => sigma(3).scale(&Coefficient::imag()),
        _ => panic!("no gamma^{mu}"),
    }
}

/// `gamma^5 = gamma^0 gamma^1 = diag(-1, 1)`.
pub fn gamma5() -> MatrixExpr {
    &gamma(0) * &gamma(1)
}

/// Target metric `diag(1, -1, -1)`.
pub fn eta(mu: usize) -> i64 {
    if mu == 0 {
        1
    } else {
        -1
    }
}

/// Worldsheet Levi-Civita symbol with `eps^{01} = 1`.
pub fn epsilon(i: usize, j: usize) -> i64 {
    match (i, j) {
        (0, 1) => 1,
        (1, 0) => -1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliVariant {
    /// The triple `sigma^1, sigma^2, sigma^3`.
    Pauli123,
    /// The triple `sigma^0, sigma^1, sigma^2`.
    Literal012,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliCase {
    /// One-based indices `(i, j, k, l)`.
    pub indices: [usize; 4],
    pub lhs: Coefficient,
    pub rhs: Coefficient,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliReport {
    pub variant: PauliVariant,
    pub holds: bool,
    pub cases: Vec<PauliCase>,
}

impl PauliReport {
    pub fn failures(&self) -> impl Iterator<Item = &PauliCase> {
        self.cases.iter().filter(|c| !c.holds)
    }

    pub fn case(&self, indices: [usize; 4]) -> Option<&PauliCase> {
        self.cases.iter().find(|c| c.indices == indices)
    }
}

/// Checks the completeness relation `sum_mu s_ij s_kl = 2 d_il d_jk - d_ij d_kl`
/// on all 16 index tuples.
pub fn pauli_identity_check(variant: PauliVariant) -> PauliReport {
    let mats: Vec<MatrixExpr> = match variant {
        PauliVariant::Pauli123 => vec![sigma(1), sigma(2), sigma(3)],
        PauliVariant::Literal012 => vec![sigma(0), sigma(1), sigma(2)],
    };
    let delta = |a: usize, b: usize| i64::from(a == b);
    let mut cases = Vec::with_capacity(16);
    for n in 0..16usize {
        let [i, j, kk, l] = [n >> 3 & 1, n >> 2 & 1, n >> 1 & 1, n & 1];
        let mut lhs = Expr::zero();
        for m in &mats {
            lhs = &lhs + &(m.get(i, j) * m.get(kk, l));
        }
        let lhs = lhs.as_coefficient().expect("constant matrices");
        let rhs = k(2 * delta(i, l) * delta(j, kk) - delta(i, j) * delta(kk, l));
        cases.push(PauliCase {
            indices: [i + 1, j + 1, kk + 1, l + 1],
            holds: lhs == rhs,
            lhs,
            rhs,
        });
    }
    PauliReport {
        variant,
        holds: cases.iter().all(|c| c.holds),
        cases,
    }
}

/// A two-component spinor with odd (or zero) components.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Spinor(pub [Expr; 2]);

impl Spinor {
    pub fn new(a: Expr, b: Expr) -> Result<Spinor> {
        for x in [&a, &b] {
            if !x.is_zero() && x.parity() != Some(Parity::Odd) {
                return Err(Error::ParityMismatch(format!("spinor component {x} is not odd")));
            }
        }
        Ok(Spinor([a, b]))
    }

    /// The spinor `(f1, f2)` made of two odd fields on `chart`.
    pub fn of_fields(a: &str, b: &str, chart: Chart) -> Spinor {
        Spinor([
            Expr::atom(Atom::field(a, chart, Parity::Odd)),
            Expr::atom(Atom::field(b, chart, Parity::Odd)),
        ])
    }

    pub fn zero() -> Spinor {
        Spinor::default()
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.0[i]
    }

    /// Dirac adjoint `psi^T* gamma^0` as a row.
    pub fn bar(&self) -> [Expr; 2] {
        let g0 = gamma(0);
        let c = [self.0[0].conj(), self.0[1].conj()];
        [0, 1].map(|j| &(&c[0] * g0.get(0, j)) + &(&c[1] * g0.get(1, j)))
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Result<Expr>) -> Result<Spinor> {
        Ok(Spinor([f(&self.0[0])?, f(&self.0[1])?]))
    }
}

impl fmt::Display for Spinor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0[0], self.0[1])
    }
}

/// `row M col` for a row of odd entries, a matrix and a column.
pub fn bilinear(row: &[Expr; 2], m: &MatrixExpr, col: &Spinor) -> Expr {
    let mut out = Expr::zero();
    for a in 0..2 {
        for b in 0..2 {
            out = &out + &(&(&row[a] * m.get(a, b)) * &col.0[b]);
        }
    }
    out
}

/// Fermionic gauge slice `(1 + gamma^5) psi = 0`: keeps the first component,
/// scaled by the normalization `alpha`.
pub fn gauge_project(psi: &Spinor) -> Spinor {
    Spinor([psi.0[0].scale(&Coefficient::alpha()), Expr::zero()])
}

/// Embedding of the worldsheet into target space together with the worldsheet
/// derivative operators `d_i = scale_i * D_i` on the `(t, x)` chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameterization {
    pub target: [Expr; 3],
    pub scales: [Coefficient; 2],
}

impl Parameterization {
    /// `X^0 = ct`, `X^1 = x`, `X^2 = theta / c` with `phi^0 = ct`, `phi^1 = x`.
    pub fn cartesian(theta: &Atom) -> Parameterization {
        let t = Expr::atom(Atom::coordinate(Chart::Tx, 0));
        let x = Expr::atom(Atom::coordinate(Chart::Tx, 1));
        Parameterization {
            target: [
                t.scale(&Coefficient::c_pow(1)),
                x,
                Expr::atom(theta.clone()).scale(&Coefficient::c_pow(-1)),
            ],
            scales: [Coefficient::c_pow(-1), Coefficient::one()],
        }
    }

    /// Unconstrained even target fields `X^mu(t, x)` with `phi = (t, x)`.
    pub fn general(names: [&str; 3]) -> Parameterization {
        Parameterization {
            target: names.map(|n| Expr::atom(Atom::field(n, Chart::Tx, Parity::Even))),
            scales: [Coefficient::one(), Coefficient::one()],
        }
    }

    /// Worldsheet derivative `d_i`.
    pub fn d(&self, e: &Expr, i: usize) -> Result<Expr> {
        Ok(coord_derive(e, Chart::Tx, i)?.scale(&self.scales[i]))
    }

    pub fn d_spinor(&self, psi: &Spinor, i: usize) -> Result<Spinor> {
        psi.map(|c| self.d(c, i))
    }
}

/// `A^mu_i = d_i X^mu - i psibar gamma^mu d_i psi` for `mu = 0, 1, 2`.
pub fn induced_vector(p: &Parameterization, psi: &Spinor, i: usize) -> Result<[Expr; 3]> {
    let bar = psi.bar();
    let dpsi = p.d_spinor(psi, i)?;
    let mut out: [Expr; 3] = Default::default();
    for (mu, slot) in out.iter_mut().enumerate() {
        let fermi = bilinear(&bar, &gamma(mu), &dpsi).scale(&Coefficient::imag());
        *slot = p.d(&p.target[mu], i)?.try_sub(&fermi)?;
    }
    Ok(out)
}

/// `g_ij = eta_{mu nu} A^mu_i A^nu_j`.
pub fn induced_metric(p: &Parameterization, psi: &Spinor) -> Result<MatrixExpr> {
    let a = [induced_vector(p, psi, 0)?, induced_vector(p, psi, 1)?];
    let mut g = MatrixExpr::default();
    for i in 0..2 {
        for j in 0..2 {
            let mut s = Expr::zero();
            for mu in 0..3 {
                s = s.try_add(&a[i][mu].try_mul(&a[j][mu])?.scale(&k(eta(mu))))?;
            }
            g.entries[i][j] = s;
        }
    }
    Ok(g)
}

/// `g_01 g_10 - g_00 g_11`.
pub fn det_g(g: &MatrixExpr) -> Result<Expr> {
    g.get(0, 1).try_mul(g.get(1, 0))?.try_sub(&g.get(0, 0).try_mul(g.get(1, 1))?)
}

/// `-i eps^{ij} d_i X^mu psibar gamma_mu d_j psi`.
pub fn wz_term(p: &Parameterization, psi: &Spinor) -> Result<Expr> {
    let bar = psi.bar();
    let mut out = Expr::zero();
    for i in 0..2 {
        for j in 0..2 {
            let e = epsilon(i, j);
            if e == 0 {
                continue;
            }
            let dpsi = p.d_spinor(psi, j)?;
            for mu in 0..3 {
                let dx = p.d(&p.target[mu], i)?;
                let b = bilinear(&bar, &gamma(mu), &dpsi);
                let term = dx.try_mul(&b)?.scale(&Coefficient::imag().mul(&k(-e * eta(mu))));
                out = out.try_add(&term)?;
            }
        }
    }
    Ok(out)
}

/// The closed-form expansion of `g_ij` for the Cartesian embedding:
/// `eta_ij - (1/c^2) d_i theta d_j theta - i psibar gamma_i d_j psi - i psibar gamma_j d_i psi
///  + (i/c) d_i theta psibar gamma^2 d_j psi + (i/c) d_j theta psibar gamma^2 d_i psi
///  + 3 psibar d_i psi psibar d_j psi`, with `gamma_i = eta_ii gamma^i`.
pub fn expanded_metric_formula(theta: &Atom, psi: &Spinor) -> Result<MatrixExpr> {
    let p = Parameterization::cartesian(theta);
    let bar = psi.bar();
    let th = Expr::atom(theta.clone());
    let ci = Coefficient::imag().mul(&Coefficient::c_pow(-1));
    let mut g = MatrixExpr::default();
    for i in 0..2 {
        for j in 0..2 {
            let (dti, dtj) = (p.d(&th, i)?, p.d(&th, j)?);
            let (dpi, dpj) = (p.d_spinor(psi, i)?, p.d_spinor(psi, j)?);
            let lower = |n: usize| gamma(n).scale(&k(eta(n)));
            let mut s = Expr::integer(if i == j { eta(i) } else { 0 });
            s = &s - &(&dti * &dtj).scale(&Coefficient::c_pow(-2));
            s = &s - &bilinear(&bar, &lower(i), &dpj).scale(&Coefficient::imag());
            s = &s - &bilinear(&bar, &lower(j), &dpi).scale(&Coefficient::imag());
            s = &s + &(&dti * &bilinear(&bar, &gamma(2), &dpj)).scale(&ci);
            s = &s + &(&dtj * &bilinear(&bar, &gamma(2), &dpi)).scale(&ci);
            let id = MatrixExpr::identity();
            s = &s + &(&bilinear(&bar, &id, &dpi) * &bilinear(&bar, &id, &dpj)).scale(&k(3));
            g.entries[i][j] = s;
        }
    }
    Ok(g)
}

/// `true` when every coefficient is real with integer powers of `c`.
pub fn is_physical(e: &Expr) -> bool {
    e.is_real_integral_c()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equals, AssumptionSet};

    fn theta() -> Atom {
        Atom::field("theta", Chart::Tx, Parity::Even)
    }
    fn u() -> Atom {
        Atom::field("u", Chart::Tx, Parity::Odd)
    }
    fn a(x: Atom) -> Expr {
        Expr::atom(x)
    }
    fn cp(n: i32) -> Coefficient {
        Coefficient::c_pow(n)
    }

    fn gauge_fixed() -> Spinor {
        gauge_project(&Spinor::of_fields("u", "v", Chart::Tx))
    }

    #[test]
    fn gamma5_relations() {
        let g5 = gamma5();
        assert_eq!(g5, MatrixExpr::from_coefficients([[k(-1), Coefficient::zero()], [Coefficient::zero(), k(1)]]));
        assert_eq!(g5, gamma(2).scale(&Coefficient::imag()));
    }

    #[test]
    fn clifford_relation() {
        for mu in 0..3 {
            for nu in 0..3 {
                let ac = &(&gamma(mu) * &gamma(nu)) + &(&gamma(nu) * &gamma(mu));
                let expect = if mu == nu { MatrixExpr::identity().scale(&k(2 * eta(mu))) } else { MatrixExpr::default() };
                assert_eq!(ac, expect, "mu={mu} nu={nu}");
            }
        }
    }

    #[test]
    fn pauli_variants() {
        let p = pauli_identity_check(PauliVariant::Pauli123);
        assert!(p.holds);
        assert_eq!(p.case([1, 1, 2, 2]).unwrap().lhs, k(-1));
        let l = pauli_identity_check(PauliVariant::Literal012);
        assert!(!l.holds);
        let c = l.case([1, 1, 2, 2]).unwrap();
        assert_eq!((c.lhs.clone(), c.rhs.clone()), (k(1), k(-1)));
    }

    #[test]
    fn gauge_slice_is_annihilated() {
        let s = gauge_fixed();
        let plus = &MatrixExpr::identity() + &gamma5();
        assert!(plus.apply(&s).0.iter().all(Expr::is_zero));
    }

    #[test]
    fn bosonic_induced_vector() {
        let p = Parameterization::cartesian(&theta());
        let a0 = induced_vector(&p, &Spinor::zero(), 0).unwrap();
        assert_eq!(a0[0], Expr::one());
        assert_eq!(a0[1], Expr::zero());
        assert_eq!(a0[2], a(theta().derived(0)).scale(&cp(-2)));
        assert_eq!(induced_vector(&p, &Spinor::zero(), 1).unwrap()[1], Expr::one());
    }

    #[test]
    fn gauge_fixed_metric() {
        let p = Parameterization::cartesian(&theta());
        let g = induced_metric(&p, &gauge_fixed()).unwrap();
        let (tt, tx) = (a(theta().derived(0)), a(theta().derived(1)));
        let uut = &a(u()) * &a(u().derived(0));
        let uux = &a(u()) * &a(u().derived(1));
        let g00 = &(&Expr::one() - &(&tt * &tt).scale(&cp(-4))) - &uut.scale(&cp(-2));
        let g01 = &(&-(&tx * &tt).scale(&cp(-3)) - &uux.scale(&Coefficient::frac(1, 2).mul(&cp(-1))))
            - &uut.scale(&Coefficient::frac(1, 2).mul(&cp(-2)));
        let g11 = &(&Expr::integer(-1) - &(&tx * &tx).scale(&cp(-2))) - &uux.scale(&cp(-1));
        let s = AssumptionSet::new();
        assert!(equals(g.get(0, 0), &g00, &s), "{}", g.get(0, 0));
        assert!(equals(g.get(0, 1), &g01, &s), "{}", g.get(0, 1));
        assert!(equals(g.get(1, 1), &g11, &s), "{}", g.get(1, 1));
        assert!(g.is_symmetric());
        assert!(g.entries.iter().flatten().all(is_physical));
    }

    #[test]
    fn flat_determinant() {
        let p = Parameterization::cartesian(&Atom::constant("theta0", Parity::Even));
        let g = induced_metric(&p, &Spinor::zero()).unwrap();
        assert_eq!(det_g(&g).unwrap(), Expr::one());
    }

    #[test]
    fn supplementary_term() {
        let p = Parameterization::cartesian(&theta());
        let wz = wz_term(&p, &gauge_fixed()).unwrap();
        let uut = &a(u()) * &a(u().derived(0));
        let uux = &a(u()) * &a(u().derived(1));
        let expect = &uut.scale(&Coefficient::frac(1, 2).mul(&cp(-2))) - &uux.scale(&Coefficient::frac(1, 2).mul(&cp(-1)));
        assert_eq!(wz, expect);
        assert!(wz_term(&p, &Spinor::zero()).unwrap().is_zero());
    }
}
