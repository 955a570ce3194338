//! Numeric ground truth: expressions evaluated in an explicit finite Grassmann
//! algebra whose scalars are exact elements of `Q(sqrt2, i)`, falling back to
//! complex floating point when a root is irrational.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atom::{Atom, AtomKind};
use crate::coeff::{binomial, Coefficient, Exponent};
use crate::error::{Error, Result};
use crate::expr::{AssumptionSet, Base, Expr, Raw};

/// Maximum number of Grassmann generators.
pub const MAX_GENERATORS: usize = 10;

/// Relative tolerance for floating-point comparisons.
pub const TOLERANCE: f64 = 1e-12;

/// An element `p + q sqrt2` of `Q(sqrt2)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct R2 {
    p: BigRational,
    q: BigRational,
}

impl R2 {
    fn rational(p: BigRational) -> R2 {
        R2 { p, q: BigRational::zero() }
    }
    fn is_zero(&self) -> bool {
        self.p.is_zero() && self.q.is_zero()
    }
    fn add(&self, o: &R2) -> R2 {
        R2 { p: &self.p + &o.p, q: &self.q + &o.q }
    }
    fn neg(&self) -> R2 {
        R2 { p: -self.p.clone(), q: -self.q.clone() }
    }
    fn mul(&self, o: &R2) -> R2 {
        let two = BigRational::from_integer(2.into());
        R2 {
            p: &self.p * &o.p + &two * &self.q * &o.q,
            q: &self.p * &o.q + &self.q * &o.p,
        }
    }
    fn inv(&self) -> R2 {
        let two = BigRational::from_integer(2.into());
        let n = &self.p * &self.p - &two * &self.q * &self.q;
        R2 { p: &self.p / &n, q: -&self.q / &n }
    }
    fn to_f64(&self) -> f64 {
        self.p.to_f64().unwrap_or(f64::NAN) + self.q.to_f64().unwrap_or(f64::NAN) * std::f64::consts::SQRT_2
    }
}

/// Exact element of `Q(sqrt2, i)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Exact {
    re: R2,
    im: R2,
}

impl Exact {
    fn add(&self, o: &Exact) -> Exact {
        Exact { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }
    fn mul(&self, o: &Exact) -> Exact {
        Exact {
            re: self.re.mul(&o.re).add(&self.im.mul(&o.im).neg()),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn inv(&self) -> Exact {
        let n = self.re.mul(&self.re).add(&self.im.mul(&self.im)).inv();
        Exact { re: self.re.mul(&n), im: self.im.neg().mul(&n) }
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
    fn as_rational(&self) -> Option<&BigRational> {
        (self.re.q.is_zero() && self.im.is_zero()).then_some(&self.re.p)
    }
}

/// A scalar of the oracle: exact when possible.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Scalar {
    Exact(Exact),
    Float(Complex64),
}

impl Scalar {
    pub fn zero() -> Scalar {
        Scalar::Exact(Exact::default())
    }

    pub fn one() -> Scalar {
        Scalar::rational(BigRational::one())
    }

    pub fn rational(q: BigRational) -> Scalar {
        Scalar::Exact(Exact { re: R2::rational(q), im: R2::default() })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    /// Exact zero, or a float exactly equal to zero.
    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(e) => e.is_zero(),
            Scalar::Float(z) => *z == Complex64::new(0.0, 0.0),
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        match self {
            Scalar::Exact(e) => e.to_complex(),
            Scalar::Float(z) => *z,
        }
    }

    pub fn add(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a.add(b)),
            _ => Scalar::Float(self.to_complex() + o.to_complex()),
        }
    }

    pub fn mul(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a.mul(b)),
            _ => Scalar::Float(self.to_complex() * o.to_complex()),
        }
    }

    pub fn neg(&self) -> Scalar {
        self.mul(&Scalar::rational(-BigRational::one()))
    }

    pub fn inv(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::DivisionByZero("oracle scalar".into()));
        }
        Ok(match self {
            Scalar::Exact(e) => Scalar::Exact(e.inv()),
            Scalar::Float(z) => Scalar::Float(z.inv()),
        })
    }

    fn powi(&self, n: i64) -> Result<Scalar> {
        let base = if n < 0 { self.inv()? } else { self.clone() };
        let mut out = Scalar::one();
        for _ in 0..n.unsigned_abs() {
            out = out.mul(&base);
        }
        Ok(out)
    }

    /// Principal real power of a positive real scalar.
    pub fn pow(&self, r: Exponent) -> Result<Scalar> {
        if r.is_integer() {
            return self.powi(*r.numer());
        }
        let z = self.to_complex();
        if z.im.abs() > TOLERANCE * z.re.abs() || z.re <= 0.0 {
            return Err(Error::NegativeBase(format!("{z}")));
        }
        if let Scalar::Exact(e) = self {
            if let Some(q) = e.as_rational() {
                let m = *r.denom() as u32;
                let (n, d) = (q.numer().magnitude(), q.denom().magnitude());
                let (rn, rd) = (n.nth_root(m), d.nth_root(m));
                if rn.pow(m) == *n && rd.pow(m) == *d {
                    let root = BigRational::new(BigInt::from(rn), BigInt::from(rd));
                    return Scalar::rational(root).powi(*r.numer());
                }
            }
        }
        Ok(Scalar::Float(Complex64::new(z.re.powf(*r.numer() as f64 / *r.denom() as f64), 0.0)))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(e) => {
                let parts = [(&e.re.p, ""), (&e.re.q, "*sqrt2"), (&e.im.p, "*I"), (&e.im.q, "*sqrt2*I")];
                let mut first = true;
                for (q, s) in parts {
                    if q.is_zero() {
                        continue;
                    }
                    if !first {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{q}{s}")?;
                    first = false;
                }
                if first {
                    f.write_str("0")?;
                }
                Ok(())
            }
            Scalar::Float(z) => write!(f, "{z}"),
        }
    }
}

/// An element of the Grassmann algebra on at most [`MAX_GENERATORS`]
/// generators; keys are generator bitmasks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrassmannElement {
    terms: BTreeMap<u16, Scalar>,
}

impl GrassmannElement {
    pub fn scalar(s: Scalar) -> GrassmannElement {
        let mut terms = BTreeMap::new();
        if !s.is_zero() {
            terms.insert(0, s);
        }
        GrassmannElement { terms }
    }

    pub fn generator(i: usize) -> GrassmannElement {
        GrassmannElement {
            terms: [(1u16 << i, Scalar::one())].into(),
        }
    }

    pub fn coefficient(&self, subset: u16) -> Scalar {
        self.terms.get(&subset).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u16, &Scalar)> {
        self.terms.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(Scalar::is_exact)
    }

    fn insert(&mut self, k: u16, s: Scalar) {
        let v = match self.terms.remove(&k) {
            Some(old) => old.add(&s),
            None => s,
        };
        if !v.is_zero() {
            self.terms.insert(k, v);
        }
    }

    pub fn add(&self, o: &GrassmannElement) -> GrassmannElement {
        let mut out = self.clone();
        for (k, v) in &o.terms {
            out.insert(*k, v.clone());
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> GrassmannElement {
        let mut out = GrassmannElement::default();
        for (k, v) in &self.terms {
            out.insert(*k, v.mul(s));
        }
        out
    }

    pub fn sub(&self, o: &GrassmannElement) -> GrassmannElement {
        self.add(&o.scale(&Scalar::rational(-BigRational::one())))
    }

    pub fn mul(&self, o: &GrassmannElement) -> GrassmannElement {
        let mut out = GrassmannElement::default();
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                if a & b != 0 {
                    continue;
                }
                // moving each generator of b past the larger generators of a
                let mut swaps = 0;
                let mut bb = *b;
                while bb != 0 {
                    let j = bb.trailing_zeros();
                    swaps += (a >> j).count_ones();
                    bb &= bb - 1;
                }
                let mut v = x.mul(y);
                if swaps % 2 == 1 {
                    v = v.neg();
                }
                out.insert(a | b, v);
            }
        }
        out
    }

    /// True when every coefficient sits on an even-sized subset.
    pub fn is_even(&self) -> bool {
        self.terms.keys().all(|k| k.count_ones() % 2 == 0)
    }

    /// `self^r` via the binomial series around the scalar part.
    pub fn pow(&self, r: Exponent) -> Result<GrassmannElement> {
        if r.is_integer() && *r.numer() >= 0 {
            let mut out = GrassmannElement::scalar(Scalar::one());
            for _ in 0..*r.numer() {
                out = out.mul(self);
            }
            return Ok(out);
        }
        if !self.is_even() {
            return Err(Error::OddBase("oracle power of an odd element".into()));
        }
        let b0 = self.coefficient(0);
        if b0.is_zero() {
            return Err(Error::DivisionByZero("oracle power with vanishing body".into()));
        }
        let mut nil = self.clone();
        nil.terms.remove(&0);
        let b0_inv = b0.inv()?;
        let rel = nil.scale(&b0_inv);
        let mut out = GrassmannElement::scalar(Scalar::one());
        let mut rel_k = GrassmannElement::scalar(Scalar::one());
        let mut k = 0u32;
        loop {
            k += 1;
            rel_k = rel_k.mul(&rel);
            if rel_k.terms.is_empty() {
                break;
            }
            out = out.add(&rel_k.scale(&Scalar::rational(binomial(r, k))));
        }
        Ok(out.scale(&b0.pow(r)?))
    }

    /// Largest coefficient magnitude.
    pub fn magnitude(&self) -> f64 {
        self.terms.values().map(|s| s.to_complex().norm()).fold(0.0, f64::max)
    }

    /// Exact equality, or agreement within the relative tolerance when floats are involved.
    pub fn approx_eq(&self, o: &GrassmannElement) -> bool {
        let d = self.sub(o);
        if self.is_exact() && o.is_exact() {
            return d.terms.is_empty();
        }
        let scale = self.magnitude().max(o.magnitude()).max(1.0);
        d.magnitude() <= TOLERANCE * scale
    }
}

impl fmt::Display for GrassmannElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, v)| {
                let gens: Vec<String> = (0..16).filter(|i| k >> i & 1 == 1).map(|i| format!("g{}", i + 1)).collect();
                if gens.is_empty() {
                    format!("({v})")
                } else {
                    format!("({v})*{}", gens.join("*"))
                }
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

/// Values for atoms and for `c = s^2`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `c = sqrt_c^2`, so half-integer powers of `c` stay rational.
    pub sqrt_c: i64,
    values: BTreeMap<Atom, GrassmannElement>,
}

impl Assignment {
    pub fn new(sqrt_c: i64) -> Assignment {
        Assignment {
            sqrt_c,
            values: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, a: Atom, v: GrassmannElement) {
        self.values.insert(a, v);
    }

    pub fn set_rational(&mut self, a: Atom, q: BigRational) {
        self.set(a, GrassmannElement::scalar(Scalar::rational(q)));
    }

    pub fn get(&self, a: &Atom) -> Result<&GrassmannElement> {
        self.values.get(a).ok_or_else(|| Error::UnassignedAtom(a.to_string()))
    }

    fn coefficient(&self, k: &Coefficient) -> Scalar {
        let s = BigRational::from_integer(self.sqrt_c.into());
        let mut out = Scalar::rational(k.value.clone());
        let mut cp = BigRational::one();
        for _ in 0..k.basis.c_half.unsigned_abs() {
            cp *= &s;
        }
        if k.basis.c_half < 0 {
            cp = cp.recip();
        }
        out = out.mul(&Scalar::rational(cp));
        if k.basis.sqrt2 {
            out = out.mul(&Scalar::Exact(Exact {
                re: R2 { p: BigRational::zero(), q: BigRational::one() },
                im: R2::default(),
            }));
        }
        if k.basis.imag {
            out = out.mul(&Scalar::Exact(Exact { re: R2::default(), im: R2::rational(BigRational::one()) }));
        }
        if k.basis.alpha {
            // alpha = (1 - i) / (2 s), so alpha^2 = -i / (2 c)
            let h = BigRational::new(1.into(), (2 * self.sqrt_c).into());
            out = out.mul(&Scalar::Exact(Exact { re: R2::rational(h.clone()), im: R2::rational(-h) }));
        }
        out
    }
}

/// Evaluates a canonical expression.
pub fn oracle_eval(e: &Expr, a: &Assignment) -> Result<GrassmannElement> {
    let mut total = GrassmannElement::default();
    for (k, m) in e.coefficient_terms() {
        let mut acc = GrassmannElement::scalar(a.coefficient(&k));
        for (base, r) in m.evens() {
            let v = match base {
                Base::Atom(at) => a.get(at)?.clone(),
                Base::Body(b) => oracle_eval(b, a)?,
            };
            acc = acc.mul(&v.pow(*r)?);
        }
        for at in m.odds() {
            acc = acc.mul(a.get(at)?);
        }
        total = total.add(&acc);
    }
    Ok(total)
}

/// Evaluates an unnormalized expression tree directly, without canonicalization.
pub fn oracle_eval_raw(raw: &Raw, a: &Assignment) -> Result<GrassmannElement> {
    Ok(match raw {
        Raw::Const(k) => GrassmannElement::scalar(a.coefficient(k)),
        Raw::Atom(at) => a.get(at)?.clone(),
        Raw::Add(xs) => {
            let mut acc = GrassmannElement::default();
            for x in xs {
                acc = acc.add(&oracle_eval_raw(x, a)?);
            }
            acc
        }
        Raw::Mul(xs) => {
            let mut acc = GrassmannElement::scalar(Scalar::one());
            for x in xs {
                acc = acc.mul(&oracle_eval_raw(x, a)?);
            }
            acc
        }
        Raw::Neg(x) => oracle_eval_raw(x, a)?.scale(&Scalar::rational(-BigRational::one())),
        Raw::Pow(x, r) => oracle_eval_raw(x, a)?.pow(*r)?,
    })
}

fn small_rational(rng: &mut ChaCha8Rng, positive: bool) -> BigRational {
    let n: i64 = rng.gen_range(1..=9);
    let d: i64 = rng.gen_range(1..=9);
    let sign = if positive || rng.gen_bool(0.5) { 1 } else { -1 };
    BigRational::new((sign * n).into(), d.into())
}

/// Random assignment: odd atoms get distinct generators in atom order, even
/// atoms small rationals (positive when assumed positive), `c` a square in `4..=81`.
pub fn random_assignment<'a>(
    atoms: impl IntoIterator<Item = &'a Atom>,
    positive: &AssumptionSet,
    rng: &mut ChaCha8Rng,
) -> Result<Assignment> {
    let mut a = Assignment::new(rng.gen_range(2..=9));
    let mut g = 0;
    for at in atoms {
        if at.is_odd() {
            if g >= MAX_GENERATORS {
                return Err(Error::OracleCapacity(format!("more than {MAX_GENERATORS} odd atoms")));
            }
            a.set(at.clone(), GrassmannElement::generator(g));
            g += 1;
        } else {
            let q = small_rational(rng, positive.contains(at));
            a.set_rational(at.clone(), q);
        }
    }
    Ok(a)
}

/// Outcome of a randomized equivalence test.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivReport {
    pub trials: usize,
    /// Trials evaluated entirely in exact arithmetic.
    pub exact_trials: usize,
    /// Assignments rejected because a power base was not positive.
    pub rejected: usize,
    pub equivalent: bool,
    /// Description of the first disagreeing assignment.
    pub witness: Option<String>,
}

impl fmt::Display for EquivReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} trials ({} exact, {} rejected): {}",
            self.trials,
            self.exact_trials,
            self.rejected,
            if self.equivalent { "equivalent" } else { "witness found" }
        )?;
        if let Some(w) = &self.witness {
            write!(f, "; {w}")?;
        }
        Ok(())
    }
}

fn describe(a: &Assignment, atoms: &BTreeSet<Atom>) -> String {
    let mut parts = vec![format!("c={}", a.sqrt_c * a.sqrt_c)];
    for at in atoms {
        if let Ok(v) = a.get(at) {
            parts.push(format!("{at}={v}"));
        }
    }
    parts.join(", ")
}

fn equiv_loop<F>(
    atoms: &BTreeSet<Atom>,
    trials: usize,
    seed: u64,
    positive: &AssumptionSet,
    mut check: F,
) -> Result<EquivReport>
where
    F: FnMut(&Assignment) -> Result<(GrassmannElement, GrassmannElement)>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EquivReport {
        trials: 0,
        exact_trials: 0,
        rejected: 0,
        equivalent: true,
        witness: None,
    };
    let max_attempts = trials * 20 + 100;
    let mut attempts = 0;
    while report.trials < trials {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::NegativeBase(format!(
                "only {} of {trials} random assignments had positive power bases",
                report.trials
            )));
        }
        let a = random_assignment(atoms, positive, &mut rng)?;
        let (x, y) = match check(&a) {
            Ok(v) => v,
            Err(Error::NegativeBase(_)) | Err(Error::DivisionByZero(_)) => {
                report.rejected += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        report.trials += 1;
        if x.is_exact() && y.is_exact() {
            report.exact_trials += 1;
        }
        if !x.approx_eq(&y) {
            report.equivalent = false;
            report.witness = Some(format!("{}: {x} vs {y}", describe(&a, atoms)));
            break;
        }
    }
    Ok(report)
}

/// Compares two expressions on `trials` pseudo-random assignments drawn from `seed`.
pub fn oracle_equiv(a: &Expr, b: &Expr, trials: usize, seed: u64, positive: &AssumptionSet) -> Result<EquivReport> {
    let mut atoms = a.atoms();
    atoms.extend(b.atoms());
    equiv_loop(&atoms, trials, seed, positive, |asg| Ok((oracle_eval(a, asg)?, oracle_eval(b, asg)?)))
}

/// Round trip of an inversion: assigns `velocity := candidate` (an even
/// Grassmann element) and compares `pi_expr` with the value of `momentum`.
pub fn oracle_inversion(
    pi_expr: &Expr,
    candidate: &Expr,
    velocity: &Atom,
    momentum: &Atom,
    trials: usize,
    seed: u64,
    positive: &AssumptionSet,
) -> Result<EquivReport> {
    let mut atoms = pi_expr.atoms();
    atoms.extend(candidate.atoms());
    atoms.insert(momentum.clone());
    atoms.remove(velocity);
    equiv_loop(&atoms, trials, seed, positive, |asg| {
        let v = oracle_eval(candidate, asg)?;
        let mut full = asg.clone();
        full.set(velocity.clone(), v);
        Ok((oracle_eval(pi_expr, &full)?, asg.get(momentum)?.clone()))
    })
}

/// Number of odd atoms, i.e. generators needed.
pub fn generators_needed(e: &Expr) -> usize {
    e.atoms().iter().filter(|a| a.is_odd() && a.kind() != AtomKind::Coordinate).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{Chart, Parity};

    fn u() -> Atom {
        Atom::field("u", Chart::Tx, Parity::Odd)
    }

    fn assignment() -> Assignment {
        let mut a = Assignment::new(2);
        a.set(u(), GrassmannElement::generator(0));
        a.set(u().derived(0), GrassmannElement::generator(1));
        a.set(u().derived(1), GrassmannElement::generator(2));
        a
    }

    #[test]
    fn product_of_generators() {
        let a = assignment();
        let e = &Expr::atom(u()) * &Expr::atom(u().derived(1));
        let v = oracle_eval(&e, &a).unwrap();
        assert_eq!(v.coefficient(0b101), Scalar::one());
        let r = Raw::Mul(vec![Raw::Atom(u().derived(1)), Raw::Atom(u())]);
        assert_eq!(oracle_eval_raw(&r, &a).unwrap().coefficient(0b101), Scalar::one().neg());
    }

    #[test]
    fn alpha_squared() {
        let a = Assignment::new(3);
        let al = a.coefficient(&Coefficient::alpha());
        let expect = a.coefficient(&Coefficient::imag().mul(&Coefficient::frac(-1, 2)).mul(&Coefficient::c_pow(-1)));
        assert_eq!(al.mul(&al), expect);
    }

    #[test]
    fn nilpotent_root() {
        let g = GrassmannElement::generator(0).mul(&GrassmannElement::generator(1));
        let x = GrassmannElement::scalar(Scalar::rational(BigRational::from_integer(4.into()))).add(&g);
        let r = x.pow(Exponent::new(1, 2)).unwrap();
        assert_eq!(r.mul(&r), x);
    }

    #[test]
    fn equivalence_and_witness() {
        let ue = Expr::atom(u());
        let a = &ue * &Expr::atom(u().derived(1));
        let b = -(&Expr::atom(u().derived(1)) * &ue);
        let s = AssumptionSet::new();
        assert!(oracle_equiv(&a, &b, 50, 0, &s).unwrap().equivalent);
        let c = &ue * &Expr::atom(u().derived(0));
        let rep = oracle_equiv(&a, &c, 50, 0, &s).unwrap();
        assert!(!rep.equivalent && rep.witness.is_some());
    }

    #[test]
    fn deterministic() {
        let th = Atom::field("theta", Chart::Tx, Parity::Even);
        let e = (&Expr::integer(2) + &Expr::atom(th.clone()).pow(Exponent::from(2)).unwrap()).sqrt().unwrap();
        let s = AssumptionSet::new();
        let r1 = oracle_equiv(&e, &e, 20, 7, &s).unwrap();
        let r2 = oracle_equiv(&e, &e, 20, 7, &s).unwrap();
        assert_eq!(r1, r2);
    }
}
