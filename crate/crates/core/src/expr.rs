//! Canonical Grassmann-graded expressions.
//!
//! An [`Expr`] is a finite sum of monomials. Each monomial carries a rational
//! value, a coefficient [`Basis`], even factors (atoms or odd-free power bodies
//! with rational exponents) and a strictly increasing list of odd atoms. All
//! constructors keep the representation canonical, so structural equality is
//! equality of canonical forms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::atom::{Atom, Chart, Parity};
use crate::coeff::{binomial, fmt_rational, Basis, CPow, Coefficient, Exponent};
use crate::error::{Error, Result};

/// Base of an even factor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Base {
    Atom(Atom),
    /// An odd-free canonical expression raised to a rational power. Stored
    /// exponents are always below one; integer parts are multiplied out.
    Body(Arc<Expr>),
}

/// The shape of a monomial: everything except its rational value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial {
    evens: BTreeMap<Base, Exponent>,
    odds: Vec<Atom>,
    basis: Basis,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial::default()
    }

    pub fn evens(&self) -> &BTreeMap<Base, Exponent> {
        &self.evens
    }

    pub fn odds(&self) -> &[Atom] {
        &self.odds
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn is_constant(&self) -> bool {
        self.evens.is_empty() && self.odds.is_empty()
    }

    pub fn odd_degree(&self) -> usize {
        self.odds.len()
    }

    pub fn parity(&self) -> Parity {
        if self.odds.len() % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn exponent_of(&self, atom: &Atom) -> Exponent {
        self.evens
            .get(&Base::Atom(atom.clone()))
            .copied()
            .unwrap_or_else(Exponent::zero)
    }

    pub fn bodies(&self) -> impl Iterator<Item = (&Arc<Expr>, Exponent)> {
        self.evens.iter().filter_map(|(b, e)| match b {
            Base::Body(body) => Some((body, *e)),
            Base::Atom(_) => None,
        })
    }

    pub fn even_atoms(&self) -> impl Iterator<Item = (&Atom, Exponent)> {
        self.evens.iter().filter_map(|(b, e)| match b {
            Base::Atom(a) => Some((a, *e)),
            Base::Body(_) => None,
        })
    }

    /// Same shape with the coefficient basis reset.
    pub fn without_basis(&self) -> Monomial {
        Monomial {
            basis: Basis::ONE,
            ..self.clone()
        }
    }

    pub fn with_basis(&self, basis: Basis) -> Monomial {
        Monomial {
            basis,
            ..self.clone()
        }
    }

    /// Shape with the given even factor removed.
    pub fn without_even(&self, base: &Base) -> Monomial {
        let mut m = self.clone();
        m.evens.remove(base);
        m
    }

    /// Shape with the even factor `base` set to exponent `e` (removed when zero).
    pub(crate) fn with_even(&self, base: Base, e: Exponent) -> Monomial {
        let mut m = self.clone();
        if e.is_zero() {
            m.evens.remove(&base);
        } else {
            m.evens.insert(base, e);
        }
        m
    }

    pub(crate) fn with_odds(&self, odds: Vec<Atom>) -> Monomial {
        Monomial {
            odds,
            ..self.clone()
        }
    }

    /// Shape with the odd atom at `index` removed.
    pub fn without_odd(&self, index: usize) -> Monomial {
        let mut m = self.clone();
        m.odds.remove(index);
        m
    }
}

/// Canonical sum of monomials.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Expr {
    terms: BTreeMap<Monomial, BigRational>,
    chart: Option<Chart>,
}

pub(crate) fn merge_chart(a: Option<Chart>, b: Option<Chart>) -> Result<Option<Chart>> {
    match (a, b) {
        (Some(x), Some(y)) if x != y => Err(Error::ChartMix(x, y)),
        (Some(x), _) | (_, Some(x)) => Ok(Some(x)),
        _ => Ok(None),
    }
}

enum Product {
    Zero,
    Single(BigRational, Monomial),
    Many(Expr),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::default()
    }

    pub fn one() -> Expr {
        Expr::coefficient(Coefficient::one())
    }

    pub fn integer(n: i64) -> Expr {
        Expr::coefficient(Coefficient::integer(n))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::coefficient(Coefficient::frac(n, d))
    }

    pub fn rational(q: BigRational) -> Expr {
        Expr::coefficient(Coefficient::rational(q))
    }

    /// `c^n`.
    pub fn c_pow(n: i32) -> Expr {
        Expr::coefficient(Coefficient::c_pow(n))
    }

    pub fn c() -> Expr {
        Expr::c_pow(1)
    }

    pub fn sqrt2() -> Expr {
        Expr::coefficient(Coefficient::sqrt2())
    }

    pub fn imag() -> Expr {
        Expr::coefficient(Coefficient::imag())
    }

    pub fn alpha() -> Expr {
        Expr::coefficient(Coefficient::alpha())
    }

    pub fn coefficient(k: Coefficient) -> Expr {
        if k.is_zero() {
            return Expr::zero();
        }
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::one().with_basis(k.basis), k.value);
        Expr { terms, chart: None }
    }

    pub fn atom(a: Atom) -> Expr {
        let chart = a.chart();
        let mut m = Monomial::one();
        if a.is_odd() {
            m.odds.push(a);
        } else {
            m.evens.insert(Base::Atom(a), Exponent::one());
        }
        let mut terms = BTreeMap::new();
        terms.insert(m, BigRational::one());
        Expr { terms, chart }
    }

    /// A single monomial. The monomial must already be canonical.
    pub fn monomial(value: BigRational, m: Monomial) -> Expr {
        if value.is_zero() {
            return Expr::zero();
        }
        let chart = monomial_chart(&m);
        let mut terms = BTreeMap::new();
        terms.insert(m, value);
        Expr { terms, chart }
    }

    /// Canonical expression from arbitrary (even, odd) factor lists; repeated odd atoms give zero.
    pub fn from_factors(coeff: Coefficient, evens: &[(Atom, i64)], odds: &[Atom]) -> Expr {
        let mut e = Expr::coefficient(coeff);
        for (a, n) in evens {
            e = &e * &Expr::atom(a.clone()).pow(Exponent::from(*n)).expect("atom power");
        }
        for a in odds {
            e = &e * &Expr::atom(a.clone());
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_coefficient().is_some_and(|k| k.is_one())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn chart(&self) -> Option<Chart> {
        self.chart
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    /// Terms as full coefficients.
    pub fn coefficient_terms(&self) -> impl Iterator<Item = (Coefficient, Monomial)> + '_ {
        self.terms.iter().map(|(m, q)| {
            (
                Coefficient::new(q.clone(), m.basis),
                m.without_basis(),
            )
        })
    }

    /// The constant value when the expression has no atoms.
    pub fn as_coefficient(&self) -> Option<Coefficient> {
        if self.is_zero() {
            return Some(Coefficient::zero());
        }
        if self.terms.len() != 1 {
            return None;
        }
        let (m, q) = self.terms.iter().next()?;
        m.is_constant().then(|| Coefficient::new(q.clone(), m.basis))
    }

    /// Parity when homogeneous; `None` for zero or mixed expressions.
    pub fn parity(&self) -> Option<Parity> {
        let mut it = self.terms.keys().map(Monomial::parity);
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    pub fn is_odd_free(&self) -> bool {
        self.terms.keys().all(|m| m.odds.is_empty())
    }

    pub fn max_odd_degree(&self) -> usize {
        self.terms.keys().map(|m| m.odds.len()).max().unwrap_or(0)
    }

    /// Splits into the odd-free body and the nilpotent remainder.
    pub fn odd_split(&self) -> (Expr, Expr) {
        let mut body = BTreeMap::new();
        let mut rest = BTreeMap::new();
        for (m, q) in &self.terms {
            if m.odds.is_empty() {
                body.insert(m.clone(), q.clone());
            } else {
                rest.insert(m.clone(), q.clone());
            }
        }
        (Expr::from_map(body), Expr::from_map(rest))
    }

    pub(crate) fn from_map(terms: BTreeMap<Monomial, BigRational>) -> Expr {
        let mut chart = None;
        for m in terms.keys() {
            chart = merge_chart(chart, monomial_chart(m)).expect("consistent chart");
        }
        Expr { terms, chart }
    }

    /// Every atom, including those inside power bodies.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        for m in self.terms.keys() {
            for b in m.evens.keys() {
                match b {
                    Base::Atom(a) => {
                        out.insert(a.clone());
                    }
                    Base::Body(body) => body.collect_atoms(out),
                }
            }
            out.extend(m.odds.iter().cloned());
        }
    }

    pub fn contains_atom(&self, a: &Atom) -> bool {
        self.atoms().contains(a)
    }

    /// True when every coefficient (including inside bodies) is real and carries an integer power of `c`.
    pub fn is_real_integral_c(&self) -> bool {
        self.terms.keys().all(|m| {
            !m.basis.imag
                && !m.basis.alpha
                && m.basis.c_half % 2 == 0
                && m.bodies().all(|(b, _)| b.is_real_integral_c())
        })
    }

    /// Adds a canonical monomial in place.
    fn add_term(terms: &mut BTreeMap<Monomial, BigRational>, m: Monomial, q: BigRational) {
        if q.is_zero() {
            return;
        }
        match terms.get_mut(&m) {
            Some(v) => {
                *v += q;
                if v.is_zero() {
                    terms.remove(&m);
                }
            }
            None => {
                terms.insert(m, q);
            }
        }
    }

    pub fn try_add(&self, other: &Expr) -> Result<Expr> {
        let chart = merge_chart(self.chart, other.chart)?;
        let (mut big, small) = if self.terms.len() >= other.terms.len() {
            (self.terms.clone(), &other.terms)
        } else {
            (other.terms.clone(), &self.terms)
        };
        for (m, q) in small {
            Expr::add_term(&mut big, m.clone(), q.clone());
        }
        let chart = if big.is_empty() { None } else { chart };
        Ok(Expr { terms: big, chart }.fix_chart())
    }

    pub fn try_sub(&self, other: &Expr) -> Result<Expr> {
        self.try_add(&other.neg())
    }

    fn fix_chart(mut self) -> Expr {
        if self.chart.is_some() && self.terms.keys().all(|m| monomial_chart(m).is_none()) {
            self.chart = None;
        }
        self
    }

    pub fn neg(&self) -> Expr {
        Expr {
            terms: self.terms.iter().map(|(m, q)| (m.clone(), -q.clone())).collect(),
            chart: self.chart,
        }
    }

    /// Multiplication by a coefficient.
    pub fn scale(&self, k: &Coefficient) -> Expr {
        if k.is_zero() {
            return Expr::zero();
        }
        let mut terms = BTreeMap::new();
        for (m, q) in &self.terms {
            let (factor, basis) = m.basis.mul(k.basis);
            Expr::add_term(&mut terms, m.with_basis(basis), q * &k.value * factor);
        }
        Expr {
            terms,
            chart: self.chart,
        }
    }

    pub fn try_mul(&self, other: &Expr) -> Result<Expr> {
        let chart = merge_chart(self.chart, other.chart)?;
        let mut terms = BTreeMap::new();
        let mut extra: Vec<Expr> = Vec::new();
        for (m1, q1) in &self.terms {
            for (m2, q2) in &other.terms {
                match mul_monomials(m1, m2) {
                    Product::Zero => {}
                    Product::Single(f, m) => Expr::add_term(&mut terms, m, q1 * q2 * f),
                    Product::Many(e) => {
                        let k = Coefficient::rational(q1 * q2);
                        extra.push(e.scale(&k));
                    }
                }
            }
        }
        for e in extra {
            for (m, q) in e.terms {
                Expr::add_term(&mut terms, m, q);
            }
        }
        Ok(Expr { terms, chart }.fix_chart())
    }

    pub(crate) fn pow_nonneg_int(&self, mut n: u64) -> Expr {
        let mut result = Expr::one();
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// `self^r` with nilpotent resolution: when the base has odd atoms it is
    /// split as `B + N` and expanded as `sum_k binom(r,k) B^(r-k) N^k`, stopping at
    /// the first `k` with `N^(k+1) = 0`.
    pub fn pow(&self, r: Exponent) -> Result<Expr> {
        self.pow_with(r, None)
    }

    /// Like [`Expr::pow`], but treats atoms in `assume` as positive when taking roots.
    pub fn pow_assuming(&self, r: Exponent, assume: &AssumptionSet) -> Result<Expr> {
        self.pow_with(r, Some(assume))
    }

    /// `self^r` without nilpotent resolution; odd atoms in the base are an error
    /// unless `r` is a non-negative integer.
    pub fn pow_unresolved(&self, r: Exponent) -> Result<Expr> {
        if r.is_integer() && *r.numer() >= 0 {
            return Ok(self.pow_nonneg_int(*r.numer() as u64));
        }
        if !self.is_odd_free() {
            return Err(Error::OddBase(self.to_string()));
        }
        self.pow_with(r, None)
    }

    pub fn sqrt(&self) -> Result<Expr> {
        self.pow(Exponent::new(1, 2))
    }

    pub fn inv(&self) -> Result<Expr> {
        self.pow(-Exponent::one())
    }

    fn pow_with(&self, r: Exponent, assume: Option<&AssumptionSet>) -> Result<Expr> {
        if r.is_zero() {
            return Ok(Expr::one());
        }
        if r.is_integer() && *r.numer() > 0 {
            return Ok(self.pow_nonneg_int(*r.numer() as u64));
        }
        if self.is_zero() {
            return Err(Error::DivisionByZero(format!("0^({r})")));
        }
        if self.parity() != Some(Parity::Even) {
            return Err(Error::OddBase(format!("({self})^({r}) has an odd-parity base")));
        }
        let (body, nil) = self.odd_split();
        if nil.is_zero() {
            return pow_body(&body, r, assume);
        }
        if body.is_zero() {
            return Err(Error::NonNilpotent(format!(
                "({self})^({r}): base has no invertible odd-free part"
            )));
        }
        let mut sum = Expr::zero();
        let mut nil_k = Expr::one();
        let mut k: u32 = 0;
        loop {
            let coeff = binomial(r, k);
            let b_pow = pow_body(&body, r - Exponent::from(k as i64), assume)?;
            sum = &sum + &(&b_pow * &nil_k).scale(&Coefficient::rational(coeff));
            nil_k = &nil_k * &nil;
            k += 1;
            if nil_k.is_zero() {
                break;
            }
            if k > 64 {
                return Err(Error::NonNilpotent(nil.to_string()));
            }
        }
        Ok(sum)
    }

    /// Rebuilds the expression, replacing atoms via `map` (atoms mapped to `None`
    /// are kept) and recomputing every power body.
    pub fn rebuild<F>(&self, map: &F, assume: Option<&AssumptionSet>) -> Result<Expr>
    where
        F: Fn(&Atom) -> Result<Option<Expr>>,
    {
        let mut cache: HashMap<*const Expr, Expr> = HashMap::new();
        self.rebuild_cached(map, assume, &mut cache)
    }

    fn rebuild_cached<F>(
        &self,
        map: &F,
        assume: Option<&AssumptionSet>,
        cache: &mut HashMap<*const Expr, Expr>,
    ) -> Result<Expr>
    where
        F: Fn(&Atom) -> Result<Option<Expr>>,
    {
        let mut atom_cache: HashMap<Atom, Option<Expr>> = HashMap::new();
        let mut lookup = |a: &Atom| -> Result<Option<Expr>> {
            if let Some(v) = atom_cache.get(a) {
                return Ok(v.clone());
            }
            let v = map(a)?;
            atom_cache.insert(a.clone(), v.clone());
            Ok(v)
        };
        let mut total = Expr::zero();
        for (m, q) in &self.terms {
            let mut acc = Expr::monomial(q.clone(), Monomial::one().with_basis(m.basis));
            let mut unchanged = Monomial::one();
            for (base, e) in &m.evens {
                match base {
                    Base::Atom(a) => match lookup(a)? {
                        Some(rep) => {
                            let p = rep.pow_with(*e, assume)?;
                            acc = acc.try_mul(&p)?;
                        }
                        None => {
                            if assume.is_some_and(|s| !e.is_integer() && s.contains(a)) {
                                let p = Expr::atom(a.clone()).pow_with(*e, assume)?;
                                acc = acc.try_mul(&p)?;
                            } else {
                                unchanged.evens.insert(base.clone(), *e);
                            }
                        }
                    },
                    Base::Body(body) => {
                        let key = Arc::as_ptr(body);
                        let new_body = match cache.get(&key) {
                            Some(b) => b.clone(),
                            None => {
                                let b = body.rebuild_cached(map, assume, cache)?;
                                cache.insert(key, b.clone());
                                b
                            }
                        };
                        let p = new_body.pow_with(*e, assume)?;
                        acc = acc.try_mul(&p)?;
                    }
                }
            }
            if !unchanged.evens.is_empty() {
                acc = acc.try_mul(&Expr::monomial(BigRational::one(), unchanged))?;
            }
            for a in &m.odds {
                match lookup(a)? {
                    Some(rep) => acc = acc.try_mul(&rep)?,
                    None => acc = acc.try_mul(&Expr::atom(a.clone()))?,
                }
            }
            total = total.try_add(&acc)?;
        }
        Ok(total)
    }

    /// Re-evaluates every power under the positivity assumptions.
    pub fn collapse_positive(&self, assume: &AssumptionSet) -> Result<Expr> {
        self.rebuild(&|_| Ok(None), Some(assume))
    }

    /// Faithful expression tree of the canonical form.
    pub fn to_raw(&self) -> Raw {
        let mut sum = Vec::new();
        for (m, q) in &self.terms {
            let mut prod = vec![Raw::Const(Coefficient::new(q.clone(), m.basis))];
            for (base, e) in &m.evens {
                let b = match base {
                    Base::Atom(a) => Raw::Atom(a.clone()),
                    Base::Body(body) => body.to_raw(),
                };
                prod.push(if e.is_one() {
                    b
                } else {
                    Raw::Pow(Box::new(b), *e)
                });
            }
            prod.extend(m.odds.iter().cloned().map(Raw::Atom));
            sum.push(Raw::Mul(prod));
        }
        Raw::Add(sum)
    }

    /// Complex conjugate (`i -> -i`); atoms are real and `alpha` is formal.
    pub fn conj(&self) -> Expr {
        let mut out = Expr::zero();
        for (m, q) in &self.terms {
            let k = Coefficient::new(q.clone(), m.basis).conj();
            let mut plain = m.without_basis();
            let mut extra = Expr::one();
            for (body, e) in m.bodies() {
                let c = body.conj();
                if c != **body {
                    plain = plain.without_even(&Base::Body(body.clone()));
                    extra = &extra * &body_power(c, e);
                }
            }
            out = &out + &(&Expr::monomial(BigRational::one(), plain) * &extra).scale(&k);
        }
        out
    }

    /// True when `c` or `alpha` occurs anywhere, including inside bodies.
    pub fn depends_on_c(&self) -> bool {
        self.terms.keys().any(|m| {
            m.basis.c_half != 0 || m.basis.alpha || m.bodies().any(|(b, _)| b.depends_on_c())
        })
    }

    /// Coefficient of `c^(half/2)` as an expression, collected over the
    /// explicit coefficient powers only (power bodies are treated as opaque).
    pub fn collect_c_power(&self, half: i32) -> Expr {
        let mut terms = BTreeMap::new();
        for (m, q) in &self.terms {
            if m.basis.c_half == half {
                let mut b = m.basis;
                b.c_half = 0;
                Expr::add_term(&mut terms, m.with_basis(b), q.clone());
            }
        }
        Expr::from_map(terms)
    }
}

fn monomial_chart(m: &Monomial) -> Option<Chart> {
    let mut chart = None;
    for b in m.evens.keys() {
        let c = match b {
            Base::Atom(a) => a.chart(),
            Base::Body(body) => body.chart,
        };
        if c.is_some() {
            chart = c;
            break;
        }
    }
    if chart.is_none() {
        chart = m.odds.iter().find_map(|a| a.chart());
    }
    chart
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Product {
    let mut odds: Vec<Atom> = Vec::with_capacity(a.odds.len() + b.odds.len());
    let mut negative = false;
    if b.odds.is_empty() {
        odds.extend(a.odds.iter().cloned());
    } else if a.odds.is_empty() {
        odds.extend(b.odds.iter().cloned());
    } else {
        // merge two sorted lists; each element of b jumping over k elements of a adds k transpositions
        let (mut i, mut j) = (0, 0);
        while i < a.odds.len() || j < b.odds.len() {
            if j >= b.odds.len() || (i < a.odds.len() && a.odds[i] < b.odds[j]) {
                odds.push(a.odds[i].clone());
                i += 1;
            } else if i < a.odds.len() && a.odds[i] == b.odds[j] {
                return Product::Zero;
            } else {
                if (a.odds.len() - i) % 2 == 1 {
                    negative = !negative;
                }
                odds.push(b.odds[j].clone());
                j += 1;
            }
        }
    }
    let (mut factor, basis) = a.basis.mul(b.basis);
    if negative {
        factor = -factor;
    }
    let mut evens = a.evens.clone();
    let mut expand = false;
    for (base, e) in &b.evens {
        let entry = evens.entry(base.clone()).or_insert_with(Exponent::zero);
        *entry += *e;
        if entry.is_zero() {
            evens.remove(base);
        } else if let Base::Body(body) = base {
            if needs_split(body, *entry) {
                expand = true;
            }
        }
    }
    let m = Monomial { evens, odds, basis };
    if expand {
        Product::Many(finish_monomial(factor, m))
    } else {
        Product::Single(factor, m)
    }
}

/// Stored body exponents lie in `(-inf, 1)`, and in `[0, 1)` for constant bodies.
fn needs_split(body: &Expr, e: Exponent) -> bool {
    e >= Exponent::one() || (e < Exponent::zero() && body.as_coefficient().is_some())
}

/// Multiplies out integer parts of body exponents.
fn finish_monomial(q: BigRational, mut m: Monomial) -> Expr {
    let mut expansions: Vec<(Arc<Expr>, i64)> = Vec::new();
    let bodies: Vec<(Arc<Expr>, Exponent)> = m
        .bodies()
        .filter(|(b, e)| needs_split(b, *e))
        .map(|(b, e)| (b.clone(), e))
        .collect();
    for (body, e) in bodies {
        let n = e.floor();
        let rest = e - n;
        let key = Base::Body(body.clone());
        if rest.is_zero() {
            m.evens.remove(&key);
        } else {
            m.evens.insert(key, rest);
        }
        expansions.push((body, *n.numer()));
    }
    let mut out = Expr::monomial(q, m);
    for (body, n) in expansions {
        let factor = match body.as_coefficient() {
            Some(k) => Expr::coefficient(k.powi(n)),
            None => body.pow_nonneg_int(n as u64),
        };
        out = &out * &factor;
    }
    out
}

/// Canonical expression for a monomial whose body exponents may be out of range.
pub(crate) fn finish(q: BigRational, m: Monomial) -> Expr {
    finish_monomial(q, m)
}

/// A body factor `base^r`, normalized so that stored exponents stay below one.
pub(crate) fn body_power(base: Expr, r: Exponent) -> Expr {
    let mut m = Monomial::one();
    m.evens.insert(Base::Body(Arc::new(base)), r);
    finish_monomial(BigRational::one(), m)
}

/// `b^r` for an odd-free, nonzero `b`.
fn pow_body(b: &Expr, r: Exponent, assume: Option<&AssumptionSet>) -> Result<Expr> {
    if r.is_zero() {
        return Ok(Expr::one());
    }
    if b.is_zero() {
        return Err(Error::DivisionByZero(format!("0^({r})")));
    }
    if r.is_integer() && *r.numer() > 0 {
        return Ok(b.pow_nonneg_int(*r.numer() as u64));
    }
    if b.len() == 1 {
        let (m, q) = b.terms.iter().next().unwrap();
        return pow_single(Coefficient::new(q.clone(), m.basis), m, r, assume);
    }
    // multi-term: pull the positive content of the leading term
    let (lead_m, lead_q) = b.terms.iter().next().unwrap();
    let content = Coefficient::new(lead_q.clone(), lead_m.basis).positive_content();
    let mut rest = b.scale(&content.inv());
    let mut prefix = pow_single(content, &Monomial::one(), r, None)?;
    if let Some(assume) = assume {
        // pull common positive atoms
        let mut common: Option<BTreeMap<Atom, Exponent>> = None;
        for m in rest.terms.keys() {
            let here: BTreeMap<Atom, Exponent> = m
                .even_atoms()
                .filter(|(a, _)| assume.contains(a))
                .map(|(a, e)| (a.clone(), e))
                .collect();
            common = Some(match common {
                None => here,
                Some(prev) => prev
                    .into_iter()
                    .filter_map(|(a, e)| here.get(&a).map(|e2| (a, e.min(*e2))))
                    .collect(),
            });
        }
        let common = common.unwrap_or_default();
        let common: BTreeMap<Atom, Exponent> =
            common.into_iter().filter(|(_, e)| !e.is_zero()).collect();
        if !common.is_empty() {
            let mut divisor = Expr::one();
            for (a, e) in &common {
                divisor = &divisor * &Expr::atom(a.clone()).pow_with(-*e, Some(assume))?;
                prefix = &prefix * &Expr::atom(a.clone()).pow_with(*e * r, Some(assume))?;
            }
            rest = &rest * &divisor;
            if rest.len() == 1 {
                let (m, q) = rest.terms.iter().next().unwrap();
                let tail = pow_single(Coefficient::new(q.clone(), m.basis), m, r, Some(assume))?;
                return Ok(&prefix * &tail);
            }
        }
    }
    Ok(&prefix * &body_power(rest, r))
}

fn pow_single(
    k: Coefficient,
    m: &Monomial,
    r: Exponent,
    assume: Option<&AssumptionSet>,
) -> Result<Expr> {
    debug_assert!(m.odds.is_empty());
    let shape = m.without_basis();
    if r.is_integer() {
        let n = *r.numer();
        let mut out = Expr::coefficient(k.powi(n));
        for (base, e) in &shape.evens {
            let mut f = Monomial::one();
            f.evens.insert(base.clone(), *e * r);
            out = &out * &finish_monomial(BigRational::one(), f);
        }
        return Ok(out);
    }
    let positive_atoms = assume.is_some_and(|s| {
        shape.evens.keys().all(|b| match b {
            Base::Atom(a) => s.contains(a),
            Base::Body(_) => false,
        })
    });
    if positive_atoms && k.is_positive_real() {
        let (pulled, pulled_pow) = k.split_root(r);
        let mut out = Expr::coefficient(pulled_pow);
        for (base, e) in &shape.evens {
            let mut f = Monomial::one();
            f.evens.insert(base.clone(), *e * r);
            out = &out * &Expr::monomial(BigRational::one(), f);
        }
        let rest = k.mul(&pulled.inv());
        if !rest.is_one() {
            out = &out * &body_power(Expr::coefficient(rest), r);
        }
        return Ok(out);
    }
    let (pulled, pulled_pow) = k.positive_content().split_root(r);
    let rest = Expr::monomial(BigRational::one(), shape).scale(&k.mul(&pulled.inv()));
    if rest.is_one() {
        return Ok(Expr::coefficient(pulled_pow));
    }
    Ok(&Expr::coefficient(pulled_pow) * &body_power(rest, r))
}

macro_rules! impl_op {
    ($tr:ident, $m:ident, $f:ident) => {
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                self.$f(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                (&self).$f(&rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
    };
}

impl_op!(Add, add, try_add);
impl_op!(Sub, sub, try_sub);
impl_op!(Mul, mul, try_mul);

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl From<Atom> for Expr {
    fn from(a: Atom) -> Expr {
        Expr::atom(a)
    }
}

impl From<Coefficient> for Expr {
    fn from(k: Coefficient) -> Expr {
        Expr::coefficient(k)
    }
}

/// Atoms declared positive. The parameter `c` is always positive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssumptionSet {
    positive: BTreeSet<Atom>,
}

impl AssumptionSet {
    pub fn new() -> AssumptionSet {
        AssumptionSet::default()
    }

    pub fn with<I: IntoIterator<Item = Atom>>(atoms: I) -> AssumptionSet {
        AssumptionSet {
            positive: atoms.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, a: Atom) {
        self.positive.insert(a);
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.positive.contains(a)
    }

    /// `c` is a member of every assumption set.
    pub fn contains_c(&self) -> bool {
        true
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.positive.iter()
    }
}

/// Decides `a == b`: true only when `a - b` reduces to zero after positivity
/// collapse and clearing of negative body powers. Never true for inequivalent
/// expressions; `false` means "not proven equal".
pub fn equals(a: &Expr, b: &Expr, assume: &AssumptionSet) -> bool {
    let Ok(d) = a.try_sub(b) else {
        return false;
    };
    is_zero_assuming(&d, assume)
}

pub fn is_zero_assuming(d: &Expr, assume: &AssumptionSet) -> bool {
    if d.is_zero() {
        return true;
    }
    let Ok(mut d) = d.collapse_positive(assume) else {
        return false;
    };
    for _ in 0..6 {
        if d.is_zero() {
            return true;
        }
        // multiply by the smallest body powers clearing every negative exponent
        let mut min_exp: BTreeMap<Arc<Expr>, Exponent> = BTreeMap::new();
        for m in d.terms.keys() {
            let present: BTreeMap<&Arc<Expr>, Exponent> = m.bodies().collect();
            for (body, e) in &present {
                let entry = min_exp.entry((*body).clone()).or_insert_with(Exponent::zero);
                *entry = (*entry).min(*e);
            }
        }
        let clear: Vec<(Arc<Expr>, Exponent)> =
            min_exp.into_iter().filter(|(_, e)| *e < Exponent::zero()).collect();
        if clear.is_empty() {
            return false;
        }
        for (body, e) in clear {
            let factor = body_power((*body).clone(), -e);
            match d.try_mul(&factor) {
                Ok(x) => d = x,
                Err(_) => return false,
            }
        }
        match d.collapse_positive(assume) {
            Ok(x) => d = x,
            Err(_) => return false,
        }
    }
    d.is_zero()
}

/// Unnormalized expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Raw {
    Const(Coefficient),
    Atom(Atom),
    Add(Vec<Raw>),
    Mul(Vec<Raw>),
    Neg(Box<Raw>),
    Pow(Box<Raw>, Exponent),
}

impl Raw {
    fn eval(&self, resolve: bool) -> Result<Expr> {
        Ok(match self {
            Raw::Const(k) => Expr::coefficient(k.clone()),
            Raw::Atom(a) => Expr::atom(a.clone()),
            Raw::Add(xs) => {
                let mut acc = Expr::zero();
                for x in xs {
                    acc = acc.try_add(&x.eval(resolve)?)?;
                }
                acc
            }
            Raw::Mul(xs) => {
                let mut acc = Expr::one();
                for x in xs {
                    acc = acc.try_mul(&x.eval(resolve)?)?;
                }
                acc
            }
            Raw::Neg(x) => x.eval(resolve)?.neg(),
            Raw::Pow(x, r) => {
                let base = x.eval(resolve)?;
                if resolve {
                    base.pow(*r)?
                } else {
                    base.pow_unresolved(*r)?
                }
            }
        })
    }
}

/// Canonical form of a raw tree. Powers of bases with odd atoms are rejected.
pub fn canonicalize(raw: &Raw) -> Result<Expr> {
    raw.eval(false)
}

/// Canonical form of a raw tree, expanding powers of nilpotent-perturbed bases
/// into finite binomial series.
pub fn resolve_nilpotent(raw: &Raw) -> Result<Expr> {
    raw.eval(true)
}

fn fmt_exponent(e: Exponent) -> String {
    if e.is_integer() && *e.numer() > 0 {
        e.numer().to_string()
    } else {
        format!("({e})")
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.basis.sqrt2 {
            parts.push("sqrt(2)".into());
        }
        if self.basis.imag {
            parts.push("I".into());
        }
        if self.basis.alpha {
            parts.push("alpha".into());
        }
        if self.basis.c_half != 0 {
            parts.push(CPow(self.basis.c_half).to_string());
        }
        for (base, e) in &self.evens {
            let b = match base {
                Base::Atom(a) => a.to_string(),
                Base::Body(body) => format!("({body})"),
            };
            if e.is_one() {
                parts.push(b);
            } else {
                parts.push(format!("{b}^{}", fmt_exponent(*e)));
            }
        }
        for a in &self.odds {
            parts.push(a.to_string());
        }
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join("*"))
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, q)) in self.terms.iter().enumerate() {
            let negative = q.is_negative();
            let mag = q.abs();
            if i == 0 {
                if negative {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if negative { " - " } else { " + " })?;
            }
            let shape = m.to_string();
            let constant = m.evens.is_empty() && m.odds.is_empty() && m.basis.is_one();
            if constant {
                f.write_str(&fmt_rational(&mag))?;
            } else if mag.is_one() {
                f.write_str(&shape)?;
            } else {
                write!(f, "{}*{}", fmt_rational(&mag), shape)?;
            }
        }
        Ok(())
    }
}

/// Builds an atom-level substitution map closure from explicit pairs.
pub fn atom_map(pairs: &BTreeMap<Atom, Expr>) -> impl Fn(&Atom) -> Result<Option<Expr>> + '_ {
    move |a| Ok(pairs.get(a).cloned())
}

/// Replaces atoms by expressions, exactly as listed (no derivative propagation).
pub fn substitute_atoms(e: &Expr, pairs: &BTreeMap<Atom, Expr>) -> Result<Expr> {
    for (a, rep) in pairs {
        check_parity(a, rep)?;
    }
    e.rebuild(&atom_map(pairs), None)
}

pub(crate) fn check_parity(a: &Atom, rep: &Expr) -> Result<()> {
    match rep.parity() {
        None if !rep.is_zero() => Err(Error::ParityMismatch(format!(
            "{a} bound to mixed-parity expression {rep}"
        ))),
        Some(p) if p != a.parity() => Err(Error::ParityMismatch(format!(
            "{} atom {a} bound to {p} expression {rep}",
            a.parity()
        ))),
        _ => Ok(()),
    }
}

/// Coefficient `c^(h/2)` exponent (in half units) helper used by callers that inspect terms.
pub fn term_c_half(m: &Monomial) -> i32 {
    m.basis.c_half
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> Atom {
        Atom::field("u", Chart::Tx, Parity::Odd)
    }
    fn theta() -> Atom {
        Atom::field("theta", Chart::Tx, Parity::Even)
    }
    fn h() -> Exponent {
        Exponent::new(1, 2)
    }

    #[test]
    fn odd_atom_squares_to_zero() {
        let ue = Expr::atom(u());
        assert!((&ue * &ue).is_zero());
    }

    #[test]
    fn transposition_flips_sign() {
        let ux = Expr::atom(u().derived(1));
        let ue = Expr::atom(u());
        assert_eq!(&ux * &ue, -(&ue * &ux));
        assert_eq!((&ux * &ue).to_string(), "-u*D[u,x]");
    }

    #[test]
    fn ring_cancellation() {
        let tt = Expr::atom(theta().derived(0));
        let e = &(&(&Expr::integer(3) + &tt.scale(&Coefficient::integer(2))) - &tt.scale(&Coefficient::integer(2)))
            - &Expr::integer(3);
        assert!(e.is_zero());
    }

    #[test]
    fn repeated_odd_atom_product_vanishes() {
        let ue = Expr::atom(u());
        let ut = Expr::atom(u().derived(0));
        let ux = Expr::atom(u().derived(1));
        assert!((&(&ue * &ut) * &(&ue * &ux)).is_zero());
    }

    #[test]
    fn sqrt_times_sqrt_is_base() {
        let a = &Expr::c_pow(2) + &Expr::atom(theta().derived(0));
        let s = a.sqrt().unwrap();
        assert_eq!(&s * &s, a);
    }

    #[test]
    fn sqrt_nilpotent_one_step() {
        let b = &Expr::integer(1) + &Expr::atom(theta());
        let nil = &Expr::atom(u()) * &Expr::atom(u().derived(1));
        let s = (&b + &nil).sqrt().unwrap();
        let expected =
            &b.sqrt().unwrap() + &(&b.pow(Exponent::new(-1, 2)).unwrap() * &nil).scale(&Coefficient::frac(1, 2));
        assert_eq!(s, expected);
    }

    #[test]
    fn content_is_pulled_out_of_bodies() {
        // c * sqrt(1 + theta) == sqrt(c^2 + c^2 theta)
        let th = Expr::atom(theta());
        let lhs = &Expr::c() * &(&Expr::one() + &th).sqrt().unwrap();
        let rhs = (&Expr::c_pow(2) + &(&Expr::c_pow(2) * &th)).sqrt().unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn half_powers_with_different_normalizations_merge() {
        let th = Expr::atom(theta());
        let b = &Expr::integer(3) - &th;
        let s = b.sqrt().unwrap();
        let inv = b.inv().unwrap();
        assert_eq!(&s * &inv, b.pow(Exponent::new(-1, 2)).unwrap());
    }

    #[test]
    fn declared_positive_square_collapses() {
        let tm = Atom::field("theta", Chart::LightCone, Parity::Even).derived(1);
        let pi = Atom::field("Pi", Chart::LightCone, Parity::Even);
        let ratio = &Expr::atom(tm.clone()).pow(Exponent::from(2)).unwrap()
            * &Expr::atom(pi.clone()).pow(Exponent::from(-2)).unwrap();
        let s = ratio.sqrt().unwrap();
        let target = &Expr::atom(tm.clone()) * &Expr::atom(pi.clone()).inv().unwrap();
        assert!(!equals(&s, &target, &AssumptionSet::new()));
        assert!(equals(&s, &target, &AssumptionSet::with([tm, pi])));
    }

    #[test]
    fn negative_powers_clear_in_equality() {
        let th = Expr::atom(theta());
        let b = &Expr::integer(2) + &th;
        let lhs = &b.pow(Exponent::new(-1, 2)).unwrap() * &b;
        assert_ne!(lhs, b.sqrt().unwrap());
        assert!(equals(&lhs, &b.sqrt().unwrap(), &AssumptionSet::new()));
        assert!(!equals(&lhs, &b, &AssumptionSet::new()));
    }

    #[test]
    fn odd_base_rejected_without_resolution() {
        let b = &Expr::one() + &(&Expr::atom(u()) * &Expr::atom(u().derived(0)));
        let raw = Raw::Pow(Box::new(b.to_raw()), h());
        assert!(matches!(canonicalize(&raw), Err(Error::OddBase(_))));
        assert!(resolve_nilpotent(&raw).is_ok());
    }

    #[test]
    fn chart_mixing_is_an_error() {
        let a = Expr::atom(theta());
        let b = Expr::atom(Atom::field("theta", Chart::LightCone, Parity::Even));
        assert!(matches!(a.try_mul(&b), Err(Error::ChartMix(..))));
        assert!(matches!(a.try_add(&b), Err(Error::ChartMix(..))));
    }

    #[test]
    fn pure_nilpotent_base_has_no_root() {
        let n = &Expr::atom(u()) * &Expr::atom(u().derived(0));
        assert!(matches!(n.sqrt(), Err(Error::NonNilpotent(_))));
    }
}
