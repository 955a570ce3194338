//! Coordinate and atom-level derivatives, Euler-Lagrange operators, chart
//! changes, field substitution and expansion in inverse powers of `c`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::One;

use crate::atom::{Atom, AtomKind, Chart};
use crate::coeff::{binomial, Coefficient, Exponent};
use crate::error::{Error, Result};
use crate::expr::{body_power, check_parity, finish, Base, Expr, Monomial};

/// Applies an even derivation defined on atoms, extended by Leibniz and chain rules.
pub(crate) fn derivation<F>(e: &Expr, atom_d: &F, cache: &mut HashMap<*const Expr, Expr>) -> Result<Expr>
where
    F: Fn(&Atom) -> Result<Expr>,
{
    let mut total = Expr::zero();
    for (m, q) in e.terms() {
        for (base, exp) in m.evens() {
            let d = match base {
                Base::Atom(a) => atom_d(a)?,
                Base::Body(body) => {
                    let key = Arc::as_ptr(body);
                    match cache.get(&key) {
                        Some(d) => d.clone(),
                        None => {
                            let d = derivation(body, atom_d, cache)?;
                            cache.insert(key, d.clone());
                            d
                        }
                    }
                }
            };
            if d.is_zero() {
                continue;
            }
            let lowered = match base {
                Base::Atom(_) => finish(q * exp_to_rational(*exp), m.with_even(base.clone(), *exp - Exponent::one())),
                Base::Body(body) => {
                    let rest = finish(q * exp_to_rational(*exp), m.without_even(base));
                    rest.try_mul(&body_power((**body).clone(), *exp - Exponent::one()))?
                }
            };
            total = total.try_add(&lowered.try_mul(&d)?)?;
        }
        let odds = m.odds();
        for (i, a) in odds.iter().enumerate() {
            let d = atom_d(a)?;
            if d.is_zero() {
                continue;
            }
            let prefix = Expr::monomial(q.clone(), m.with_odds(odds[..i].to_vec()));
            let suffix = Expr::monomial(BigRational::one(), Monomial::one().with_odds(odds[i + 1..].to_vec()));
            total = total.try_add(&prefix.try_mul(&d)?.try_mul(&suffix)?)?;
        }
    }
    Ok(total)
}

fn exp_to_rational(e: Exponent) -> BigRational {
    BigRational::new((*e.numer()).into(), (*e.denom()).into())
}

/// Derivative along coordinate `index` of `chart`. The derivative operator is
/// even, so Leibniz carries no Grassmann signs.
pub fn coord_derive(e: &Expr, chart: Chart, index: usize) -> Result<Expr> {
    if let Some(own) = e.chart() {
        if own != chart {
            return Err(Error::ChartMix(own, chart));
        }
    }
    let atom_d = |a: &Atom| -> Result<Expr> {
        Ok(match a.kind() {
            AtomKind::Field => Expr::atom(a.derived(index)),
            AtomKind::Coordinate => {
                if a.chart() == Some(chart) && a.name() == chart.coord_atoms()[index] {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            AtomKind::Constant => Expr::zero(),
        })
    };
    derivation(e, &atom_d, &mut HashMap::new())
}

/// Partial derivative with respect to an atom treated as independent.
///
/// For odd atoms this is the left derivative: the atom is anticommuted to the
/// front of each monomial and removed.
pub fn partial_atom(e: &Expr, a: &Atom) -> Result<Expr> {
    if a.is_odd() {
        let mut total = Expr::zero();
        for (m, q) in e.terms() {
            if let Some(pos) = m.odds().iter().position(|x| x == a) {
                let v = if pos % 2 == 1 { -q.clone() } else { q.clone() };
                total = total.try_add(&Expr::monomial(v, m.without_odd(pos)))?;
            }
        }
        return Ok(total);
    }
    let atom_d = |x: &Atom| -> Result<Expr> { Ok(if x == a { Expr::one() } else { Expr::zero() }) };
    derivation(e, &atom_d, &mut HashMap::new())
}

/// Euler-Lagrange expression `dL/df - sum_i D_i (dL/d(f_i))` for a first-order Lagrangian.
pub fn euler_lagrange(lagrangian: &Expr, field: &Atom) -> Result<Expr> {
    let field = field.base_field();
    let chart = field.chart().ok_or_else(|| Error::Unsupported(format!("{field} is not a field")))?;
    if lagrangian.atoms().iter().any(|a| a.same_field(&field) && a.order() >= 2) {
        return Err(Error::HigherOrder(field.name().to_string()));
    }
    let mut out = partial_atom(lagrangian, &field)?;
    for k in 0..2 {
        let momentum = partial_atom(lagrangian, &field.derived(k))?;
        out = out.try_sub(&coord_derive(&momentum, chart, k)?)?;
    }
    Ok(out)
}

/// Simultaneous substitution of fields (with derivative atoms replaced by
/// coordinate derivatives of the replacement) and of constants or coordinates.
pub fn substitute(e: &Expr, bindings: &BTreeMap<Atom, Expr>) -> Result<Expr> {
    for (a, rep) in bindings {
        check_parity(a, rep)?;
    }
    let derived = std::cell::RefCell::new(HashMap::<Atom, Expr>::new());
    let map = |a: &Atom| -> Result<Option<Expr>> {
        let key = if a.kind() == AtomKind::Field { a.base_field() } else { a.clone() };
        let Some(rep) = bindings.get(&key) else {
            return Ok(None);
        };
        if a.kind() != AtomKind::Field || a.order() == 0 {
            return Ok(Some(rep.clone()));
        }
        if let Some(v) = derived.borrow().get(a) {
            return Ok(Some(v.clone()));
        }
        let chart = a.chart().expect("field atoms live on a chart");
        let mut v = rep.clone();
        for (k, n) in a.deriv().iter().enumerate() {
            for _ in 0..*n {
                v = coord_derive(&v, chart, k)?;
            }
        }
        derived.borrow_mut().insert(a.clone(), v.clone());
        Ok(Some(v))
    };
    e.rebuild(&map, None)
}

/// Applies the image of coordinate derivative `index` of chart `from`, written in chart `to`.
fn transported_derivative(x: &Expr, from: Chart, index: usize, to: Chart) -> Result<Expr> {
    let r = Coefficient::sqrt2().inv();
    let d0 = coord_derive(x, to, 0)?;
    let d1 = coord_derive(x, to, 1)?;
    let sign = if index == 0 { 1 } else { -1 };
    Ok(match from {
        // D_t = (c/sqrt2)(D_p + D_m), D_x = (1/sqrt2)(D_p - D_m)
        Chart::Tx => {
            let s = d0.try_add(&d1.scale(&Coefficient::integer(sign)))?;
            if index == 0 {
                s.scale(&r.mul(&Coefficient::c_pow(1)))
            } else {
                s.scale(&r)
            }
        }
        // D_p = (1/sqrt2)((1/c) D_t + D_x), D_m = (1/sqrt2)((1/c) D_t - D_x)
        Chart::LightCone => d0
            .scale(&Coefficient::c_pow(-1))
            .try_add(&d1.scale(&Coefficient::integer(sign)))?
            .scale(&r),
    })
}

/// Image of an explicit coordinate atom of chart `from` in chart `to`.
fn transported_coordinate(from: Chart, index: usize, to: Chart) -> Expr {
    let a0 = Expr::atom(Atom::coordinate(to, 0));
    let a1 = Expr::atom(Atom::coordinate(to, 1));
    let r = Coefficient::sqrt2().inv();
    match (from, index) {
        // t = (xp + xm)/(sqrt2 c), x = (xp - xm)/sqrt2
        (Chart::Tx, 0) => (&a0 + &a1).scale(&r.mul(&Coefficient::c_pow(-1))),
        (Chart::Tx, _) => (&a0 - &a1).scale(&r),
        // xp = (c t + x)/sqrt2, xm = (c t - x)/sqrt2
        (Chart::LightCone, 0) => (&a0.scale(&Coefficient::c_pow(1)) + &a1).scale(&r),
        (Chart::LightCone, _) => (&a0.scale(&Coefficient::c_pow(1)) - &a1).scale(&r),
    }
}

/// Rewrites an expression into another chart using
/// `D_(+/-) = (1/sqrt2)((1/c) D_t +/- D_x)` and its inverse.
pub fn change_chart(e: &Expr, target: Chart) -> Result<Expr> {
    let Some(source) = e.chart() else {
        return Ok(e.clone());
    };
    if source == target {
        return Ok(e.clone());
    }
    let map = |a: &Atom| -> Result<Option<Expr>> {
        Ok(match a.kind() {
            AtomKind::Constant => None,
            AtomKind::Coordinate => {
                let idx = source
                    .coord_atoms()
                    .iter()
                    .position(|n| *n == a.name())
                    .expect("coordinate atom of its chart");
                Some(transported_coordinate(source, idx, target))
            }
            AtomKind::Field => {
                let mut x = Expr::atom(a.on_chart(target));
                for (k, n) in a.deriv().iter().enumerate() {
                    for _ in 0..*n {
                        x = transported_derivative(&x, source, k, target)?;
                    }
                }
                Some(x)
            }
        })
    };
    e.rebuild(&map, None)
}

/// Truncated expansion in powers of `c`; exponents are kept in half units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesInC {
    terms: BTreeMap<i32, Expr>,
    order: i32,
}

impl SeriesInC {
    /// Lowest retained exponent, in half units.
    pub fn order_half(&self) -> i32 {
        self.order
    }

    /// Coefficient of `c^(half/2)`.
    pub fn coefficient(&self, half: i32) -> Expr {
        self.terms.get(&half).cloned().unwrap_or_default()
    }

    /// Exponents (half units) with nonzero coefficients, ascending.
    pub fn exponents(&self) -> impl Iterator<Item = i32> + '_ {
        self.terms.keys().copied()
    }

    /// `sum_k c^(k/2) coef_k`.
    pub fn reconstruct(&self) -> Expr {
        let mut out = Expr::zero();
        for (k, coef) in &self.terms {
            out = &out + &coef.scale(&Coefficient::c_pow_half(*k));
        }
        out
    }
}

impl fmt::Display for SeriesInC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, coef) in self.terms.iter().rev() {
            writeln!(f, "c^({k}/2): {coef}")?;
        }
        write!(f, "+ O(c^({}/2))", self.order - 1)
    }
}

type Series = BTreeMap<i32, Expr>;

fn series_add(into: &mut Series, k: i32, v: Expr) {
    if v.is_zero() {
        return;
    }
    let entry = into.entry(k).or_default();
    *entry = &*entry + &v;
    if entry.is_zero() {
        into.remove(&k);
    }
}

fn series_mul(a: &Series, b: &Series, order: i32) -> Series {
    let mut out = Series::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            if ka + kb >= order {
                series_add(&mut out, ka + kb, va * vb);
            }
        }
    }
    out
}

#[derive(Default)]
struct SeriesCtx {
    tops: HashMap<*const Expr, i32>,
}

impl SeriesCtx {
    fn series(&mut self, e: &Expr, order: i32) -> Result<Series> {
        let mut out = Series::new();
        for (m, q) in e.terms() {
            if m.basis().alpha {
                return Err(Error::Unsupported(
                    "expansion in c of an expression containing alpha".into(),
                ));
            }
            let h = m.basis().c_half;
            let mut basis = m.basis();
            basis.c_half = 0;
            let mut rest = m.with_basis(basis);
            let mut bodies = Vec::new();
            for (body, r) in m.bodies() {
                if body.depends_on_c() {
                    rest = rest.without_even(&Base::Body(body.clone()));
                    bodies.push((body.clone(), r));
                }
            }
            let rest = Expr::monomial(q.clone(), rest);
            if bodies.is_empty() {
                if h >= order {
                    series_add(&mut out, h, rest);
                }
                continue;
            }
            let mut tops = Vec::with_capacity(bodies.len());
            for (body, r) in &bodies {
                tops.push(self.pow_top(body, *r)?);
            }
            let total: i32 = h + tops.iter().sum::<i32>();
            if total < order {
                continue;
            }
            let mut prod = Series::new();
            prod.insert(h, rest);
            for ((body, r), top) in bodies.iter().zip(&tops) {
                let s = self.pow_series(body, *r, order - (total - top))?;
                prod = series_mul(&prod, &s, order);
            }
            for (k, v) in prod {
                series_add(&mut out, k, v);
            }
        }
        Ok(out)
    }

    fn term_top(&mut self, m: &Monomial) -> Result<i32> {
        let mut t = m.basis().c_half;
        for (body, r) in m.bodies() {
            if body.depends_on_c() {
                t += self.pow_top(body, r)?;
            }
        }
        Ok(t)
    }

    fn pow_top(&mut self, body: &Arc<Expr>, r: Exponent) -> Result<i32> {
        let t = Exponent::from(self.top(body)? as i64) * r;
        if !t.is_integer() {
            return Err(Error::IndeterminateLeadingTerm(format!(
                "({body})^({r}) has a leading power c^({t}/2)"
            )));
        }
        Ok(*t.numer() as i32)
    }

    /// Exact leading exponent (half units) of an odd-free expression.
    fn top(&mut self, body: &Arc<Expr>) -> Result<i32> {
        let key = Arc::as_ptr(body);
        if let Some(t) = self.tops.get(&key) {
            return Ok(*t);
        }
        let mut ub = i32::MIN;
        for (m, _) in body.terms() {
            ub = ub.max(self.term_top(m)?);
        }
        for k in 0..=40 {
            let s = self.series(body, ub - k)?;
            if s.get(&(ub - k)).is_some_and(|v| !v.is_zero()) {
                self.tops.insert(key, ub - k);
                return Ok(ub - k);
            }
        }
        Err(Error::IndeterminateLeadingTerm(format!(
            "leading coefficient of {body} cancels to high order"
        )))
    }

    /// Series of `body^r` down to exponent `order`.
    fn pow_series(&mut self, body: &Arc<Expr>, r: Exponent, order: i32) -> Result<Series> {
        let top = self.top(body)?;
        let lead_exp = self.pow_top(body, r)?;
        let depth = lead_exp - order;
        if depth < 0 {
            return Ok(Series::new());
        }
        let s = self.series(body, top - depth)?;
        let lead = s.get(&top).cloned().unwrap_or_default();
        if lead.is_zero() || !lead.is_odd_free() {
            return Err(Error::IndeterminateLeadingTerm(body.to_string()));
        }
        let lead_inv = lead.inv()?;
        let mut rel = Series::new();
        for (k, v) in &s {
            if *k < top {
                series_add(&mut rel, k - top, v * &lead_inv);
            }
        }
        let mut acc = Series::new();
        acc.insert(0, Expr::one());
        let mut rel_k = acc.clone();
        for k in 1..=depth as u32 {
            rel_k = series_mul(&rel_k, &rel, -depth);
            if rel_k.is_empty() {
                break;
            }
            let b = Coefficient::rational(binomial(r, k));
            for (e, v) in &rel_k {
                series_add(&mut acc, *e, v.scale(&b));
            }
        }
        let lead_pow = lead.pow(r)?;
        let mut out = Series::new();
        for (k, v) in acc {
            if k + lead_exp >= order {
                series_add(&mut out, k + lead_exp, &v * &lead_pow);
            }
        }
        Ok(out)
    }
}

/// Expansion of `e` in powers of `c`, exact for every exponent `>= order_half/2`.
pub fn c_series(e: &Expr, order_half: i32) -> Result<SeriesInC> {
    let terms = SeriesCtx::default().series(e, order_half)?;
    Ok(SeriesInC {
        terms,
        order: order_half,
    })
}

/// The `c -> infinity` limit: the `c^0` coefficient, provided every positive
/// power cancels identically.
pub fn c_limit(e: &Expr) -> Result<Expr> {
    let s = c_series(e, 0)?;
    let divergent: Vec<String> = s
        .terms
        .iter()
        .filter(|(k, _)| **k > 0)
        .map(|(k, v)| format!("c^({k}/2)*({v})"))
        .collect();
    if !divergent.is_empty() {
        return Err(Error::DivergentLimit(divergent.join(" + ")));
    }
    Ok(s.coefficient(0))
}
