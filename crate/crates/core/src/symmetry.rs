//! First-order variations, Lorentz and supersymmetry checks, and matching of
//! residuals against total derivatives.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::atom::{Atom, AtomKind, Chart, Parity};
use crate::calculus::{coord_derive, derivation};
use crate::coeff::Coefficient;
use crate::error::{Error, Result};
use crate::expr::{Base, Expr, Monomial};
use crate::gamma::{bilinear, gamma, gauge_project, induced_vector, Parameterization, Spinor};

/// A global first-order transformation `f -> f + delta f`.
///
/// Deltas carry the parity of their field. An odd parameter appears explicitly
/// in the deltas; an even parameter is left implicit, so the variation of an
/// expression is its coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variation {
    pub parameter: Atom,
    deltas: BTreeMap<Atom, Expr>,
}

impl Variation {
    pub fn new(parameter: Atom, deltas: BTreeMap<Atom, Expr>) -> Result<Variation> {
        let mut clean = BTreeMap::new();
        for (f, d) in deltas {
            if f.kind() != AtomKind::Field {
                return Err(Error::Unsupported(format!("{f} is not a field")));
            }
            if !d.is_zero() && d.parity() != Some(f.parity()) {
                return Err(Error::ParityMismatch(format!(
                    "variation of {} field {f} must be {}, got {d}",
                    f.parity(),
                    f.parity()
                )));
            }
            clean.insert(f.base_field(), d);
        }
        Ok(Variation {
            parameter,
            deltas: clean,
        })
    }

    /// `delta f = (ct D_x + (1/c) x D_t) f`, plus `f/2` for odd fields.
    pub fn lorentz(fields: &[Atom]) -> Variation {
        let mut deltas = BTreeMap::new();
        for f in fields {
            let mut d = lorentz_operator(&Expr::atom(f.clone())).expect("tx field");
            if f.is_odd() {
                d = &d + &Expr::atom(f.clone()).scale(&Coefficient::frac(1, 2));
            }
            deltas.insert(f.base_field(), d);
        }
        Variation {
            parameter: Atom::constant("eps", Parity::Even),
            deltas,
        }
    }

    pub fn delta(&self, f: &Atom) -> Option<&Expr> {
        self.deltas.get(&f.base_field())
    }

    pub fn deltas(&self) -> impl Iterator<Item = (&Atom, &Expr)> {
        self.deltas.iter()
    }
}

/// The first-order variation of `e`, with `delta(D f) = D(delta f)`.
pub fn apply_variation(e: &Expr, v: &Variation) -> Result<Expr> {
    let cache = std::cell::RefCell::new(HashMap::<Atom, Expr>::new());
    let atom_d = |a: &Atom| -> Result<Expr> {
        if a.kind() != AtomKind::Field {
            return Ok(Expr::zero());
        }
        let Some(base) = v.delta(a) else {
            return Ok(Expr::zero());
        };
        if let Some(d) = cache.borrow().get(a) {
            return Ok(d.clone());
        }
        let chart = a.chart().expect("field atoms live on a chart");
        let mut d = base.clone();
        for (k, n) in a.deriv().iter().enumerate() {
            for _ in 0..*n {
                d = coord_derive(&d, chart, k)?;
            }
        }
        cache.borrow_mut().insert(a.clone(), d.clone());
        Ok(d)
    };
    derivation(e, &atom_d, &mut HashMap::new())
}

/// `L e = ct D_x e + (1/c) x D_t e`.
pub fn lorentz_operator(e: &Expr) -> Result<Expr> {
    let t = Expr::atom(Atom::coordinate(Chart::Tx, 0)).scale(&Coefficient::c_pow(1));
    let x = Expr::atom(Atom::coordinate(Chart::Tx, 1)).scale(&Coefficient::c_pow(-1));
    t.try_mul(&coord_derive(e, Chart::Tx, 1)?)?
        .try_add(&x.try_mul(&coord_derive(e, Chart::Tx, 0)?)?)
}

/// `delta L - L(L)` under the Lorentz variation of every field appearing in `l`.
pub fn lorentz_check(l: &Expr) -> Result<Expr> {
    let fields: BTreeSet<Atom> = l
        .atoms()
        .into_iter()
        .filter(|a| a.kind() == AtomKind::Field)
        .map(|a| a.base_field())
        .collect();
    let v = Variation::lorentz(&fields.into_iter().collect::<Vec<_>>());
    apply_variation(l, &v)?.try_sub(&lorentz_operator(l)?)
}

/// One-derivative-lower versions of the monomial `m` along direction `k`.
fn strip_derivative(m: &Monomial, k: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    for (base, e) in m.evens() {
        let Base::Atom(a) = base else { continue };
        if a.kind() != AtomKind::Field || a.deriv()[k] == 0 {
            continue;
        }
        let mut d = a.deriv();
        d[k] -= 1;
        let lower = a.with_deriv(d);
        let rest = m.without_even(base);
        let mut x = Expr::monomial(BigRational::one(), rest);
        if *e != crate::coeff::Exponent::one() {
            x = &x * &Expr::monomial(BigRational::one(), Monomial::one().with_even(base.clone(), *e - crate::coeff::Exponent::one()));
        }
        x = &x * &Expr::atom(lower);
        out.extend(x.terms().map(|(mm, _)| mm.clone()));
    }
    for (i, a) in m.odds().iter().enumerate() {
        if a.kind() != AtomKind::Field || a.deriv()[k] == 0 {
            continue;
        }
        let mut d = a.deriv();
        d[k] -= 1;
        let x = &Expr::monomial(BigRational::one(), m.without_odd(i)) * &Expr::atom(a.with_deriv(d));
        out.extend(x.terms().map(|(mm, _)| mm.clone()));
    }
    out
}

/// Exact solve of `sum_j a_j cols[j] = rhs`, each vector keyed by monomial.
fn solve(cols: &[Expr], rhs: &Expr) -> Option<Vec<BigRational>> {
    let mut keys: BTreeSet<Monomial> = rhs.terms().map(|(m, _)| m.clone()).collect();
    for c in cols {
        keys.extend(c.terms().map(|(m, _)| m.clone()));
    }
    let keys: Vec<Monomial> = keys.into_iter().collect();
    let n = cols.len();
    let mut rows: Vec<Vec<BigRational>> = keys
        .iter()
        .map(|k| {
            let mut row: Vec<BigRational> = cols
                .iter()
                .map(|c| c.terms().find(|(m, _)| *m == k).map(|(_, q)| q.clone()).unwrap_or_default())
                .collect();
            row.push(rhs.terms().find(|(m, _)| *m == k).map(|(_, q)| q.clone()).unwrap_or_default());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][col].recip();
        for x in rows[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][col].is_zero() {
                let f = rows[i][col].clone();
                for j in col..=n {
                    let sub = &f * &rows[r][j];
                    rows[i][j] -= sub;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    if rows[r..].iter().any(|row| !row[n].is_zero()) {
        return None;
    }
    let mut sol = vec![BigRational::zero(); n];
    for (i, col) in pivots.into_iter().enumerate() {
        sol[col] = rows[i][n].clone();
    }
    Some(sol)
}

/// Potentials `(X, Y)` with `r = D_0 X + D_1 Y`, searched among monomials
/// obtained from `r` by removing one derivative. `None` means no match inside
/// this ansatz.
pub fn total_derivative_match(r: &Expr, chart: Chart) -> Result<Option<(Expr, Expr)>> {
    if r.is_zero() {
        return Ok(Some((Expr::zero(), Expr::zero())));
    }
    let mut pool: BTreeSet<Monomial> = r.terms().map(|(m, _)| m.clone()).collect();
    let mut cands: [BTreeSet<Monomial>; 2] = Default::default();
    for _round in 0..3 {
        for m in &pool {
            for k in 0..2 {
                cands[k].extend(strip_derivative(m, k));
            }
        }
        if cands[0].len() + cands[1].len() > 400 {
            return Err(Error::Unsupported("total-derivative ansatz too large".into()));
        }
        let mut cols = Vec::new();
        let mut shapes = Vec::new();
        for (k, set) in cands.iter().enumerate() {
            for m in set {
                let x = Expr::monomial(BigRational::one(), m.clone());
                cols.push(coord_derive(&x, chart, k)?);
                shapes.push((k, x));
            }
        }
        if let Some(sol) = solve(&cols, r) {
            let mut pot = [Expr::zero(), Expr::zero()];
            for ((k, x), a) in shapes.iter().zip(sol) {
                if !a.is_zero() {
                    pot[*k] = &pot[*k] + &x.scale(&Coefficient::rational(a));
                }
            }
            let [x, y] = pot;
            let check = r
                .try_sub(&coord_derive(&x, chart, 0)?)?
                .try_sub(&coord_derive(&y, chart, 1)?)?;
            debug_assert!(check.is_zero());
            return Ok(check.is_zero().then_some((x, y)));
        }
        let before = pool.len();
        for c in &cols {
            pool.extend(c.terms().map(|(m, _)| m.clone()));
        }
        if pool.len() == before {
            break;
        }
    }
    Ok(None)
}

/// Which tier established invariance of a Lagrangian under a variation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvarianceTier {
    /// The variation vanishes identically.
    Exact,
    /// The variation equals `D_0 X + D_1 Y`.
    TotalDerivative { x: Expr, y: Expr },
    /// Neither test succeeded.
    NotShown,
}

impl InvarianceTier {
    pub fn name(&self) -> &'static str {
        match self {
            InvarianceTier::Exact => "exact",
            InvarianceTier::TotalDerivative { .. } => "total-derivative",
            InvarianceTier::NotShown => "none",
        }
    }
}

/// Tiered invariance check: exact zero first, then a total derivative.
pub fn invariance(l: &Expr, v: &Variation, chart: Chart) -> Result<(Expr, InvarianceTier)> {
    let d = apply_variation(l, v)?;
    if d.is_zero() {
        return Ok((d, InvarianceTier::Exact));
    }
    let tier = match total_derivative_match(&d, chart)? {
        Some((x, y)) => InvarianceTier::TotalDerivative { x, y },
        None => InvarianceTier::NotShown,
    };
    Ok((d, tier))
}

/// `k` with `e = k * target`, when `e` is a constant multiple of `target`.
pub fn scalar_multiple(e: &Expr, target: &Expr) -> Option<Coefficient> {
    let (tk, tm) = {
        let mut it = target.coefficient_terms();
        let first = it.next()?;
        if it.next().is_some() {
            return None;
        }
        first
    };
    let mut it = e.coefficient_terms();
    let (ek, em) = it.next()?;
    if it.next().is_some() || em != tm {
        return None;
    }
    Some(ek.mul(&tk.inv()))
}

/// Variation of `A^0_0` for the Cartesian embedding with gauge-fixed spinor
/// under `delta psi = eta` (gauge-projected), with `X^0` clamped to `ct`.
pub fn susy_breaking_residual(u: &Atom, eta: &Atom) -> Result<Expr> {
    let theta = Atom::field("theta", Chart::Tx, Parity::Even);
    let p = Parameterization::cartesian(&theta);
    let psi = gauge_project(&Spinor([Expr::atom(u.clone()), Expr::zero()]));
    let a00 = induced_vector(&p, &psi, 0)?[0].clone();
    // X^0 is not a field here, so only the spinor varies
    let eta_proj = gauge_project(&Spinor([Expr::atom(eta.clone()), Expr::zero()]));
    let delta_u = eta_proj.0[0].scale(&Coefficient::alpha().inv());
    let v = Variation::new(eta.clone(), [(u.clone(), delta_u)].into())?;
    apply_variation(&a00, &v)
}

/// `delta A^mu_i` for all `mu`, `i` in the unconstrained embedding under
/// `delta X^mu = i etabar gamma^mu psi`, `delta psi = eta`.
pub fn general_susy_variations() -> Result<[[Expr; 2]; 3]> {
    let p = Parameterization::general(["X0", "X1", "X2"]);
    let psi = Spinor::of_fields("psi1", "psi2", Chart::Tx);
    let eta = Spinor([
        Expr::atom(Atom::constant("eta1", Parity::Odd)),
        Expr::atom(Atom::constant("eta2", Parity::Odd)),
    ]);
    let etabar = eta.bar();
    let mut deltas = BTreeMap::new();
    for (mu, name) in ["X0", "X1", "X2"].iter().enumerate() {
        let dx = bilinear(&etabar, &gamma(mu), &psi).scale(&Coefficient::imag());
        deltas.insert(Atom::field(name, Chart::Tx, Parity::Even), dx);
    }
    for (a, name) in ["psi1", "psi2"].iter().enumerate() {
        deltas.insert(Atom::field(name, Chart::Tx, Parity::Odd), eta.0[a].clone());
    }
    let v = Variation::new(Atom::constant("eta", Parity::Odd), deltas)?;
    let mut out: [[Expr; 2]; 3] = Default::default();
    for i in 0..2 {
        let a = induced_vector(&p, &psi, i)?;
        for mu in 0..3 {
            out[mu][i] = apply_variation(&a[mu], &v)?;
        }
    }
    Ok(out)
}
