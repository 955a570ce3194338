//! Canonical formulation in the light-cone chart: momentum, inversion,
//! Legendre transform and equations of motion.

use std::collections::BTreeMap;

use crate::atom::{Atom, AtomKind, Chart, Parity};
use crate::calculus::{euler_lagrange, partial_atom};
use crate::error::{Error, Result};
use crate::expr::{atom_map, is_zero_assuming, AssumptionSet, Expr};

/// A field, its conjugate momentum and the evolution direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalPair {
    pub coordinate: Atom,
    pub momentum: Atom,
    pub evolution: usize,
}

impl CanonicalPair {
    pub fn new(coordinate: Atom, momentum: Atom, evolution: usize) -> Result<CanonicalPair> {
        if momentum.parity() != Parity::Even || momentum.kind() != AtomKind::Field {
            return Err(Error::ParityMismatch(format!("momentum {momentum} must be an even field")));
        }
        if coordinate.chart() != Some(Chart::LightCone) || momentum.chart() != Some(Chart::LightCone) {
            return Err(Error::Unsupported("canonical pairs live on the light-cone chart".into()));
        }
        if evolution > 1 {
            return Err(Error::Unsupported(format!("no coordinate {evolution}")));
        }
        Ok(CanonicalPair {
            coordinate: coordinate.base_field(),
            momentum: momentum.base_field(),
            evolution,
        })
    }

    /// `theta` and `Pi` on the light-cone chart, evolving along `+`.
    pub fn light_cone(theta: &str, pi: &str) -> CanonicalPair {
        CanonicalPair {
            coordinate: Atom::field(theta, Chart::LightCone, Parity::Even),
            momentum: Atom::field(pi, Chart::LightCone, Parity::Even),
            evolution: 0,
        }
    }

    /// The velocity atom, e.g. `D[theta,p]`.
    pub fn velocity(&self) -> Atom {
        self.coordinate.derived(self.evolution)
    }

    /// The transverse derivative atom, e.g. `D[theta,m]`.
    pub fn transverse(&self) -> Atom {
        self.coordinate.derived(1 - self.evolution)
    }
}

/// `dL / d(velocity)`.
pub fn canonical_momentum(l: &Expr, pair: &CanonicalPair) -> Result<Expr> {
    partial_atom(l, &pair.velocity())
}

fn substitute_velocity(e: &Expr, pair: &CanonicalPair, value: &Expr, assume: &AssumptionSet) -> Result<Expr> {
    let map: BTreeMap<Atom, Expr> = [(pair.velocity(), value.clone())].into();
    let out = e.rebuild(&atom_map(&map), Some(assume));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InversionReport {
    /// `Pi - momentum(candidate)` after simplification.
    pub residual: Expr,
    pub verified: bool,
}

/// Substitutes the candidate velocity into the momentum expression and checks
/// it returns the momentum atom.
pub fn verify_inversion(
    pi_expr: &Expr,
    candidate: &Expr,
    pair: &CanonicalPair,
    assume: &AssumptionSet,
) -> Result<InversionReport> {
    let back = substitute_velocity(pi_expr, pair, candidate, assume)?;
    let residual = Expr::atom(pair.momentum.clone()).try_sub(&back)?;
    let verified = is_zero_assuming(&residual, assume);
    Ok(InversionReport { residual, verified })
}

/// `H = Pi * velocity - L` with the velocity eliminated.
pub fn legendre(l: &Expr, pair: &CanonicalPair, solution: &Expr, assume: &AssumptionSet) -> Result<Expr> {
    let h = Expr::atom(pair.momentum.clone())
        .try_mul(&Expr::atom(pair.velocity()))?
        .try_sub(l)?;
    substitute_velocity(&h, pair, solution, assume)
}

/// First-order Lagrangian `Pi * velocity - H` with the velocity as a free atom.
pub fn reconstruct_lagrangian(h: &Expr, pair: &CanonicalPair) -> Result<Expr> {
    Expr::atom(pair.momentum.clone())
        .try_mul(&Expr::atom(pair.velocity()))?
        .try_sub(h)
}

/// Euler-Lagrange expressions for the momentum and for the coordinate field.
pub fn derive_eom(l: &Expr, pair: &CanonicalPair) -> Result<(Expr, Expr)> {
    Ok((
        euler_lagrange(l, &pair.momentum)?,
        euler_lagrange(l, &pair.coordinate)?,
    ))
}

/// The flux `dL / d(transverse derivative)` of the conservation law.
pub fn flux(l: &Expr, pair: &CanonicalPair) -> Result<Expr> {
    partial_atom(l, &pair.transverse())
}

/// Solves `f(x) = 0` for an even atom `x` by Newton iteration from a solution
/// `x0` of the odd-free part. Each step doubles the nilpotent order reached, so
/// the iteration terminates exactly.
pub fn solve_nilpotent(f: &Expr, x: &Atom, x0: &Expr, assume: &AssumptionSet) -> Result<Expr> {
    let df = partial_atom(f, x)?;
    let mut cur = x0.clone();
    for _ in 0..8 {
        let map: BTreeMap<Atom, Expr> = [(x.clone(), cur.clone())].into();
        let subst = atom_map(&map);
        let val = f.rebuild(&subst, Some(assume))?;
        if is_zero_assuming(&val, assume) {
            return Ok(cur);
        }
        let slope = df.rebuild(&subst, Some(assume))?;
        let step = val.try_mul(&slope.pow_assuming((-1).into(), assume)?)?;
        cur = cur.try_sub(&step)?.collapse_positive(assume)?;
    }
    Err(Error::NonNilpotent(format!("Newton iteration for {x} did not terminate")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{Coefficient, Exponent};
    use crate::expr::equals;

    fn pair() -> CanonicalPair {
        CanonicalPair::light_cone("theta", "Pi")
    }

    fn bosonic() -> Expr {
        let p = pair();
        let body = &Expr::c_pow(2)
            - &(&Expr::atom(p.velocity()) * &Expr::atom(p.transverse())).scale(&Coefficient::integer(2));
        -body.pow(Exponent::new(1, 2)).unwrap()
    }

    fn assume() -> AssumptionSet {
        let p = pair();
        AssumptionSet::with([p.transverse(), p.momentum.clone()])
    }

    fn bosonic_solution() -> Expr {
        let p = pair();
        let tm = Expr::atom(p.transverse());
        let pi = Expr::atom(p.momentum.clone());
        &tm.inv().unwrap().scale(&Coefficient::frac(1, 2).mul(&Coefficient::c_pow(2)))
            - &(&tm * &pi.pow(Exponent::from(-2)).unwrap()).scale(&Coefficient::frac(1, 2))
    }

    #[test]
    fn bosonic_momentum() {
        let p = pair();
        let body = &Expr::c_pow(2)
            - &(&Expr::atom(p.velocity()) * &Expr::atom(p.transverse())).scale(&Coefficient::integer(2));
        let expect = &Expr::atom(p.transverse()) * &body.pow(Exponent::new(-1, 2)).unwrap();
        assert_eq!(canonical_momentum(&bosonic(), &p).unwrap(), expect);
    }

    #[test]
    fn bosonic_inversion() {
        let p = pair();
        let pi = canonical_momentum(&bosonic(), &p).unwrap();
        let ok = verify_inversion(&pi, &bosonic_solution(), &p, &assume()).unwrap();
        assert!(ok.verified, "{}", ok.residual);
        let bad = &bosonic_solution() + &Expr::atom(p.transverse());
        assert!(!verify_inversion(&pi, &bad, &p, &assume()).unwrap().verified);
    }

    #[test]
    fn bosonic_hamiltonian() {
        let p = pair();
        let h = legendre(&bosonic(), &p, &bosonic_solution(), &assume()).unwrap();
        let tm = Expr::atom(p.transverse());
        let pi = Expr::atom(p.momentum.clone());
        let expect = &(&tm * &pi.inv().unwrap()).scale(&Coefficient::frac(1, 2))
            + &(&pi * &tm.inv().unwrap()).scale(&Coefficient::frac(1, 2).mul(&Coefficient::c_pow(2)));
        assert!(equals(&h, &expect, &assume()), "{h}");
    }

    #[test]
    fn newton_recovers_bosonic_solution() {
        let p = pair();
        let pi = canonical_momentum(&bosonic(), &p).unwrap();
        let f = pi.try_sub(&Expr::atom(p.momentum.clone())).unwrap();
        let x0 = bosonic_solution();
        let got = solve_nilpotent(&f, &p.velocity(), &x0, &assume()).unwrap();
        assert!(equals(&got, &x0, &assume()));
    }

    #[test]
    fn independent_of_velocity() {
        let p = pair();
        assert!(canonical_momentum(&Expr::atom(p.transverse()), &p).unwrap().is_zero());
    }
}
