//! Exact coefficients: rationals adjoined with `sqrt(2)`, `i`, half-integer
//! powers of the positive parameter `c`, and the gauge normalization `alpha`
//! (a formal constant with `alpha^2 = 1/(2 i c)`).

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

/// Rational exponent of atoms and power atoms.
pub type Exponent = Ratio<i64>;

/// The non-rational part of a coefficient. Ordered with the `c` power first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Basis {
    /// Exponent of `c^(1/2)`.
    pub c_half: i32,
    pub sqrt2: bool,
    pub imag: bool,
    pub alpha: bool,
}

impl Basis {
    pub const ONE: Basis = Basis {
        c_half: 0,
        sqrt2: false,
        imag: false,
        alpha: false,
    };

    pub fn is_one(&self) -> bool {
        *self == Basis::ONE
    }

    /// Product of two basis elements, returned as a rational factor times a basis.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Basis) -> (BigRational, Basis) {
        let mut factor = BigRational::one();
        let mut out = Basis {
            c_half: self.c_half + other.c_half,
            ..Basis::ONE
        };
        if self.sqrt2 && other.sqrt2 {
            factor *= BigRational::from_integer(2.into());
        } else {
            out.sqrt2 = self.sqrt2 || other.sqrt2;
        }
        if self.imag && other.imag {
            factor = -factor;
        } else {
            out.imag = self.imag || other.imag;
        }
        if self.alpha && other.alpha {
            // alpha^2 = -i / (2c)
            out.c_half -= 2;
            factor /= BigRational::from_integer(2.into());
            if out.imag {
                out.imag = false;
            } else {
                out.imag = true;
                factor = -factor;
            }
        } else {
            out.alpha = self.alpha || other.alpha;
        }
        (factor, out)
    }
}

/// An exact element of the coefficient field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coefficient {
    pub value: BigRational,
    pub basis: Basis,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Coefficient {
    pub fn new(value: BigRational, basis: Basis) -> Coefficient {
        if value.is_zero() {
            return Coefficient::zero();
        }
        Coefficient { value, basis }
    }

    pub fn zero() -> Coefficient {
        Coefficient {
            value: BigRational::zero(),
            basis: Basis::ONE,
        }
    }

    pub fn one() -> Coefficient {
        Coefficient::rational(BigRational::one())
    }

    pub fn rational(value: BigRational) -> Coefficient {
        Coefficient::new(value, Basis::ONE)
    }

    pub fn integer(n: i64) -> Coefficient {
        Coefficient::rational(rat(n))
    }

    pub fn frac(n: i64, d: i64) -> Coefficient {
        Coefficient::rational(BigRational::new(n.into(), d.into()))
    }

    /// `c^(half / 2)`.
    pub fn c_pow_half(half: i32) -> Coefficient {
        Coefficient::new(
            BigRational::one(),
            Basis {
                c_half: half,
                ..Basis::ONE
            },
        )
    }

    /// `c^n`.
    pub fn c_pow(n: i32) -> Coefficient {
        Coefficient::c_pow_half(2 * n)
    }

    pub fn sqrt2() -> Coefficient {
        Coefficient::new(
            BigRational::one(),
            Basis {
                sqrt2: true,
                ..Basis::ONE
            },
        )
    }

    pub fn imag() -> Coefficient {
        Coefficient::new(
            BigRational::one(),
            Basis {
                imag: true,
                ..Basis::ONE
            },
        )
    }

    pub fn alpha() -> Coefficient {
        Coefficient::new(
            BigRational::one(),
            Basis {
                alpha: true,
                ..Basis::ONE
            },
        )
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.value.is_one() && self.basis.is_one()
    }

    /// True when the coefficient is a positive real number (no `i`, no `alpha`).
    pub fn is_positive_real(&self) -> bool {
        self.value.is_positive() && !self.basis.imag && !self.basis.alpha
    }

    pub fn mul(&self, other: &Coefficient) -> Coefficient {
        let (factor, basis) = self.basis.mul(other.basis);
        Coefficient::new(&self.value * &other.value * factor, basis)
    }

    pub fn neg(&self) -> Coefficient {
        Coefficient::new(-self.value.clone(), self.basis)
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(&self) -> Coefficient {
        assert!(!self.is_zero(), "inverse of zero coefficient");
        let mut out = Coefficient::new(self.value.recip(), Basis::ONE);
        out = out.mul(&Coefficient::c_pow_half(-self.basis.c_half));
        if self.basis.sqrt2 {
            // 1/sqrt2 = sqrt2/2
            out = out.mul(&Coefficient::sqrt2()).mul(&Coefficient::frac(1, 2));
        }
        if self.basis.imag {
            out = out.mul(&Coefficient::imag()).neg();
        }
        if self.basis.alpha {
            // 1/alpha = alpha / alpha^2 = alpha * 2 c i
            out = out
                .mul(&Coefficient::alpha())
                .mul(&Coefficient::integer(2))
                .mul(&Coefficient::c_pow(1))
                .mul(&Coefficient::imag());
        }
        out
    }

    pub fn powi(&self, n: i64) -> Coefficient {
        if n < 0 {
            return self.inv().powi(-n);
        }
        let mut result = Coefficient::one();
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        result
    }

    /// Complex conjugate: `i -> -i`. The gauge constant `alpha` is treated as a formal real symbol.
    pub fn conj(&self) -> Coefficient {
        if self.basis.imag {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// The positive real part `|q| c^(h/2) sqrt2^s` of the coefficient, dropping
    /// sign, `i` and `alpha`.
    pub fn positive_content(&self) -> Coefficient {
        Coefficient::new(
            self.value.abs(),
            Basis {
                c_half: self.basis.c_half,
                sqrt2: self.basis.sqrt2,
                ..Basis::ONE
            },
        )
    }

    /// Splits a positive real coefficient `k` as `k = pulled * rest` where `pulled^r`
    /// is exactly representable; returns `(pulled, pulled^r)`.
    ///
    /// For integer `r` the whole coefficient is pulled.
    pub fn split_root(&self, r: Exponent) -> (Coefficient, Coefficient) {
        if r.is_integer() {
            return (self.clone(), self.powi(*r.numer()));
        }
        if !self.is_positive_real() {
            return (Coefficient::one(), Coefficient::one());
        }
        let m = *r.denom();
        let p = *r.numer();
        let h = self.basis.c_half as i64;
        let h_pulled = h - h.rem_euclid(m);

        let mut num = factorize(self.value.numer().magnitude());
        for (prime, e) in factorize(self.value.denom().magnitude()) {
            *num.entry(prime).or_insert(0) -= e;
        }
        let two = BigUint::from(2u32);
        let v2 = num.remove(&two).unwrap_or(0);
        let s = self.basis.sqrt2 as i64 + 2 * v2;
        let s_pulled = s - s.rem_euclid(m);

        let mut pulled = Coefficient::c_pow_half(h_pulled as i32);
        let mut pulled_pow = Coefficient::c_pow_half((h_pulled * p / m) as i32);
        pulled = pulled.mul(&sqrt2_pow(s_pulled));
        pulled_pow = pulled_pow.mul(&sqrt2_pow(s_pulled * p / m));
        for (prime, e) in num {
            let e_pulled = e - e.rem_euclid(m);
            if e_pulled == 0 {
                continue;
            }
            let base = BigRational::from_integer(BigInt::from(prime));
            pulled = pulled.mul(&Coefficient::rational(rat_pow(&base, e_pulled)));
            pulled_pow = pulled_pow.mul(&Coefficient::rational(rat_pow(&base, e_pulled * p / m)));
        }
        (pulled, pulled_pow)
    }

    /// `self^r` when exactly representable.
    pub fn try_pow(&self, r: Exponent) -> Option<Coefficient> {
        let (pulled, pulled_pow) = self.split_root(r);
        if pulled == *self {
            Some(pulled_pow)
        } else {
            None
        }
    }

    /// Numeric value for a given value of `c` (real part, imaginary part), with `alpha = (2ic)^(-1/2)`.
    pub fn to_complex(&self, c: f64) -> (f64, f64) {
        let mut re = self.value.to_f64().unwrap_or(f64::NAN);
        re *= c.powf(self.basis.c_half as f64 / 2.0);
        if self.basis.sqrt2 {
            re *= std::f64::consts::SQRT_2;
        }
        let mut z = (re, 0.0);
        if self.basis.imag {
            z = (-z.1, z.0);
        }
        if self.basis.alpha {
            // (1 - i) / (2 sqrt(c))
            let s = 1.0 / (2.0 * c.sqrt());
            z = (s * (z.0 + z.1), s * (z.1 - z.0));
        }
        z
    }
}

fn sqrt2_pow(n: i64) -> Coefficient {
    Coefficient::sqrt2().powi(n)
}

fn rat_pow(base: &BigRational, e: i64) -> BigRational {
    Pow::pow(base, e as i32)
}

/// Prime factorization by trial division. An unfactored cofactor above the
/// search bound is kept as a single pseudo-prime.
pub(crate) fn factorize(n: &BigUint) -> BTreeMap<BigUint, i64> {
    let mut out = BTreeMap::new();
    let mut n = n.clone();
    if n.is_zero() {
        return out;
    }
    let mut d = BigUint::from(2u32);
    let bound = BigUint::from(100_000u32);
    while &d * &d <= n && d < bound {
        while (&n % &d).is_zero() {
            *out.entry(d.clone()).or_insert(0) += 1;
            n /= &d;
        }
        d += 1u32;
    }
    if !n.is_one() {
        *out.entry(n).or_insert(0) += 1;
    }
    out
}

/// Writes a `c^(h/2)` factor.
pub(crate) fn fmt_c_power(f: &mut fmt::Formatter<'_>, half: i32) -> fmt::Result {
    if half % 2 == 0 {
        let n = half / 2;
        if n == 1 {
            write!(f, "c")
        } else if n < 0 {
            write!(f, "c^({n})")
        } else {
            write!(f, "c^{n}")
        }
    } else {
        write!(f, "c^({half}/2)")
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.value.is_one() || self.basis.is_one() {
            parts.push(fmt_rational(&self.value));
        }
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
        f.write_str(&parts.join("*"))
    }
}

pub(crate) struct CPow(pub i32);

impl fmt::Display for CPow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_c_power(f, self.0)
    }
}

pub(crate) fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        if q.is_negative() {
            format!("({})", q.numer())
        } else {
            q.numer().to_string()
        }
    } else if q.is_negative() {
        format!("(-{}/{})", q.numer().abs(), q.denom())
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Generalized binomial coefficient `binom(r, k)` for rational `r`.
pub fn binomial(r: Exponent, k: u32) -> BigRational {
    let r = BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
    let mut acc = BigRational::one();
    for j in 0..k {
        acc = acc * (&r - rat(j as i64)) / rat(j as i64 + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Exponent {
        Exponent::new(n, d)
    }

    #[test]
    fn imaginary_unit_squares_to_minus_one() {
        let i = Coefficient::imag();
        assert_eq!(i.mul(&i), Coefficient::integer(-1));
    }

    #[test]
    fn sqrt2_squares_into_rational() {
        assert_eq!(Coefficient::sqrt2().powi(2), Coefficient::integer(2));
        assert_eq!(Coefficient::sqrt2().powi(3), Coefficient::sqrt2().mul(&Coefficient::integer(2)));
    }

    #[test]
    fn alpha_squared_is_one_over_two_i_c() {
        let a2 = Coefficient::alpha().powi(2);
        let expected = Coefficient::imag()
            .mul(&Coefficient::integer(2))
            .mul(&Coefficient::c_pow(1))
            .inv();
        assert_eq!(a2, expected);
        assert_eq!(a2, Coefficient::imag().mul(&Coefficient::frac(-1, 2)).mul(&Coefficient::c_pow(-1)));
    }

    #[test]
    fn inverse_round_trips() {
        let k = Coefficient::frac(-3, 7)
            .mul(&Coefficient::sqrt2())
            .mul(&Coefficient::imag())
            .mul(&Coefficient::alpha())
            .mul(&Coefficient::c_pow_half(3));
        assert!(k.mul(&k.inv()).is_one());
    }

    #[test]
    fn split_root_pulls_squares_and_two() {
        // 8 c^3 -> sqrt = 2 sqrt2 c * sqrt(c)
        let k = Coefficient::integer(8).mul(&Coefficient::c_pow(3));
        let (pulled, root) = k.split_root(q(1, 2));
        assert_eq!(pulled, k);
        assert_eq!(
            root,
            Coefficient::integer(2).mul(&Coefficient::sqrt2()).mul(&Coefficient::c_pow_half(3))
        );
        // 3 is not a square
        let (pulled, root) = Coefficient::integer(12).split_root(q(1, 2));
        assert_eq!(pulled, Coefficient::integer(4));
        assert_eq!(root, Coefficient::integer(2));
        assert_eq!(Coefficient::integer(3).try_pow(q(1, 2)), None);
        assert_eq!(Coefficient::frac(1, 4).try_pow(q(-1, 2)), Some(Coefficient::integer(2)));
    }

    #[test]
    fn binomial_half() {
        assert_eq!(binomial(q(1, 2), 2), BigRational::new((-1).into(), 8.into()));
        assert_eq!(binomial(q(-1, 1), 3), rat(-1));
    }
}
