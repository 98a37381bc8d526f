//! Exact integer and rational number theory used by the census.
//!
//! Everything here is exact. [`Rational`] wraps an arbitrary-precision reduced
//! fraction; the integer functions work on `u64` and factor by trial division,
//! which is plenty for the moduli the census touches (a few thousand at most).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
    #[error("value table has no entry for divisor {divisor} of {modulus}")]
    MissingDivisor { divisor: u64, modulus: u64 },
    #[error("modulus must be positive")]
    ZeroModulus,
}

/// Exact fraction, always reduced with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        Self::try_new(numer, denom).expect("Rational::new with zero denominator")
    }

    pub fn try_new(numer: i64, denom: i64) -> Result<Self, ArithError> {
        if denom == 0 {
            return Err(ArithError::ZeroDenominator);
        }
        Ok(Rational(BigRational::new(numer.into(), denom.into())))
    }

    pub fn from_integer(value: i64) -> Self {
        Rational(BigRational::from_integer(value.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// Denominator as `u64`; panics if it does not fit (never happens for census inputs).
    pub fn denom_u64(&self) -> u64 {
        self.0.denom().to_u64().expect("denominator exceeds u64")
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// The integer value, if this is an integer that fits in `i64`.
    pub fn to_i64(&self) -> Option<i64> {
        if self.is_integer() {
            self.0.numer().to_i64()
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn floor(&self) -> Rational {
        Rational(self.0.floor())
    }

    /// Representative in `[0, 1)` of the class modulo 1.
    pub fn frac(&self) -> Rational {
        Rational(&self.0 - self.0.floor())
    }

    pub fn abs(&self) -> Rational {
        Rational(self.0.abs())
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }
}

impl From<i64> for Rational {
    fn from(value: i64) -> Self {
        Rational::from_integer(value)
    }
}

impl From<BigRational> for Rational {
    fn from(value: BigRational) -> Self {
        Rational(value)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = ArithError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |part: &str| {
            part.trim()
                .parse::<BigInt>()
                .map_err(|_| ArithError::Parse(s.to_string()))
        };
        match s.split_once('/') {
            Some((p, q)) => {
                let q = parse(q)?;
                if q.is_zero() {
                    return Err(ArithError::ZeroDenominator);
                }
                Ok(Rational(BigRational::new(parse(p)?, q)))
            }
            None => Ok(Rational(BigRational::from_integer(parse(s)?))),
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl $trait<i64> for Rational {
            type Output = Rational;
            fn $method(self, rhs: i64) -> Rational {
                Rational(self.0.$method(BigRational::from_integer(rhs.into())))
            }
        }
        impl<'a> $trait<i64> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: i64) -> Rational {
                Rational((&self.0).$method(BigRational::from_integer(rhs.into())))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl std::iter::Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

/// Divisors of a positive integer, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivisorTable {
    modulus: u64,
    divisors: Vec<u64>,
}

impl DivisorTable {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.divisors
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.divisors.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.divisors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.divisors.is_empty()
    }
}

/// `gcd(a, b, modulus)`, with `gcd(0, 0, modulus) = modulus`.
pub fn gcd3(a: u64, b: u64, modulus: u64) -> u64 {
    a.gcd(&b).gcd(&modulus)
}

/// Prime factorization by trial division, as `(prime, exponent)` pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut factors = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            factors.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        factors.push((n, 1));
    }
    factors
}

pub fn euler_phi(n: u64) -> u64 {
    assert!(n >= 1, "euler_phi needs a positive argument");
    factorize(n)
        .into_iter()
        .map(|(p, e)| p.pow(e - 1) * (p - 1))
        .product()
}

/// Number of pairs `(k1, k2)` in `{0..n-1}²` with `gcd(k1, k2, n) = 1`,
/// i.e. the elements of order exactly `n` in `(Z/n)²`.
pub fn psi(n: u64) -> u64 {
    assert!(n >= 1, "psi needs a positive argument");
    factorize(n)
        .into_iter()
        .map(|(p, e)| p.pow(2 * (e - 1)) * (p * p - 1))
        .product()
}

pub fn moebius_mu(n: u64) -> i64 {
    assert!(n >= 1, "moebius_mu needs a positive argument");
    let factors = factorize(n);
    if factors.iter().any(|&(_, e)| e > 1) {
        0
    } else if factors.len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

pub fn divisors(n: u64) -> DivisorTable {
    assert!(n >= 1, "divisors needs a positive argument");
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    DivisorTable {
        modulus: n,
        divisors: small,
    }
}

/// Recovers `f(n)` from its divisor sums: `f(n) = Σ_{d|n} μ(n/d)·F(d)`.
pub fn moebius_invert(
    divisor_sums: &BTreeMap<u64, Rational>,
    n: u64,
) -> Result<Rational, ArithError> {
    if n == 0 {
        return Err(ArithError::ZeroModulus);
    }
    let mut acc = Rational::zero();
    for d in divisors(n).iter() {
        let value = divisor_sums.get(&d).ok_or(ArithError::MissingDivisor {
            divisor: d,
            modulus: n,
        })?;
        match moebius_mu(n / d) {
            0 => {}
            mu => acc = acc + value * mu,
        }
    }
    Ok(acc)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gcd_brute(a: u64, b: u64, n: u64) -> u64 {
        (1..=n)
            .rev()
            .find(|d| a.is_multiple_of(*d) && b.is_multiple_of(*d) && n.is_multiple_of(*d))
            .unwrap()
    }

    fn phi_brute(n: u64) -> u64 {
        (1..=n).filter(|&k| k.gcd(&n) == 1).count() as u64
    }

    fn psi_brute(n: u64) -> u64 {
        let mut count = 0;
        for a in 0..n {
            for b in 0..n {
                if gcd3(a, b, n) == 1 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn gcd3_examples() {
        assert_eq!(gcd3(0, 0, 5), 5);
        assert_eq!(gcd3(3, 3, 4), 1);
        assert_eq!(gcd3(6, 4, 10), gcd_brute(6, 4, 10));
        assert_eq!(gcd3(6, 4, 10), 2);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(12), phi_brute(12));
        assert_eq!(euler_phi(12), 4);
        assert_eq!(euler_phi(7), 6);
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(1), 1);
        assert_eq!(psi(3), 8);
        assert_eq!(psi(4), 12);
    }

    #[test]
    fn mu_examples() {
        assert_eq!(moebius_mu(1), 1);
        assert_eq!(moebius_mu(6), 1);
        assert_eq!(moebius_mu(12), 0);
        assert_eq!(moebius_mu(30), -1);
    }

    #[test]
    fn divisor_examples() {
        assert_eq!(divisors(1).as_slice(), &[1]);
        assert_eq!(divisors(12).as_slice(), &[1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(7).as_slice(), &[1, 7]);
        assert_eq!(divisors(36).as_slice(), &[1, 2, 3, 4, 6, 9, 12, 18, 36]);
    }

    #[test]
    fn fast_paths_match_brute_force() {
        for n in 1..=500 {
            assert_eq!(euler_phi(n), phi_brute(n), "phi({n})");
            let divs = divisors(n);
            let brute: Vec<u64> = (1..=n).filter(|d| n % d == 0).collect();
            assert_eq!(divs.as_slice(), brute.as_slice());
        }
        // psi brute force is quadratic; 500² pairs per n is still quick
        for n in 1..=500 {
            assert_eq!(psi(n), psi_brute(n), "psi({n})");
        }
    }

    #[test]
    fn moebius_invert_examples() {
        let table: BTreeMap<u64, Rational> = [(1, 1), (2, 3), (3, 4), (6, 12)]
            .into_iter()
            .map(|(d, v)| (d, Rational::from_integer(v)))
            .collect();
        assert_eq!(
            moebius_invert(&table, 6).unwrap(),
            Rational::from_integer(6)
        );

        let ones = |n: u64| -> BTreeMap<u64, Rational> {
            divisors(n).iter().map(|d| (d, Rational::one())).collect()
        };
        assert_eq!(moebius_invert(&ones(1), 1).unwrap(), Rational::one());
        assert_eq!(moebius_invert(&ones(7), 7).unwrap(), Rational::zero());
    }

    #[test]
    fn moebius_invert_missing_divisor() {
        let mut table = BTreeMap::new();
        table.insert(1, Rational::one());
        table.insert(6, Rational::one());
        assert_eq!(
            moebius_invert(&table, 6),
            Err(ArithError::MissingDivisor {
                divisor: 2,
                modulus: 6
            })
        );
    }

    #[test]
    fn moebius_round_trip_small() {
        for n in 1..=200u64 {
            // g(e) = e² - 3e + (e mod 5), an arbitrary integer function
            let g = |e: u64| e as i64 * e as i64 - 3 * e as i64 + (e % 5) as i64;
            let table: BTreeMap<u64, Rational> = divisors(n)
                .iter()
                .map(|d| {
                    let sum: i64 = divisors(d).iter().map(g).sum();
                    (d, Rational::from_integer(sum))
                })
                .collect();
            assert_eq!(
                moebius_invert(&table, n).unwrap(),
                Rational::from_integer(g(n))
            );
        }
    }

    #[test]
    fn rational_basics() {
        let a = Rational::new(6, -4);
        assert_eq!(a.to_string(), "-3/2");
        assert_eq!(a.frac(), Rational::new(1, 2));
        assert_eq!(Rational::new(7, 3).frac(), Rational::new(1, 3));
        assert_eq!("12/8".parse::<Rational>().unwrap(), Rational::new(3, 2));
        assert_eq!(
            "-5".parse::<Rational>().unwrap(),
            Rational::from_integer(-5)
        );
        assert!("1/0".parse::<Rational>().is_err());
        assert!("x/2".parse::<Rational>().is_err());
        assert_eq!(Rational::try_new(1, 0), Err(ArithError::ZeroDenominator));
        assert_eq!(Rational::new(4, 2).to_i64(), Some(2));
        assert_eq!(Rational::new(1, 3).to_i64(), None);
    }

    proptest! {
        #[test]
        fn rational_text_round_trip(p in -10_000i64..10_000, q in 1i64..10_000) {
            let r = Rational::new(p, q);
            let parsed: Rational = r.to_string().parse().unwrap();
            prop_assert_eq!(&parsed, &r);
            let json = serde_json::to_string(&r).unwrap();
            let back: Rational = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, r);
        }

        #[test]
        fn rational_is_reduced(p in -10_000i64..10_000, q in 1i64..10_000) {
            let r = Rational::new(p, q);
            prop_assert!(r.denom().is_positive());
            prop_assert!(r.numer().gcd(r.denom()).is_one());
            let f = r.frac();
            prop_assert!(!f.is_negative() && f < Rational::one());
        }
    }
}
