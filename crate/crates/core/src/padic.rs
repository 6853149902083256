//! Valuations, unit parts, the quadratic residue character and friends for an
//! odd prime `p`, all on exact rationals.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::ExactRational;

/// Extra digits of working precision on top of `alpha + beta`.
pub const PRECISION_SLACK: u32 = 8;

/// A value of a quadratic character.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_bool(square: bool) -> Self {
        if square {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn to_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn to_i64(self) -> i64 {
        self.to_i8() as i64
    }

    pub fn pow(self, e: u64) -> Sign {
        if e % 2 == 0 {
            Sign::Plus
        } else {
            self
        }
    }

    pub fn is_plus(self) -> bool {
        self == Sign::Plus
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_bool(self == rhs)
    }
}

impl std::ops::Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        self * Sign::Minus
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

impl FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+1" | "1" | "+" => Ok(Sign::Plus),
            "-1" | "-" => Ok(Sign::Minus),
            other => Err(Error::Parse(format!("expected +1 or -1, got {other:?}"))),
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_i8(self.to_i8())
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(deserializer)? {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(serde::de::Error::custom(format!(
                "sign must be +1 or -1, got {other}"
            ))),
        }
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Checks that `p` is an odd prime.
pub fn check_prime(p: u64) -> Result<()> {
    if p == 2 {
        return Err(Error::EvenPrime);
    }
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    Ok(())
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ((acc as u128 * base as u128) % m as u128) as u64;
        }
        base = ((base as u128 * base as u128) % m as u128) as u64;
        exp >>= 1;
    }
    acc
}

/// Legendre symbol of an integer not divisible by `p`.
fn legendre(n: &BigInt, p: u64) -> Sign {
    let r = n.mod_floor(&BigInt::from(p)).to_u64().unwrap();
    debug_assert!(r != 0);
    Sign::from_bool(pow_mod(r, (p - 1) / 2, p) == 1)
}

/// The smallest positive integer that is not a square mod `p`.
pub fn nonsquare(p: u64) -> u64 {
    (2..p)
        .find(|&n| pow_mod(n, (p - 1) / 2, p) == p - 1)
        .expect("odd prime has a nonsquare")
}

/// `p`-adic valuation of a nonzero integer.
pub fn val_int(n: &BigInt, p: u64) -> Option<u64> {
    if n.is_zero() {
        return None;
    }
    if let Some(mut small) = n.abs().to_u64() {
        let mut v = 0;
        while small % p == 0 {
            small /= p;
            v += 1;
        }
        return Some(v);
    }
    let pb = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&pb);
        if !r.is_zero() {
            return Some(v);
        }
        n = q;
        v += 1;
    }
}

/// `p`-adic valuation of a nonzero rational.
pub fn val_rat(x: &ExactRational, p: u64) -> Option<i64> {
    let vn = val_int(x.numer(), p)? as i64;
    let vd = val_int(x.denom(), p).expect("denominator is nonzero") as i64;
    Some(vn - vd)
}

pub fn pow_big(p: u64, e: u32) -> BigInt {
    num_traits::pow(BigInt::from(p), e as usize)
}

/// Modular inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if !e.gcd.is_one() {
        return None;
    }
    Some(e.x.mod_floor(m))
}

/// Working context: an odd prime and a precision for the few operations that
/// need one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PAdicContext {
    p: u64,
    precision: u32,
}

impl PAdicContext {
    pub fn new(p: u64, precision: u32) -> Result<Self> {
        check_prime(p)?;
        if precision == 0 {
            return Err(Error::Parse("precision must be positive".into()));
        }
        Ok(Self { p, precision })
    }

    /// Context sized for forms with exponents `alpha <= beta`.
    pub fn for_exponents(p: u64, alpha: u32, beta: u32) -> Result<Self> {
        Self::new(p, alpha + beta + PRECISION_SLACK)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn valuation(&self, x: &ExactRational) -> Result<i64> {
        val_rat(x, self.p).ok_or(Error::ZeroValuation)
    }

    /// `x * p^(-valuation(x))`.
    pub fn unit_part(&self, x: &ExactRational) -> Result<ExactRational> {
        let v = self.valuation(x)?;
        Ok(x * &ExactRational::prime_power(self.p, -v))
    }

    /// Quadratic residue character of a unit.
    pub fn chi(&self, u: &ExactRational) -> Result<Sign> {
        if self.valuation(u)? != 0 {
            return Err(Error::NotUnit(u.to_string()));
        }
        // chi(n/d) = chi(n*d)
        Ok(legendre(&(u.numer() * u.denom()), self.p))
    }

    /// `chi` of the unit part.
    pub fn chi_unit_part(&self, x: &ExactRational) -> Result<Sign> {
        self.chi(&self.unit_part(x)?)
    }

    /// Quadratic Hilbert symbol `(a, b)_p`.
    pub fn hilbert_symbol(&self, a: &ExactRational, b: &ExactRational) -> Result<Sign> {
        let va = self.valuation(a)?;
        let vb = self.valuation(b)?;
        let e1 = self.chi_unit_part(a)?;
        let e2 = self.chi_unit_part(b)?;
        let minus_one = self.chi(&ExactRational::from(-1))?;
        let (va, vb) = (va.rem_euclid(2) as u64, vb.rem_euclid(2) as u64);
        Ok(minus_one.pow(va * vb) * e1.pow(vb) * e2.pow(va))
    }

    /// `chi(-1)`.
    pub fn chi_minus_one(&self) -> Sign {
        Sign::from_bool(self.p % 4 == 1)
    }

    /// The canonical nonsquare unit.
    pub fn eta(&self) -> u64 {
        nonsquare(self.p)
    }

    /// Integer representative of the unit class with character `s`.
    pub fn unit_rep(&self, s: Sign) -> i64 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => self.eta() as i64,
        }
    }

    /// `s` with `s^2 = u (mod p^N)` for a square unit `u`, using the context
    /// precision unless `n` is given.
    pub fn hensel_sqrt(&self, u: &ExactRational, n: Option<u32>) -> Result<BigInt> {
        let n = n.unwrap_or(self.precision).max(1);
        if self.chi(u)? == Sign::Minus {
            return Err(Error::NotSquare(u.to_string()));
        }
        let modulus = pow_big(self.p, n);
        let den_inv = inv_mod(u.denom(), &modulus).expect("unit denominator");
        let target = (u.numer() * den_inv).mod_floor(&modulus);

        let p = self.p;
        let t0 = target.mod_floor(&BigInt::from(p)).to_u64().unwrap();
        let s0 = (1..p).find(|s| (s * s) % p == t0).expect("square mod p");
        let mut s = BigInt::from(s0);
        let mut prec = 1u32;
        while prec < n {
            prec = (prec * 2).min(n);
            let m = pow_big(p, prec);
            let two_s_inv = inv_mod(&(BigInt::from(2) * &s), &m).expect("2s is a unit");
            s = (&s - (&s * &s - &target) * two_s_inv).mod_floor(&m);
        }
        Ok(s.mod_floor(&modulus))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn ctx(p: u64) -> PAdicContext {
        PAdicContext::new(p, 10).unwrap()
    }

    #[test]
    fn rejects_bad_primes() {
        assert_eq!(PAdicContext::new(2, 5), Err(Error::EvenPrime));
        assert_eq!(PAdicContext::new(9, 5), Err(Error::NotPrime(9)));
        assert!(PAdicContext::new(7, 5).is_ok());
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(ctx(3).valuation(&q(9, 1)).unwrap(), 2);
        assert_eq!(ctx(3).valuation(&q(6, 1)).unwrap(), 1);
        assert_eq!(ctx(5).valuation(&q(2, 5)).unwrap(), -1);
        assert_eq!(ctx(3).valuation(&q(0, 1)), Err(Error::ZeroValuation));
    }

    #[test]
    fn chi_examples() {
        assert_eq!(ctx(3).chi(&q(1, 1)).unwrap(), Sign::Plus);
        assert_eq!(ctx(3).chi(&q(2, 1)).unwrap(), Sign::Minus);
        assert_eq!(ctx(5).chi(&q(4, 1)).unwrap(), Sign::Plus);
        assert!(ctx(3).chi(&q(3, 1)).is_err());
        // 1/2 has the same class as 2
        assert_eq!(ctx(5).chi(&q(1, 2)).unwrap(), Sign::Minus);
    }

    #[test]
    fn hilbert_examples() {
        let c = ctx(3);
        assert_eq!(c.hilbert_symbol(&q(1, 1), &q(7, 5)).unwrap(), Sign::Plus);
        assert_eq!(c.hilbert_symbol(&q(3, 1), &q(3, 1)).unwrap(), Sign::Minus);
        for p in [3u64, 5, 7, 11, 13] {
            let c = ctx(p);
            let eta = q(c.eta() as i64, 1);
            assert_eq!(c.hilbert_symbol(&eta, &q(p as i64, 1)).unwrap(), Sign::Minus);
        }
    }

    #[test]
    fn hensel_examples() {
        let c = ctx(3);
        let s = c.hensel_sqrt(&q(4, 1), Some(3)).unwrap();
        assert!(s == BigInt::from(2) || s == BigInt::from(25));
        let s = c.hensel_sqrt(&q(7, 1), Some(2)).unwrap();
        assert_eq!((&s * &s).mod_floor(&BigInt::from(9)), BigInt::from(7));
        assert!(matches!(
            ctx(5).hensel_sqrt(&q(2, 1), Some(1)),
            Err(Error::NotSquare(_))
        ));
    }

    #[test]
    fn nonsquares() {
        assert_eq!(nonsquare(3), 2);
        assert_eq!(nonsquare(5), 2);
        assert_eq!(nonsquare(7), 3);
        assert_eq!(nonsquare(17), 3);
    }
}
