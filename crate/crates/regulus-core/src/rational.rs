//! Arbitrary-precision rationals with the handful of dyadic helpers the
//! solvers lean on: powers of two, dyadic floor/ceil, and floor-integer
//! square roots of scaled values.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational number, always in lowest terms with positive denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Rational(BigRational::from_integer(n))
    }

    /// `num/den`; panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_big(num: BigInt, den: BigInt) -> Self {
        Rational(BigRational::new(num, den))
    }

    /// `2^e` for any integer exponent.
    pub fn pow2(e: i32) -> Self {
        let one = BigInt::one();
        if e >= 0 {
            Rational(BigRational::from_integer(&one << e as usize))
        } else {
            Rational(BigRational::new(one.clone(), &one << (-e) as usize))
        }
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// `floor(self * 2^k)` as an integer.
    pub fn floor_scaled(&self, k: u32) -> BigInt {
        let scaled = self.numer() << k as usize;
        scaled.div_floor(self.denom())
    }

    /// `ceil(self * 2^k)` as an integer.
    pub fn ceil_scaled(&self, k: u32) -> BigInt {
        let scaled = self.numer() << k as usize;
        scaled.div_ceil(self.denom())
    }

    /// Largest dyadic `m/2^k <= self`.
    pub fn floor_dyadic(&self, k: u32) -> Self {
        Rational(BigRational::new(
            self.floor_scaled(k),
            BigInt::one() << k as usize,
        ))
    }

    /// Smallest dyadic `m/2^k >= self`.
    pub fn ceil_dyadic(&self, k: u32) -> Self {
        Rational(BigRational::new(
            self.ceil_scaled(k),
            BigInt::one() << k as usize,
        ))
    }

    /// Converts to `f64` for display-adjacent diagnostics only; never used in
    /// any decision the solvers make.
    pub fn to_f64_lossy(&self) -> f64 {
        let f = |b: &BigInt| -> f64 {
            let s = b.to_string();
            s.parse::<f64>().unwrap_or(f64::NAN)
        };
        f(self.numer()) / f(self.denom())
    }
}

/// Floor integer square root; panics on negative input.
pub fn isqrt(n: &BigInt) -> BigInt {
    assert!(!n.is_negative(), "isqrt of negative integer");
    n.sqrt()
}

/// Dyadic lower approximation to `sqrt(x)` for `x >= 0`:
/// `isqrt(floor(x * 4^k)) / 2^k`, which lies within `2^-k` below the true
/// root (and never above it).
pub fn sqrt_dyadic(x: &Rational, k: u32) -> Rational {
    assert!(!x.is_negative(), "sqrt_dyadic of negative rational");
    let scaled = x.floor_scaled(2 * k);
    Rational::from_big(isqrt(&scaled), BigInt::one() << k as usize)
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((self.0).$method(rhs.0))
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
                Rational((self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
    };
}

impl_binop!(Add, add);
impl_binop!(Sub, sub);
impl_binop!(Mul, mul);
impl_binop!(Div, div);

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

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(String);

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `p` or `p/q` with optional leading sign, e.g. `-3/4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || ParseRationalError(s.to_string());
        match t.split_once('/') {
            None => {
                let n = BigInt::from_str(t).map_err(|_| bad())?;
                Ok(Rational::from_bigint(n))
            }
            Some((p, q)) => {
                let num = BigInt::from_str(p.trim()).map_err(|_| bad())?;
                let den = BigInt::from_str(q.trim()).map_err(|_| bad())?;
                if den.is_zero() {
                    return Err(bad());
                }
                Ok(Rational::from_big(num, den))
            }
        }
    }
}

impl serde::Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
