//! Cauchy names for real numbers.
//!
//! A name is a function `k -> Rational` whose value is within `2^-k` of the
//! real it names (non-strict). Approximants are memoized per precision, so
//! repeated tests at the same precision are free and deterministic. All
//! decidable comparisons below are comparisons of *approximants*, never of
//! the named reals; callers pick precisions so that the approximant tests
//! certify what they need.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::rational::{sqrt_dyadic, Rational};

type NameFn = Box<dyn Fn(u32) -> Rational + Send + Sync>;

struct Inner {
    f: NameFn,
    cache: Mutex<BTreeMap<u32, Rational>>,
}

/// A memoized Cauchy name: `|x - approx(k)| <= 2^-k` for every `k`.
#[derive(Clone)]
pub struct RealName {
    inner: Arc<Inner>,
}

impl fmt::Debug for RealName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cache = self.inner.cache.lock().unwrap();
        write!(f, "RealName{:?}", *cache)
    }
}

impl RealName {
    /// Wraps a raw approximant function. The function must be deterministic
    /// and satisfy the Cauchy-name contract on its own; nothing is checked.
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(u32) -> Rational + Send + Sync + 'static,
    {
        RealName {
            inner: Arc::new(Inner {
                f: Box::new(f),
                cache: Mutex::new(BTreeMap::new()),
            }),
        }
    }

    /// Name of an exact rational: every approximant is the value itself.
    pub fn constant(q: Rational) -> Self {
        RealName::new(move |_| q.clone())
    }

    /// Name of `sqrt(u)` for a nonnegative exact rational `u`. The guard of
    /// two extra dyadic digits keeps downstream consumers' error budgets
    /// simple: `approx(k) = isqrt(floor(u*4^(k+2)))/2^(k+2)`, within
    /// `2^-(k+2)` of the true root, comfortably within `2^-k`.
    pub fn sqrt_of_rational(u: Rational) -> Self {
        assert!(!u.is_negative(), "sqrt name needs nonnegative radicand");
        RealName::new(move |k| sqrt_dyadic(&u, k + 2))
    }

    /// The `2^-k` approximant, memoized. Computation happens outside the
    /// cache lock so names may freely query other names.
    pub fn approx(&self, k: u32) -> Rational {
        if let Some(v) = self.inner.cache.lock().unwrap().get(&k) {
            return v.clone();
        }
        let v = (self.inner.f)(k);
        self.inner
            .cache
            .lock()
            .unwrap()
            .entry(k)
            .or_insert(v)
            .clone()
    }

    /// `x + y`: queries both operands one digit deeper, so
    /// `|(x+y) - approx(k)| <= 2^-(k+1) + 2^-(k+1) = 2^-k`.
    pub fn add(&self, other: &RealName) -> RealName {
        let a = self.clone();
        let b = other.clone();
        RealName::new(move |k| a.approx(k + 1) + b.approx(k + 1))
    }

    /// `x - y`, same bookkeeping as `add`.
    pub fn sub(&self, other: &RealName) -> RealName {
        let a = self.clone();
        let b = other.clone();
        RealName::new(move |k| a.approx(k + 1) - b.approx(k + 1))
    }

    /// `|x|`: since `||x| - |q|| <= |x - q|`, the operand precision carries
    /// over unchanged.
    pub fn abs(&self) -> RealName {
        let a = self.clone();
        RealName::new(move |k| a.approx(k).abs())
    }

    /// `max(x, y)`: `|max(x,y) - max(p,q)| <= max(|x-p|, |y-q|)`, so operand
    /// precision again carries over unchanged.
    pub fn max(&self, other: &RealName) -> RealName {
        let a = self.clone();
        let b = other.clone();
        RealName::new(move |k| a.approx(k).max(b.approx(k)))
    }

    /// Decidable signed test `approx(p) < t`.
    ///
    /// Passing certifies `x < t + 2^-p`; failing certifies `x >= t - 2^-p`.
    pub fn approx_below(&self, t: &Rational, p: u32) -> bool {
        self.approx(p) < *t
    }

    /// Decidable test `|approx(p)| < t` (strict).
    ///
    /// The direction the solvers rely on: if `|x| < 2^-(n+1)` and
    /// `p >= n+1`, then `|approx(p)| <= |x| + 2^-p < 2^-(n+1) + 2^-(n+1) =
    /// 2^-n`, so the test against `t = 2^-n` is guaranteed to pass.
    /// Conversely a pass certifies `|x| < t + 2^-p`.
    pub fn abs_approx_below(&self, t: &Rational, p: u32) -> bool {
        self.approx(p).abs() < *t
    }

    /// Decidable test `|approx(p)| <= t` (non-strict variant, used where an
    /// admissibility set must provably contain every point with
    /// `|x| <= t - 2^-p`).
    pub fn abs_approx_at_most(&self, t: &Rational, p: u32) -> bool {
        self.approx(p).abs() <= *t
    }
}
