//! Krasnoselskii iteration on `[0,1]` for the monotone-series fixture,
//! conversion of an approximate-solution rate plus a regularity modulus into
//! a Cauchy rate, and brute-force grid oracles for regularity moduli.
//!
//! The fixture: a nondecreasing sequence `a_l` in `[0,1]` defines
//! `f(x) = sum_l 2^-(l+1) * max(x, a_l)`, `T = (id + f)/2`, and the
//! iteration `x_0 = 0`, `x_(n+1) = T(x_n)`. `f` is nonexpansive and `f >= id`,
//! so the iterates increase toward the least fixed point of `f`. The
//! residual `|x - Tx| = (f(x) - x)/2` plays the role of `F` when the fixture
//! is handed to the metric zero finder.
//!
//! No convergence-rate is manufactured out of thin air here: the engine only
//! converts rates the caller supplies (claimed or brute-forced against the
//! exact iteration). That division of labor is the point; fixed-point
//! iterations of this shape admit no uniform computable rate in general, so
//! a per-problem modulus is part of the input.

use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::rational::Rational;
use crate::real::RealName;
use crate::spaces::Modulus;
use crate::RegulusError;

/// The nondecreasing sequence driving the series.
#[derive(Debug, Clone)]
pub enum MonotoneFamily {
    /// `a_l = 1 - 2^-(l+1)`, approaching 1 from below. The fixed-point set
    /// of `f` is the single point `1`, approached with no uniform rate.
    GeometricApproachOne,
    /// Explicit initial values followed by a constant tail. Entries must be
    /// nondecreasing, inside `[0,1]`, and at most the tail value; the
    /// fixed-point set of `f` is then `[tail, 1]`.
    Table { a: Vec<Rational>, tail: Rational },
}

/// `ceil(log2(n))` for `n >= 1`.
fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Exact iterate of the geometric engine, kept as `y = 3x = num / 2^e` so
/// every step is integer shifts and adds, no gcd reduction on the hot path.
#[derive(Debug, Clone)]
struct GeoIterate {
    num: BigInt,
    e: u64,
}

enum EngineState {
    Geo(Vec<GeoIterate>),
    Rat(Vec<Rational>),
}

/// The fixture: family plus the memoized exact iteration.
pub struct MonotoneSequenceFixture {
    family: MonotoneFamily,
    state: Mutex<EngineState>,
}

impl MonotoneSequenceFixture {
    pub fn new(family: MonotoneFamily) -> Result<Self, RegulusError> {
        if let MonotoneFamily::Table { a, tail } = &family {
            let one = Rational::one();
            if tail.is_negative() || *tail > one {
                return Err(RegulusError::InvalidProblem(
                    "monotone tail outside [0,1]".into(),
                ));
            }
            let mut prev = Rational::zero();
            for (l, v) in a.iter().enumerate() {
                if v.is_negative() || *v > one {
                    return Err(RegulusError::InvalidProblem(format!(
                        "monotone entry a_{l} outside [0,1]"
                    )));
                }
                if *v < prev {
                    return Err(RegulusError::InvalidProblem(format!(
                        "monotone entries must be nondecreasing (a_{l})"
                    )));
                }
                prev = v.clone();
            }
            if prev > *tail {
                return Err(RegulusError::InvalidProblem(
                    "monotone tail below the last table entry".into(),
                ));
            }
        }
        let state = match family {
            MonotoneFamily::GeometricApproachOne => EngineState::Geo(vec![GeoIterate {
                num: BigInt::zero(),
                e: 0,
            }]),
            MonotoneFamily::Table { .. } => EngineState::Rat(vec![Rational::zero()]),
        };
        Ok(MonotoneSequenceFixture {
            family,
            state: Mutex::new(state),
        })
    }

    pub fn family(&self) -> &MonotoneFamily {
        &self.family
    }

    pub fn a(&self, l: u32) -> Rational {
        match &self.family {
            MonotoneFamily::GeometricApproachOne => {
                Rational::one() - Rational::pow2(-(l as i32) - 1)
            }
            MonotoneFamily::Table { a, tail } => {
                a.get(l as usize).cloned().unwrap_or_else(|| tail.clone())
            }
        }
    }

    /// Closed form of the full series at an exact rational `x` in `[0,1]`.
    pub fn f_exact(&self, x: &Rational) -> Rational {
        let one = Rational::one();
        assert!(!x.is_negative() && *x <= one, "f_exact domain is [0,1]");
        match &self.family {
            MonotoneFamily::GeometricApproachOne => {
                if *x == one {
                    return one;
                }
                // least l0 with a_l >= x, i.e. 2^-(l0+1) <= 1-x; below l0
                // the max is x, above it the tail sums geometrically
                let gap = &one - x;
                let mut l0: i32 = 0;
                while Rational::pow2(-l0 - 1) > gap {
                    l0 += 1;
                }
                let p = Rational::pow2(-l0);
                let p2 = Rational::pow2(-2 * l0);
                x * &(&one - &p) + &p - &(p2 / Rational::from_int(3))
            }
            MonotoneFamily::Table { a, tail } => {
                let mut total = Rational::zero();
                for (l, v) in a.iter().enumerate() {
                    let m = if x >= v { x.clone() } else { v.clone() };
                    total = total + Rational::pow2(-(l as i32) - 1) * m;
                }
                let m = if x >= tail { x.clone() } else { tail.clone() };
                total + Rational::pow2(-(a.len() as i32)) * m
            }
        }
    }

    pub fn t_exact(&self, x: &Rational) -> Rational {
        (x + &self.f_exact(x)) / Rational::from_int(2)
    }

    /// `|x - Tx| = (f(x) - x)/2`, the residual of a point.
    pub fn residual_of(&self, x: &Rational) -> Rational {
        (self.f_exact(x) - x) / Rational::from_int(2)
    }

    fn ensure_iterates(&self, n: u64) {
        let mut state = self.state.lock().unwrap();
        match &mut *state {
            EngineState::Geo(v) => {
                while (v.len() as u64) <= n {
                    let last = v.last().unwrap();
                    v.push(geo_step(last));
                }
            }
            EngineState::Rat(v) => {
                while (v.len() as u64) <= n {
                    let last = v.last().unwrap().clone();
                    let next = self.t_exact(&last);
                    v.push(next);
                }
            }
        }
    }

    /// Exact `x_n`.
    pub fn iterate(&self, n: u64) -> Rational {
        self.ensure_iterates(n);
        let state = self.state.lock().unwrap();
        match &*state {
            EngineState::Geo(v) => {
                let it = &v[n as usize];
                Rational::from_big(it.num.clone(), BigInt::from(3) << it.e as usize)
            }
            EngineState::Rat(v) => v[n as usize].clone(),
        }
    }

    /// Exact residual `(f(x_n) - x_n)/2`.
    pub fn residual(&self, n: u64) -> Rational {
        self.ensure_iterates(n);
        let state = self.state.lock().unwrap();
        match &*state {
            EngineState::Geo(v) => {
                let (g, l0, e) = geo_residual_parts(&v[n as usize]);
                Rational::from_big(g, BigInt::from(6) << (e + 2 * l0 as u64) as usize)
            }
            EngineState::Rat(v) => self.residual_of(&v[n as usize]),
        }
    }

    /// Exact decision `residual(n) < 2^-k`, without constructing the
    /// rational (the geometric engine compares shifted integers).
    pub fn residual_below_pow2(&self, n: u64, k: u32) -> bool {
        self.ensure_iterates(n);
        let state = self.state.lock().unwrap();
        match &*state {
            EngineState::Geo(v) => {
                let (g, l0, e) = geo_residual_parts(&v[n as usize]);
                // g / (6 * 2^(e + 2*l0)) < 2^-k
                (g << k as usize) < (BigInt::from(6) << (e + 2 * l0 as u64) as usize)
            }
            EngineState::Rat(_) => {
                drop(state);
                self.residual(n) < Rational::pow2(-(k as i32))
            }
        }
    }

    /// `x_n` computed with per-step truncated series: at target precision
    /// `2^-k`, each of the `n` nonexpansive steps uses the series cut at
    /// `L = k + ceil(log2 n) + 1` terms with the tail replaced by its
    /// midpoint `2^-(L+1) * (x + 1)`, so the accumulated error is at most
    /// `n * 2^-(L+1) <= 2^-(k+2)`.
    pub fn krasnoselskii(&self, n: u64, k: u32) -> Rational {
        if n == 0 {
            return Rational::zero();
        }
        let l_cut = k + ceil_log2(n) + 1;
        let mut x = Rational::zero();
        for _ in 0..n {
            let fx = self.f_truncated(&x, l_cut);
            x = (x + fx) / Rational::from_int(2);
        }
        x
    }

    /// `sum_(l<L) 2^-(l+1) max(x, a_l) + 2^-(L+1) (x + 1)`; within
    /// `2^-(L+1)` of `f(x)` on `[0,1]`.
    fn f_truncated(&self, x: &Rational, l_cut: u32) -> Rational {
        let mut total = Rational::zero();
        for l in 0..l_cut {
            let a = self.a(l);
            let m = if *x >= a { x.clone() } else { a };
            total = total + Rational::pow2(-(l as i32) - 1) * m;
        }
        total + Rational::pow2(-(l_cut as i32) - 1) * (x + &Rational::one())
    }

    /// Description of the fixed-point set of `f` (the zero set of the
    /// residual).
    pub fn zero_set(&self) -> ZeroSetDesc {
        match &self.family {
            MonotoneFamily::GeometricApproachOne => ZeroSetDesc::Point(Rational::one()),
            MonotoneFamily::Table { tail, .. } => {
                ZeroSetDesc::Interval(tail.clone(), Rational::one())
            }
        }
    }
}

/// One step of the gcd-free engine for the geometric family. With
/// `y = 3x = num/2^e` and `R = 3*2^e - num`:
/// the split index is the least `l0` with `3*2^(-l0-1) <= 3 - y`, and
/// `y' = y - 2^-(l0+1) (y - 3) - 2^-(2*l0+1)`, i.e.
/// `num' = num*2^(2*l0+1) + R*2^l0 - 2^e` over `2^(e + 2*l0 + 1)`.
fn geo_step(it: &GeoIterate) -> GeoIterate {
    let three_e = BigInt::from(3) << it.e as usize;
    let r = &three_e - &it.num;
    debug_assert!(r.is_positive(), "iterates must stay below 1");
    let mut l0: u32 = 0;
    let mut shifted = &r << 1;
    while shifted < three_e {
        l0 += 1;
        shifted <<= 1;
    }
    let mut num =
        (&it.num << (2 * l0 + 1) as usize) + (&r << l0 as usize) - (BigInt::one() << it.e as usize);
    let mut e = it.e + 2 * l0 as u64 + 1;
    let strip = num.trailing_zeros().unwrap_or(0).min(e);
    if strip > 0 {
        num >>= strip as usize;
        e -= strip;
    }
    GeoIterate { num, e }
}

/// Residual numerator data of an iterate: the residual equals
/// `(R*2^l0 - 2^e) / (6 * 2^(e + 2*l0))`, positive by minimality of `l0`.
fn geo_residual_parts(it: &GeoIterate) -> (BigInt, u32, u64) {
    let three_e = BigInt::from(3) << it.e as usize;
    let r = &three_e - &it.num;
    let mut l0: u32 = 0;
    let mut shifted = &r << 1;
    while shifted < three_e {
        l0 += 1;
        shifted <<= 1;
    }
    let g = (r << l0 as usize) - (BigInt::one() << it.e as usize);
    debug_assert!(!g.is_negative());
    (g, l0, it.e)
}

/// An iteration presented through names: the `n`-th iterate and its
/// residual `|x_n - T(x_n)|`.
pub struct IterationRep {
    pub label: String,
    x: Box<dyn Fn(u64) -> RealName + Send + Sync>,
    residual: Box<dyn Fn(u64) -> RealName + Send + Sync>,
}

impl IterationRep {
    pub fn from_parts<X, R>(label: impl Into<String>, x: X, residual: R) -> Self
    where
        X: Fn(u64) -> RealName + Send + Sync + 'static,
        R: Fn(u64) -> RealName + Send + Sync + 'static,
    {
        IterationRep {
            label: label.into(),
            x: Box::new(x),
            residual: Box::new(residual),
        }
    }

    pub fn x(&self, n: u64) -> RealName {
        (self.x)(n)
    }

    pub fn residual(&self, n: u64) -> RealName {
        (self.residual)(n)
    }
}

/// Names for the fixture iteration: iterates through the truncated
/// Krasnoselskii computation, residuals as exact rationals.
pub fn iteration_rep(fix: Arc<MonotoneSequenceFixture>) -> IterationRep {
    let fx = Arc::clone(&fix);
    let fr = Arc::clone(&fix);
    IterationRep::from_parts(
        "monotone-series",
        move |n| {
            let f = Arc::clone(&fx);
            RealName::new(move |k| f.krasnoselskii(n, k))
        },
        move |n| RealName::constant(fr.residual(n)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateProvenance {
    /// Supplied by the caller, taken on faith until checked.
    Claimed,
    /// Computed from the exact iteration by scanning for the least index.
    BruteForced,
}

/// A rate of approximate solutions: `r(k)` is an index whose residual is
/// below `2^-k`. Finite table; querying beyond the built range is a caller
/// bug and panics.
#[derive(Debug, Clone)]
pub struct ApproxSolutionRate {
    pub provenance: RateProvenance,
    values: Vec<u64>,
}

impl ApproxSolutionRate {
    pub fn claimed<F>(f: F, kmax: u32) -> Self
    where
        F: Fn(u32) -> u64,
    {
        ApproxSolutionRate {
            provenance: RateProvenance::Claimed,
            values: (0..=kmax).map(f).collect(),
        }
    }

    /// Least index with exact residual below `2^-k`, for each `k <= kmax`.
    /// Residuals decrease along the iteration, so one monotone pass
    /// suffices; `max_n` guards against a target precision the iteration
    /// never reaches.
    pub fn brute_force(
        fix: &MonotoneSequenceFixture,
        kmax: u32,
        max_n: u64,
    ) -> Result<Self, RegulusError> {
        let mut values = Vec::with_capacity(kmax as usize + 1);
        let mut n: u64 = 0;
        for k in 0..=kmax {
            while !fix.residual_below_pow2(n, k) {
                n += 1;
                if n > max_n {
                    return Err(RegulusError::SearchExhausted {
                        stage: format!("approximate-solution rate at k={k}"),
                        bound: max_n,
                    });
                }
            }
            values.push(n);
        }
        Ok(ApproxSolutionRate {
            provenance: RateProvenance::BruteForced,
            values,
        })
    }

    pub fn kmax(&self) -> u32 {
        self.values.len() as u32 - 1
    }

    pub fn r(&self, k: u32) -> u64 {
        self.values[k as usize]
    }
}

/// Checks the rate against the iteration names: for each `k <= kmax` the
/// residual of `x_(r(k))`, read at precision `k+2`, must be below
/// `2^-k + 2^-(k+2)`. Returns the first offending `k` with the value read.
pub fn check_rate(
    rep: &IterationRep,
    rate: &ApproxSolutionRate,
    kmax: u32,
) -> Result<(), (u32, Rational)> {
    for k in 0..=kmax.min(rate.kmax()) {
        let v = rep.residual(rate.r(k)).approx(k + 2).abs();
        if v >= Rational::pow2(-(k as i32)) + Rational::pow2(-(k as i32) - 2) {
            return Err((k, v));
        }
    }
    Ok(())
}

/// Combines a regularity modulus for the residual with an
/// approximate-solution rate into a Cauchy rate for the iterates:
/// `psi(k) = r(rho(k+1))`. Requires the rate table to cover `rho(kmax+1)`.
pub fn cauchy_rate(
    rho: &Modulus,
    rate: &ApproxSolutionRate,
    kmax: u32,
) -> Result<Vec<u64>, RegulusError> {
    let needed = rho.eval(kmax + 1);
    if needed > rate.kmax() {
        return Err(RegulusError::InvalidProblem(format!(
            "rate table covers k <= {} but the Cauchy rate needs k = {}",
            rate.kmax(),
            needed
        )));
    }
    Ok((0..=kmax).map(|k| rate.r(rho.eval(k + 1))).collect())
}

/// Zero set of a function on `[0,1]`, for grid oracles.
#[derive(Debug, Clone)]
pub enum ZeroSetDesc {
    Point(Rational),
    Interval(Rational, Rational),
}

impl ZeroSetDesc {
    pub fn dist(&self, x: &Rational) -> Rational {
        match self {
            ZeroSetDesc::Point(p) => (x - p).abs(),
            ZeroSetDesc::Interval(lo, hi) => {
                if x < lo {
                    lo - x
                } else if x > hi {
                    x - hi
                } else {
                    Rational::zero()
                }
            }
        }
    }
}

/// Brute-forces a regularity modulus for `F` on `[0,1]` from a grid of step
/// `2^-depth`: `rho(n)` is the least `k` with
/// `2^-k + 2^(c-depth) <= min { |F(x)| : x on the grid, dist(x, Z) > 2^-n }`,
/// where `2^c` bounds the Lipschitz constant of `F`. The allowance
/// `2^(c-depth)` makes the certificate carry to the continuum:
/// `|F(x)| < 2^-rho(n)` implies `dist(x, Z) < 2^-n + 2^(1-depth)`.
///
/// Values beyond `n_max` extrapolate with slope 2 and are **not** certified
/// by the grid; stay within the built range.
pub fn brute_regularity_modulus(
    eval: &dyn Fn(&Rational) -> Rational,
    zero_set: &ZeroSetDesc,
    lipschitz_log2: i32,
    depth: u32,
    n_max: u32,
) -> Result<Modulus, RegulusError> {
    assert!(depth <= 26, "grid too large; use a specialized scan");
    let lambda = Rational::pow2(lipschitz_log2 - depth as i32);
    let mut bucket_min: Vec<Option<Rational>> = vec![None; n_max as usize + 1];
    let steps = 1u64 << depth;
    for j in 0..=steps {
        let x = Rational::from_big(BigInt::from(j), BigInt::one() << depth as usize);
        let d = zero_set.dist(&x);
        if d.is_zero() {
            continue;
        }
        let mut n0 = None;
        for n in 0..=n_max {
            if Rational::pow2(-(n as i32)) < d {
                n0 = Some(n);
                break;
            }
        }
        let Some(n0) = n0 else { continue };
        let fx = eval(&x).abs();
        let slot = &mut bucket_min[n0 as usize];
        if slot.as_ref().is_none_or(|cur| fx < *cur) {
            *slot = Some(fx);
        }
    }
    let mut table = Vec::with_capacity(n_max as usize + 1);
    let mut running: Option<Rational> = None;
    for n in 0..=n_max {
        if let Some(b) = &bucket_min[n as usize] {
            if running.as_ref().is_none_or(|cur| b < cur) {
                running = Some(b.clone());
            }
        }
        let k = match &running {
            // nothing lies farther than 2^-n from the zero set
            None => 0,
            Some(m) => {
                let margin = m - &(&lambda + &lambda);
                if !margin.is_positive() {
                    return Err(RegulusError::GridTooCoarse { depth, needed: n });
                }
                let target = m - &lambda;
                let mut k = 0u32;
                while Rational::pow2(-(k as i32)) > target {
                    k += 1;
                }
                k
            }
        };
        table.push(k);
    }
    let last = *table.last().unwrap() as i64;
    Ok(Modulus::from_table(table, 2, last - 2 * n_max as i64))
}

/// Integer-only variant of [`brute_regularity_modulus`] for the geometric
/// fixture's residual, whose value at `x = j/2^d` with `u = 2^d - j` is
/// exactly `(3*2^l0*u - 2^d) / (6*2^d*4^l0)`, `l0 = max(0, d-1-ilog2(u))`.
/// Supports the deep grids (about `2^24`) that the quadratic flatness near
/// the fixed point demands, where allocating rationals per grid point would
/// dominate the run.
pub fn geometric_brute_modulus(depth: u32, n_max: u32) -> Result<Modulus, RegulusError> {
    assert!((2..=40).contains(&depth));
    assert!(n_max < depth);
    // per bucket: minimal residual as (g, l0) with value g / (6*2^d*4^l0)
    let mut bucket_min: Vec<Option<(u128, u32)>> = vec![None; n_max as usize + 1];
    let d = depth;
    let less = |a: &(u128, u32), b: &(u128, u32)| -> bool {
        // a.g / 4^a.l < b.g / 4^b.l
        a.0 << (2 * b.1) < b.0 << (2 * a.1)
    };
    for u in 1u64..=(1u64 << d) {
        // dist to the fixed point 1 is u/2^d; least n with 2^-n < u/2^d
        // means 2^(d-n) < u
        let mut n0 = None;
        for n in 0..=n_max {
            if (1u128 << (d - n)) < u as u128 {
                n0 = Some(n);
                break;
            }
        }
        let Some(n0) = n0 else { continue };
        let il = 63 - u.leading_zeros();
        let l0 = (d as i64 - 1 - il as i64).max(0) as u32;
        let g = 3u128 * ((u as u128) << l0) - (1u128 << d);
        debug_assert!(g > 0);
        let cand = (g, l0);
        let slot = &mut bucket_min[n0 as usize];
        if slot.as_ref().is_none_or(|cur| less(&cand, cur)) {
            *slot = Some(cand);
        }
    }
    let mut table = Vec::with_capacity(n_max as usize + 1);
    let mut running: Option<(u128, u32)> = None;
    for n in 0..=n_max {
        if let Some(b) = bucket_min[n as usize] {
            if running.is_none_or(|cur| less(&b, &cur)) {
                running = Some(b);
            }
        }
        let k = match running {
            None => 0,
            Some((g, l0)) => {
                // grid allowance lambda = 2^-d (the residual is
                // 1/2-Lipschitz); require m - 2*lambda > 0, then find the
                // least k with 2^-k <= m - lambda where m = g/(6*2^d*4^l0)
                let denom_shift = d as u64 + 2 * l0 as u64; // m = g / (6 << shift)
                let twelve = 12u128 << (2 * l0);
                if g <= twelve {
                    return Err(RegulusError::GridTooCoarse { depth, needed: n });
                }
                let six = 6u128 << (2 * l0);
                let target_num = g - six; // (m - lambda) = target_num / (6 << shift)
                let mut k = 0u32;
                // 2^-k <= target_num / (6 * 2^denom_shift)
                while (6u128 << denom_shift) > (target_num << k) {
                    k += 1;
                    assert!(k <= d + 2, "allowance should have caught this");
                }
                k
            }
        };
        table.push(k);
    }
    let last = *table.last().unwrap() as i64;
    Ok(Modulus::from_table(table, 2, last - 2 * n_max as i64))
}

/// A grid counterexample to a claimed regularity modulus: a point whose
/// `F`-value is below the modulus threshold while it sits measurably
/// farther from the zero set than `2^-n` allows.
#[derive(Debug, Clone)]
pub struct DivergenceWitness {
    pub n: u32,
    pub x: Rational,
    pub f_value: Rational,
    pub dist: Rational,
}

/// Scans a `2^-depth` grid on `[0,1]` for a counterexample to
/// `|F(x)| < 2^-rho(n) => dist(x, Z) < 2^-n`. The slack `2^(1-depth)` on
/// the distance side keeps boundary effects from flagging a valid modulus:
/// a witness is only reported when even the slackened implication fails,
/// which a genuinely valid modulus never allows on grid points.
pub fn find_modulus_divergence(
    eval: &dyn Fn(&Rational) -> Rational,
    zero_set: &ZeroSetDesc,
    rho: &Modulus,
    depth: u32,
    n_max: u32,
) -> Option<DivergenceWitness> {
    assert!(depth <= 22, "divergence grid too large");
    let steps = 1u64 << depth;
    let slack = Rational::pow2(1 - depth as i32);
    for n in 0..=n_max {
        let thr = Rational::pow2(-(rho.eval(n) as i32));
        let dist_bound = Rational::pow2(-(n as i32)) + slack.clone();
        for j in 0..=steps {
            let x = Rational::from_big(BigInt::from(j), BigInt::one() << depth as usize);
            let fx = eval(&x).abs();
            if fx < thr {
                let d = zero_set.dist(&x);
                if d > dist_bound {
                    return Some(DivergenceWitness {
                        n,
                        x,
                        f_value: fx,
                        dist: d,
                    });
                }
            }
        }
    }
    None
}
