//! Represented compact metric spaces and the moduli that drive the solvers.
//!
//! A space is a dense sequence presented through two oracles: a distance
//! oracle `(i, j) -> RealName` and a total-boundedness modulus `alpha` such
//! that every point of the space is within `2^-k` of some `a_i` with
//! `i <= alpha(k)`. Nothing else about the space is assumed; the `Geometry`
//! tag exists so front ends can pretty-print points and so structured
//! solvers can recognize grids they know closed forms for.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::One;

use crate::rational::{sqrt_dyadic, Rational};
use crate::real::RealName;
use crate::trees::BinaryTree;
use crate::RegulusError;

/// A normalized modulus `N -> N`: monotone and at least the identity.
///
/// Raw user input `g` is normalized to `k |-> max(g(0..=k), k)` on first
/// query; every consumer in this crate may therefore assume monotonicity and
/// `eval(k) >= k` without checking. Values are memoized.
pub struct Modulus {
    raw: Box<dyn Fn(u32) -> u32 + Send + Sync>,
    normalized: Mutex<Vec<u32>>,
}

impl Modulus {
    pub fn from_fn<F>(raw: F) -> Self
    where
        F: Fn(u32) -> u32 + Send + Sync + 'static,
    {
        Modulus {
            raw: Box::new(raw),
            normalized: Mutex::new(Vec::new()),
        }
    }

    /// `k |-> u*k + v` (saturating, clamped at zero before normalization).
    pub fn affine(u: u32, v: i64) -> Self {
        Modulus::from_fn(move |k| {
            let val = (u as i64).saturating_mul(k as i64).saturating_add(v);
            val.clamp(0, u32::MAX as i64) as u32
        })
    }

    pub fn identity() -> Self {
        Modulus::affine(1, 0)
    }

    /// Explicit prefix with an affine tail: `table[k]` for `k < table.len()`,
    /// `tail_u*k + tail_v` beyond.
    pub fn from_table(table: Vec<u32>, tail_u: u32, tail_v: i64) -> Self {
        Modulus::from_fn(move |k| match table.get(k as usize) {
            Some(&v) => v,
            None => {
                let val = (tail_u as i64)
                    .saturating_mul(k as i64)
                    .saturating_add(tail_v);
                val.clamp(0, u32::MAX as i64) as u32
            }
        })
    }

    /// Normalized value at `k`.
    pub fn eval(&self, k: u32) -> u32 {
        let mut norm = self.normalized.lock().unwrap();
        while norm.len() <= k as usize {
            let i = norm.len() as u32;
            let prev = if i == 0 { 0 } else { norm[i as usize - 1] };
            let v = prev.max((self.raw)(i)).max(i);
            norm.push(v);
        }
        norm[k as usize]
    }
}

impl std::fmt::Debug for Modulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Modulus{:?}", self.normalized.lock().unwrap())
    }
}

/// Square-ring pairing of `N x N`: ring `s = max(i, j)`, walked first along
/// `j = s` with `i` ascending, then along `i = s` with `j` descending. Rings
/// are visited in order, so bounding both coordinates bounds the code.
pub fn pair(i: u64, j: u64) -> u64 {
    let s = i.max(j);
    if j >= i {
        s * s + i
    } else {
        s * s + 2 * s - j
    }
}

/// Inverse of [`pair`].
pub fn unpair(n: u64) -> (u64, u64) {
    let s = n.isqrt();
    let t = n - s * s;
    if t <= s {
        (t, s)
    } else {
        (s, 2 * s - t)
    }
}

/// Structure tag for a space, used for point display and by structured
/// solvers; the oracles are authoritative, the tag is advisory.
#[derive(Debug, Clone)]
pub enum Geometry {
    /// Dyadic rationals in `[0,1]` enumerated breadth-first by denominator
    /// level: `a_0 = 0`, `a_1 = 1`, then each level `m >= 1` lists the odd
    /// numerators `1/2^m, 3/2^m, ...` in ascending order.
    IntervalDyadic {
        depth: u32,
    },
    /// Square-ring pairing of two component spaces.
    Product(Box<Geometry>, Box<Geometry>),
    /// Finite binary strings under the `(length, lexicographic)` order,
    /// viewed as eventually-zero points of Baire space.
    BaireStrings {
        tree: Arc<BinaryTree>,
    },
    Opaque,
}

type DistFn = Box<dyn Fn(u64, u64) -> RealName + Send + Sync>;
type AlphaFn = Box<dyn Fn(u32) -> u64 + Send + Sync>;

/// A represented compact metric space: dense sequence with a distance oracle
/// and a total-boundedness modulus.
pub struct CompactSpaceRep {
    pub label: String,
    /// Diameter bound `2^diam_log2`, needed by the product metric's
    /// precision bookkeeping.
    pub diam_log2: u32,
    pub geometry: Geometry,
    dist: DistFn,
    alpha: AlphaFn,
}

impl CompactSpaceRep {
    pub fn from_parts<D, A>(
        label: impl Into<String>,
        diam_log2: u32,
        geometry: Geometry,
        dist: D,
        alpha: A,
    ) -> Self
    where
        D: Fn(u64, u64) -> RealName + Send + Sync + 'static,
        A: Fn(u32) -> u64 + Send + Sync + 'static,
    {
        CompactSpaceRep {
            label: label.into(),
            diam_log2,
            geometry,
            dist: Box::new(dist),
            alpha: Box::new(alpha),
        }
    }

    /// Name of `d(a_i, a_j)`.
    pub fn dist(&self, i: u64, j: u64) -> RealName {
        (self.dist)(i, j)
    }

    /// Net bound: every point of the space is within `2^-k` of some `a_i`
    /// with `i <= alpha(k)`.
    pub fn alpha(&self, k: u32) -> u64 {
        (self.alpha)(k)
    }

    /// Human-readable rendering of `a_i` (exact where the geometry is known).
    pub fn point_label(&self, i: u64) -> String {
        point_label_for(&self.geometry, i)
    }
}

fn point_label_for(geometry: &Geometry, i: u64) -> String {
    match geometry {
        Geometry::IntervalDyadic { .. } => interval_value_of_index(i).to_string(),
        Geometry::Product(a, b) => {
            let (l, r) = unpair(i);
            format!("({},{})", point_label_for(a, l), point_label_for(b, r))
        }
        Geometry::BaireStrings { .. } => {
            let s = crate::trees::index_to_string(i);
            format!("{}*0inf", s)
        }
        Geometry::Opaque => format!("a[{}]", i),
    }
}

/// Value of the `i`-th point of the dyadic-interval enumeration.
pub fn interval_value_of_index(i: u64) -> Rational {
    match i {
        0 => Rational::zero(),
        1 => Rational::one(),
        _ => {
            let m = 64 - (i - 1).leading_zeros(); // level: 2^(m-1) < i <= 2^m
            let t = i - (1u64 << (m - 1)) - 1;
            Rational::from_big(BigInt::from(2 * t + 1), BigInt::one() << m as usize)
        }
    }
}

/// Index of a dyadic value `v in [0,1]` in the interval enumeration; `None`
/// if `v` is not dyadic or out of range.
pub fn interval_index_of_value(v: &Rational) -> Option<u64> {
    if v.is_negative() || *v > Rational::one() {
        return None;
    }
    if v.is_zero() {
        return Some(0);
    }
    if *v == Rational::one() {
        return Some(1);
    }
    // lowest terms: denominator must be 2^m, numerator odd
    let den = v.denom();
    let m = den.bits() - 1;
    if &(BigInt::one() << m) != den || m == 0 || m > 62 {
        return None;
    }
    let j: u64 = v.numer().try_into().ok()?;
    Some((1u64 << (m - 1)) + (j - 1) / 2 + 1)
}

/// The dyadic rationals of `[0,1]`, enumerated breadth-first by denominator
/// level, with distance `|a_i - a_j|` (exact) and net modulus
/// `alpha(k) = 2^(k+1)`. `depth` caps the usable net precision: `alpha(k)`
/// panics for `k + 1 > depth`.
pub fn interval_space(depth: u32) -> CompactSpaceRep {
    assert!((1..=62).contains(&depth), "interval depth out of range");
    CompactSpaceRep::from_parts(
        format!("dyadic[0,1]/{}", depth),
        0,
        Geometry::IntervalDyadic { depth },
        |i, j| {
            let d = (interval_value_of_index(i) - interval_value_of_index(j)).abs();
            RealName::constant(d)
        },
        move |k| {
            assert!(
                k < depth,
                "interval net precision {} exceeds configured depth {}",
                k,
                depth
            );
            1u64 << (k + 1)
        },
    )
}

/// Product of two represented spaces under the Euclidean combination
/// `d((x1,x2),(y1,y2)) = sqrt(d1^2 + d2^2)`, with points enumerated by the
/// square-ring pairing.
///
/// Precision bookkeeping for the distance name: with `D = 2^dl` bounding both
/// component diameters, querying the component distances at
/// `p = 2k + 7 + dl` makes the exact radicand error at most `2^-(2k+4)`,
/// hence the root error at most `2^-(k+2)`; the dyadic square root adds
/// another `2^-(k+2)`, total `2^-(k+1) < 2^-k`.
pub fn product_space(a: CompactSpaceRep, b: CompactSpaceRep) -> CompactSpaceRep {
    let dl = a.diam_log2.max(b.diam_log2);
    let label = format!("{} x {}", a.label, b.label);
    let geometry = Geometry::Product(Box::new(a.geometry.clone()), Box::new(b.geometry.clone()));
    let a = Arc::new(a);
    let b = Arc::new(b);
    let (ad, bd) = (Arc::clone(&a), Arc::clone(&b));
    let dist = move |n1: u64, n2: u64| {
        let (i1, j1) = unpair(n1);
        let (i2, j2) = unpair(n2);
        let d1 = ad.dist(i1, i2);
        let d2 = bd.dist(j1, j2);
        let dl = dl;
        RealName::new(move |k| {
            let p = 2 * k + 7 + dl;
            let q1 = d1.approx(p);
            let q2 = d2.approx(p);
            let u = &q1 * &q1 + &q2 * &q2;
            sqrt_dyadic(&u, k + 2)
        })
    };
    let alpha = move |k: u32| {
        let m = a.alpha(k + 1).max(b.alpha(k + 1));
        (m + 1) * (m + 1) - 1
    };
    CompactSpaceRep::from_parts(label, dl + 1, geometry, dist, alpha)
}

type ValueFn = Box<dyn Fn(u64) -> RealName + Send + Sync>;

/// A uniformly continuous `F` on a represented space, presented pointwise on
/// the dense sequence together with its modulus of uniform continuity
/// `omega`: `d(x,y) < 2^-omega(k)` implies `|F(x) - F(y)| < 2^-k`.
pub struct UcFunctionRep {
    pub label: String,
    omega: Modulus,
    value: ValueFn,
    cache: Mutex<HashMap<u64, RealName>>,
}

impl UcFunctionRep {
    pub fn from_parts<V>(label: impl Into<String>, omega: Modulus, value: V) -> Self
    where
        V: Fn(u64) -> RealName + Send + Sync + 'static,
    {
        UcFunctionRep {
            label: label.into(),
            omega,
            value: Box::new(value),
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Name of `F(a_i)`, cached per index so repeated scans share
    /// approximants.
    pub fn value(&self, i: u64) -> RealName {
        if let Some(n) = self.cache.lock().unwrap().get(&i) {
            return n.clone();
        }
        let n = (self.value)(i);
        self.cache.lock().unwrap().entry(i).or_insert(n).clone()
    }

    pub fn omega(&self) -> &Modulus {
        &self.omega
    }
}

/// Pointwise interval evaluator: `(i, p) -> [lo, hi]` enclosing `F(a_i)`
/// with `hi - lo <= 2^-p`.
pub type IntervalEvaluator = Box<dyn Fn(u64, u32) -> (Rational, Rational) + Send + Sync>;

/// Wraps an interval evaluator of a `2^-c`-scale Lipschitz function into a
/// represented function with `omega(k) = k + c`.
///
/// The evaluator contract (enclosure of width at most `2^-p`) is probed on a
/// few sample queries at construction; a violation yields
/// `EvaluatorNotConvergent`. Midpoints of width-`2^-(k)` enclosures are
/// within `2^-(k+1)` of the value, so they satisfy the name contract with
/// room to spare.
pub fn lipschitz_function(
    label: impl Into<String>,
    evaluator: IntervalEvaluator,
    c: u32,
) -> Result<UcFunctionRep, RegulusError> {
    for i in 0..3u64 {
        for p in [0u32, 4, 8] {
            let (lo, hi) = evaluator(i, p);
            let width = &hi - &lo;
            if width.is_negative() || width > Rational::pow2(-(p as i32)) {
                return Err(RegulusError::EvaluatorNotConvergent {
                    index: i,
                    precision: p,
                    width: width.to_string(),
                });
            }
        }
    }
    let evaluator = Arc::new(evaluator);
    Ok(UcFunctionRep::from_parts(
        label,
        Modulus::affine(1, c as i64),
        move |i| {
            let ev = Arc::clone(&evaluator);
            RealName::new(move |k| {
                let (lo, hi) = ev(i, k);
                let width = &hi - &lo;
                assert!(
                    !width.is_negative() && width <= Rational::pow2(-(k as i32)),
                    "evaluator enclosure violated its contract at i={i}, p={k}"
                );
                (lo + hi) / Rational::from_int(2)
            })
        },
    ))
}

/// A compact subset of a normed space: the base metric representation plus a
/// norm oracle, a modulus of uniform convexity `eta` (carried for callers
/// that need it; the solvers here consume a modulus of uniqueness instead),
/// and an integer bound `norm_bound >= ||a_i||` for all `i`.
pub struct NormedCompactRep {
    pub base: Arc<CompactSpaceRep>,
    pub eta: Modulus,
    pub norm_bound: u64,
    norm: ValueFn,
}

impl NormedCompactRep {
    pub fn from_parts<N>(base: Arc<CompactSpaceRep>, eta: Modulus, norm_bound: u64, norm: N) -> Self
    where
        N: Fn(u64) -> RealName + Send + Sync + 'static,
    {
        NormedCompactRep {
            base,
            eta,
            norm_bound,
            norm: Box::new(norm),
        }
    }

    /// Norm given as distance to the point with index `origin` (the usual
    /// case: the origin belongs to the dense sequence, so the norm oracle
    /// and the distance oracle share one approximation pipeline).
    pub fn with_norm_to_origin(
        base: CompactSpaceRep,
        eta: Modulus,
        norm_bound: u64,
        origin: u64,
    ) -> Self {
        let base = Arc::new(base);
        let for_norm = Arc::clone(&base);
        NormedCompactRep {
            base,
            eta,
            norm_bound,
            norm: Box::new(move |i| for_norm.dist(i, origin)),
        }
    }

    /// Name of `||a_i||`.
    pub fn norm(&self, i: u64) -> RealName {
        (self.norm)(i)
    }
}
