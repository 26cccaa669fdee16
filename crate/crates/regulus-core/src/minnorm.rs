//! Minimal-norm zero selection on represented compact subsets of normed
//! spaces.
//!
//! Given `F` with a regularity modulus `rho` and a modulus of uniqueness
//! `phi` for the norm over `zer F` (any two near-minimal-norm zeros are
//! close), stage `k` scans the `2^-q`-net for the points where `|F|` is
//! certified small, picks the least index minimizing the norm approximant,
//! and the resulting point is within `2^-k` of the unique minimal-norm zero.
//! The admissible set is decided through one non-strict threshold test per
//! point, so the stage is a finite exact computation.
//!
//! A literal scan touches `alpha(q)` points, which is hopeless on product
//! grids (the fixture bound is ~2^32). For the grid geometries this crate
//! ships, the admissible set and the norm quantization have closed forms,
//! and the structured solvers below compute the same stage output in
//! logarithmic time. They are not heuristics: each one reproduces the scan
//! answer exactly (the equivalence is property-tested on small grids), and
//! they refuse geometries they do not recognize instead of guessing.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::rational::{isqrt, sqrt_dyadic, Rational};
use crate::spaces::{unpair, Geometry, Modulus, NormedCompactRep, UcFunctionRep};
use crate::zerofind::VerifyReport;
use crate::{RegulusError, SearchCap};

/// Per-stage sample size recorded in certificates.
pub const SAMPLE_LIMIT: usize = 32;

/// Iteration budget for the strip solver's sample walk; the walk only
/// illustrates the admissible set, so it may stop short on thin strips.
const STRIP_SAMPLE_SCAN_CAP: u64 = 1 << 22;

/// One completed stage: the derived parameters, the admissible-set evidence
/// (exact count plus the first few members in index order), and the winner
/// with its exact test values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinNormStage {
    pub k: u32,
    /// Norms are read at this precision: `P = phi(k+1) + 2`.
    pub p_precision: u32,
    /// `|F|` is read at this precision: `K = rho(P) + 2`.
    pub big_k: u32,
    /// The stage ranges over indices `0..=l_bound`.
    pub l_bound: u64,
    /// Admissibility is `|F(a_n)|(big_k) <= threshold`, `2^-(rho(P)+1)`.
    pub threshold: Rational,
    pub admissible_count: u128,
    /// First admissible indices in ascending order, at most [`SAMPLE_LIMIT`].
    pub sample: Vec<u64>,
    /// True when `sample` lists the whole admissible set.
    pub sample_complete: bool,
    /// Least index minimizing the norm approximant over the admissible set.
    pub index: u64,
    /// `(||a_index||)(p_precision)`.
    pub norm_approx: Rational,
    /// `(F(a_index))(big_k)`.
    pub f_approx: Rational,
}

/// Grid problems the structured solvers recognize. The forms assert what the
/// function oracle computes; construction-time validation cross-checks the
/// claim against the space geometry, and the scan-equivalence tests pin the
/// semantics.
#[derive(Debug, Clone)]
pub enum StructuredForm {
    /// `F(x) = dist(x, [lo, hi])` on the dyadic interval enumeration.
    IntervalDistance { lo: Rational, hi: Rational },
    /// `F(x) = (x - center)^2` on the dyadic interval enumeration.
    IntervalSquaredDistance { center: Rational },
    /// `F(x, y) = |x + y - 1| / sqrt(2)` on the paired product of two dyadic
    /// interval enumerations, i.e. distance to the antidiagonal segment.
    AntidiagonalSegment,
}

#[derive(Debug, Clone)]
pub enum MinNormStrategy {
    /// Literal scan of `0..=alpha(q)`. Exact but only viable for small nets.
    Scan,
    /// Closed-form solver for a recognized grid problem.
    Structured(StructuredForm),
}

pub(crate) struct StageParams {
    pub k: u32,
    pub p: u32,
    pub big_k: u32,
    pub q_exp: u32,
    pub l_bound: u64,
    pub tau: Rational,
}

/// Runs stage `k`. `rho` is the regularity modulus of `F`; `phi` is the
/// modulus of uniqueness of the norm over the zero set.
pub fn find_min_norm_zero(
    rep: &NormedCompactRep,
    f: &UcFunctionRep,
    rho: &Modulus,
    phi: &Modulus,
    k: u32,
    strategy: &MinNormStrategy,
    cap: SearchCap,
) -> Result<MinNormStage, RegulusError> {
    let p = phi.eval(k + 1) + 2;
    let rho_p = rho.eval(p);
    let big_k = rho_p + 2;
    let q_exp = p.max(f.omega().eval(big_k));
    let l_bound = rep.base.alpha(q_exp);
    let tau = Rational::pow2(-(rho_p as i32) - 1);
    let params = StageParams {
        k,
        p,
        big_k,
        q_exp,
        l_bound,
        tau,
    };
    match strategy {
        MinNormStrategy::Scan => scan_stage(rep, f, &params, cap),
        MinNormStrategy::Structured(form) => structured_stage(rep, f, &params, form),
    }
}

/// Modulus of uniqueness valid in any inner-product space for the norm over
/// a convex zero set of diameter at most `d`: phi(k) = 2k + 4 + ceil_log2(d+1)
/// (parallelogram law; the `+2` slack absorbs approximant error).
pub fn hilbert_uniqueness_modulus(d: u64) -> Modulus {
    let c = ceil_log2_u64(d + 1);
    Modulus::affine(2, 4 + c as i64)
}

fn ceil_log2_u64(x: u64) -> u32 {
    assert!(x >= 1);
    if x == 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

pub(crate) fn scan_stage(
    rep: &NormedCompactRep,
    f: &UcFunctionRep,
    params: &StageParams,
    cap: SearchCap,
) -> Result<MinNormStage, RegulusError> {
    let stage_name = format!("minnorm stage {} scan", params.k);
    cap.admit(&stage_name, params.l_bound)?;
    let mut count: u128 = 0;
    let mut sample = Vec::new();
    let mut best: Option<(Rational, u64)> = None;
    for n in 0..=params.l_bound {
        if !f.value(n).abs_approx_at_most(&params.tau, params.big_k) {
            continue;
        }
        count += 1;
        if sample.len() < SAMPLE_LIMIT {
            sample.push(n);
        }
        let norm = rep.norm(n).approx(params.p);
        match &best {
            Some((b, _)) if *b <= norm => {}
            _ => best = Some((norm, n)),
        }
    }
    let (norm_approx, index) = best.ok_or(RegulusError::EmptyAdmissibleSet {
        k: params.k,
        l_bound: params.l_bound,
        big_k: params.big_k,
    })?;
    let f_approx = f.value(index).approx(params.big_k);
    let sample_complete = sample.len() as u128 == count;
    Ok(MinNormStage {
        k: params.k,
        p_precision: params.p,
        big_k: params.big_k,
        l_bound: params.l_bound,
        threshold: params.tau.clone(),
        admissible_count: count,
        sample,
        sample_complete,
        index,
        norm_approx,
        f_approx,
    })
}

pub(crate) fn structured_stage(
    rep: &NormedCompactRep,
    f: &UcFunctionRep,
    params: &StageParams,
    form: &StructuredForm,
) -> Result<MinNormStage, RegulusError> {
    match form {
        StructuredForm::IntervalDistance { lo, hi } => {
            if lo.is_negative() || hi > &Rational::one() || lo > hi {
                return Err(RegulusError::InvalidProblem(
                    "interval-distance form needs 0 <= lo <= hi <= 1".into(),
                ));
            }
            let mbar = interval_grid_depth(rep, params)?;
            // F(j/2^mbar) <= tau iff lo - tau <= j/2^mbar <= hi + tau
            let scale = Rational::pow2(mbar as i32);
            let j_lo_raw = ((lo - &params.tau) * &scale).ceil_scaled(0);
            let j_hi_raw = ((hi + &params.tau) * &scale).floor_scaled(0);
            interval_stage(rep, f, params, mbar, &j_lo_raw, &j_hi_raw)
        }
        StructuredForm::IntervalSquaredDistance { center } => {
            if center.is_negative() || center > &Rational::one() {
                return Err(RegulusError::InvalidProblem(
                    "squared-distance form needs 0 <= center <= 1".into(),
                ));
            }
            let mbar = interval_grid_depth(rep, params)?;
            let gamma = center * &Rational::pow2(mbar as i32);
            if !gamma.is_integer() {
                return Err(RegulusError::InvalidProblem(
                    "squared-distance center is off the solver grid; use the scan strategy".into(),
                ));
            }
            let gamma = gamma.floor_scaled(0);
            // (j - gamma)^2 <= tau * 4^mbar, both sides integers
            let t_cap = params.tau.floor_scaled(2 * mbar);
            let w = isqrt(&t_cap);
            interval_stage(rep, f, params, mbar, &(&gamma - &w), &(gamma + w))
        }
        StructuredForm::AntidiagonalSegment => strip_stage(rep, f, params),
    }
}

/// Depth of the solver grid for the interval forms: the net `0..=alpha(q)`
/// is exactly the dyadic numerators at scale `2^-(q+1)`.
fn interval_grid_depth(rep: &NormedCompactRep, params: &StageParams) -> Result<u32, RegulusError> {
    match rep.base.geometry {
        Geometry::IntervalDyadic { .. } => {}
        _ => {
            return Err(RegulusError::InvalidProblem(
                "interval form on a non-interval geometry".into(),
            ))
        }
    }
    let mbar = params.q_exp + 1;
    if params.l_bound != 1u64 << mbar {
        return Err(RegulusError::InvalidProblem(
            "net bound disagrees with the interval grid closed form".into(),
        ));
    }
    Ok(mbar)
}

/// Shared tail of the interval forms: the admissible set is the numerator
/// window `[j_lo, j_hi]` (pre-clamp) at scale `2^-mbar`, the norm approximant
/// of `j/2^mbar` is the exact value itself, so the winner is the least
/// numerator in the window.
fn interval_stage(
    rep: &NormedCompactRep,
    f: &UcFunctionRep,
    params: &StageParams,
    mbar: u32,
    j_lo_raw: &BigInt,
    j_hi_raw: &BigInt,
) -> Result<MinNormStage, RegulusError> {
    let m_big = BigInt::from(1u64) << mbar;
    let zero = BigInt::from(0);
    let j_lo = j_lo_raw.max(&zero).clone();
    let j_hi = j_hi_raw.min(&m_big).clone();
    if j_lo > j_hi {
        return Err(RegulusError::EmptyAdmissibleSet {
            k: params.k,
            l_bound: params.l_bound,
            big_k: params.big_k,
        });
    }
    let j_lo: u64 = (&j_lo).try_into().expect("window clamped to [0, 2^mbar]");
    let j_hi: u64 = (&j_hi).try_into().expect("window clamped to [0, 2^mbar]");
    let count = (j_hi - j_lo + 1) as u128;
    let sample = interval_sample(j_lo, j_hi, mbar);
    let sample_complete = count <= SAMPLE_LIMIT as u128;
    debug_assert!(!sample_complete || sample.len() as u128 == count);
    let index = index_of_numerator(j_lo, mbar);
    let norm_approx = rep.norm(index).approx(params.p);
    let f_approx = f.value(index).approx(params.big_k);
    Ok(MinNormStage {
        k: params.k,
        p_precision: params.p,
        big_k: params.big_k,
        l_bound: params.l_bound,
        threshold: params.tau.clone(),
        admissible_count: count,
        sample,
        sample_complete,
        index,
        norm_approx,
        f_approx,
    })
}

/// Numerator of `a_i` at scale `2^-mbar` (the index's level must not exceed
/// `mbar`).
fn numerator_of_index(i: u64, mbar: u32) -> u64 {
    match i {
        0 => 0,
        1 => 1u64 << mbar,
        _ => {
            let m = 64 - (i - 1).leading_zeros();
            assert!(m <= mbar, "index level exceeds grid depth");
            let t = i - (1u64 << (m - 1)) - 1;
            (2 * t + 1) << (mbar - m)
        }
    }
}

/// Inverse of [`numerator_of_index`] for `0 <= j <= 2^mbar`.
fn index_of_numerator(j: u64, mbar: u32) -> u64 {
    if j == 0 {
        return 0;
    }
    if j == 1u64 << mbar {
        return 1;
    }
    let tz = j.trailing_zeros();
    let m = mbar - tz;
    let t = ((j >> tz) - 1) / 2;
    (1u64 << (m - 1)) + t + 1
}

/// First `SAMPLE_LIMIT` admissible indices in index order: indices ascend
/// level by level, so walk levels and pick the window numerators of each.
fn interval_sample(j_lo: u64, j_hi: u64, mbar: u32) -> Vec<u64> {
    let mut sample = Vec::new();
    if j_lo == 0 {
        sample.push(0);
    }
    if j_hi == 1u64 << mbar && sample.len() < SAMPLE_LIMIT {
        sample.push(1);
    }
    for level in 1..=mbar {
        if sample.len() >= SAMPLE_LIMIT {
            break;
        }
        let step = 1u64 << (mbar - level);
        let mut t = j_lo.div_ceil(step);
        if t.is_multiple_of(2) {
            t += 1;
        }
        while t * step <= j_hi && sample.len() < SAMPLE_LIMIT {
            sample.push((1u64 << (level - 1)) + (t - 1) / 2 + 1);
            t += 2;
        }
    }
    sample
}

/// Closed-form stage for the antidiagonal strip on a paired product grid.
///
/// Writing `M = 2^mbar` and numerators `g, h` for the two coordinates, a
/// pair is admissible iff `s = g + h - M` satisfies `s^2 <= S2`, and its
/// norm approximant is `Q(g^2 + h^2) / 2^(P+2)` with `Q` a monotone integer
/// quantization. The solver finds the minimal quantized norm over the strip
/// via balanced splits, then binary-searches the least ring whose index box
/// contains a norm-minimal strip pair, then walks the partner levels in
/// index order. Every step is an exact integer computation.
fn strip_stage(
    rep: &NormedCompactRep,
    _f: &UcFunctionRep,
    params: &StageParams,
) -> Result<MinNormStage, RegulusError> {
    match &rep.base.geometry {
        Geometry::Product(a, b) => match (a.as_ref(), b.as_ref()) {
            (Geometry::IntervalDyadic { .. }, Geometry::IntervalDyadic { .. }) => {}
            _ => {
                return Err(RegulusError::InvalidProblem(
                    "strip form needs a product of two interval grids".into(),
                ))
            }
        },
        _ => {
            return Err(RegulusError::InvalidProblem(
                "strip form on a non-product geometry".into(),
            ))
        }
    }
    let mbar = params.q_exp + 2;
    if mbar > 30 {
        return Err(RegulusError::InvalidProblem(
            "strip grid deeper than the solver's integer range".into(),
        ));
    }
    let m: u64 = 1u64 << mbar;
    if params.l_bound != (m + 1) * (m + 1) - 1 {
        return Err(RegulusError::InvalidProblem(
            "net bound disagrees with the product grid closed form".into(),
        ));
    }
    // membership: s^2 * 4^(K+2) < 2(W+1)^2 * 4^mbar with W = tau * 2^(K+2)
    let w_rat = &params.tau * &Rational::pow2(params.big_k as i32 + 2);
    if !w_rat.is_integer() || w_rat.is_negative() {
        return Err(RegulusError::InvalidProblem(
            "threshold is not dyadic at the test precision".into(),
        ));
    }
    let w_int: u128 = (&w_rat.floor_scaled(0))
        .try_into()
        .ok()
        .filter(|w: &u128| *w <= 1 << 30)
        .ok_or_else(|| RegulusError::InvalidProblem("threshold overflows the solver".into()))?;
    let lead = 2 * (w_int + 1) * (w_int + 1);
    let s2_cap: u128 = if mbar >= params.big_k + 2 {
        let sh = 2 * (mbar - params.big_k - 2);
        lead.checked_shl(sh).filter(|v| *v >= 1).ok_or_else(|| {
            RegulusError::InvalidProblem("strip width overflows the solver".into())
        })? - 1
    } else {
        (lead - 1) >> (2 * (params.big_k + 2 - mbar)).min(127)
    };
    let s_abs = s2_cap.isqrt().min(m as u128) as i128;
    if s_abs > 1 << 20 {
        return Err(RegulusError::InvalidProblem(
            "strip is too wide for the closed-form walk; use the scan strategy".into(),
        ));
    }
    let in_strip = |s: i128| s * s <= s2_cap as i128;

    // norm quantization Q(q) = isqrt(floor(q * 4^(P+2) / 4^mbar))
    let shift: i64 = 2 * (params.p as i64 + 2) - 2 * mbar as i64;
    let quantize = |q: u128| -> BigInt {
        let big = BigInt::from(q);
        let scaled = if shift >= 0 {
            big << (shift as u64)
        } else {
            big >> ((-shift) as u64)
        };
        isqrt(&scaled)
    };

    // minimal quantized norm over the strip: for fixed s the radicand is
    // minimized by the balanced split of sigma = M + s
    let mut q_min: Option<BigInt> = None;
    for s in -s_abs..=s_abs {
        let sigma = (m as i128 + s) as u128;
        let g = sigma / 2;
        let h = sigma - g;
        let q = quantize(g * g + h * h);
        if q_min.as_ref().is_none_or(|cur| q < *cur) {
            q_min = Some(q);
        }
    }
    let q_min = q_min.expect("s = 0 is always in the strip");

    // largest radicand whose quantization still equals q_min
    let qm1 = &q_min + 1;
    let qm1_sq = &qm1 * &qm1;
    let q_hi_big: BigInt = if shift >= 0 {
        (qm1_sq - 1) >> (shift as u64)
    } else {
        (qm1_sq << ((-shift) as u64)) - 1
    };
    let q_all = 2u128 * (m as u128) * (m as u128);
    let q_hi: u128 = if q_hi_big >= BigInt::from(q_all) {
        q_all
    } else {
        (&q_hi_big).try_into().expect("clamped below 2M^2")
    };
    let valid = |g: u128, h: u128| -> bool {
        in_strip(g as i128 + h as i128 - m as i128) && g * g + h * h <= q_hi
    };

    // count: ring sums sigma = M + s contribute M - |s| + 1 pairs each
    let c = s_abs as u128;
    let count = (2 * c + 1) * (m as u128 + 1) - c * (c + 1);

    // least ring r whose index box [0,r]^2 contains a pair with q <= q_hi
    let ring = if valid(0, 0) {
        0
    } else {
        let mut lo = 1u64;
        let mut hi = m;
        debug_assert!(ring_decision(m, mbar, m, s2_cap, q_hi, s_abs));
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if ring_decision(mid, mbar, m, s2_cap, q_hi, s_abs) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    };

    // least partner index for the ring: walk levels in index order
    let b = numerator_of_index(ring, mbar) as u128;
    let mut partner: Option<u64> = None;
    'outer: for idx_level in 0..=(mbar + 1) {
        let candidates: Vec<u64> = match idx_level {
            0 => vec![0],
            1 => vec![1],
            _ => {
                let level = idx_level - 1;
                let step = 1u64 << (mbar - level);
                let g_lo = ((m as i128 - s_abs - b as i128).max(0)) as u128;
                let g_hi = ((m as i128 + s_abs - b as i128).min(m as i128)).max(0) as u128;
                let mut t = (g_lo as u64).div_ceil(step);
                if t.is_multiple_of(2) {
                    t += 1;
                }
                let mut v = Vec::new();
                while (t as u128) * (step as u128) <= g_hi {
                    v.push((1u64 << (level - 1)) + (t - 1) / 2 + 1);
                    t += 2;
                }
                v
            }
        };
        for i in candidates {
            if i > ring {
                break 'outer;
            }
            let g = numerator_of_index(i, mbar) as u128;
            if valid(g, b) {
                partner = Some(i);
                break 'outer;
            }
        }
    }
    let partner = partner.expect("ring decision guarantees a partner");
    let index = ring * ring + partner; // pair(partner, ring) with ring >= partner
    let g = numerator_of_index(partner, mbar) as u128;
    let q_star = g * g + b * b;
    let norm_approx = Rational::from_big(quantize(q_star), BigInt::from(1u64) << (params.p + 2));
    let s_star = g as i128 + b as i128 - m as i128;
    let u_f = Rational::from_big(
        BigInt::from(s_star * s_star),
        BigInt::from(2u8) << (2 * mbar),
    );
    let f_approx = sqrt_dyadic(&u_f, params.big_k + 2);

    // sample: first admissible pair indices in index order
    let mut sample = Vec::new();
    let mut scanned = 0u64;
    let mut n = 0u64;
    while sample.len() < SAMPLE_LIMIT && n <= params.l_bound && scanned < STRIP_SAMPLE_SCAN_CAP {
        let (i, j) = unpair(n);
        let gi = numerator_of_index(i, mbar) as i128;
        let hj = numerator_of_index(j, mbar) as i128;
        if in_strip(gi + hj - m as i128) {
            sample.push(n);
        }
        scanned += 1;
        n += 1;
    }
    let sample_complete = sample.len() as u128 == count;
    Ok(MinNormStage {
        k: params.k,
        p_precision: params.p,
        big_k: params.big_k,
        l_bound: params.l_bound,
        threshold: params.tau.clone(),
        admissible_count: count,
        sample,
        sample_complete,
        index,
        norm_approx,
        f_approx,
    })
}

/// Does the index box `[0, r]^2` contain a strip pair with radicand at most
/// `q_hi`? Decided in O(strip width) per ring by intersecting, for each
/// admissible coordinate sum, the radicand window with the numerator grid of
/// the box: indices `<= r` cover the full dyadic levels below `level(r)`
/// plus the partial level of `r` up to its numerator.
fn ring_decision(r: u64, mbar: u32, m: u64, s2_cap: u128, q_hi: u128, s_abs: i128) -> bool {
    // grid of numerators with index <= r: multiples of 2^fs_pow, plus odd
    // multiples of 2^hs_pow up to t_r * 2^hs_pow when the top level is partial
    let (fs_pow, partial): (u32, Option<(u32, u64)>) = if r == 1 {
        (mbar, None)
    } else {
        let l = 64 - (r - 1).leading_zeros();
        let t_r = 2 * (r - (1u64 << (l - 1)) - 1) + 1;
        if t_r == (1u64 << l) - 1 {
            (mbar - l, None)
        } else {
            (mbar - l + 1, Some((mbar - l, t_r)))
        }
    };
    for s in -s_abs..=s_abs {
        if s * s > s2_cap as i128 {
            continue;
        }
        let sigma = m as i128 + s;
        // radicand window: |2g - sigma| <= w with w^2 = 2 q_hi - sigma^2
        let w2 = 2 * q_hi as i128 - sigma * sigma;
        if w2 < 0 {
            continue;
        }
        let w = (w2 as u128).isqrt() as i128;
        let g_lo = ((sigma - w + 1).div_euclid(2))
            .max(0)
            .max(sigma - m as i128);
        let g_hi = ((sigma + w).div_euclid(2)).min(m as i128).min(sigma);
        if g_lo > g_hi {
            continue;
        }
        let (g_lo, g_hi) = (g_lo as u64, g_hi as u64);
        let fs = 1u64 << fs_pow;
        // both coordinates on the full grid
        if sigma % fs as i128 == 0 && g_hi / fs >= g_lo.div_ceil(fs) {
            return true;
        }
        if let Some((hs_pow, t_r)) = partial {
            let hs = 1u64 << hs_pow;
            if sigma % hs as i128 == 0 {
                let s_scaled = sigma / hs as i128;
                let j_lo = g_lo.div_ceil(hs).max(1);
                let j_hi = g_hi / hs;
                if s_scaled % 2 == 1 {
                    // one partial coordinate: j odd, partner lands on the
                    // full grid automatically
                    let a = j_lo;
                    let b = j_hi.min(t_r);
                    if exists_odd(a, b) {
                        return true;
                    }
                } else {
                    // both partial: j odd, s_scaled - j odd and <= t_r
                    let a = j_lo.max((s_scaled as u64).saturating_sub(t_r)).max(1);
                    let b = j_hi.min(t_r).min((s_scaled as u64).saturating_sub(1));
                    if exists_odd(a, b) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

fn exists_odd(a: u64, b: u64) -> bool {
    a <= b && (a < b || a % 2 == 1)
}

/// Re-runs every stage with the same strategy and compares the full record;
/// any edit to an index, count, sample, or test value shows up as a
/// disagreement with the recomputation (which consults the live oracles).
pub fn verify_min_norm(
    rep: &NormedCompactRep,
    f: &UcFunctionRep,
    rho: &Modulus,
    phi: &Modulus,
    stages: &[MinNormStage],
    strategy: &MinNormStrategy,
    cap: SearchCap,
) -> VerifyReport {
    let mut report = VerifyReport { rows: Vec::new() };
    for st in stages {
        match find_min_norm_zero(rep, f, rho, phi, st.k, strategy, cap) {
            Ok(fresh) if fresh == *st => report.push(
                st.k,
                true,
                format!(
                    "index {} minimal over {} admissible points",
                    st.index, st.admissible_count
                ),
            ),
            Ok(_) => report.push(st.k, false, "stage disagrees with recomputation"),
            Err(e) => report.push(st.k, false, format!("recomputation failed: {e}")),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::RealName;
    use crate::spaces::{
        interval_space, interval_value_of_index, pair, product_space, CompactSpaceRep,
    };

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn interval_rep(depth: u32) -> NormedCompactRep {
        NormedCompactRep::with_norm_to_origin(interval_space(depth), Modulus::identity(), 1, 0)
    }

    fn distance_to_band(lo: Rational, hi: Rational) -> UcFunctionRep {
        UcFunctionRep::from_parts(
            format!("dist(x, [{lo},{hi}])"),
            Modulus::identity(),
            move |i| {
                let v = interval_value_of_index(i);
                let below = &lo - &v;
                let above = &v - &hi;
                RealName::constant(below.max(above).max(Rational::zero()))
            },
        )
    }

    fn squared_distance_to(c: Rational) -> UcFunctionRep {
        UcFunctionRep::from_parts(format!("(x - {c})^2"), Modulus::affine(1, 1), move |i| {
            let d = interval_value_of_index(i) - &c;
            RealName::constant(&d * &d)
        })
    }

    #[test]
    fn numerator_index_round_trip() {
        for i in 0..200u64 {
            let j = numerator_of_index(i, 9);
            assert_eq!(index_of_numerator(j, 9), i);
        }
    }

    #[test]
    fn interval_structured_matches_scan() {
        let rep = interval_rep(12);
        let cases = [
            (q("1/4"), q("3/4"), q("1/8")),
            (q("0"), q("1/16"), q("1/32")),
            (q("1/3"), q("2/3"), q("1/16")),
            (q("5/8"), q("5/8"), q("1/4")),
            (q("0"), q("1"), q("1/8")),
        ];
        for (lo, hi, tau) in cases {
            let f = distance_to_band(lo.clone(), hi.clone());
            let params = StageParams {
                k: 0,
                p: 4,
                big_k: 5,
                q_exp: 5,
                l_bound: 64,
                tau,
            };
            let by_scan = scan_stage(&rep, &f, &params, SearchCap::UNLIMITED).unwrap();
            let by_form = structured_stage(
                &rep,
                &f,
                &params,
                &StructuredForm::IntervalDistance { lo, hi },
            )
            .unwrap();
            assert_eq!(by_scan, by_form);
        }
    }

    #[test]
    fn squared_structured_matches_scan() {
        let rep = interval_rep(12);
        for center in [q("3/8"), q("0"), q("1"), q("1/2"), q("1/64")] {
            let f = squared_distance_to(center.clone());
            let params = StageParams {
                k: 0,
                p: 5,
                big_k: 6,
                q_exp: 5,
                l_bound: 64,
                tau: q("1/64"),
            };
            let by_scan = scan_stage(&rep, &f, &params, SearchCap::UNLIMITED).unwrap();
            let by_form = structured_stage(
                &rep,
                &f,
                &params,
                &StructuredForm::IntervalSquaredDistance { center },
            )
            .unwrap();
            assert_eq!(by_scan, by_form);
        }
    }

    #[test]
    fn squared_center_off_grid_is_refused() {
        let rep = interval_rep(12);
        let f = squared_distance_to(q("1/3"));
        let params = StageParams {
            k: 0,
            p: 5,
            big_k: 6,
            q_exp: 5,
            l_bound: 64,
            tau: q("1/64"),
        };
        match structured_stage(
            &rep,
            &f,
            &params,
            &StructuredForm::IntervalSquaredDistance { center: q("1/3") },
        ) {
            Err(RegulusError::InvalidProblem(msg)) => {
                assert!(msg.contains("off the solver grid"))
            }
            other => panic!("expected refusal, got {:?}", other),
        }
    }

    fn antidiagonal_product(depth: u32) -> (NormedCompactRep, UcFunctionRep) {
        let space = product_space(interval_space(depth), interval_space(depth));
        let rep = NormedCompactRep::with_norm_to_origin(space, Modulus::identity(), 2, pair(0, 0));
        let f = UcFunctionRep::from_parts("dist((x,y), {x+y=1})", Modulus::identity(), |n| {
            let (i, j) = unpair(n);
            let d = interval_value_of_index(i) + interval_value_of_index(j) - Rational::one();
            RealName::sqrt_of_rational(&d * &d / Rational::from_int(2))
        });
        (rep, f)
    }

    #[test]
    fn strip_structured_matches_scan_on_small_grids() {
        for (p, big_k, q_exp, tau) in [
            (4u32, 3u32, 3u32, q("1/4")),
            (3, 3, 3, q("1/8")),
            (6, 4, 4, q("1/16")),
            (5, 6, 4, q("1/64")),
        ] {
            let (rep, f) = antidiagonal_product(10);
            let mbar = q_exp + 2;
            let m = 1u64 << mbar;
            let params = StageParams {
                k: 1,
                p,
                big_k,
                q_exp,
                l_bound: (m + 1) * (m + 1) - 1,
                tau,
            };
            let by_scan = scan_stage(&rep, &f, &params, SearchCap::UNLIMITED).unwrap();
            let by_form =
                structured_stage(&rep, &f, &params, &StructuredForm::AntidiagonalSegment).unwrap();
            assert_eq!(by_scan, by_form, "p={p} K={big_k} q={q_exp}");
        }
    }

    #[test]
    fn driver_on_band_fixture_has_hand_checked_values() {
        // k = 0, phi from a diameter-1 Hilbert ball: P = 9, rho = id, K = 11,
        // grid 2^-12, window [1/4 - 2^-10, 3/4 + 2^-10], least numerator 1020
        let rep = interval_rep(14);
        let f = distance_to_band(q("1/4"), q("3/4"));
        let rho = Modulus::identity();
        let phi = hilbert_uniqueness_modulus(1);
        let by_form = find_min_norm_zero(
            &rep,
            &f,
            &rho,
            &phi,
            0,
            &MinNormStrategy::Structured(StructuredForm::IntervalDistance {
                lo: q("1/4"),
                hi: q("3/4"),
            }),
            SearchCap::UNLIMITED,
        )
        .unwrap();
        assert_eq!(by_form.p_precision, 9);
        assert_eq!(by_form.big_k, 11);
        assert_eq!(by_form.l_bound, 4096);
        assert_eq!(by_form.norm_approx, q("255/1024"));
        assert_eq!(by_form.f_approx, q("1/1024"));
        assert_eq!(by_form.admissible_count, 2057);
        assert_eq!(by_form.index, 640);
        assert!(!by_form.sample_complete);
        assert_eq!(by_form.sample.len(), SAMPLE_LIMIT);

        let by_scan = find_min_norm_zero(
            &rep,
            &f,
            &rho,
            &phi,
            0,
            &MinNormStrategy::Scan,
            SearchCap::UNLIMITED,
        )
        .unwrap();
        assert_eq!(by_scan, by_form);
    }

    #[test]
    fn verification_recomputes_and_catches_tampering() {
        let rep = interval_rep(14);
        let f = distance_to_band(q("1/4"), q("3/4"));
        let rho = Modulus::identity();
        let phi = hilbert_uniqueness_modulus(1);
        let strategy = MinNormStrategy::Structured(StructuredForm::IntervalDistance {
            lo: q("1/4"),
            hi: q("3/4"),
        });
        let stage =
            find_min_norm_zero(&rep, &f, &rho, &phi, 0, &strategy, SearchCap::UNLIMITED).unwrap();
        let report = verify_min_norm(
            &rep,
            &f,
            &rho,
            &phi,
            std::slice::from_ref(&stage),
            &strategy,
            SearchCap::UNLIMITED,
        );
        assert!(report.all_ok());

        let mut forged = stage.clone();
        forged.norm_approx = q("1/4");
        let report = verify_min_norm(
            &rep,
            &f,
            &rho,
            &phi,
            &[forged],
            &strategy,
            SearchCap::UNLIMITED,
        );
        assert!(!report.all_ok());

        let mut forged = stage;
        forged.admissible_count -= 1;
        let report = verify_min_norm(
            &rep,
            &f,
            &rho,
            &phi,
            &[forged],
            &strategy,
            SearchCap::UNLIMITED,
        );
        assert!(!report.all_ok());
    }

    #[test]
    fn empty_admissible_set_is_an_error() {
        let rep = interval_rep(10);
        let f = UcFunctionRep::from_parts("one", Modulus::identity(), |_| {
            RealName::constant(Rational::one())
        });
        let rho = Modulus::identity();
        let phi = Modulus::identity();
        match find_min_norm_zero(
            &rep,
            &f,
            &rho,
            &phi,
            0,
            &MinNormStrategy::Scan,
            SearchCap::UNLIMITED,
        ) {
            Err(RegulusError::EmptyAdmissibleSet { k: 0, .. }) => {}
            other => panic!("expected empty admissible set, got {:?}", other),
        }
    }

    #[test]
    fn structured_form_refuses_wrong_geometry() {
        let (rep, f) = antidiagonal_product(8);
        let params = StageParams {
            k: 0,
            p: 4,
            big_k: 3,
            q_exp: 3,
            l_bound: 1088,
            tau: q("1/4"),
        };
        match structured_stage(
            &rep,
            &f,
            &params,
            &StructuredForm::IntervalDistance {
                lo: q("0"),
                hi: q("1"),
            },
        ) {
            Err(RegulusError::InvalidProblem(_)) => {}
            other => panic!("expected geometry refusal, got {:?}", other),
        }
        let opaque = NormedCompactRep::with_norm_to_origin(
            CompactSpaceRep::from_parts(
                "opaque",
                0,
                Geometry::Opaque,
                |_, _| RealName::constant(Rational::zero()),
                |_| 8,
            ),
            Modulus::identity(),
            1,
            0,
        );
        match structured_stage(&opaque, &f, &params, &StructuredForm::AntidiagonalSegment) {
            Err(RegulusError::InvalidProblem(_)) => {}
            other => panic!("expected geometry refusal, got {:?}", other),
        }
    }
}
