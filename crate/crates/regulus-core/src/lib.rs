//! Exact-arithmetic solvers that turn explicit moduli (regularity, uniform
//! continuity, total boundedness, uniqueness) into certified convergence data.
//!
//! Everything here computes with arbitrary-precision rationals; reals are
//! represented by Cauchy names (precision-indexed rational approximants), and
//! every search is a bounded, deterministic, least-index scan whose test
//! values are recorded in re-checkable certificates.
//!
//! The four solver families:
//!
//! * [`zerofind`] — bounded-search zero finding on represented compact metric
//!   spaces: from a dense sequence, a total-boundedness modulus, a uniform
//!   continuity modulus and a regularity modulus, build an index sequence
//!   converging to a zero with rate `2^-k`.
//! * [`minnorm`] — minimal-norm zero selection on compact subsets of normed
//!   spaces with convex zero sets, driven by a modulus of uniqueness.
//! * [`trees`] — leftmost infinite paths of infinite binary trees via a tree
//!   regularity modulus, plus the embedding of tree problems into the metric
//!   zero-finding framework over Baire space.
//! * [`fejer`] — Krasnoselskii iteration fixtures on `[0,1]`, conversion of
//!   (approximate-solution rate, regularity modulus) into a Cauchy rate, and
//!   brute-force grid oracles for regularity moduli.

pub mod fejer;
pub mod minnorm;
pub mod problem;
pub mod rational;
pub mod real;
pub mod spaces;
pub mod trees;
pub mod zerofind;

pub use rational::Rational;
pub use real::RealName;
pub use spaces::{CompactSpaceRep, Modulus, NormedCompactRep, UcFunctionRep};

/// Optional hard cap on the size of any bounded search.
///
/// The library never reads the environment; front ends translate
/// `REGULUS_MAX_SEARCH` into this value. `None` means unlimited. A search
/// whose theoretical bound exceeds the cap is refused up front (deterministic
/// behavior, no partial scans).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchCap(pub Option<u64>);

impl SearchCap {
    pub const UNLIMITED: SearchCap = SearchCap(None);

    /// Checks that a scan over indices `0..=bound` is allowed.
    pub fn admit(&self, stage: &str, bound: u64) -> Result<(), RegulusError> {
        match self.0 {
            Some(cap) if bound > cap => Err(RegulusError::SearchCapExceeded {
                stage: stage.to_string(),
                required: bound,
                cap,
            }),
            _ => Ok(()),
        }
    }
}

/// Errors are data: every failure carries the stage and the bound that
/// produced it, because a failed bounded search is how violated
/// preconditions (empty zero set, invalid modulus, finite tree) surface.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegulusError {
    /// A bounded search scanned its whole range without an admissible index.
    /// Signals violated preconditions, never a library bug.
    #[error("search exhausted in {stage}: no admissible index within bound {bound}")]
    SearchExhausted { stage: String, bound: u64 },

    /// The theoretical bound of a pending search exceeds the configured cap.
    #[error("search cap exceeded in {stage}: bound {required} > cap {cap}")]
    SearchCapExceeded {
        stage: String,
        required: u64,
        cap: u64,
    },

    /// The admissible set S_k came out empty; contradicts the nonemptiness
    /// guarantee, so some precondition (zero set, modulus) is violated.
    #[error("empty admissible set at k={k} (L={l_bound}, K={big_k})")]
    EmptyAdmissibleSet { k: u32, l_bound: u64, big_k: u32 },

    /// The tree has no member string of the requested length.
    #[error("no branch at depth {depth}")]
    NoBranchAtDepth { depth: u32 },

    /// A grid oracle cannot certify the requested threshold at its depth.
    #[error("grid too coarse at depth {depth}: cannot certify threshold exponent {needed}")]
    GridTooCoarse { depth: u32, needed: u32 },

    /// A pointwise interval evaluator returned an enclosure wider than the
    /// requested precision during construction probing.
    #[error("evaluator not convergent: width {width} at precision 2^-{precision} (index {index})")]
    EvaluatorNotConvergent {
        index: u64,
        precision: u32,
        width: String,
    },

    /// Malformed or inconsistent problem description.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}
