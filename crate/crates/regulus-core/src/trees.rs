//! Infinite binary trees with decidable membership, leftmost-path
//! extraction driven by a tree regularity modulus, and the embedding of the
//! leftmost-path problem into metric zero finding over Baire space.
//!
//! Trees are given by a finite description: a built-in family, or an
//! explicit prefix-closed set of strings up to a cutoff depth together with
//! a tail rule saying how membership continues beyond the cutoff. That keeps
//! membership decidable at every length while still describing genuinely
//! infinite trees.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::rational::Rational;
use crate::real::RealName;
use crate::spaces::{CompactSpaceRep, Geometry, Modulus, UcFunctionRep};
use crate::RegulusError;

/// Finite 0/1 string. Derived ordering is plain lexicographic and is only
/// meaningful between strings of equal length; cross-length enumeration
/// order is `(length, lex)` via [`string_to_index`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn empty() -> Self {
        BitString(Vec::new())
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "bits must be 0 or 1");
        BitString(bits.to_vec())
    }

    /// `count` copies of `bit`.
    pub fn repeat(bit: u8, count: usize) -> Self {
        assert!(bit <= 1);
        BitString(vec![bit; count])
    }

    pub fn parse(s: &str) -> Result<Self, RegulusError> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => {
                    return Err(RegulusError::InvalidProblem(format!(
                        "invalid bit string `{s}`"
                    )))
                }
            }
        }
        Ok(BitString(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    /// Bit of the stream `self * 0^inf` at position `i` (0-based).
    pub fn stream_bit(&self, i: usize) -> u8 {
        self.0.get(i).copied().unwrap_or(0)
    }

    pub fn push(&mut self, bit: u8) {
        assert!(bit <= 1);
        self.0.push(bit);
    }

    pub fn pop(&mut self) {
        self.0.pop();
    }

    pub fn prefix(&self, k: usize) -> BitString {
        assert!(k <= self.len());
        BitString(self.0[..k].to_vec())
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn all_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn all_one(&self) -> bool {
        self.0.iter().all(|&b| b == 1)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", b)?;
        }
        Ok(())
    }
}

/// Enumeration of all finite strings in `(length, lexicographic)` order:
/// index 0 is the empty string, then `0`, `1`, `00`, `01`, `10`, `11`, ...
/// Concretely the binary expansion of `n + 1` with its leading 1 removed.
pub fn index_to_string(n: u64) -> BitString {
    let v = n + 1;
    let len = 63 - v.leading_zeros() as usize;
    let mut bits = Vec::with_capacity(len);
    for i in (0..len).rev() {
        bits.push(((v >> i) & 1) as u8);
    }
    BitString(bits)
}

/// Inverse of [`index_to_string`]; strings longer than 62 bits do not fit.
pub fn string_to_index(s: &BitString) -> u64 {
    assert!(s.len() <= 62, "string too long for u64 index");
    let mut v: u64 = 1;
    for &b in s.bits() {
        v = (v << 1) | b as u64;
    }
    v - 1
}

/// Membership behavior above the explicit cutoff depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailRule {
    /// Every extension of a depth-cutoff member is a member.
    AllExtensions,
    /// Only the all-zero extensions of depth-cutoff members are members.
    ZeroExtensionsOnly,
    /// Nothing beyond the cutoff (a finite tree).
    None,
}

#[derive(Debug, Clone)]
enum TreeKind {
    /// The full binary tree.
    Full,
    /// Exactly the strings `1^m`.
    AllOnes,
    Explicit {
        depth0: u32,
        members: HashSet<BitString>,
        tail: TailRule,
        /// Prefixes of depth-`depth0` members, i.e. the extendible strings
        /// of length at most `depth0`.
        extendible: HashSet<BitString>,
    },
}

/// A binary tree with decidable membership at every length.
#[derive(Debug, Clone)]
pub struct BinaryTree {
    kind: TreeKind,
}

impl BinaryTree {
    pub fn full() -> Self {
        BinaryTree {
            kind: TreeKind::Full,
        }
    }

    pub fn all_ones() -> Self {
        BinaryTree {
            kind: TreeKind::AllOnes,
        }
    }

    /// Explicit tree: `members` lists every member of length `<= depth0`,
    /// `tail` governs longer strings. The set must contain the root and be
    /// prefix-closed.
    pub fn explicit(
        depth0: u32,
        members: HashSet<BitString>,
        tail: TailRule,
    ) -> Result<Self, RegulusError> {
        if !members.contains(&BitString::empty()) {
            return Err(RegulusError::InvalidProblem(
                "explicit tree must contain the root".into(),
            ));
        }
        for s in &members {
            if s.len() > depth0 as usize {
                return Err(RegulusError::InvalidProblem(format!(
                    "member `{s}` longer than cutoff depth {depth0}"
                )));
            }
            if !s.is_empty() && !members.contains(&s.prefix(s.len() - 1)) {
                return Err(RegulusError::InvalidProblem(format!(
                    "member set not prefix-closed at `{s}`"
                )));
            }
        }
        let mut extendible = HashSet::new();
        for s in &members {
            if s.len() == depth0 as usize {
                for k in 0..=s.len() {
                    extendible.insert(s.prefix(k));
                }
            }
        }
        Ok(BinaryTree {
            kind: TreeKind::Explicit {
                depth0,
                members,
                tail,
                extendible,
            },
        })
    }

    /// Parses the `(length, lex)`-ordered membership bitmap of all strings
    /// of length `<= depth0` (so `2^(depth0+1) - 1` characters of `0`/`1`).
    pub fn from_bitmap(depth0: u32, bitmap: &str, tail: TailRule) -> Result<Self, RegulusError> {
        assert!(depth0 <= 24, "bitmap cutoff depth too large");
        let expected = (1u64 << (depth0 + 1)) - 1;
        let cleaned: String = bitmap.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.len() as u64 != expected {
            return Err(RegulusError::InvalidProblem(format!(
                "bitmap for depth {} must have {} entries, got {}",
                depth0,
                expected,
                cleaned.len()
            )));
        }
        let mut members = HashSet::new();
        for (n, ch) in cleaned.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => {
                    members.insert(index_to_string(n as u64));
                }
                _ => {
                    return Err(RegulusError::InvalidProblem(format!(
                        "bitmap entries must be 0 or 1, got `{ch}`"
                    )))
                }
            }
        }
        BinaryTree::explicit(depth0, members, tail)
    }

    pub fn member(&self, s: &BitString) -> bool {
        match &self.kind {
            TreeKind::Full => true,
            TreeKind::AllOnes => s.all_one(),
            TreeKind::Explicit {
                depth0,
                members,
                tail,
                ..
            } => {
                let d0 = *depth0 as usize;
                if s.len() <= d0 {
                    members.contains(s)
                } else {
                    let head = s.prefix(d0);
                    match tail {
                        TailRule::None => false,
                        TailRule::AllExtensions => members.contains(&head),
                        TailRule::ZeroExtensionsOnly => {
                            members.contains(&head) && s.bits()[d0..].iter().all(|&b| b == 0)
                        }
                    }
                }
            }
        }
    }

    /// Whether `s` lies on some infinite path, i.e. has member extensions of
    /// every length.
    pub fn extendible(&self, s: &BitString) -> bool {
        match &self.kind {
            TreeKind::Full => true,
            TreeKind::AllOnes => s.all_one(),
            TreeKind::Explicit {
                depth0,
                tail,
                extendible,
                ..
            } => {
                if *tail == TailRule::None {
                    return false;
                }
                if s.len() <= *depth0 as usize {
                    extendible.contains(s)
                } else {
                    // beyond the cutoff, members extend by the tail rule
                    // itself (all extensions, or more zeros)
                    self.member(s)
                }
            }
        }
    }

    pub fn is_infinite(&self) -> bool {
        match &self.kind {
            TreeKind::Full | TreeKind::AllOnes => true,
            TreeKind::Explicit { .. } => self.extendible(&BitString::empty()),
        }
    }

    /// Cutoff depth of the finite description (0 for built-ins).
    pub fn cutoff_depth(&self) -> u32 {
        match &self.kind {
            TreeKind::Full | TreeKind::AllOnes => 0,
            TreeKind::Explicit { depth0, .. } => *depth0,
        }
    }

    fn members_of_length(&self, d: usize) -> Vec<BitString> {
        match &self.kind {
            TreeKind::Full => {
                assert!(d <= 24, "full-tree level too large to enumerate");
                (0..(1u64 << d))
                    .map(|v| {
                        let mut bits = Vec::with_capacity(d);
                        for i in (0..d).rev() {
                            bits.push(((v >> i) & 1) as u8);
                        }
                        BitString(bits)
                    })
                    .collect()
            }
            TreeKind::AllOnes => vec![BitString::repeat(1, d)],
            TreeKind::Explicit { members, .. } => {
                let mut level: Vec<BitString> =
                    members.iter().filter(|s| s.len() == d).cloned().collect();
                level.sort();
                level
            }
        }
    }
}

/// Leftmost member string of the given length, by depth-first search that
/// prefers the 0 child (prefix closure makes greedy-with-backtracking
/// exact).
pub fn leftmost_member_at_depth(tree: &BinaryTree, depth: u32) -> Option<BitString> {
    fn dfs(tree: &BinaryTree, s: &mut BitString, depth: usize) -> bool {
        if s.len() == depth {
            return true;
        }
        for b in [0u8, 1] {
            s.push(b);
            if tree.member(s) && dfs(tree, s, depth) {
                return true;
            }
            s.pop();
        }
        false
    }
    let mut s = BitString::empty();
    if !tree.member(&s) {
        return None;
    }
    if dfs(tree, &mut s, depth as usize) {
        Some(s)
    } else {
        None
    }
}

/// Length-`depth` prefix of the true leftmost infinite path, by the same
/// search restricted to extendible strings. `None` when the tree has no
/// infinite path.
pub fn leftmost_path_prefix(tree: &BinaryTree, depth: u32) -> Option<BitString> {
    fn dfs(tree: &BinaryTree, s: &mut BitString, depth: usize) -> bool {
        if s.len() == depth {
            return true;
        }
        for b in [0u8, 1] {
            s.push(b);
            if tree.extendible(s) && dfs(tree, s, depth) {
                return true;
            }
            s.pop();
        }
        false
    }
    let mut s = BitString::empty();
    if !tree.extendible(&s) {
        return None;
    }
    if dfs(tree, &mut s, depth as usize) {
        Some(s)
    } else {
        None
    }
}

/// Bit `k` of the leftmost infinite path, computed from the tree regularity
/// modulus: the leftmost member of length `rho(k+1)` already agrees with the
/// path to length `k+1`.
pub fn leftmost_branch(tree: &BinaryTree, rho: &Modulus, k: u32) -> Result<u8, RegulusError> {
    let d = rho.eval(k + 1);
    let sigma =
        leftmost_member_at_depth(tree, d).ok_or(RegulusError::NoBranchAtDepth { depth: d })?;
    Ok(sigma.bits()[k as usize])
}

/// The `k`-th stage of the naive iteration: the leftmost member of length
/// `k` (which need not be a path prefix when branches die).
pub fn leftmost_iteration(tree: &BinaryTree, k: u32) -> Result<BitString, RegulusError> {
    leftmost_member_at_depth(tree, k).ok_or(RegulusError::NoBranchAtDepth { depth: k })
}

/// Least valid tree regularity modulus, by exhaustive check over the finite
/// description: `rho(k)` is the least `d >= k` such that every member of
/// length `d` has an extendible length-`k` prefix. Beyond the cutoff depth
/// every member extends a cutoff member, so the identity tail is valid.
pub fn brute_tree_modulus(tree: &BinaryTree) -> Result<Modulus, RegulusError> {
    if !tree.is_infinite() {
        return Err(RegulusError::NoBranchAtDepth {
            depth: tree.cutoff_depth(),
        });
    }
    match &tree.kind {
        TreeKind::Full | TreeKind::AllOnes => Ok(Modulus::identity()),
        TreeKind::Explicit { depth0, .. } => {
            let d0 = *depth0;
            let levels: Vec<Vec<BitString>> = (0..=d0 as usize)
                .map(|d| tree.members_of_length(d))
                .collect();
            let mut table = Vec::with_capacity(d0 as usize + 1);
            for k in 0..=d0 {
                let mut best = d0;
                for d in k..=d0 {
                    let ok = levels[d as usize]
                        .iter()
                        .all(|s| tree.extendible(&s.prefix(k as usize)));
                    if ok {
                        best = d;
                        break;
                    }
                }
                table.push(best);
            }
            Ok(Modulus::from_table(table, 1, 0))
        }
    }
}

/// A tree regularity modulus works unchanged as a metric regularity modulus
/// for the embedded problem.
pub fn metric_modulus_from_tree(rho: Arc<Modulus>) -> Modulus {
    Modulus::from_fn(move |k| rho.eval(k))
}

/// A metric regularity modulus for the embedded problem, shifted by one,
/// works as a tree regularity modulus: a point `2^-(k+1)`-close to a path
/// agrees with it on the first `k+1` coordinates.
pub fn tree_modulus_from_metric(rho: Arc<Modulus>) -> Modulus {
    Modulus::from_fn(move |k| rho.eval(k).saturating_add(1))
}

/// Exact value of the embedded function at the stream `s * 0^inf`: the sum
/// of `2^-i` over all `i >= 1` whose length-`i` prefix is not a member.
/// Beyond `max(len(s), cutoff) + 1` the membership of zero-padded prefixes
/// is stable, so the geometric tail is summed in closed form.
pub fn embedded_value(tree: &BinaryTree, s: &BitString) -> Rational {
    let len = s.len();
    let mut total = Rational::zero();
    for i in 1..=len {
        if !tree.member(&s.prefix(i)) {
            total = total + Rational::pow2(-(i as i32));
        }
    }
    let horizon = (tree.cutoff_depth() as usize).max(len) + 1;
    let mut padded = s.clone();
    for j in 1..=(horizon - len) {
        padded.push(0);
        if !tree.member(&padded) {
            // every longer zero-padding is also a non-member (prefix
            // closure), so the rest is a geometric series
            let i0 = (len + j) as i32;
            total = total + Rational::pow2(1 - i0);
            break;
        }
    }
    total
}

/// Embeds the leftmost-path problem into metric zero finding: the space of
/// eventually-zero streams under the Baire metric (`d = 2^-(m+1)` with `m`
/// the first disagreement), enumerated in `(length, lex)` order with net
/// modulus `alpha(k) = 2^(k+1) - 2`, and the membership-defect function
/// above with identity continuity modulus.
pub fn embed_tree(tree: Arc<BinaryTree>) -> (CompactSpaceRep, UcFunctionRep) {
    let space = CompactSpaceRep::from_parts(
        "baire-strings",
        0,
        Geometry::BaireStrings {
            tree: Arc::clone(&tree),
        },
        |i, j| {
            let s = index_to_string(i);
            let t = index_to_string(j);
            let horizon = s.len().max(t.len());
            let mut first_diff = None;
            for m in 0..horizon {
                if s.stream_bit(m) != t.stream_bit(m) {
                    first_diff = Some(m);
                    break;
                }
            }
            let d = match first_diff {
                None => Rational::zero(),
                Some(m) => Rational::pow2(-(m as i32) - 1),
            };
            RealName::constant(d)
        },
        |k| {
            assert!(k <= 61, "baire net precision too large");
            (1u64 << (k + 1)) - 2
        },
    );
    let f = UcFunctionRep::from_parts("membership-defect", Modulus::identity(), move |i| {
        let s = index_to_string(i);
        RealName::constant(embedded_value(&tree, &s))
    });
    (space, f)
}
