//! Shared fixtures for the integration suites.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regulus_core::trees::{BinaryTree, BitString, TailRule};

/// Deterministic corpus of random prefix-closed trees with an infinite
/// path (cutoff depths 6..=12, every cutoff member extendible by the all
/// extensions tail). Same seed, same corpus.
pub fn random_trees(count: usize, seed: u64) -> Vec<Arc<BinaryTree>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let depth0 = rng.gen_range(6..=12u32);
        let mut members: HashSet<BitString> = HashSet::new();
        members.insert(BitString::empty());
        let mut frontier = vec![BitString::empty()];
        for _ in 0..depth0 {
            let mut next = Vec::new();
            for s in &frontier {
                for bit in [0u8, 1] {
                    if rng.gen_bool(0.7) {
                        let mut c = s.clone();
                        c.push(bit);
                        members.insert(c.clone());
                        next.push(c);
                    }
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        if frontier.is_empty() {
            continue; // died before the cutoff; redraw
        }
        let tree = BinaryTree::explicit(depth0, members, TailRule::AllExtensions)
            .expect("generated set is prefix-closed");
        out.push(Arc::new(tree));
    }
    out
}

/// Tree whose left spine `0^j` survives to depth `d` and then dies, while
/// `1^j` lives forever: every finite probe shallower than `d + 1` sees a
/// leftmost member starting with 0, but the leftmost infinite path is all
/// ones. Any honest tree modulus needs `rho(1) > d`.
pub fn dead_left_tree(d: u32) -> Arc<BinaryTree> {
    let depth0 = d + 1;
    let mut members: HashSet<BitString> = HashSet::new();
    members.insert(BitString::empty());
    for j in 1..=d as usize {
        members.insert(BitString::repeat(0, j));
    }
    for j in 1..=depth0 as usize {
        members.insert(BitString::repeat(1, j));
    }
    Arc::new(
        BinaryTree::explicit(depth0, members, TailRule::AllExtensions)
            .expect("spines are prefix-closed"),
    )
}

/// Length of the common prefix of two bit strings.
pub fn agreement(a: &BitString, b: &BitString) -> usize {
    a.bits()
        .iter()
        .zip(b.bits())
        .take_while(|(x, y)| x == y)
        .count()
}
