//! Exhaustive minimum-length valid encodings for tiny instances.
//!
//! Search runs over full binary tree shapes (a unary node can always be
//! contracted, which shortens codes and keeps validity, so no optimum has
//! one). A shape is identified by its leaf depths read left to right; a
//! labeling assigns categories to leaf positions. Every node covers a
//! contiguous range of leaf positions, so a labeling is valid iff each
//! category's positions form exactly one node range.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use super::{Encoding, TreeError};

pub const DEFAULT_MAX_N: usize = 8;

/// A full binary tree shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    /// Leaf codes, left to right.
    pub codes: Vec<String>,
    /// Leaf-position ranges `[lo, hi)` covered by every node.
    ranges: HashSet<(usize, usize)>,
    /// Range of each node path, for prefix lookup.
    node_paths: BTreeMap<(usize, usize), String>,
}

impl Shape {
    pub fn total_length(&self) -> usize {
        self.codes.iter().map(String::len).sum()
    }

    pub fn leaf_count(&self) -> usize {
        self.codes.len()
    }
}

/// All full binary trees with `n ≥ 1` leaves (Catalan(n−1) of them), in
/// canonical order.
pub fn full_binary_shapes(n: usize) -> Vec<Shape> {
    fn build(n: usize, prefix: &str) -> Vec<Vec<String>> {
        if n == 1 {
            return vec![vec![prefix.to_string()]];
        }
        let mut out = Vec::new();
        for left in 1..n {
            let ls = build(left, &format!("{prefix}0"));
            let rs = build(n - left, &format!("{prefix}1"));
            for l in &ls {
                for r in &rs {
                    let mut codes = l.clone();
                    codes.extend(r.iter().cloned());
                    out.push(codes);
                }
            }
        }
        out
    }
    if n == 0 {
        return Vec::new();
    }
    build(n, "")
        .into_iter()
        .map(|codes| {
            let mut node_paths = BTreeMap::new();
            // Every prefix of every leaf code is a node; its range is the
            // contiguous run of leaves carrying that prefix.
            let mut prefixes: Vec<String> = codes
                .iter()
                .flat_map(|c| (0..=c.len()).map(move |k| c[..k].to_string()))
                .collect();
            prefixes.sort();
            prefixes.dedup();
            for p in prefixes {
                let lo = codes.iter().position(|c| c.starts_with(&p)).unwrap();
                let hi = codes.iter().rposition(|c| c.starts_with(&p)).unwrap() + 1;
                node_paths.insert((lo, hi), p);
            }
            Shape {
                ranges: node_paths.keys().copied().collect(),
                node_paths,
                codes,
            }
        })
        .collect()
}

/// Category ids in first-appearance order, so the output does not depend on
/// how the caller's label type sorts.
fn category_ids<L: Ord + Clone>(labels: &[L]) -> (Vec<usize>, usize) {
    let mut map: BTreeMap<L, usize> = BTreeMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l.clone()).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

/// Lexicographic next permutation; false once the last one is reached.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Valid placements of the category multiset on the leaves of `shape`;
/// each result maps leaf position → category id.
fn valid_labelings(shape: &Shape, sorted_ids: &[usize], n_cat: usize) -> Vec<Vec<usize>> {
    let mut perm = sorted_ids.to_vec();
    let mut out = Vec::new();
    loop {
        if labeling_is_valid(shape, &perm, n_cat) {
            out.push(perm.clone());
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    out
}

fn labeling_is_valid(shape: &Shape, placement: &[usize], n_cat: usize) -> bool {
    let mut lo = vec![usize::MAX; n_cat];
    let mut hi = vec![0usize; n_cat];
    let mut count = vec![0usize; n_cat];
    for (pos, &c) in placement.iter().enumerate() {
        lo[c] = lo[c].min(pos);
        hi[c] = hi[c].max(pos + 1);
        count[c] += 1;
    }
    (0..n_cat).all(|c| hi[c] - lo[c] == count[c] && shape.ranges.contains(&(lo[c], hi[c])))
}

/// Path of the node covering exactly category `c` in a valid labeling.
fn category_prefix(shape: &Shape, placement: &[usize], c: usize) -> String {
    let lo = placement.iter().position(|&x| x == c).unwrap();
    let hi = placement.iter().rposition(|&x| x == c).unwrap() + 1;
    shape.node_paths[&(lo, hi)].clone()
}

/// Expands a leaf-position labeling into every sample-level encoding: the
/// members of a category are interchangeable across its leaf positions.
fn expand(shape: &Shape, placement: &[usize], cat_of: &[usize], n_cat: usize) -> Vec<Encoding> {
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); n_cat];
    for (pos, &c) in placement.iter().enumerate() {
        slots[c].push(pos);
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_cat];
    for (s, &c) in cat_of.iter().enumerate() {
        members[c].push(s);
    }
    let mut partial: Vec<Vec<usize>> = vec![vec![usize::MAX; cat_of.len()]];
    for c in 0..n_cat {
        let mut perm: Vec<usize> = (0..members[c].len()).collect();
        let mut next = Vec::new();
        loop {
            for p in &partial {
                let mut q = p.clone();
                for (k, &m) in members[c].iter().enumerate() {
                    q[m] = slots[c][perm[k]];
                }
                next.push(q);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        partial = next;
    }
    partial
        .into_iter()
        .map(|pos_of| {
            Encoding::new(pos_of.iter().map(|&p| shape.codes[p].clone()))
                .expect("shape codes are binary")
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub min_total: usize,
    /// Every optimal sample-level encoding, sorted.
    pub optima: Vec<Encoding>,
    /// Exclusive category prefixes of the first optimum, keyed by category
    /// id in first-appearance order.
    pub category_prefixes: Vec<String>,
    pub shapes_examined: usize,
}

fn check_size(n: usize, max_n: usize) -> Result<(), TreeError> {
    if n == 0 {
        return Err(TreeError::Empty);
    }
    if n > max_n {
        return Err(TreeError::TooLarge { n, max_n });
    }
    Ok(())
}

/// Minimum total code length over all valid encodings of `labels`, with
/// every encoding attaining it.
pub fn oracle_optimal_encoding<L: Ord + Clone>(
    labels: &[L],
    max_n: usize,
) -> Result<OracleResult, TreeError> {
    let n = labels.len();
    check_size(n, max_n)?;
    let (cat_of, n_cat) = category_ids(labels);
    let mut sorted = cat_of.clone();
    sorted.sort_unstable();

    let mut shapes = full_binary_shapes(n);
    shapes.sort_by(|a, b| a.total_length().cmp(&b.total_length()).then(a.codes.cmp(&b.codes)));

    let mut examined = 0;
    let mut start = 0;
    while start < shapes.len() {
        let total = shapes[start].total_length();
        let end = shapes[start..]
            .iter()
            .position(|s| s.total_length() != total)
            .map_or(shapes.len(), |k| start + k);
        let group = &shapes[start..end];
        examined += group.len();
        let hits: Vec<(usize, Vec<Vec<usize>>)> = group
            .par_iter()
            .enumerate()
            .map(|(k, s)| (k, valid_labelings(s, &sorted, n_cat)))
            .collect();
        if hits.iter().any(|(_, v)| !v.is_empty()) {
            let mut optima = Vec::new();
            for (k, placements) in &hits {
                let shape = &group[*k];
                for p in placements {
                    optima.extend(expand(shape, p, &cat_of, n_cat));
                }
            }
            optima.sort();
            optima.dedup();
            let first = &optima[0];
            let category_prefixes = (0..n_cat)
                .map(|c| {
                    super::longest_common_prefix(
                        cat_of
                            .iter()
                            .enumerate()
                            .filter(|(_, &x)| x == c)
                            .map(|(i, _)| first.code(i)),
                    )
                })
                .collect();
            return Ok(OracleResult {
                min_total: total,
                optima,
                category_prefixes,
                shapes_examined: examined,
            });
        }
        start = end;
    }
    // Unreachable: the balanced arrangement of any label multiset admits a
    // valid labeling on some shape (categories as subtrees of a super tree).
    Err(TreeError::Empty)
}

/// Summary of a full sweep over every valid encoding of a small instance.
#[derive(Clone, Debug, Serialize)]
pub struct TheoremCheck {
    pub oracle_min_total: usize,
    /// Minimum total length seen across the exhaustive sweep.
    pub sweep_min_total: usize,
    pub valid_encodings: usize,
    /// Smallest Σ over categories of exclusive-prefix length attained by any
    /// valid encoding.
    pub min_prefix_total_any: usize,
    /// Smallest Σ of exclusive-prefix lengths among total-length optima.
    pub min_prefix_total_optimal: usize,
    /// Whether all optima share one code-length multiset.
    pub optima_share_depths: bool,
}

/// Enumerates every valid (shape, labeling) pair and compares it with the
/// oracle optimum. Label-level enumeration is enough: the quantities checked
/// here do not depend on which member of a category sits at which slot.
pub fn theorem_desk_check<L: Ord + Clone>(labels: &[L], max_n: usize) -> Result<TheoremCheck, TreeError> {
    let oracle = oracle_optimal_encoding(labels, max_n)?;
    let (cat_of, n_cat) = category_ids(labels);
    let mut sorted = cat_of.clone();
    sorted.sort_unstable();
    let shapes = full_binary_shapes(labels.len());

    let per_shape: Vec<(usize, usize, usize, Option<usize>)> = shapes
        .par_iter()
        .map(|s| {
            let total = s.total_length();
            let labelings = valid_labelings(s, &sorted, n_cat);
            let best_prefix = labelings
                .iter()
                .map(|p| (0..n_cat).map(|c| category_prefix(s, p, c).len()).sum::<usize>())
                .min();
            (total, labelings.len(), best_prefix.unwrap_or(usize::MAX), best_prefix)
        })
        .collect();

    let mut sweep_min_total = usize::MAX;
    let mut valid = 0;
    let mut min_prefix_any = usize::MAX;
    for &(total, count, bp, found) in &per_shape {
        if found.is_some() {
            sweep_min_total = sweep_min_total.min(total);
            min_prefix_any = min_prefix_any.min(bp);
        }
        valid += count;
    }
    let min_prefix_optimal = per_shape
        .iter()
        .filter(|(t, _, _, f)| *t == sweep_min_total && f.is_some())
        .map(|(_, _, bp, _)| *bp)
        .min()
        .unwrap_or(usize::MAX);
    let first = oracle.optima[0].length_multiset();
    let optima_share_depths = oracle.optima.iter().all(|e| e.length_multiset() == first);

    Ok(TheoremCheck {
        oracle_min_total: oracle.min_total,
        sweep_min_total,
        valid_encodings: valid,
        min_prefix_total_any: min_prefix_any,
        min_prefix_total_optimal: min_prefix_optimal,
        optima_share_depths,
    })
}
