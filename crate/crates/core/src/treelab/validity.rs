use std::collections::BTreeMap;

use serde::Serialize;

use super::Encoding;

/// Why an encoding is (or is not) valid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Witness<L> {
    /// Exclusive prefix for each category.
    Valid { prefixes: BTreeMap<L, String> },
    /// Two samples share a code.
    DuplicateCode { first: usize, second: usize },
    /// One sample's code is a proper prefix of another's, so it would sit on
    /// an interior node of the trie.
    InteriorCode { prefix: usize, extended: usize },
    /// No prefix covers exactly this category; `intruder` carries the
    /// category's longest common prefix without belonging to it.
    NoExclusivePrefix { category: L, intruder: usize },
    /// `labels` and encoding disagree in size.
    SizeMismatch { codes: usize, labels: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Validity<L> {
    pub valid: bool,
    pub witness: Witness<L>,
}

/// Longest common prefix of a set of codes.
pub fn longest_common_prefix<'a>(codes: impl IntoIterator<Item = &'a str>) -> String {
    let mut it = codes.into_iter();
    let Some(first) = it.next() else {
        return String::new();
    };
    let mut len = first.len();
    for c in it {
        len = first
            .bytes()
            .zip(c.bytes())
            .take(len)
            .take_while(|(a, b)| a == b)
            .count();
    }
    first[..len].to_string()
}

fn group<L: Ord + Clone>(labels: &[L]) -> BTreeMap<L, Vec<usize>> {
    let mut groups: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.clone()).or_default().push(i);
    }
    groups
}

/// Checks that codes are distinct, that no code sits on an interior trie
/// node, and that every category owns a prefix shared by all of its members
/// and by no other sample.
///
/// Any exclusive prefix of a category must be a prefix of the members'
/// longest common prefix, and shortening a prefix only adds carriers, so it
/// suffices to test the longest common prefix itself.
pub fn is_valid_encoding<L: Ord + Clone>(enc: &Encoding, labels: &[L]) -> Validity<L> {
    let fail = |witness| Validity {
        valid: false,
        witness,
    };
    if enc.len() != labels.len() {
        return fail(Witness::SizeMismatch {
            codes: enc.len(),
            labels: labels.len(),
        });
    }
    let mut order: Vec<usize> = (0..enc.len()).collect();
    order.sort_by(|&a, &b| enc.code(a).cmp(enc.code(b)).then(a.cmp(&b)));
    // In lexicographic order a prefix sorts immediately before its nearest
    // extension, so adjacent pairs suffice.
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if enc.code(a) == enc.code(b) {
            return fail(Witness::DuplicateCode {
                first: a.min(b),
                second: a.max(b),
            });
        }
        if enc.code(b).starts_with(enc.code(a)) {
            return fail(Witness::InteriorCode {
                prefix: a,
                extended: b,
            });
        }
    }
    let mut prefixes = BTreeMap::new();
    for (cat, members) in group(labels) {
        let lcp = longest_common_prefix(members.iter().map(|&i| enc.code(i)));
        if let Some(intruder) =
            (0..enc.len()).find(|&i| labels[i] != cat && enc.code(i).starts_with(&lcp))
        {
            return fail(Witness::NoExclusivePrefix {
                category: cat,
                intruder,
            });
        }
        prefixes.insert(cat, lcp);
    }
    Validity {
        valid: true,
        witness: Witness::Valid { prefixes },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrefixStat {
    /// Longest common prefix of the category's codes.
    pub lcp: String,
    /// Members of the category.
    pub members: usize,
    /// Samples (any category) whose code starts with `lcp`.
    pub carriers: usize,
    /// `members / carriers`.
    pub purity: f64,
}

pub fn category_prefix_stats<L: Ord + Clone>(enc: &Encoding, labels: &[L]) -> BTreeMap<L, PrefixStat> {
    assert_eq!(enc.len(), labels.len(), "one label per code");
    group(labels)
        .into_iter()
        .map(|(cat, members)| {
            let lcp = longest_common_prefix(members.iter().map(|&i| enc.code(i)));
            let carriers = enc.codes().iter().filter(|c| c.starts_with(&lcp)).count();
            let stat = PrefixStat {
                purity: members.len() as f64 / carriers as f64,
                lcp,
                members: members.len(),
                carriers,
            };
            (cat, stat)
        })
        .collect()
}

/// Unweighted mean purity over categories.
pub fn mean_purity<L>(stats: &BTreeMap<L, PrefixStat>) -> f64 {
    if stats.is_empty() {
        return 0.0;
    }
    stats.values().map(|s| s.purity).sum::<f64>() / stats.len() as f64
}
