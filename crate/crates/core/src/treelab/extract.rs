use std::collections::BTreeMap;

use serde::Serialize;

use super::{category_prefix_stats, mean_purity, CategoryTree, Encoding, PrefixStat};

/// Anything that maps feature rows to hard code strings.
pub trait CodeSource {
    fn hard_codes(&self, features: &[Vec<f64>]) -> Vec<String>;
}

/// The implicit tree of a model's hardened codes, scored against labels.
#[derive(Clone, Debug, Serialize)]
pub struct LearnedTree {
    #[serde(skip)]
    pub tree: CategoryTree,
    pub encoding: Encoding,
    pub stats: BTreeMap<usize, PrefixStat>,
    pub mean_purity: f64,
    pub distinct_codes: usize,
}

impl LearnedTree {
    pub fn from_codes(codes: Vec<String>, labels: &[usize]) -> Self {
        let encoding = Encoding::new(codes).expect("hardened codes are binary");
        let tree = CategoryTree::from_codes_lenient(&encoding);
        let stats = category_prefix_stats(&encoding, labels);
        let mut distinct: Vec<&String> = encoding.codes().iter().collect();
        distinct.sort();
        distinct.dedup();
        LearnedTree {
            mean_purity: mean_purity(&stats),
            distinct_codes: distinct.len(),
            tree,
            stats,
            encoding,
        }
    }

    pub fn text(&self, labels: &[usize]) -> String {
        let names: Vec<String> = labels.iter().map(usize::to_string).collect();
        self.tree.dump_text(Some(&names))
    }

    pub fn dot(&self, labels: &[usize]) -> String {
        let names: Vec<String> = labels.iter().map(usize::to_string).collect();
        self.tree.dump_dot(Some(&names))
    }

    /// One line per category: id, members, carriers, purity, prefix.
    pub fn stats_text(&self) -> String {
        let mut out = format!("mean_purity={:.4} distinct_codes={}\n", self.mean_purity, self.distinct_codes);
        for (c, s) in &self.stats {
            let lcp = if s.lcp.is_empty() { "." } else { &s.lcp };
            out.push_str(&format!(
                "class={c} members={} carriers={} purity={:.4} prefix={lcp}\n",
                s.members, s.carriers, s.purity
            ));
        }
        out
    }
}

/// Hardens every sample's code, builds the trie and scores each category's
/// longest common prefix.
pub fn extract_learned_tree(model: &impl CodeSource, features: &[Vec<f64>], labels: &[usize]) -> LearnedTree {
    LearnedTree::from_codes(model.hard_codes(features), labels)
}
