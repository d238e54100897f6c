//! Category trees over bit-string codes: trie construction, validity
//! checking, prefix statistics, an exhaustive minimum-length oracle, and
//! extraction of the implicit tree a trained model encodes.

mod extract;
mod oracle;
mod trie;
mod validity;

pub use extract::{extract_learned_tree, CodeSource, LearnedTree};
pub use oracle::{
    full_binary_shapes, oracle_optimal_encoding, theorem_desk_check, OracleResult, Shape,
    TheoremCheck, DEFAULT_MAX_N,
};
pub use trie::{depth_multiset_isomorphic, trie_from_codes, CategoryTree, Encoding, TreeNode};
pub use validity::{
    category_prefix_stats, is_valid_encoding, longest_common_prefix, mean_purity, PrefixStat,
    Validity, Witness,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("samples {first} and {second} share code {code:?}")]
    DuplicateCode {
        first: usize,
        second: usize,
        code: String,
    },
    #[error("code of sample {sample} contains {found:?}; only 0 and 1 are allowed")]
    BadCode { sample: usize, found: char },
    #[error("instance has {n} samples; exhaustive search is capped at {max_n}")]
    TooLarge { n: usize, max_n: usize },
    #[error("no samples")]
    Empty,
}
