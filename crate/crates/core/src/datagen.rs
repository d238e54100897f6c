//! Synthetic hierarchical data, category-discovery splits, contrastive views
//! and the plain-text embedding file format.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::Tensor;
use crate::treelab::{CategoryTree, Encoding};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid dataset parameters: {0}")]
    InvalidSize(String),
    #[error("{0}")]
    InvalidSplit(String),
    #[error("split leaves the unlabeled set empty: no discovery task")]
    NoDiscoveryTask,
    #[error("known class {0} has no labeled samples after rounding")]
    NoLabeledSamples(usize),
    #[error("embedding file is empty")]
    EmptyFile,
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("unsupported embedding file version {0:?}")]
    UnknownVersion(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: expected {expected} features, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Samples with category labels, optionally with the tree that generated
/// them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierDataset {
    /// `N × D`
    pub features: Tensor,
    pub labels: Vec<usize>,
    /// Ground-truth tree over category ids; `None` for ingested embeddings.
    pub gt_tree: Option<CategoryTree>,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl HierDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> Vec<usize> {
        self.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn num_classes(&self) -> usize {
        self.classes().len()
    }

    pub fn has_tree(&self) -> bool {
        self.gt_tree.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierParams {
    pub seed: u64,
    pub depth: usize,
    pub per_leaf: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub level_scale: f64,
}

impl Default for HierParams {
    fn default() -> Self {
        HierParams {
            seed: 0,
            depth: 3,
            per_leaf: 20,
            dim: 64,
            noise_sigma: 0.05,
            level_scale: 0.7,
        }
    }
}

/// Complete binary tree of `depth` levels. Every node (root included)
/// draws a random direction scaled to `level_scale^depth(node)`; a sample is
/// the sum of the node vectors on its leaf's root path plus isotropic
/// Gaussian noise. Leaf `c`'s path spells `c` in binary, most significant
/// bit first. Samples are grouped by leaf.
pub fn gen_hier_dataset(p: &HierParams) -> Result<HierDataset, DataError> {
    if p.depth < 1 || p.depth > 16 {
        return Err(DataError::InvalidSize(format!("depth {} outside 1..=16", p.depth)));
    }
    if p.per_leaf < 1 {
        return Err(DataError::InvalidSize("per_leaf must be at least 1".into()));
    }
    if p.dim < p.depth {
        return Err(DataError::InvalidSize(format!(
            "dim {} must be at least depth {}",
            p.dim, p.depth
        )));
    }
    if !(p.noise_sigma >= 0.0) || !p.noise_sigma.is_finite() {
        return Err(DataError::InvalidSize(format!("noise_sigma {}", p.noise_sigma)));
    }
    if !(p.level_scale > 0.0) || !p.level_scale.is_finite() {
        return Err(DataError::InvalidSize(format!("level_scale {}", p.level_scale)));
    }
    let mut rng = rng_from_seed(p.seed);
    let leaves = 1usize << p.depth;
    // Heap layout: node 1 is the root, children of k are 2k and 2k+1.
    let mut node_vec = vec![Vec::new(); 2 * leaves];
    for (k, v) in node_vec.iter_mut().enumerate().skip(1) {
        let level = usize::BITS - 1 - k.leading_zeros();
        let mut dir: Vec<f64> = (0..p.dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        let mag = p.level_scale.powi(level as i32);
        dir.iter_mut().for_each(|x| *x *= mag / norm);
        *v = dir;
    }
    let mut rows = Vec::with_capacity(leaves * p.per_leaf);
    let mut labels = Vec::with_capacity(leaves * p.per_leaf);
    for leaf in 0..leaves {
        let mut mean = vec![0.0; p.dim];
        let mut k = leaves + leaf;
        while k >= 1 {
            for (m, x) in mean.iter_mut().zip(&node_vec[k]) {
                *m += x;
            }
            k /= 2;
        }
        for _ in 0..p.per_leaf {
            let row: Vec<f64> = mean
                .iter()
                .map(|m| {
                    let z: f64 = rng.sample(StandardNormal);
                    m + p.noise_sigma * z
                })
                .collect();
            rows.push(row);
            labels.push(leaf);
        }
    }
    let codes = (0..leaves).map(|c| format!("{:0width$b}", c, width = p.depth));
    let gt_tree = CategoryTree::from_codes(&Encoding::new(codes).expect("binary codes"))
        .expect("distinct leaf codes");
    Ok(HierDataset {
        features: Tensor::from_rows(&rows).expect("equal rows"),
        labels,
        gt_tree: Some(gt_tree),
        seed: p.seed,
        noise_sigma: p.noise_sigma,
    })
}

/// Known/novel and labeled/unlabeled partition of a dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcdSplit {
    /// Sorted known class ids.
    pub known_classes: Vec<usize>,
    /// Sorted sample indices with visible labels.
    pub labeled_idx: Vec<usize>,
    /// Sorted sample indices without labels.
    pub unlabeled_idx: Vec<usize>,
}

impl GcdSplit {
    pub fn is_known(&self, class: usize) -> bool {
        self.known_classes.binary_search(&class).is_ok()
    }

    /// Position of a known class in `known_classes`.
    pub fn known_index(&self, class: usize) -> Option<usize> {
        self.known_classes.binary_search(&class).ok()
    }
}

/// Picks `⌊known_frac · C⌋` known classes at random and reveals the labels
/// of `⌊labeled_frac · n_c⌋` samples of each; everything else is unlabeled.
pub fn gcd_split(
    ds: &HierDataset,
    known_frac: f64,
    labeled_frac: f64,
    seed: u64,
) -> Result<GcdSplit, DataError> {
    for (name, f) in [("known_class_frac", known_frac), ("labeled_frac", labeled_frac)] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(DataError::InvalidSplit(format!("{name} {f} outside (0, 1]")));
        }
    }
    let classes = ds.classes();
    let n_known = (known_frac * classes.len() as f64 + 1e-9).floor() as usize;
    if n_known == 0 {
        return Err(DataError::InvalidSplit(format!(
            "known_class_frac {known_frac} selects no class out of {}",
            classes.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut known: Vec<usize> = classes.choose_multiple(&mut rng, n_known).copied().collect();
    known.sort_unstable();

    let mut labeled = Vec::new();
    for &c in &known {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == c).collect();
        members.shuffle(&mut rng);
        let take = (labeled_frac * members.len() as f64 + 1e-9).floor() as usize;
        if take == 0 {
            return Err(DataError::NoLabeledSamples(c));
        }
        labeled.extend_from_slice(&members[..take]);
    }
    labeled.sort_unstable();
    let is_labeled: BTreeSet<usize> = labeled.iter().copied().collect();
    let unlabeled: Vec<usize> = (0..ds.len()).filter(|i| !is_labeled.contains(i)).collect();
    if unlabeled.is_empty() {
        return Err(DataError::NoDiscoveryTask);
    }
    Ok(GcdSplit {
        known_classes: known,
        labeled_idx: labeled,
        unlabeled_idx: unlabeled,
    })
}

/// Contrastive view of a feature vector: Gaussian noise, then exactly
/// `round(drop_frac · dim)` coordinates set to zero.
pub fn augment(x: &[f64], seed: u64, sigma_aug: f64, drop_frac: f64) -> Vec<f64> {
    augment_with(x, &mut rng_from_seed(seed), sigma_aug, drop_frac)
}

pub fn augment_with<R: Rng>(x: &[f64], rng: &mut R, sigma_aug: f64, drop_frac: f64) -> Vec<f64> {
    assert!(
        (0.0..1.0).contains(&drop_frac),
        "drop_frac must lie in [0, 1)"
    );
    let mut out: Vec<f64> = if sigma_aug > 0.0 {
        x.iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(rng);
                v + sigma_aug * z
            })
            .collect()
    } else {
        x.to_vec()
    };
    let n_drop = (drop_frac * x.len() as f64).round() as usize;
    if n_drop > 0 {
        for i in rand::seq::index::sample(rng, x.len(), n_drop) {
            out[i] = 0.0;
        }
    }
    out
}

const EMB_MAGIC: &str = "emb";
const EMB_VERSION: &str = "v1";

/// Serializes features and labels as
///
/// ```text
/// emb v1 <N> <D>
/// <id>,<label>,<f0>,...,<f{D-1}>
/// ```
///
/// Floats use the shortest representation that round-trips exactly.
pub fn write_embedding_string(ds: &HierDataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{EMB_MAGIC} {EMB_VERSION} {} {}", ds.len(), ds.dim());
    for i in 0..ds.len() {
        let _ = write!(out, "{i},{}", ds.labels[i]);
        for v in ds.features.row_slice(i) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn write_embedding_file(ds: &HierDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    std::fs::write(path, write_embedding_string(ds))?;
    Ok(())
}

pub fn parse_embedding(text: &str) -> Result<HierDataset, DataError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(DataError::EmptyFile);
    };
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != EMB_MAGIC {
        return Err(DataError::BadHeader(header.to_string()));
    }
    if parts[1] != EMB_VERSION {
        return Err(DataError::UnknownVersion(parts[1].to_string()));
    }
    let n: usize = parts[2]
        .parse()
        .map_err(|_| DataError::BadHeader(format!("row count {:?}", parts[2])))?;
    let d: usize = parts[3]
        .parse()
        .map_err(|_| DataError::BadHeader(format!("dimension {:?}", parts[3])))?;
    if n == 0 || d == 0 {
        return Err(DataError::EmptyFile);
    }
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut ids = BTreeSet::new();
    for (lineno, line) in lines {
        let line_no = lineno + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(DataError::MalformedRow {
                line: line_no,
                reason: "expected id,label,features".into(),
            });
        }
        let id: usize = fields[0].parse().map_err(|_| DataError::MalformedRow {
            line: line_no,
            reason: format!("id {:?} is not a non-negative integer", fields[0]),
        })?;
        if !ids.insert(id) {
            return Err(DataError::MalformedRow {
                line: line_no,
                reason: format!("duplicate id {id}"),
            });
        }
        let label: usize = fields[1].parse().map_err(|_| DataError::MalformedRow {
            line: line_no,
            reason: format!("label {:?} is not a non-negative integer", fields[1]),
        })?;
        let feats = &fields[2..];
        if feats.len() != d {
            return Err(DataError::Dimension {
                line: line_no,
                expected: d,
                found: feats.len(),
            });
        }
        let row = feats
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DataError::MalformedRow {
                        line: line_no,
                        reason: format!("feature {f:?} is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
        labels.push(label);
    }
    if rows.len() != n {
        return Err(DataError::BadHeader(format!(
            "header declares {n} rows, file has {}",
            rows.len()
        )));
    }
    Ok(HierDataset {
        features: Tensor::from_rows(&rows).expect("checked row widths"),
        labels,
        gt_tree: None,
        seed: 0,
        noise_sigma: 0.0,
    })
}

pub fn load_embedding_file(path: impl AsRef<Path>) -> Result<HierDataset, DataError> {
    parse_embedding(&std::fs::read_to_string(path)?)
}
