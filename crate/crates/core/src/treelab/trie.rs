use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TreeError;

/// Sample id → bit string. Sample ids are positions in the vector.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Encoding {
    codes: Vec<String>,
}

impl Encoding {
    pub fn new<S: Into<String>>(codes: impl IntoIterator<Item = S>) -> Result<Self, TreeError> {
        let codes: Vec<String> = codes.into_iter().map(Into::into).collect();
        for (i, c) in codes.iter().enumerate() {
            if let Some(bad) = c.chars().find(|&ch| ch != '0' && ch != '1') {
                return Err(TreeError::BadCode {
                    sample: i,
                    found: bad,
                });
            }
        }
        Ok(Encoding { codes })
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn code(&self, sample: usize) -> &str {
        &self.codes[sample]
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn total_length(&self) -> usize {
        self.codes.iter().map(String::len).sum()
    }

    /// Code lengths, sorted.
    pub fn length_multiset(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.codes.iter().map(String::len).collect();
        v.sort_unstable();
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Root-to-node bit string.
    pub path: String,
    /// Child reached on bit `0`.
    pub left: Option<usize>,
    /// Child reached on bit `1`.
    pub right: Option<usize>,
    /// Samples whose code ends exactly here.
    pub terminal: Vec<usize>,
    /// Every sample at or below this node, sorted.
    pub members: Vec<usize>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }
}

/// Rooted binary tree built from bit-string paths. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTree {
    nodes: Vec<TreeNode>,
}

impl CategoryTree {
    /// Strict trie construction: every code must be distinct.
    pub fn from_codes(enc: &Encoding) -> Result<Self, TreeError> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, c) in enc.codes().iter().enumerate() {
            if let Some(&first) = seen.get(c.as_str()) {
                return Err(TreeError::DuplicateCode {
                    first,
                    second: i,
                    code: c.clone(),
                });
            }
            seen.insert(c, i);
        }
        Ok(Self::from_codes_lenient(enc))
    }

    /// Trie construction that lets several samples share a terminus, as
    /// happens when hardened learned codes coincide.
    pub fn from_codes_lenient(enc: &Encoding) -> Self {
        let mut nodes = vec![TreeNode {
            path: String::new(),
            left: None,
            right: None,
            terminal: Vec::new(),
            members: Vec::new(),
        }];
        for (sample, code) in enc.codes().iter().enumerate() {
            let mut cur = 0;
            nodes[0].members.push(sample);
            for bit in code.chars() {
                let existing = if bit == '1' {
                    nodes[cur].right
                } else {
                    nodes[cur].left
                };
                let next = match existing {
                    Some(n) => n,
                    None => {
                        let mut path = nodes[cur].path.clone();
                        path.push(bit);
                        nodes.push(TreeNode {
                            path,
                            left: None,
                            right: None,
                            terminal: Vec::new(),
                            members: Vec::new(),
                        });
                        let id = nodes.len() - 1;
                        if bit == '1' {
                            nodes[cur].right = Some(id);
                        } else {
                            nodes[cur].left = Some(id);
                        }
                        id
                    }
                };
                nodes[next].members.push(sample);
                cur = next;
            }
            nodes[cur].terminal.push(sample);
        }
        CategoryTree { nodes }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn sample_count(&self) -> usize {
        self.nodes[0].members.len()
    }

    /// Reads every sample's root path back out of the tree.
    pub fn paths(&self) -> Encoding {
        let mut codes = vec![String::new(); self.sample_count()];
        for node in &self.nodes {
            for &s in &node.terminal {
                codes[s] = node.path.clone();
            }
        }
        Encoding { codes }
    }

    /// Terminal depth of every sample, sorted.
    pub fn depth_multiset(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .nodes
            .iter()
            .flat_map(|n| std::iter::repeat(n.depth()).take(n.terminal.len()))
            .collect();
        v.sort_unstable();
        v
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(TreeNode::depth).max().unwrap_or(0)
    }

    /// Indented text dump. One line per node in pre-order, left (`0`) before
    /// right (`1`), indented two spaces per level:
    ///
    /// ```text
    /// <path or "."> n=<members> [<terminal sample ids>]
    /// ```
    ///
    /// The bracketed list appears only on nodes where codes end. When
    /// `labels` is given, each id is printed as `id:label`.
    pub fn dump_text(&self, labels: Option<&[String]>) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "tree samples={} nodes={} depth={}",
            self.sample_count(),
            self.node_count(),
            self.max_depth()
        );
        self.walk(0, &mut |node| {
            let indent = "  ".repeat(node.depth());
            let path = if node.path.is_empty() { "." } else { &node.path };
            let _ = write!(out, "{indent}{path} n={}", node.members.len());
            if !node.terminal.is_empty() {
                let ids: Vec<String> = node
                    .terminal
                    .iter()
                    .map(|&s| match labels {
                        Some(l) => format!("{s}:{}", l[s]),
                        None => s.to_string(),
                    })
                    .collect();
                let _ = write!(out, " [{}]", ids.join(","));
            }
            out.push('\n');
        });
        out
    }

    /// Graphviz `digraph` export.
    pub fn dump_dot(&self, labels: Option<&[String]>) -> String {
        let mut out = String::from("digraph category_tree {\n  node [shape=box];\n");
        for (id, node) in self.nodes.iter().enumerate() {
            let path = if node.path.is_empty() { "root" } else { &node.path };
            let mut label = format!("{path}\\nn={}", node.members.len());
            if !node.terminal.is_empty() {
                if let Some(l) = labels {
                    let mut hist: BTreeMap<&str, usize> = BTreeMap::new();
                    for &s in &node.terminal {
                        *hist.entry(l[s].as_str()).or_default() += 1;
                    }
                    let parts: Vec<String> = hist.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                    let _ = write!(label, "\\n{}", parts.join(" "));
                }
            }
            let _ = writeln!(out, "  n{id} [label=\"{label}\"];");
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(l) = node.left {
                let _ = writeln!(out, "  n{id} -> n{l} [label=\"0\"];");
            }
            if let Some(r) = node.right {
                let _ = writeln!(out, "  n{id} -> n{r} [label=\"1\"];");
            }
        }
        out.push_str("}\n");
        out
    }

    fn walk(&self, id: usize, f: &mut impl FnMut(&TreeNode)) {
        let node = &self.nodes[id];
        f(node);
        if let Some(l) = node.left {
            self.walk(l, f);
        }
        if let Some(r) = node.right {
            self.walk(r, f);
        }
    }
}

/// `CategoryTree::from_codes`.
pub fn trie_from_codes(enc: &Encoding) -> Result<CategoryTree, TreeError> {
    CategoryTree::from_codes(enc)
}

/// True iff both trees place their samples at the same multiset of depths.
pub fn depth_multiset_isomorphic(a: &CategoryTree, b: &CategoryTree) -> bool {
    a.depth_multiset() == b.depth_multiset()
}
