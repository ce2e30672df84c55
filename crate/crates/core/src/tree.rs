//! Binary decision trees induced with the C4.5 gain-ratio criterion over
//! numeric features.
//!
//! Every split is `feature <= threshold` (left) versus `> threshold`
//! (right), with thresholds at midpoints between consecutive distinct
//! values. Among all admissible splits with positive information gain the
//! one with the highest gain ratio wins; ties go to the lower feature index
//! and then to the lower threshold.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;
const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: bool,
}

impl Instance {
    pub fn new(features: Vec<f64>, label: bool) -> Self {
        Instance { features, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 2,
            max_depth: 25,
        }
    }
}

/// Arena node. `counts` is the training class distribution reaching the
/// node as `[negative, positive]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        positive: bool,
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: [usize; 2],
    },
}

impl Node {
    fn counts(&self) -> [usize; 2] {
        match self {
            Node::Leaf { counts, .. } | Node::Split { counts, .. } => *counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub version: u32,
    pub n_features: usize,
    pub params: TreeParams,
    /// Seed of the data shuffle the tree was trained on, when there was one.
    pub seed: Option<u64>,
    /// Pre-order: the root is node 0 and children follow their parent.
    pub nodes: Vec<Node>,
}

fn entropy(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn class_counts<'a>(items: impl Iterator<Item = &'a Instance>) -> [usize; 2] {
    let mut c = [0, 0];
    for i in items {
        c[usize::from(i.label)] += 1;
    }
    c
}

fn majority(counts: [usize; 2]) -> bool {
    counts[1] > counts[0]
}

/// Gain ratio of splitting `data` at `feature <= threshold`; `None` when one
/// side would be empty.
pub fn gain_ratio(data: &[Instance], feature: usize, threshold: f64) -> Option<f64> {
    let (left, right): (Vec<&Instance>, Vec<&Instance>) =
        data.iter().partition(|i| i.features[feature] <= threshold);
    if left.is_empty() || right.is_empty() {
        return None;
    }
    Some(ratio_from_counts(
        class_counts(left.into_iter()),
        class_counts(right.into_iter()),
    ))
}

fn gain_from_counts(left: [usize; 2], right: [usize; 2]) -> f64 {
    let total = [left[0] + right[0], left[1] + right[1]];
    let n = (total[0] + total[1]) as f64;
    let (nl, nr) = ((left[0] + left[1]) as f64, (right[0] + right[1]) as f64);
    entropy(total) - (nl / n) * entropy(left) - (nr / n) * entropy(right)
}

fn ratio_from_counts(left: [usize; 2], right: [usize; 2]) -> f64 {
    let split_info = entropy([left[0] + left[1], right[0] + right[1]]);
    gain_from_counts(left, right) / split_info
}

struct Candidate {
    feature: usize,
    threshold: f64,
    ratio: f64,
}

/// Induces an unpruned tree. Labels are binary; `true` is the positive class.
pub fn induce_tree(data: &[Instance], params: TreeParams) -> Result<DecisionTree> {
    let Some(first) = data.first() else {
        return Err(Error::contract("induce_tree: empty training data"));
    };
    let n_features = first.features.len();
    if data.iter().any(|i| i.features.len() != n_features) {
        return Err(Error::contract("induce_tree: ragged feature vectors"));
    }
    if data
        .iter()
        .flat_map(|i| &i.features)
        .any(|v| !v.is_finite())
    {
        return Err(Error::contract("induce_tree: non-finite feature value"));
    }
    if params.min_leaf == 0 {
        return Err(Error::config("min_leaf must be at least 1"));
    }
    let mut tree = DecisionTree {
        version: FORMAT_VERSION,
        n_features,
        params,
        seed: None,
        nodes: Vec::new(),
    };
    let refs: Vec<&Instance> = data.iter().collect();
    grow(&mut tree, refs, 0);
    Ok(tree)
}

fn grow(tree: &mut DecisionTree, data: Vec<&Instance>, depth: usize) -> usize {
    let counts = class_counts(data.iter().copied());
    let me = tree.nodes.len();
    let leaf = Node::Leaf {
        positive: majority(counts),
        counts,
    };
    tree.nodes.push(leaf.clone());

    let p = tree.params;
    let pure = counts[0] == 0 || counts[1] == 0;
    if pure || depth >= p.max_depth || data.len() < 2 * p.min_leaf {
        return me;
    }
    let Some(best) = best_split(&data, tree.n_features, p.min_leaf) else {
        return me;
    };
    let (left, right): (Vec<&Instance>, Vec<&Instance>) = data
        .into_iter()
        .partition(|i| i.features[best.feature] <= best.threshold);
    let l = grow(tree, left, depth + 1);
    let r = grow(tree, right, depth + 1);
    tree.nodes[me] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left: l,
        right: r,
        counts,
    };
    me
}

fn best_split(data: &[&Instance], n_features: usize, min_leaf: usize) -> Option<Candidate> {
    let total = class_counts(data.iter().copied());
    let n = data.len();
    let mut best: Option<Candidate> = None;
    let mut order: Vec<&Instance> = data.to_vec();
    for feature in 0..n_features {
        order.sort_by(|a, b| a.features[feature].total_cmp(&b.features[feature]));
        let mut left = [0usize, 0];
        for k in 0..n - 1 {
            left[usize::from(order[k].label)] += 1;
            let (lo, hi) = (order[k].features[feature], order[k + 1].features[feature]);
            if lo == hi {
                continue;
            }
            let nl = k + 1;
            if nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            if gain_from_counts(left, right) <= TIE_EPSILON {
                continue;
            }
            let ratio = ratio_from_counts(left, right);
            if best.as_ref().is_none_or(|b| ratio > b.ratio + TIE_EPSILON) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    ratio,
                });
            }
        }
    }
    best
}

impl DecisionTree {
    pub fn predict(&self, features: &[f64]) -> bool {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { positive, .. } => return *positive,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn accuracy(&self, data: &[Instance]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .iter()
            .filter(|i| self.predict(&i.features) == i.label)
            .count();
        hits as f64 / data.len() as f64
    }

    /// Reduced-error pruning: a subtree collapses into a leaf whenever that
    /// does not increase the error on `validation`.
    pub fn prune_reduced_error(&mut self, validation: &[Instance]) {
        let refs: Vec<&Instance> = validation.iter().collect();
        self.prune_at(0, &refs);
        self.compact();
    }

    fn prune_at(&mut self, at: usize, data: &[&Instance]) -> usize {
        let (feature, threshold, left, right, counts) = match self.nodes[at] {
            Node::Leaf { positive, .. } => {
                return data.iter().filter(|i| i.label != positive).count();
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
                counts,
            } => (feature, threshold, left, right, counts),
        };
        let (l, r): (Vec<&Instance>, Vec<&Instance>) =
            data.iter().partition(|i| i.features[feature] <= threshold);
        let subtree_errors = self.prune_at(left, &l) + self.prune_at(right, &r);
        let positive = majority(counts);
        let leaf_errors = data.iter().filter(|i| i.label != positive).count();
        if leaf_errors <= subtree_errors {
            self.nodes[at] = Node::Leaf { positive, counts };
            leaf_errors
        } else {
            subtree_errors
        }
    }

    /// Drops nodes no longer reachable from the root, keeping pre-order.
    fn compact(&mut self) {
        let mut nodes = Vec::new();
        fn copy(old: &[Node], at: usize, out: &mut Vec<Node>) -> usize {
            let me = out.len();
            out.push(old[at].clone());
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
                counts,
            } = old[at].clone()
            {
                let l = copy(old, left, out);
                let r = copy(old, right, out);
                out[me] = Node::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                    counts,
                };
            }
            me
        }
        copy(&self.nodes, 0, &mut nodes);
        self.nodes = nodes;
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<DecisionTree> {
        let tree: DecisionTree = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported tree version {}",
                self.version
            )));
        }
        if self.nodes.is_empty() {
            return Err(Error::data("tree has no nodes"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                left,
                right,
                threshold,
                ..
            } = n
            {
                let child_ok = |c: usize| c > i && c < self.nodes.len();
                if *feature >= self.n_features || !child_ok(*left) || !child_ok(*right) {
                    return Err(Error::data(format!("tree node {i} is malformed")));
                }
                if !threshold.is_finite() {
                    return Err(Error::data(format!(
                        "tree node {i} has a non-finite threshold"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Training class distribution at the root.
    pub fn class_counts(&self) -> [usize; 2] {
        self.nodes[0].counts()
    }
}
