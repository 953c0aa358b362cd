//! Importance-weighted binary decision tree (CART-style, weighted Gini).

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryTreeConfig {
    pub max_depth: usize,
    /// Minimum number of examples on each side of a split.
    pub min_samples_leaf: usize,
}

impl Default for BinaryTreeConfig {
    fn default() -> Self {
        BinaryTreeConfig { max_depth: 8, min_samples_leaf: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedExample<'a> {
    pub features: &'a [f64],
    pub label: bool,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(bool),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Predicts `true` (label 1) or `false` (label 0).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryClassifier {
    nodes: Vec<Node>,
}

impl BinaryClassifier {
    pub fn constant(label: bool) -> Self {
        BinaryClassifier { nodes: vec![Node::Leaf(label)] }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(label) => return label,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

/// Weighted Gini impurity times node weight: `2·w0·w1/W`.
fn impurity(w0: f64, w1: f64) -> f64 {
    let w = w0 + w1;
    if w > 0.0 {
        2.0 * w0 * w1 / w
    } else {
        0.0
    }
}

fn class_weights(examples: &[WeightedExample], idx: &[usize]) -> (f64, f64) {
    idx.iter().fold((0.0, 0.0), |(w0, w1), &i| {
        let e = &examples[i];
        if e.label {
            (w0, w1 + e.weight)
        } else {
            (w0 + e.weight, w1)
        }
    })
}

struct Builder<'a, 'b> {
    examples: &'a [WeightedExample<'b>],
    config: BinaryTreeConfig,
    dim: usize,
    nodes: Vec<Node>,
}

impl Builder<'_, '_> {
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let min_leaf = self.config.min_samples_leaf.max(1);
        if idx.len() < 2 * min_leaf {
            return None;
        }
        let (t0, t1) = class_weights(self.examples, idx);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.dim {
            order.sort_by(|&a, &b| self.examples[a].features[f].total_cmp(&self.examples[b].features[f]));
            let (mut l0, mut l1) = (0.0, 0.0);
            for pos in 0..order.len() - 1 {
                let e = &self.examples[order[pos]];
                if e.label {
                    l1 += e.weight;
                } else {
                    l0 += e.weight;
                }
                let left_n = pos + 1;
                if left_n < min_leaf || order.len() - left_n < min_leaf {
                    continue;
                }
                let here = e.features[f];
                let next = self.examples[order[pos + 1]].features[f];
                if here == next {
                    continue;
                }
                let score = impurity(l0, l1) + impurity(t0 - l0, t1 - l1);
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, here + (next - here) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (w0, w1) = class_weights(self.examples, &idx);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf(w1 > w0));
        if w0 <= 0.0 || w1 <= 0.0 || depth >= self.config.max_depth {
            return me;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return me;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.examples[i].features[feature] <= threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[me] = Node::Split { feature, threshold, left, right };
        me
    }
}

/// Greedy top-down tree minimizing weighted Gini impurity. Splits that do not
/// reduce impurity are still taken while a node is impure, so problems such
/// as XOR remain learnable.
pub fn binary_tree_learn(examples: &[WeightedExample], config: &BinaryTreeConfig) -> Result<BinaryClassifier> {
    let dim = examples.first().ok_or_else(|| invalid("no examples for the tree learner"))?.features.len();
    if examples.iter().any(|e| e.features.len() != dim) {
        return Err(invalid("examples have differing dimensions"));
    }
    if examples.iter().any(|e| !(e.weight >= 0.0) || !e.weight.is_finite()) {
        return Err(invalid("example weights must be finite and nonnegative"));
    }
    if !examples.iter().any(|e| e.weight > 0.0) {
        return Err(invalid("all example weights are zero"));
    }
    if config.max_depth == 0 || config.min_samples_leaf == 0 {
        return Err(invalid("tree config must be positive"));
    }
    let mut b = Builder { examples, config: *config, dim, nodes: Vec::new() };
    b.build((0..examples.len()).collect(), 0);
    Ok(BinaryClassifier { nodes: b.nodes })
}
