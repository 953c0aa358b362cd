//! Filter tree reduction from cost-sensitive multiclass to weighted binary
//! classification.
//!
//! Actions are paired in index order, `(0,1), (2,3), …`, level by level; an
//! odd action out at some level is carried up unchanged. Training proceeds
//! bottom-up: each node sees, for every example, the two actions its children
//! let through, learns which has the smaller loss (weighted by the loss
//! difference), and passes its own prediction up. Prediction walks from the
//! root to a leaf.

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::learners::tree::{binary_tree_learn, BinaryClassifier, BinaryTreeConfig, WeightedExample};
use crate::types::{ActionPolicy, Context, CostVectorExample};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(usize),
    /// `classifier` predicts `true` when the right child should win.
    Internal {
        left: usize,
        right: usize,
        classifier: BinaryClassifier,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterTreeModel {
    nodes: Vec<Node>,
    root: usize,
    k: usize,
    dim: usize,
}

impl FilterTreeModel {
    pub fn num_actions(&self) -> usize {
        self.k
    }

    /// Longest root-to-leaf path, `⌈log2 k⌉`.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Internal { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, self.root)
    }

    /// Action leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        fn go(nodes: &[Node], i: usize, out: &mut Vec<usize>) {
            match &nodes[i] {
                Node::Leaf(a) => out.push(*a),
                Node::Internal { left, right, .. } => {
                    go(nodes, *left, out);
                    go(nodes, *right, out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.k);
        go(&self.nodes, self.root, &mut out);
        out
    }

    /// The chosen action and the number of classifiers consulted.
    pub fn predict_with_calls(&self, x: &[f64]) -> (usize, usize) {
        let mut i = self.root;
        let mut calls = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(a) => return (*a, calls),
                Node::Internal { left, right, classifier } => {
                    calls += 1;
                    i = if classifier.predict(x) { *right } else { *left };
                }
            }
        }
    }
}

impl ActionPolicy for FilterTreeModel {
    fn num_actions(&self) -> usize {
        self.k
    }

    fn choose(&self, x: &Context) -> Result<usize> {
        filter_tree_predict(self, x)
    }
}

pub fn filter_tree_predict(model: &FilterTreeModel, x: &Context) -> Result<usize> {
    if x.dim() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, actual: x.dim() });
    }
    Ok(model.predict_with_calls(x.features()).0)
}

/// Node layout: leaves first, then internal nodes level by level. Returns the
/// nodes (with placeholder classifiers), the internal node ids per level and
/// the root.
fn layout(k: usize) -> (Vec<Node>, Vec<Vec<usize>>, usize) {
    let mut nodes: Vec<Node> = (0..k).map(Node::Leaf).collect();
    let mut current: Vec<usize> = (0..k).collect();
    let mut levels = Vec::new();
    while current.len() > 1 {
        let mut next = Vec::with_capacity(current.len().div_ceil(2));
        let mut level = Vec::new();
        for pair in current.chunks(2) {
            if let [left, right] = *pair {
                nodes.push(Node::Internal { left, right, classifier: BinaryClassifier::constant(false) });
                level.push(nodes.len() - 1);
                next.push(nodes.len() - 1);
            } else {
                next.push(pair[0]);
            }
        }
        levels.push(level);
        current = next;
    }
    (nodes, levels, current[0])
}

pub fn filter_tree_train(examples: &[CostVectorExample], config: &BinaryTreeConfig) -> Result<FilterTreeModel> {
    filter_tree_train_with(examples, config, Execution::default())
}

pub fn filter_tree_train_with(
    examples: &[CostVectorExample],
    config: &BinaryTreeConfig,
    exec: Execution,
) -> Result<FilterTreeModel> {
    let first = examples.first().ok_or_else(|| invalid("no training examples"))?;
    let k = first.losses.len();
    let dim = first.context.dim();
    if k < 2 {
        return Err(invalid("the filter tree needs at least two actions"));
    }
    for ex in examples {
        if ex.losses.len() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: ex.losses.len() });
        }
        if ex.context.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: ex.context.dim() });
        }
    }
    let (mut nodes, levels, root) = layout(k);
    // winners[node][i]: the action node `node` lets through for example i.
    let mut winners: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (a, w) in winners.iter_mut().enumerate().take(k) {
        *w = vec![a; examples.len()];
    }
    for level in levels {
        let trained = exec.map_slice(&level, |&id| {
            let Node::Internal { left, right, .. } = nodes[id] else { unreachable!() };
            let (wl, wr) = (&winners[left], &winners[right]);
            let binary: Vec<WeightedExample> = examples
                .iter()
                .enumerate()
                .filter_map(|(i, ex)| {
                    let (ll, lr) = (ex.losses[wl[i]], ex.losses[wr[i]]);
                    let weight = (ll - lr).abs();
                    (weight > 0.0).then_some(WeightedExample {
                        features: ex.context.features(),
                        label: lr < ll,
                        weight,
                    })
                })
                .collect();
            let classifier = if binary.is_empty() {
                Ok(BinaryClassifier::constant(false))
            } else {
                binary_tree_learn(&binary, config)
            };
            classifier.map(|c| {
                let through: Vec<usize> = examples
                    .iter()
                    .enumerate()
                    .map(|(i, ex)| if c.predict(ex.context.features()) { wr[i] } else { wl[i] })
                    .collect();
                (c, through)
            })
        });
        for (&id, result) in level.iter().zip(trained) {
            let (c, through) = result?;
            if let Node::Internal { classifier, .. } = &mut nodes[id] {
                *classifier = c;
            }
            winners[id] = through;
        }
    }
    Ok(FilterTreeModel { nodes, root, k, dim })
}
