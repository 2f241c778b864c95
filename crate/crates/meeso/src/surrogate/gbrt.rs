//! Gradient-boosted regression trees: squared-error boosting over shallow
//! trees grown with exact greedy splits. No row or feature subsampling, so
//! fitting is fully deterministic for a fixed input order.

use serde::{Deserialize, Serialize};

const MAX_DEPTH: usize = 3;
const MAX_TREES: usize = 100;
const SHRINKAGE: f64 = 0.1;
const MIN_SPLIT_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut index = 0;
        loop {
            match &self.nodes[index] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    index = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    fn is_leaf_only(&self) -> bool {
        self.nodes.len() == 1
    }
}

/// A fitted boosted-tree regressor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct GradientBoostedTrees {
    base: f64,
    shrinkage: f64,
    trees: Vec<RegressionTree>,
}

impl GradientBoostedTrees {
    pub(crate) fn fit(xs: &[Vec<f64>], ys: &[f64]) -> Self {
        assert!(
            !xs.is_empty() && xs.len() == ys.len(),
            "training set must be non-empty"
        );
        let n = ys.len();
        let base = ys.iter().sum::<f64>() / n as f64;
        let mut predictions = vec![base; n];
        let mut trees = Vec::new();

        for _ in 0..MAX_TREES {
            let residuals: Vec<f64> = ys.iter().zip(&predictions).map(|(y, p)| y - p).collect();
            let rss: f64 = residuals.iter().map(|r| r * r).sum();
            if rss / n as f64 <= 1e-12 {
                break;
            }
            let tree = grow_tree(xs, &residuals);
            if tree.is_leaf_only() {
                // No split carries gain; further rounds cannot improve.
                break;
            }
            for (i, x) in xs.iter().enumerate() {
                predictions[i] += SHRINKAGE * tree.predict(x);
            }
            trees.push(tree);
        }

        Self {
            base,
            shrinkage: SHRINKAGE,
            trees,
        }
    }

    pub(crate) fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    #[cfg(test)]
    pub(crate) fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn grow_tree(xs: &[Vec<f64>], targets: &[f64]) -> RegressionTree {
    let mut nodes = Vec::new();
    let indices: Vec<usize> = (0..targets.len()).collect();
    grow_node(&mut nodes, xs, targets, indices, 0);
    RegressionTree { nodes }
}

fn grow_node(
    nodes: &mut Vec<Node>,
    xs: &[Vec<f64>],
    targets: &[f64],
    indices: Vec<usize>,
    depth: usize,
) -> usize {
    let mean = indices.iter().map(|i| targets[*i]).sum::<f64>() / indices.len() as f64;
    if depth >= MAX_DEPTH || indices.len() < 2 {
        nodes.push(Node::Leaf { value: mean });
        return nodes.len() - 1;
    }
    let Some(split) = best_split(xs, targets, &indices) else {
        nodes.push(Node::Leaf { value: mean });
        return nodes.len() - 1;
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|i| xs[*i][split.feature] <= split.threshold);
    debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());

    let here = nodes.len();
    nodes.push(Node::Leaf { value: mean }); // placeholder until children exist
    let left = grow_node(nodes, xs, targets, left_idx, depth + 1);
    let right = grow_node(nodes, xs, targets, right_idx, depth + 1);
    nodes[here] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    here
}

/// Exact scan over all features and thresholds; ties keep the first
/// (lowest feature, lowest threshold) candidate so growth is deterministic.
#[allow(clippy::needless_range_loop)]
fn best_split(xs: &[Vec<f64>], targets: &[f64], indices: &[usize]) -> Option<BestSplit> {
    let n = indices.len() as f64;
    let total: f64 = indices.iter().map(|i| targets[*i]).sum();
    let parent_score = total * total / n;
    let n_features = xs[0].len();

    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = indices.to_vec();
    for feature in 0..n_features {
        order.sort_by(|a, b| xs[*a][feature].total_cmp(&xs[*b][feature]));
        let mut left_sum = 0.0;
        for (position, i) in order.iter().enumerate().take(order.len() - 1) {
            left_sum += targets[*i];
            let here = xs[*i][feature];
            let next = xs[order[position + 1]][feature];
            if here == next {
                continue;
            }
            let left_n = (position + 1) as f64;
            let right_n = n - left_n;
            let right_sum = total - left_sum;
            let gain =
                left_sum * left_sum / left_n + right_sum * right_sum / right_n - parent_score;
            if gain > MIN_SPLIT_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(BestSplit {
                    feature,
                    threshold: (here + next) / 2.0,
                    gain,
                });
            }
        }
    }
    best
}
