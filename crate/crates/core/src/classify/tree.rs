use super::{check_row, check_training, Classifier};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEPTH: usize = 12;
pub const DEFAULT_MIN_LEAF: usize = 5;

/// CART classification tree grown on Gini impurity.
#[derive(Debug, Clone)]
pub struct DecisionTree {
    pub max_depth: usize,
    pub min_leaf: usize,
    nodes: Vec<Node>,
    dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

impl Default for DecisionTree {
    fn default() -> Self {
        DecisionTree::new(DEFAULT_MAX_DEPTH, DEFAULT_MIN_LEAF)
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for c in 1..counts.len() {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

struct Best {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl DecisionTree {
    pub fn new(max_depth: usize, min_leaf: usize) -> DecisionTree {
        DecisionTree {
            max_depth,
            min_leaf,
            nodes: Vec::new(),
            dim: 0,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    fn best_split(&self, x: &[Vec<f64>], y: &[usize], idx: &[usize], n_classes: usize, parent: &[usize]) -> Option<Best> {
        let n = idx.len();
        let mut best: Option<Best> = None;
        let mut order = idx.to_vec();
        for f in 0..self.dim {
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
            let mut left = vec![0usize; n_classes];
            let mut right = parent.to_vec();
            for i in 0..n - 1 {
                let c = y[order[i]];
                left[c] += 1;
                right[c] -= 1;
                let nl = i + 1;
                let nr = n - nl;
                let (a, b) = (x[order[i]][f], x[order[i + 1]][f]);
                if nl < self.min_leaf || nr < self.min_leaf || a == b {
                    continue;
                }
                let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                if best.as_ref().is_none_or(|bst| impurity < bst.impurity - 1e-15) {
                    best = Some(Best {
                        feature: f,
                        threshold: a + (b - a) / 2.0,
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, x: &[Vec<f64>], y: &[usize], idx: Vec<usize>, n_classes: usize, depth: usize) -> usize {
        let mut counts = vec![0usize; n_classes];
        for &i in &idx {
            counts[y[i]] += 1;
        }
        let node = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(&counts) });
        let parent_gini = gini(&counts, idx.len());
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf || parent_gini == 0.0 {
            return node;
        }
        let Some(best) = self.best_split(x, y, &idx, n_classes, &counts) else {
            return node;
        };
        if best.impurity >= parent_gini - 1e-12 {
            return node;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[i][best.feature] <= best.threshold);
        let left = self.grow(x, y, l, n_classes, depth + 1);
        let right = self.grow(x, y, r, n_classes, depth + 1);
        self.nodes[node] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        node
    }
}

impl Classifier for DecisionTree {
    fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::invalid("minimum leaf size must be at least 1"));
        }
        self.dim = check_training(x, y, n_classes)?;
        self.nodes.clear();
        self.grow(x, y, (0..x.len()).collect(), n_classes, 0);
        Ok(())
    }

    fn predict_one(&self, x: &[f64]) -> Result<usize> {
        if self.nodes.is_empty() {
            return Err(Error::NotFitted);
        }
        check_row(x, self.dim)?;
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return Ok(class),
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}
