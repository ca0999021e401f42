//! CART decision tree with Gini impurity and per-split feature subsampling.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    /// Training label counts, indexed by label.
    Leaf { counts: Vec<usize> },
}

/// Nodes in an arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

pub(crate) struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: usize,
    pub n_classes: usize,
}

/// Row-major training data view.
pub(crate) struct Samples<'a> {
    pub values: &'a [f64],
    pub n_features: usize,
    pub labels: &'a [usize],
}

impl Samples<'_> {
    fn x(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features + feature]
    }
}

pub fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    /// Number of sorted rows that go left.
    split_at: usize,
}

impl DecisionTree {
    /// Grows a tree on `rows` (indices into `data`, repeats allowed).
    pub(crate) fn fit<R: Rng>(data: &Samples<'_>, rows: Vec<usize>, cfg: &TreeConfig, rng: &mut R) -> Self {
        let mut nodes = vec![Node::Leaf { counts: Vec::new() }];
        let mut stack = vec![(0usize, rows, 0usize)];
        let mut order: Vec<usize> = (0..data.n_features).collect();
        while let Some((slot, mut idx, depth)) = stack.pop() {
            let counts = histogram(data.labels, &idx, cfg.n_classes);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = cfg.max_depth.is_some_and(|d| depth >= d);
            let split = if pure || depth_capped || idx.len() < 2 * cfg.min_samples_leaf {
                None
            } else {
                order.shuffle(rng);
                best_split(data, &mut idx, &counts, cfg, &order)
            };
            match split {
                None => nodes[slot] = Node::Leaf { counts },
                Some(c) => {
                    idx.sort_by(|&a, &b| data.x(a, c.feature).total_cmp(&data.x(b, c.feature)));
                    let right_rows = idx.split_off(c.split_at);
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    nodes[slot] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        gain: c.gain,
                        left: l,
                        right: r,
                    };
                    stack.push((r, right_rows, depth + 1));
                    stack.push((l, idx, depth + 1));
                }
            }
        }
        Self { nodes }
    }

    pub fn leaf_counts(&self, x: &[f64]) -> &[usize] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority label of the reached leaf; ties go to the lower label.
    pub fn predict_row(&self, x: &[f64]) -> usize {
        argmax_lowest(self.leaf_counts(x))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn histogram(labels: &[usize], idx: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for &i in idx {
        counts[labels[i]] += 1;
    }
    counts
}

/// Examines features in `order` until `max_features` non-constant ones have
/// been scanned (or all are exhausted), keeping the largest Gini decrease.
fn best_split(
    data: &Samples<'_>,
    idx: &mut [usize],
    parent: &[usize],
    cfg: &TreeConfig,
    order: &[usize],
) -> Option<Candidate> {
    let n = idx.len();
    let parent_impurity = gini(parent, n);
    let mut best: Option<Candidate> = None;
    let mut visited = 0;
    for &f in order {
        if visited >= cfg.max_features {
            break;
        }
        idx.sort_by(|&a, &b| data.x(a, f).total_cmp(&data.x(b, f)));
        let (lo, hi) = (data.x(idx[0], f), data.x(idx[n - 1], f));
        if lo == hi {
            continue;
        }
        visited += 1;
        let mut left = vec![0usize; cfg.n_classes];
        let mut right = parent.to_vec();
        for pos in 1..n {
            let lab = data.labels[idx[pos - 1]];
            left[lab] += 1;
            right[lab] -= 1;
            let (a, b) = (data.x(idx[pos - 1], f), data.x(idx[pos], f));
            if a == b || pos < cfg.min_samples_leaf || n - pos < cfg.min_samples_leaf {
                continue;
            }
            let weighted = (pos as f64 * gini(&left, pos) + (n - pos) as f64 * gini(&right, n - pos)) / n as f64;
            let gain = (parent_impurity - weighted).max(0.0);
            if best.as_ref().is_none_or(|c| gain > c.gain) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    gain,
                    split_at: pos,
                });
            }
        }
    }
    best
}
