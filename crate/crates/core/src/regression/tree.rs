use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_samples_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
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

/// Weighted least-squares regression tree with axis-aligned splits.
///
/// A split sends `x[feature] <= threshold` left. Candidate thresholds are
/// midpoints between consecutive distinct values; among equal gains the
/// lowest feature index and then the lowest threshold wins.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

struct Data<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    w: &'a [f64],
}

pub(crate) fn check_training_data(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            what: "targets vs features",
            expected: x.len(),
            found: y.len(),
        });
    }
    if w.len() != x.len() {
        return Err(Error::LengthMismatch {
            what: "sample weights vs features",
            expected: x.len(),
            found: w.len(),
        });
    }
    let p = x[0].len();
    if let Some(row) = x.iter().find(|row| row.len() != p) {
        return Err(Error::LengthMismatch {
            what: "feature row",
            expected: p,
            found: row.len(),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data"));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite("sample weights"));
    }
    if !(w.iter().sum::<f64>() > 0.0) {
        return Err(Error::InvalidConfig("sample weights sum to zero".into()));
    }
    Ok(p)
}

impl RegressionTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], w: &[f64], config: TreeConfig) -> Result<Self> {
        if config.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be positive".into()));
        }
        let n_features = check_training_data(x, y, w)?;
        let mut tree = Self {
            nodes: Vec::new(),
            n_features,
        };
        let data = Data { x, y, w };
        tree.build(&data, (0..x.len()).collect(), 0, config);
        Ok(tree)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if features[feature] <= threshold { left } else { right },
            }
        }
    }

    fn build(&mut self, data: &Data<'_>, idx: Vec<usize>, depth: usize, config: TreeConfig) -> usize {
        let (mut sw, mut swy, mut swyy) = (0.0, 0.0, 0.0);
        for &i in &idx {
            sw += data.w[i];
            swy += data.w[i] * data.y[i];
            swyy += data.w[i] * data.y[i] * data.y[i];
        }
        let value = if sw > 0.0 {
            swy / sw
        } else {
            idx.iter().map(|&i| data.y[i]).sum::<f64>() / idx.len() as f64
        };
        let node = self.nodes.len();
        self.nodes.push(Node::Leaf { value });

        let sse = swyy - if sw > 0.0 { swy * swy / sw } else { 0.0 };
        if depth >= config.max_depth
            || idx.len() < 2 * config.min_samples_leaf
            || sw <= 0.0
            || sse <= 1e-12 * swyy
        {
            return node;
        }
        let Some((feature, threshold)) = best_split(data, &idx, sw, swy, swyy, config) else {
            return node;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| data.x[i][feature] <= threshold);
        let left = self.build(data, left_idx, depth + 1, config);
        let right = self.build(data, right_idx, depth + 1, config);
        self.nodes[node] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        node
    }
}

fn best_split(
    data: &Data<'_>,
    idx: &[usize],
    sw: f64,
    swy: f64,
    swyy: f64,
    config: TreeConfig,
) -> Option<(usize, f64)> {
    let n = idx.len();
    let parent = swy * swy / sw;
    let mut best: Option<(usize, f64)> = None;
    let mut best_gain = 1e-12 * swyy;
    let mut sorted = idx.to_vec();
    let n_features = data.x[idx[0]].len();
    for f in 0..n_features {
        sorted.sort_by(|&a, &b| data.x[a][f].total_cmp(&data.x[b][f]).then(a.cmp(&b)));
        let (mut wl, mut sl) = (0.0, 0.0);
        for pos in 1..n {
            let prev = sorted[pos - 1];
            wl += data.w[prev];
            sl += data.w[prev] * data.y[prev];
            if pos < config.min_samples_leaf || n - pos < config.min_samples_leaf {
                continue;
            }
            let lo = data.x[prev][f];
            let hi = data.x[sorted[pos]][f];
            if lo == hi {
                continue;
            }
            let wr = sw - wl;
            if wl <= 0.0 || wr <= 0.0 {
                continue;
            }
            let sr = swy - sl;
            let gain = sl * sl / wl + sr * sr / wr - parent;
            if gain > best_gain {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best_gain = gain;
                best = Some((f, threshold));
            }
        }
    }
    best
}
