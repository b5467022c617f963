//! CART regression trees grown by variance reduction.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::Dataset;

/// One node. Leaves have `split == None`; `mean` is the mean target of the
/// training samples that reached the node.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub split: Option<Split>,
    pub mean: f64,
    pub n: usize,
    /// Population variance of the node's targets.
    pub impurity: f64,
    /// `n·impurity - n_left·impurity_left - n_right·impurity_right`, zero for leaves.
    pub decrease: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

pub(crate) struct GrowParams {
    pub min_samples_leaf: usize,
    pub max_features: usize,
    pub max_depth: Option<usize>,
}

fn stats(y: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
    let var = rows.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

struct Candidate {
    feature: usize,
    threshold: f64,
    /// Summed squared error of the two children.
    sse: f64,
}

/// Best split of `rows` on `feature`, scanning midpoints between distinct
/// sorted values with both sides holding at least `min_leaf` rows.
fn best_on_feature(data: &Dataset, rows: &mut [usize], feature: usize, min_leaf: usize) -> Option<Candidate> {
    let x = |i: usize| data.x[i][feature];
    rows.sort_by(|&a, &b| x(a).total_cmp(&x(b)).then(a.cmp(&b)));
    let n = rows.len();
    let (total, total_sq) = rows
        .iter()
        .fold((0.0, 0.0), |(s, q), &i| (s + data.y[i], q + data.y[i] * data.y[i]));
    let (mut s, mut q) = (0.0, 0.0);
    let mut best: Option<Candidate> = None;
    for k in 0..n - 1 {
        let yi = data.y[rows[k]];
        s += yi;
        q += yi * yi;
        let nl = k + 1;
        let nr = n - nl;
        if nl < min_leaf || nr < min_leaf || x(rows[k]) == x(rows[k + 1]) {
            continue;
        }
        let sse_l = (q - s * s / nl as f64).max(0.0);
        let (sr, qr) = (total - s, total_sq - q);
        let sse_r = (qr - sr * sr / nr as f64).max(0.0);
        let sse = sse_l + sse_r;
        if best.as_ref().map_or(true, |b| sse < b.sse) {
            let threshold = x(rows[k]) + (x(rows[k + 1]) - x(rows[k])) / 2.0;
            best = Some(Candidate { feature, threshold, sse });
        }
    }
    best
}

impl Tree {
    /// Grow a tree on `rows` (which may repeat, as in a bootstrap sample).
    pub(crate) fn grow(data: &Dataset, rows: Vec<usize>, params: &GrowParams, rng: &mut impl Rng) -> Tree {
        let mut tree = Tree { nodes: Vec::new(), n_features: data.n_features() };
        let mut stack = vec![(rows, 0usize, None::<(usize, bool)>)];
        while let Some((mut rows, depth, parent)) = stack.pop() {
            let (mean, impurity) = stats(&data.y, &rows);
            let id = tree.nodes.len();
            tree.nodes.push(Node { split: None, mean, n: rows.len(), impurity, decrease: 0.0 });
            if let Some((p, is_left)) = parent {
                let s = tree.nodes[p].split.as_mut().expect("parent split");
                if is_left {
                    s.left = id;
                } else {
                    s.right = id;
                }
            }
            let n = rows.len();
            let depth_ok = params.max_depth.map_or(true, |m| depth < m);
            if n < 2 * params.min_samples_leaf || impurity <= 0.0 || !depth_ok {
                continue;
            }
            let node_sse = impurity * n as f64;
            let mut features: Vec<usize> = (0..data.n_features()).collect();
            features.shuffle(rng);
            let mut best: Option<Candidate> = None;
            // keep looking past max_features until some valid split exists
            for (visited, &f) in features.iter().enumerate() {
                if visited >= params.max_features && best.is_some() {
                    break;
                }
                if let Some(c) = best_on_feature(data, &mut rows, f, params.min_samples_leaf) {
                    if best.as_ref().map_or(true, |b| c.sse < b.sse) {
                        best = Some(c);
                    }
                }
            }
            let Some(best) = best else { continue };
            let decrease = node_sse - best.sse;
            if decrease <= 1e-12 * node_sse.max(1.0) {
                continue;
            }
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| data.x[i][best.feature] <= best.threshold);
            let node = &mut tree.nodes[id];
            node.split = Some(Split { feature: best.feature, threshold: best.threshold, left: 0, right: 0 });
            // exact decrease from the children's own statistics
            let (_, vl) = stats(&data.y, &left);
            let (_, vr) = stats(&data.y, &right);
            node.decrease = node_sse - vl * left.len() as f64 - vr * right.len() as f64;
            stack.push((right, depth + 1, Some((id, false))));
            stack.push((left, depth + 1, Some((id, true))));
        }
        tree
    }

    /// Indices of the nodes visited by `row`, root first.
    pub fn path(&self, row: &[f64]) -> Vec<usize> {
        let mut path = vec![0];
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if row[s.feature] <= s.threshold { s.left } else { s.right };
            path.push(i);
        }
        path
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        self.nodes[i].mean
    }

    pub fn is_leaf_only(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }
}
