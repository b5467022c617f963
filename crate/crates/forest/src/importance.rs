//! Factor importance measures over a fitted forest.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::forest::mse;
use crate::tree::Tree;
use crate::{Dataset, ForestError, ForestModel};

/// Mean decrease in impurity per feature, averaged over trees and
/// normalized to sum to 1. All zeros when no tree has a split.
pub fn gini_importance(model: &ForestModel) -> Vec<f64> {
    let d = model.n_features();
    let mut total = vec![0.0; d];
    for tree in &model.trees {
        for node in &tree.nodes {
            if let Some(s) = node.split {
                total[s.feature] += node.decrease;
            }
        }
    }
    let n = model.trees.len() as f64;
    total.iter_mut().for_each(|v| *v /= n);
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        total.iter_mut().for_each(|v| *v /= sum);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationMode {
    /// Shuffle each column this many times and score the whole forest.
    Repeats(usize),
    /// Shuffle each column once and score every tree separately.
    PerTree,
}

/// Increase in held-out MSE when one column is shuffled, one distribution
/// per feature. A column no tree reads scores exactly 0 everywhere.
pub fn permutation_importance(
    model: &ForestModel,
    held_out: &Dataset,
    mode: PermutationMode,
    seed: u64,
) -> Result<Vec<Vec<f64>>, ForestError> {
    match mode {
        PermutationMode::Repeats(r) if r < 2 => return Err(ForestError::Repeats(r)),
        PermutationMode::PerTree if model.trees.len() < 2 => return Err(ForestError::Repeats(model.trees.len())),
        _ => {}
    }
    if held_out.is_empty() {
        return Err(ForestError::Shape("held-out set is empty".into()));
    }
    let d = model.n_features();
    let n = held_out.len();
    let forest_base = mse(&model.predict_all(&held_out.x), &held_out.y);
    let tree_base: Vec<f64> = model
        .trees
        .iter()
        .map(|t| mse(&held_out.x.iter().map(|r| t.predict(r)).collect::<Vec<_>>(), &held_out.y))
        .collect();

    Ok((0..d)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut shuffled = held_out.x.clone();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut shuffle = |shuffled: &mut Vec<Vec<f64>>| {
                perm.shuffle(&mut rng);
                for (row, &src) in shuffled.iter_mut().zip(&perm) {
                    row[j] = held_out.x[src][j];
                }
            };
            match mode {
                PermutationMode::Repeats(r) => (0..r)
                    .map(|_| {
                        shuffle(&mut shuffled);
                        mse(&model.predict_all(&shuffled), &held_out.y) - forest_base
                    })
                    .collect(),
                PermutationMode::PerTree => {
                    shuffle(&mut shuffled);
                    model
                        .trees
                        .iter()
                        .zip(&tree_base)
                        .map(|(t, base)| {
                            let p: Vec<f64> = shuffled.iter().map(|r| t.predict(r)).collect();
                            mse(&p, &held_out.y) - base
                        })
                        .collect()
                }
            }
        })
        .collect())
}

/// Sorted feature indices.
pub type FeatureSet = Vec<usize>;

fn mask_to_set(mask: u64) -> FeatureSet {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

/// Root mean of the tree and the increments along `row`'s path, each keyed
/// by the bitmask of distinct features split on up to and including that
/// step. `bias + Σ increments` equals the leaf mean.
pub fn path_contributions(tree: &Tree, row: &[f64]) -> (f64, Vec<(u64, f64)>) {
    let path = tree.path(row);
    let mut mask = 0u64;
    let mut steps = Vec::with_capacity(path.len().saturating_sub(1));
    for w in path.windows(2) {
        let parent = &tree.nodes[w[0]];
        let feature = parent.split.expect("internal node").feature;
        mask |= 1 << feature;
        steps.push((mask, tree.nodes[w[1]].mean - parent.mean));
    }
    (tree.nodes[0].mean, steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointContributions {
    /// Normalized score per feature set of size at most the requested limit.
    pub scores: BTreeMap<FeatureSet, f64>,
    /// Normalized score of every larger set combined.
    pub other: f64,
}

impl JointContributions {
    pub fn get(&self, set: &[usize]) -> f64 {
        let mut key = set.to_vec();
        key.sort_unstable();
        key.dedup();
        self.scores.get(&key).copied().unwrap_or(0.0)
    }

    /// Sets with names, highest score first, ties by key.
    pub fn ranked(&self, names: &[String]) -> Vec<(String, f64)> {
        let mut v: Vec<(&FeatureSet, f64)> = self.scores.iter().map(|(k, &s)| (k, s)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        v.into_iter()
            .map(|(k, s)| (k.iter().map(|&i| names[i].as_str()).collect::<Vec<_>>().join("+"), s))
            .collect()
    }
}

/// Joint path contributions: for every row and tree, sum the increments per
/// feature set, take absolute values, average over all (row, tree) pairs
/// and normalize so that all sets plus `other` sum to 1.
pub fn joint_contributions(model: &ForestModel, rows: &Dataset, max_set_size: usize) -> JointContributions {
    assert!(model.n_features() <= 64, "at most 64 features");
    const OTHER: u64 = u64::MAX;
    let per_row: Vec<BTreeMap<u64, f64>> = rows
        .x
        .par_iter()
        .map(|row| {
            let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
            for tree in &model.trees {
                let mut local: BTreeMap<u64, f64> = BTreeMap::new();
                for (mask, inc) in path_contributions(tree, row).1 {
                    let key = if mask.count_ones() as usize > max_set_size { OTHER } else { mask };
                    *local.entry(key).or_default() += inc;
                }
                for (k, v) in local {
                    *acc.entry(k).or_default() += v.abs();
                }
            }
            acc
        })
        .collect();
    let mut total: BTreeMap<u64, f64> = BTreeMap::new();
    for m in per_row {
        for (k, v) in m {
            *total.entry(k).or_default() += v;
        }
    }
    let pairs = (rows.len() * model.trees.len()).max(1) as f64;
    let sum: f64 = total.values().sum::<f64>() / pairs;
    let norm = |v: f64| if sum > 0.0 { v / pairs / sum } else { 0.0 };
    let other = total.remove(&OTHER).map_or(0.0, norm);
    JointContributions {
        scores: total.into_iter().map(|(k, v)| (mask_to_set(k), norm(v))).collect(),
        other,
    }
}
