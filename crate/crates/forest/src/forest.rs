//! Bagged regression forests and model-size selection.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::tree::{GrowParams, Tree};
use crate::{Dataset, ForestError};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means `max(1, d / 3)`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    /// Fraction of rows used for training; the rest are held out.
    pub split_fraction: f64,
    /// Train each tree on a bootstrap resample of the training rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 520,
            min_samples_leaf: 5,
            max_features: None,
            max_depth: None,
            split_fraction: 0.9,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn features_per_split(&self, d: usize) -> usize {
        self.max_features.unwrap_or((d / 3).max(1)).clamp(1, d.max(1))
    }

    fn validate(&self, rows: usize) -> Result<(), ForestError> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(ForestError::Config(format!("split_fraction {} outside (0, 1)", self.split_fraction)));
        }
        if self.n_trees == 0 {
            return Err(ForestError::Config("n_trees must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::Config("min_samples_leaf must be positive".into()));
        }
        if rows < self.min_samples_leaf {
            return Err(ForestError::TooFewRows { rows, min_leaf: self.min_samples_leaf });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub column_names: Vec<String>,
    /// Row indices (into the input dataset) used for training.
    pub train_rows: Vec<usize>,
    pub held_out_rows: Vec<usize>,
}

impl ForestModel {
    /// Mean of the per-tree predictions.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict_all(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict(r)).collect()
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }
}

pub fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64
}

pub fn r_squared(pred: &[f64], y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Deterministic shuffle of row indices split into (train, held out). At
/// least one row lands on each side when there are two or more rows.
fn split_rows(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut n_train = ((n as f64) * fraction).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    } else {
        n_train = n;
    }
    let held = idx.split_off(n_train);
    (idx, held)
}

/// Fit a forest on a seeded split of `data`; returns the model and the
/// held-out rows.
pub fn fit_forest(data: &Dataset, config: &ForestConfig) -> Result<(ForestModel, Dataset), ForestError> {
    config.validate(data.len())?;
    if data.n_features() == 0 {
        return Err(ForestError::Shape("no feature columns".into()));
    }
    let (train_rows, held_out_rows) = split_rows(data.len(), config.split_fraction, config.seed);
    if train_rows.len() < config.min_samples_leaf {
        return Err(ForestError::TooFewRows { rows: train_rows.len(), min_leaf: config.min_samples_leaf });
    }
    let params = GrowParams {
        min_samples_leaf: config.min_samples_leaf,
        max_features: config.features_per_split(data.n_features()),
        max_depth: config.max_depth,
    };
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64 + 1);
            let rows = if config.bootstrap {
                (0..train_rows.len()).map(|_| train_rows[rng.gen_range(0..train_rows.len())]).collect()
            } else {
                train_rows.clone()
            };
            Tree::grow(data, rows, &params, &mut rng)
        })
        .collect();
    let held = data.subset(&held_out_rows);
    Ok((
        ForestModel { trees, column_names: data.column_names.clone(), train_rows, held_out_rows },
        held,
    ))
}

/// Fit one forest per candidate size on the same split and return the size
/// with the lowest held-out MSE (ties to the smaller size) together with
/// every `(size, mse)` pair in candidate order.
pub fn select_n_trees(
    data: &Dataset,
    candidates: &[usize],
    config: &ForestConfig,
) -> Result<(usize, Vec<(usize, f64)>), ForestError> {
    if candidates.is_empty() {
        return Err(ForestError::Config("no candidate tree counts".into()));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for &n in candidates {
        let (model, held) = fit_forest(data, &ForestConfig { n_trees: n, ..config.clone() })?;
        scores.push((n, mse(&model.predict_all(&held.x), &held.y)));
    }
    let best = scores
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty")
        .0;
    Ok((best, scores))
}
