//! Random-forest regression from rule presence vectors to fitness, plus
//! the importance measures used to rank factors: mean decrease in
//! impurity, mean decrease in accuracy under column permutation, and
//! joint path contributions over factor sets.

pub mod forest;
pub mod importance;
pub mod tree;

pub use forest::{fit_forest, mse, r_squared, select_n_trees, ForestConfig, ForestModel};
pub use importance::{
    path_contributions,
    gini_importance, joint_contributions, permutation_importance, FeatureSet, JointContributions, PermutationMode,
};
pub use tree::{Node, Split, Tree};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("invalid forest configuration: {0}")]
    Config(String),
    #[error("dataset shape: {0}")]
    Shape(String),
    #[error("{rows} rows cannot fill a leaf of {min_leaf}")]
    TooFewRows { rows: usize, min_leaf: usize },
    #[error("permutation importance needs at least 2 repeats, got {0}")]
    Repeats(usize),
}

/// Row-major feature matrix with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub column_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, column_names: Vec<String>) -> Result<Self, ForestError> {
        if x.len() != y.len() {
            return Err(ForestError::Shape(format!("{} rows but {} targets", x.len(), y.len())));
        }
        let d = column_names.len();
        if let Some(i) = x.iter().position(|r| r.len() != d) {
            return Err(ForestError::Shape(format!("row {i} has {} values, expected {d}", x[i].len())));
        }
        if x.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(ForestError::Shape("non-finite value".into()));
        }
        Ok(Self { x, y, column_names })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            column_names: self.column_names.clone(),
        }
    }
}
