//! Fitness metric and rank-based hypothesis tests.
//!
//! [`rmse`] scores a simulated household-count series against a target
//! series. [`mann_whitney_one_tailed`] compares two samples with a
//! one-sided alternative, switching between an exact null distribution and
//! the tie-corrected normal approximation. [`pairwise_matrix`] runs the test
//! over every ordered pair of labelled groups.

mod mann_whitney;
mod pairwise;

pub use mann_whitney::{
    exact_u_cdf, mann_whitney_one_tailed, u_statistic, Alternative, Method, TestResult,
    EXACT_MAX_PRODUCT,
};
pub use pairwise::{pairwise_matrix, PairwiseMatrix, SIGNIFICANCE_LEVEL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("series length mismatch: simulated has {sim}, target has {target}")]
    LengthMismatch { sim: usize, target: usize },
    #[error("sample `{0}` is empty")]
    EmptySample(&'static str),
    #[error("group `{0}` has no observations")]
    EmptyGroup(String),
    #[error("pairwise comparison needs at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("sample contains a non-finite value")]
    NonFinite,
}

/// Root mean squared error between two equal-length series.
///
/// Empty series yield `0.0`.
pub fn rmse(sim: &[f64], target: &[f64]) -> Result<f64, StatsError> {
    if sim.len() != target.len() {
        return Err(StatsError::LengthMismatch {
            sim: sim.len(),
            target: target.len(),
        });
    }
    if sim.is_empty() {
        return Ok(0.0);
    }
    let sse: f64 = sim
        .iter()
        .zip(target)
        .map(|(s, t)| (s - t) * (s - t))
        .sum();
    Ok((sse / sim.len() as f64).sqrt())
}

/// [`rmse`] for integer count series.
pub fn rmse_counts(sim: &[u32], target: &[u32]) -> Result<f64, StatsError> {
    let s: Vec<f64> = sim.iter().map(|&v| f64::from(v)).collect();
    let t: Vec<f64> = target.iter().map(|&v| f64::from(v)).collect();
    rmse(&s, &t)
}
