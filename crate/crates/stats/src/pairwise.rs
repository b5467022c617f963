use crate::{mann_whitney_one_tailed, Alternative, StatsError, TestResult};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Ordered-pair test results; `cells[i][j]` tests group `i` (as `a`)
/// against group `j` (as `b`). The diagonal is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    pub labels: Vec<String>,
    pub alternative: Alternative,
    pub cells: Vec<Vec<Option<TestResult>>>,
}

impl PairwiseMatrix {
    pub fn p_value(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j].map(|r| r.p_value)
    }

    pub fn significant(&self, i: usize, j: usize) -> Option<bool> {
        self.p_value(i, j).map(|p| p < SIGNIFICANCE_LEVEL)
    }
}

pub fn pairwise_matrix(
    groups: &[(String, Vec<f64>)],
    alternative: Alternative,
) -> Result<PairwiseMatrix, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some((label, _)) = groups.iter().find(|(_, s)| s.is_empty()) {
        return Err(StatsError::EmptyGroup(label.clone()));
    }
    let mut cells = Vec::with_capacity(groups.len());
    for (i, (_, a)) in groups.iter().enumerate() {
        let mut row = Vec::with_capacity(groups.len());
        for (j, (_, b)) in groups.iter().enumerate() {
            row.push(if i == j {
                None
            } else {
                Some(mann_whitney_one_tailed(a, b, alternative)?)
            });
        }
        cells.push(row);
    }
    Ok(PairwiseMatrix {
        labels: groups.iter().map(|(l, _)| l.clone()).collect(),
        alternative,
        cells,
    })
}
