use statrs::function::erf::erfc;

use crate::StatsError;

/// Largest `n_a * n_b` for which the exact null distribution is enumerated.
pub const EXACT_MAX_PRODUCT: usize = 400;

/// One-sided alternative hypothesis, phrased in terms of sample `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    Less,
    /// `a` tends to be larger than `b`.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    NormalApproximation,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::NormalApproximation => "normal-approximation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    /// `U` for sample `a`: pairs with `a_i > b_j`, ties counted one half.
    pub u_statistic: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub method: Method,
}

struct Ranked {
    u_a: f64,
    /// Sum of `t^3 - t` over tie groups of the pooled sample.
    tie_term: f64,
    ties_span_groups: bool,
}

fn rank_pooled(a: &[f64], b: &[f64]) -> Ranked {
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut ties_span_groups = false;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share the midrank
        let midrank = (i + 1 + j) as f64 / 2.0;
        let in_a = pooled[i..j].iter().filter(|p| p.1).count();
        rank_sum_a += midrank * in_a as f64;
        let t = (j - i) as f64;
        if j - i > 1 {
            tie_term += t * t * t - t;
            if in_a > 0 && in_a < j - i {
                ties_span_groups = true;
            }
        }
        i = j;
    }
    let n_a = a.len() as f64;
    Ranked {
        u_a: rank_sum_a - n_a * (n_a + 1.0) / 2.0,
        tie_term,
        ties_span_groups,
    }
}

/// Mann-Whitney `U` of `a` against `b` (midranks for ties).
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    rank_pooled(a, b).u_a
}

/// Null distribution counts of `U` for sample sizes `(n_a, n_b)` without
/// ties: returns `(#arrangements with U <= u, C(n_a + n_b, n_a))`.
pub fn exact_u_cdf(n_a: usize, n_b: usize, u: usize) -> (u128, u128) {
    let freq = exact_u_frequencies(n_a, n_b);
    let total: u128 = freq.iter().sum();
    let upto = u.min(freq.len() - 1);
    (freq[..=upto].iter().sum(), total)
}

/// Frequencies of each `U` value in `0..=n_a*n_b`, via the recurrence
/// `f(m, n) = shift(f(m-1, n), n) + f(m, n-1)` on the largest pooled element.
fn exact_u_frequencies(n_a: usize, n_b: usize) -> Vec<u128> {
    // prev[n] holds f(m-1, n); cur[n] holds f(m, n)
    let mut prev: Vec<Vec<u128>> = (0..=n_b).map(|_| vec![1]).collect();
    for m in 1..=n_a {
        let mut cur: Vec<Vec<u128>> = Vec::with_capacity(n_b + 1);
        cur.push(vec![1]);
        for n in 1..=n_b {
            let mut f = vec![0u128; m * n + 1];
            // largest element belongs to a: it beats all n of b
            for (k, &c) in prev[n].iter().enumerate() {
                f[k + n] += c;
            }
            // largest element belongs to b
            for (k, &c) in cur[n - 1].iter().enumerate() {
                f[k] += c;
            }
            cur.push(f);
        }
        prev = cur;
    }
    prev.swap_remove(n_b)
}

fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// One-tailed Mann-Whitney U test.
///
/// Uses the exact null distribution when `n_a * n_b <= EXACT_MAX_PRODUCT`
/// and no tie group contains members of both samples; otherwise the normal
/// approximation with tie-corrected variance and a 0.5 continuity
/// correction.
pub fn mann_whitney_one_tailed(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
) -> Result<TestResult, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample("a"));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample("b"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (n_a, n_b) = (a.len(), b.len());
    let ranked = rank_pooled(a, b);
    let u = ranked.u_a;
    let max_u = (n_a * n_b) as f64;

    if n_a * n_b <= EXACT_MAX_PRODUCT && !ranked.ties_span_groups {
        // U is integral without cross-group ties
        let u_int = u.round() as usize;
        let p = match alternative {
            Alternative::Less => {
                let (le, total) = exact_u_cdf(n_a, n_b, u_int);
                le as f64 / total as f64
            }
            Alternative::Greater => {
                // P(U >= u) = P(U' <= n_a n_b - u) by symmetry
                let (le, total) = exact_u_cdf(n_a, n_b, n_a * n_b - u_int);
                le as f64 / total as f64
            }
        };
        return Ok(TestResult {
            u_statistic: u,
            p_value: p.clamp(0.0, 1.0),
            n_a,
            n_b,
            method: Method::Exact,
        });
    }

    let n = (n_a + n_b) as f64;
    let mean = max_u / 2.0;
    let variance = max_u / 12.0 * ((n + 1.0) - ranked.tie_term / (n * (n - 1.0)));
    let p = if variance <= 0.0 {
        // every observation tied
        1.0
    } else {
        let sd = variance.sqrt();
        match alternative {
            Alternative::Less => standard_normal_cdf((u - mean + 0.5) / sd),
            Alternative::Greater => standard_normal_cdf(-(u - mean - 0.5) / sd),
        }
    };
    Ok(TestResult {
        u_statistic: u,
        p_value: p.clamp(0.0, 1.0),
        n_a,
        n_b,
        method: Method::NormalApproximation,
    })
}
