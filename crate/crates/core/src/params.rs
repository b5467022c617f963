//! The eleven scalar simulation parameters and their sampling ranges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PARAM_COUNT: usize = 11;

pub const PARAM_NAMES: [&str; PARAM_COUNT] = [
    "water_source_distance",
    "death_age_span",
    "min_fertility",
    "base_nutrition_need",
    "fertility_span",
    "min_fertility_ends_age",
    "harvest_variance",
    "harvest_adjustment",
    "maize_gift_to_child",
    "min_death_age",
    "fertility_ends_age_span",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Max distance (cells) from a new farm to its dwelling.
    pub water_source_distance: f64,
    /// Years added to `min_death_age`, scaled by a per-household draw.
    pub death_age_span: f64,
    /// Yearly fission probability floor.
    pub min_fertility: f64,
    /// Nutrition units consumed per household per year.
    pub base_nutrition_need: f64,
    /// Added to `min_fertility`, scaled by a per-household draw.
    pub fertility_span: f64,
    pub min_fertility_ends_age: f64,
    /// Relative half-width of yearly harvest noise.
    pub harvest_variance: f64,
    pub harvest_adjustment: f64,
    /// Fraction of the parent's corn stock given to a new child household.
    pub maize_gift_to_child: f64,
    pub min_death_age: f64,
    pub fertility_ends_age_span: f64,
}

impl SimParams {
    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        [
            self.water_source_distance,
            self.death_age_span,
            self.min_fertility,
            self.base_nutrition_need,
            self.fertility_span,
            self.min_fertility_ends_age,
            self.harvest_variance,
            self.harvest_adjustment,
            self.maize_gift_to_child,
            self.min_death_age,
            self.fertility_ends_age_span,
        ]
    }

    pub fn from_array(v: [f64; PARAM_COUNT]) -> Self {
        Self {
            water_source_distance: v[0],
            death_age_span: v[1],
            min_fertility: v[2],
            base_nutrition_need: v[3],
            fertility_span: v[4],
            min_fertility_ends_age: v[5],
            harvest_variance: v[6],
            harvest_adjustment: v[7],
            maize_gift_to_child: v[8],
            min_death_age: v[9],
            fertility_ends_age_span: v[10],
        }
    }

    /// Centre of every published range.
    pub fn midpoint() -> Self {
        ParamRanges::published().midpoint()
    }
}

/// Closed interval `[lo, hi]` per parameter, in [`PARAM_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRanges(pub [(f64, f64); PARAM_COUNT]);

impl ParamRanges {
    /// ±5% around the calibrated optimum of the reference model.
    pub const fn published() -> Self {
        ParamRanges([
            (10.925, 12.075),
            (9.5, 10.5),
            (0.1615, 0.1785),
            (175.75, 194.25),
            (0.0285, 0.0315),
            (27.55, 30.45),
            (0.418, 0.462),
            (0.608, 0.672),
            (0.4465, 0.4935),
            (38.0, 42.0),
            (4.75, 5.25),
        ])
    }

    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        PARAM_NAMES.iter().position(|&n| n == name).map(|i| self.0[i])
    }

    pub fn set(&mut self, name: &str, range: (f64, f64)) -> bool {
        match PARAM_NAMES.iter().position(|&n| n == name) {
            Some(i) => {
                self.0[i] = range;
                true
            }
            None => false,
        }
    }

    pub fn midpoint(&self) -> SimParams {
        let mut v = [0.0; PARAM_COUNT];
        for (out, (lo, hi)) in v.iter_mut().zip(self.0) {
            *out = (lo + hi) / 2.0;
        }
        SimParams::from_array(v)
    }

    pub fn contains(&self, p: &SimParams) -> bool {
        p.to_array()
            .iter()
            .zip(self.0)
            .all(|(&v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|&(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi)
    }
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self::published()
    }
}

/// Draw every parameter uniformly within its interval. A collapsed
/// interval `[a, a]` always yields `a`.
pub fn sample_params(ranges: &ParamRanges, seed: u64) -> SimParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = [0.0; PARAM_COUNT];
    for (out, &(lo, hi)) in v.iter_mut().zip(&ranges.0) {
        let u: f64 = rng.gen();
        *out = if lo == hi { lo } else { (lo + u * (hi - lo)).clamp(lo, hi) };
    }
    SimParams::from_array(v)
}
