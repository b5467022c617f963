//! Farm-plot choice: which plots a household can see under each social
//! configuration, how each factor scores them, and the argmax decision.
//!
//! Sub-scores are min-max normalized over the current candidate set. When
//! every candidate has the same raw value they all score `1.0`. `F_Mig` is
//! already binary and is not normalized.

use std::collections::BTreeSet;

use crate::factor::{Factor, SocialConfig, FACTOR_COUNT};
use crate::rule::{Presence, RuleTree};
use crate::world::{CellId, Household, HouseholdId, PerfRank, WorldState};

fn informants(
    social: SocialConfig,
    household: &Household,
    world: &WorldState,
    radius: f64,
    top_k: usize,
) -> Vec<CellId> {
    let land = &world.landscape;
    let r_sq = radius * radius;
    let mut farms = vec![household.farm_cell];
    match social {
        SocialConfig::All => {}
        SocialConfig::Fam => {
            let mut family: BTreeSet<HouseholdId> = BTreeSet::new();
            if let Some(parent) = household.parent_id.and_then(|p| world.households.get(&p)) {
                family.insert(parent.id);
                family.extend(parent.children_ids.iter().copied());
                if let Some(gp) = parent.parent_id {
                    family.insert(gp);
                }
            }
            family.remove(&household.id);
            farms.extend(
                family
                    .iter()
                    .filter_map(|id| world.households.get(id))
                    .map(|h| h.farm_cell),
            );
        }
        SocialConfig::Neigh => {
            farms.extend(
                world
                    .households
                    .values()
                    .filter(|h| h.id != household.id)
                    .filter(|h| land.distance_sq(h.farm_cell, household.farm_cell) <= r_sq)
                    .map(|h| h.farm_cell),
            );
        }
        SocialConfig::Perf => {
            let mut ranked: Vec<&Household> = world
                .households
                .values()
                .filter(|h| h.id != household.id)
                .collect();
            let key = |h: &Household| match world.config.perf_rank {
                PerfRank::CornStock => h.corn_stock,
                PerfRank::LastYield => h.last_yield,
            };
            // best first, ties by id
            ranked.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.id.cmp(&b.id)));
            farms.extend(ranked.into_iter().take(top_k).map(|h| h.farm_cell));
        }
    }
    farms
}

/// Available plots visible to `household` under `social`, ascending by id.
///
/// S_All sees every available plot. The other configurations see available
/// plots within `radius` of an informant's farm; the household itself is
/// always an informant.
pub fn candidate_set(
    social: SocialConfig,
    household: &Household,
    world: &WorldState,
    radius: f64,
    top_k: usize,
) -> Vec<CellId> {
    let land = &world.landscape;
    let available = (0..land.len()).filter(|&c| world.is_available(c));
    if social == SocialConfig::All {
        return available.collect();
    }
    let farms = informants(social, household, world, radius, top_k);
    let r_sq = radius * radius;
    available
        .filter(|&c| farms.iter().any(|&f| land.distance_sq(c, f) <= r_sq))
        .collect()
}

fn min_max_normalize(raw: &mut [f64]) {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    for v in raw.iter_mut() {
        *v = if range > 0.0 {
            ((*v - lo) / range).clamp(0.0, 1.0)
        } else {
            1.0
        };
    }
}

/// Per-candidate count, age sum and corn-stock sum of the other households
/// farming within the social radius.
struct Neighbourhood {
    count: Vec<f64>,
    age_sum: Vec<f64>,
    corn_sum: Vec<f64>,
}

impl Neighbourhood {
    fn scan(household: &Household, candidates: &[CellId], world: &WorldState) -> Self {
        let land = &world.landscape;
        let r_sq = world.config.radius * world.config.radius;
        let others: Vec<(f64, f64, f64, f64)> = world
            .households
            .values()
            .filter(|h| h.id != household.id)
            .map(|h| {
                let c = land.cell(h.farm_cell);
                (f64::from(c.row), f64::from(c.col), f64::from(h.age), h.corn_stock)
            })
            .collect();
        let n = candidates.len();
        let mut out = Neighbourhood {
            count: vec![0.0; n],
            age_sum: vec![0.0; n],
            corn_sum: vec![0.0; n],
        };
        for (i, &c) in candidates.iter().enumerate() {
            let cell = land.cell(c);
            let (r, col) = (f64::from(cell.row), f64::from(cell.col));
            let (mut k, mut a, mut s) = (0.0, 0.0, 0.0);
            for &(hr, hc, age, corn) in &others {
                let (dr, dc) = (hr - r, hc - col);
                if dr * dr + dc * dc <= r_sq {
                    k += 1.0;
                    a += age;
                    s += corn;
                }
            }
            out.count[i] = k;
            out.age_sum[i] = a;
            out.corn_sum[i] = s;
        }
        out
    }

    /// `-|own - neighbourhood mean|`, or 0 for an empty neighbourhood.
    fn homophily(&self, sums: &[f64], own: f64) -> Vec<f64> {
        self.count
            .iter()
            .zip(sums)
            .map(|(&k, &s)| if k == 0.0 { 0.0 } else { -(own - s / k).abs() })
            .collect()
    }
}

/// Raw (unnormalized) measure of `factor` for every candidate.
fn raw_measures(
    factor: Factor,
    household: &Household,
    candidates: &[CellId],
    world: &WorldState,
    hood: &mut Option<Neighbourhood>,
) -> Vec<f64> {
    let land = &world.landscape;
    let year = world.year;
    let r_sq = world.config.radius * world.config.radius;
    match factor {
        Factor::Dist => candidates
            .iter()
            .map(|&c| land.distance(household.farm_cell, c))
            .collect(),
        Factor::Dry => candidates.iter().map(|&c| land.cell(c).dryness(year)).collect(),
        Factor::Qual => candidates.iter().map(|&c| land.cell(c).quality).collect(),
        Factor::Yield => {
            let prev = year.saturating_sub(1);
            let table = &world.config.yield_table;
            candidates
                .iter()
                .map(|&c| {
                    let cell = land.cell(c);
                    cell.quality * table.base_yield(cell.dryness(prev))
                })
                .collect()
        }
        Factor::Water => {
            let sources = land.water_sources(year);
            candidates
                .iter()
                .map(|&c| {
                    sources
                        .iter()
                        .filter(|&&w| land.distance_sq(c, w) <= r_sq)
                        .count() as f64
                })
                .collect()
        }
        Factor::Soc => hood
            .get_or_insert_with(|| Neighbourhood::scan(household, candidates, world))
            .count
            .clone(),
        Factor::HAge => {
            let h = hood.get_or_insert_with(|| Neighbourhood::scan(household, candidates, world));
            h.homophily(&h.age_sum, f64::from(household.age))
        }
        Factor::HAgri => {
            let h = hood.get_or_insert_with(|| Neighbourhood::scan(household, candidates, world));
            h.homophily(&h.corn_sum, household.corn_stock)
        }
        Factor::Mig => {
            let zone = land.cell(household.farm_cell).zone;
            candidates
                .iter()
                .map(|&c| if land.cell(c).zone != zone { 1.0 } else { 0.0 })
                .collect()
        }
    }
}

fn subscores_with(
    factor: Factor,
    household: &Household,
    candidates: &[CellId],
    world: &WorldState,
    hood: &mut Option<Neighbourhood>,
) -> Vec<f64> {
    let mut raw = raw_measures(factor, household, candidates, world, hood);
    if factor != Factor::Mig {
        min_max_normalize(&mut raw);
    }
    raw
}

/// Sub-scores in `[0, 1]` of `factor` for every candidate, in order.
pub fn factor_subscores(
    factor: Factor,
    household: &Household,
    candidates: &[CellId],
    world: &WorldState,
) -> Vec<f64> {
    subscores_with(factor, household, candidates, world, &mut None)
}

/// Sub-score of one candidate `cell`, normalized against `candidates`.
pub fn factor_subscore(
    factor: Factor,
    cell: CellId,
    household: &Household,
    candidates: &[CellId],
    world: &WorldState,
) -> f64 {
    let pos = candidates
        .iter()
        .position(|&c| c == cell)
        .expect("cell must be a candidate");
    factor_subscores(factor, household, candidates, world)[pos]
}

/// Utility of every candidate under the rule's net factor coefficients.
pub fn rule_utilities(
    presence: &Presence,
    household: &Household,
    candidates: &[CellId],
    world: &WorldState,
) -> Vec<f64> {
    let mut utility = vec![0.0; candidates.len()];
    let mut hood = None;
    for f in Factor::ALL {
        let coef = presence.get(f);
        if coef == 0 {
            continue;
        }
        let scores = subscores_with(f, household, candidates, world, &mut hood);
        for (u, s) in utility.iter_mut().zip(scores) {
            *u += f64::from(coef) * s;
        }
    }
    utility
}

/// Index of the first maximum.
fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.map_or(true, |b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Choose a plot for `household` with a precomputed presence; `None` when
/// no plot is visible.
pub fn choose_plot(
    social: SocialConfig,
    presence: &Presence,
    household: &Household,
    world: &WorldState,
) -> Option<CellId> {
    let cfg = &world.config;
    let candidates = candidate_set(social, household, world, cfg.radius, cfg.top_k);
    let utility = rule_utilities(presence, household, &candidates, world);
    argmax_first(&utility).map(|i| candidates[i])
}

/// The rule's best visible plot for `household`; ties go to the lowest
/// cell id.
///
/// A `+`/`-` tree over sub-scores equals the sum of its factors' net
/// coefficients times their sub-scores, so the tree is folded into its
/// presence before scoring.
pub fn evaluate_rule(rule: &RuleTree, household: &Household, world: &WorldState) -> Option<CellId> {
    choose_plot(rule.social, &rule.presence(), household, world)
}

/// Per-factor sub-scores of each candidate, row per candidate.
pub fn subscore_matrix(
    household: &Household,
    candidates: &[CellId],
    world: &WorldState,
) -> Vec<[f64; FACTOR_COUNT]> {
    let mut rows = vec![[0.0; FACTOR_COUNT]; candidates.len()];
    let mut hood = None;
    for f in Factor::ALL {
        for (row, s) in rows
            .iter_mut()
            .zip(subscores_with(f, household, candidates, world, &mut hood))
        {
            row[f.index()] = s;
        }
    }
    rows
}
