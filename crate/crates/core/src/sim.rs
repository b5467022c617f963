//! Annual household dynamics.
//!
//! Each year runs these phases in order, visiting households by ascending
//! id; every random draw comes from the state's single generator in
//! exactly this order:
//!
//! 1. harvest: one noise draw per household;
//! 2. consumption;
//! 3. aging and death (starvation or old age);
//! 4. fission: one Bernoulli draw per fertile household, then three birth
//!    trait draws per child;
//! 5. relocation of households whose projected harvest falls short;
//! 6. the year advances.

use std::collections::BTreeSet;

use emd_stats::rmse_counts;
use rand::Rng;

use crate::factor::SocialConfig;
use crate::params::SimParams;
use crate::rule::{Presence, RuleTree};
use crate::select::choose_plot;
use crate::world::{birth_traits, Household, WorldState, WorldTemplate};
use crate::world::{HistoricalSeries, SimConfig, HORIZON};
use crate::SimError;

/// A rule folded to what the simulation needs per decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompiledRule {
    pub social: SocialConfig,
    pub presence: Presence,
}

impl From<&RuleTree> for CompiledRule {
    fn from(rule: &RuleTree) -> Self {
        Self {
            social: rule.social,
            presence: rule.presence(),
        }
    }
}

fn projected_harvest(state: &WorldState, params: &SimParams, h: &Household) -> f64 {
    let cell = state.landscape.cell(h.farm_cell);
    cell.quality
        * state.config.yield_table.base_yield(cell.dryness(state.year))
        * params.harvest_adjustment
}

/// Advance `state` by one year.
pub fn step_year(state: &mut WorldState, params: &SimParams, rule: &CompiledRule) {
    let ids: Vec<_> = state.households.keys().copied().collect();

    // 1. harvest
    for &id in &ids {
        let u: f64 = state.rng.gen_range(-1.0..=1.0);
        let expected = projected_harvest(state, params, &state.households[&id]);
        let h = state.households.get_mut(&id).expect("live household");
        h.last_yield = (expected * (1.0 + u * params.harvest_variance)).max(0.0);
    }

    // 2. consumption
    for h in state.households.values_mut() {
        h.corn_stock += h.last_yield - params.base_nutrition_need;
    }

    // 3. aging and death
    let mut dead = Vec::new();
    for h in state.households.values_mut() {
        h.age += 1;
        if h.corn_stock < 0.0 || f64::from(h.age) > h.death_age {
            dead.push(h.id);
        }
    }
    for id in dead {
        state.remove_household(id);
    }

    // 4. fission
    let adult_age = state.config.adult_age;
    let parents: Vec<_> = state.households.keys().copied().collect();
    for pid in parents {
        let (fertile, fertility) = {
            let p = &state.households[&pid];
            let fertile = p.age >= adult_age && f64::from(p.age) <= p.fertility_end_age;
            (fertile, p.fertility)
        };
        if !fertile {
            continue;
        }
        let draw: f64 = state.rng.gen();
        if draw >= fertility {
            continue;
        }
        let (death_age, fertility_end_age, child_fertility) = birth_traits(&mut state.rng, params);
        let child_id = state.allocate_id();
        let parent = state.households.get_mut(&pid).expect("live parent");
        let gift = params.maize_gift_to_child * parent.corn_stock;
        parent.corn_stock -= gift;
        // the child looks for land from its parent's farm
        let mut child = Household {
            id: child_id,
            age: 0,
            farm_cell: parent.farm_cell,
            dwelling_cell: None,
            corn_stock: gift,
            last_yield: 0.0,
            parent_id: Some(pid),
            children_ids: BTreeSet::new(),
            death_age,
            fertility_end_age,
            fertility: child_fertility,
        };
        if let Some(farm) = choose_plot(rule.social, &rule.presence, &child, state) {
            child.farm_cell = farm;
            state.insert_household(child);
            state.place_dwelling(child_id, params);
        }
    }

    // 5. relocation
    let ids: Vec<_> = state.households.keys().copied().collect();
    for id in ids {
        let h = &state.households[&id];
        if projected_harvest(state, params, h) >= params.base_nutrition_need {
            continue;
        }
        match choose_plot(rule.social, &rule.presence, h, state) {
            Some(farm) => {
                state.move_farm(id, farm);
                state.place_dwelling(id, params);
            }
            None => {
                state.remove_household(id);
            }
        }
    }

    // 6.
    state.year += 1;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    /// Live households after each simulated year.
    pub counts: Vec<u32>,
    pub rmse: f64,
}

/// Run the full horizon and score it against `history`. Once the
/// population is extinct the remaining years count zero.
pub fn run_simulation(
    template: &WorldTemplate,
    config: &std::sync::Arc<SimConfig>,
    params: &SimParams,
    rule: &RuleTree,
    seed: u64,
    history: &HistoricalSeries,
) -> Result<SimRun, SimError> {
    let counts = simulate_counts(template, config, params, rule, seed);
    if history.counts.len() != counts.len() {
        return Err(SimError::HistoryLength {
            expected: counts.len(),
            found: history.counts.len(),
        });
    }
    let rmse = rmse_counts(&counts, &history.counts).map_err(|e| SimError::Stats(e.to_string()))?;
    Ok(SimRun { counts, rmse })
}

/// Household counts for every year of the horizon.
pub fn simulate_counts(
    template: &WorldTemplate,
    config: &std::sync::Arc<SimConfig>,
    params: &SimParams,
    rule: &RuleTree,
    seed: u64,
) -> Vec<u32> {
    let compiled = CompiledRule::from(rule);
    let mut state = WorldState::new(template, std::sync::Arc::clone(config), params, seed);
    let mut counts = Vec::with_capacity(HORIZON);
    for _ in 0..HORIZON {
        if state.households.is_empty() {
            counts.push(0);
            continue;
        }
        step_year(&mut state, params, &compiled);
        counts.push(state.household_count() as u32);
    }
    counts
}
