#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use emd_core::world::{Cell, Household, InitialHousehold, Landscape};
use emd_core::{SimConfig, SimParams, WorldState, WorldTemplate, HORIZON};

pub struct CellSpec {
    pub quality: f64,
    pub zone: u16,
    pub water_body: bool,
    pub spring: bool,
    pub dryness: f64,
}

impl Default for CellSpec {
    fn default() -> Self {
        Self {
            quality: 0.5,
            zone: 0,
            water_body: false,
            spring: false,
            dryness: 0.3,
        }
    }
}

pub fn landscape(rows: u32, cols: u32, spec: impl Fn(usize) -> CellSpec) -> Arc<Landscape> {
    let cells = (0..(rows * cols) as usize)
        .map(|i| {
            let s = spec(i);
            Cell {
                id: i,
                row: i as u32 / cols,
                col: i as u32 % cols,
                zone: s.zone,
                quality: s.quality,
                is_water_body: s.water_body,
                dryness_by_year: vec![s.dryness; HORIZON],
                water_by_year: vec![s.spring; HORIZON],
            }
        })
        .collect();
    Arc::new(Landscape::new(rows, cols, 800, cells))
}

pub fn template(land: Arc<Landscape>, farms: &[usize], corn: f64) -> WorldTemplate {
    WorldTemplate {
        landscape: land,
        initial_households: farms
            .iter()
            .map(|&f| InitialHousehold {
                farm_cell: f,
                age: 20,
                corn_stock: corn,
            })
            .collect(),
    }
}

pub fn world(template: &WorldTemplate, config: SimConfig, params: &SimParams, seed: u64) -> WorldState {
    WorldState::new(template, Arc::new(config), params, seed)
}

/// A household record not inserted into any world.
pub fn probe_household(id: u64, farm_cell: usize) -> Household {
    Household {
        id,
        age: 10,
        farm_cell,
        dwelling_cell: None,
        corn_stock: 100.0,
        last_yield: 0.0,
        parent_id: None,
        children_ids: BTreeSet::new(),
        death_age: 100.0,
        fertility_end_age: 0.0,
        fertility: 0.0,
    }
}
