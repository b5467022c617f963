//! Valley landscape, households and the mutable simulation state.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::params::SimParams;

/// Simulated years per run.
pub const HORIZON: usize = 550;

pub type CellId = usize;
pub type HouseholdId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: CellId,
    pub row: u32,
    pub col: u32,
    pub zone: u16,
    /// Relative soil quality in `[0, 1]`.
    pub quality: f64,
    pub is_water_body: bool,
    pub dryness_by_year: Vec<f64>,
    pub water_by_year: Vec<bool>,
}

impl Cell {
    pub fn dryness(&self, year: usize) -> f64 {
        self.dryness_by_year[year.min(self.dryness_by_year.len() - 1)]
    }

    /// Water body, or a water source flagged for `year`.
    pub fn has_water(&self, year: usize) -> bool {
        self.is_water_body || self.water_by_year[year.min(self.water_by_year.len() - 1)]
    }
}

/// Immutable per-run geography, shared between concurrent simulations.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub rows: u32,
    pub cols: u32,
    pub start_year: i32,
    pub cells: Vec<Cell>,
    water_sources: Vec<Vec<CellId>>,
}

impl Landscape {
    /// Cells must be indexed `0..n` in order; every cell carries one value
    /// per simulated year.
    pub fn new(rows: u32, cols: u32, start_year: i32, cells: Vec<Cell>) -> Self {
        debug_assert!(cells.iter().enumerate().all(|(i, c)| c.id == i));
        let years = cells.first().map_or(0, |c| c.water_by_year.len());
        let water_sources = (0..years)
            .map(|y| cells.iter().filter(|c| c.has_water(y)).map(|c| c.id).collect())
            .collect();
        Self {
            rows,
            cols,
            start_year,
            cells,
            water_sources,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id]
    }

    pub fn distance(&self, a: CellId, b: CellId) -> f64 {
        self.distance_sq(a, b).sqrt()
    }

    pub fn distance_sq(&self, a: CellId, b: CellId) -> f64 {
        let (ca, cb) = (&self.cells[a], &self.cells[b]);
        let dr = f64::from(ca.row) - f64::from(cb.row);
        let dc = f64::from(ca.col) - f64::from(cb.col);
        dr * dr + dc * dc
    }

    pub fn water_sources(&self, year: usize) -> &[CellId] {
        match self.water_sources.len() {
            0 => &[],
            n => &self.water_sources[year.min(n - 1)],
        }
    }

    /// Distance from `cell` to the nearest water source in `year`.
    pub fn distance_to_water(&self, cell: CellId, year: usize) -> f64 {
        self.water_sources(year)
            .iter()
            .map(|&w| self.distance_sq(cell, w))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// Piecewise-linear map from dryness to base yield (nutrition units).
/// Values outside the table are clamped to its end points.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldTable(pub Vec<(f64, f64)>);

impl YieldTable {
    pub fn base_yield(&self, dryness: f64) -> f64 {
        let pts = &self.0;
        let Some(&(x0, y0)) = pts.first() else {
            return 0.0;
        };
        if dryness <= x0 {
            return y0;
        }
        for w in pts.windows(2) {
            let ((xa, ya), (xb, yb)) = (w[0], w[1]);
            if dryness <= xb {
                if xb == xa {
                    return yb;
                }
                return ya + (yb - ya) * (dryness - xa) / (xb - xa);
            }
        }
        pts[pts.len() - 1].1
    }

    pub fn is_valid(&self) -> bool {
        !self.0.is_empty()
            && self.0.iter().all(|(x, y)| x.is_finite() && y.is_finite() && *y >= 0.0)
            && self.0.windows(2).all(|w| w[0].0 <= w[1].0)
    }
}

impl Default for YieldTable {
    fn default() -> Self {
        YieldTable(vec![(0.0, 750.0), (0.5, 480.0), (1.0, 120.0)])
    }
}

/// How S_Perf ranks informant households.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerfRank {
    CornStock,
    LastYield,
}

/// Model settings that are not among the eleven calibrated parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Age at which a household becomes fertile.
    pub adult_age: u32,
    /// Neighbourhood radius for social factors and informant plots.
    pub radius: f64,
    /// Informant count for S_Perf.
    pub top_k: usize,
    pub perf_rank: PerfRank,
    pub yield_table: YieldTable,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            adult_age: 16,
            radius: 11.5,
            top_k: 5,
            perf_rank: PerfRank::CornStock,
            yield_table: YieldTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialHousehold {
    pub farm_cell: CellId,
    pub age: u32,
    pub corn_stock: f64,
}

/// A loaded map: geography plus the starting population layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldTemplate {
    pub landscape: Arc<Landscape>,
    pub initial_households: Vec<InitialHousehold>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoricalSeries {
    pub start_year: i32,
    pub counts: Vec<u32>,
}

impl HistoricalSeries {
    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| f64::from(c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Household {
    pub id: HouseholdId,
    pub age: u32,
    pub farm_cell: CellId,
    pub dwelling_cell: Option<CellId>,
    pub corn_stock: f64,
    pub last_yield: f64,
    pub parent_id: Option<HouseholdId>,
    pub children_ids: BTreeSet<HouseholdId>,
    /// Dies once `age` exceeds this.
    pub death_age: f64,
    /// Fertile while `adult_age <= age <= fertility_end_age`.
    pub fertility_end_age: f64,
    /// Yearly fission probability while fertile.
    pub fertility: f64,
}

/// Mutable state of one simulation. Never shared across runs.
#[derive(Debug, Clone)]
pub struct WorldState {
    /// Index of the next year to simulate, `0..=HORIZON`.
    pub year: usize,
    pub landscape: Arc<Landscape>,
    pub config: Arc<SimConfig>,
    pub households: BTreeMap<HouseholdId, Household>,
    farm_occupant: Vec<Option<HouseholdId>>,
    dwelling_occupant: Vec<Option<HouseholdId>>,
    next_id: HouseholdId,
    pub rng: ChaCha8Rng,
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.year == other.year
            && self.households == other.households
            && self.farm_occupant == other.farm_occupant
            && self.dwelling_occupant == other.dwelling_occupant
            && self.next_id == other.next_id
            && self.rng == other.rng
    }
}

/// Per-household values drawn once at birth, in this order:
/// death-age draw, fertility-end draw, fertility draw.
pub(crate) fn birth_traits(rng: &mut ChaCha8Rng, params: &SimParams) -> (f64, f64, f64) {
    let v: f64 = rng.gen();
    let w: f64 = rng.gen();
    let z: f64 = rng.gen();
    (
        params.min_death_age + v * params.death_age_span,
        params.min_fertility_ends_age + w * params.fertility_ends_age_span,
        params.min_fertility + z * params.fertility_span,
    )
}

impl WorldState {
    /// Place the template's initial households (ascending list order);
    /// those whose farm cell is unavailable are skipped.
    pub fn new(
        template: &WorldTemplate,
        config: Arc<SimConfig>,
        params: &SimParams,
        seed: u64,
    ) -> Self {
        let n = template.landscape.len();
        let mut state = WorldState::empty(Arc::clone(&template.landscape), config, seed);
        for init in &template.initial_households {
            let (death_age, fertility_end_age, fertility) = birth_traits(&mut state.rng, params);
            if init.farm_cell >= n || !state.is_available(init.farm_cell) {
                continue;
            }
            let id = state.allocate_id();
            state.insert_household(Household {
                id,
                age: init.age,
                farm_cell: init.farm_cell,
                dwelling_cell: None,
                corn_stock: init.corn_stock,
                last_yield: 0.0,
                parent_id: None,
                children_ids: BTreeSet::new(),
                death_age,
                fertility_end_age,
                fertility,
            });
            state.place_dwelling(id, params);
        }
        state
    }

    /// A world with no households.
    pub fn empty(landscape: Arc<Landscape>, config: Arc<SimConfig>, seed: u64) -> Self {
        let n = landscape.len();
        WorldState {
            year: 0,
            landscape,
            config,
            households: BTreeMap::new(),
            farm_occupant: vec![None; n],
            dwelling_occupant: vec![None; n],
            next_id: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Add a fully specified household. Its farm (and dwelling, if any)
    /// must be available and its id unused.
    pub fn place_household(&mut self, h: Household) -> Result<(), String> {
        if self.households.contains_key(&h.id) {
            return Err(format!("household id {} already in use", h.id));
        }
        if h.farm_cell >= self.landscape.len() || !self.is_available(h.farm_cell) {
            return Err(format!("farm cell {} is not available", h.farm_cell));
        }
        if let Some(d) = h.dwelling_cell {
            if d >= self.landscape.len() || d == h.farm_cell || !self.is_available(d) {
                return Err(format!("dwelling cell {d} is not available"));
            }
            self.dwelling_occupant[d] = Some(h.id);
        }
        self.next_id = self.next_id.max(h.id + 1);
        self.insert_household(h);
        Ok(())
    }

    pub fn household_count(&self) -> usize {
        self.households.len()
    }

    pub fn farm_occupant(&self, cell: CellId) -> Option<HouseholdId> {
        self.farm_occupant[cell]
    }

    pub fn dwelling_occupant(&self, cell: CellId) -> Option<HouseholdId> {
        self.dwelling_occupant[cell]
    }

    /// Free of farms and dwellings and not a water body.
    pub fn is_available(&self, cell: CellId) -> bool {
        !self.landscape.cells[cell].is_water_body
            && self.farm_occupant[cell].is_none()
            && self.dwelling_occupant[cell].is_none()
    }

    pub(crate) fn allocate_id(&mut self) -> HouseholdId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Insert a household whose farm cell is available; marks occupancy.
    pub(crate) fn insert_household(&mut self, h: Household) {
        debug_assert!(self.is_available(h.farm_cell));
        self.farm_occupant[h.farm_cell] = Some(h.id);
        if let Some(parent) = h.parent_id.and_then(|p| self.households.get_mut(&p)) {
            parent.children_ids.insert(h.id);
        }
        self.households.insert(h.id, h);
    }

    pub(crate) fn remove_household(&mut self, id: HouseholdId) -> Option<Household> {
        let h = self.households.remove(&id)?;
        self.farm_occupant[h.farm_cell] = None;
        if let Some(d) = h.dwelling_cell {
            self.dwelling_occupant[d] = None;
        }
        Some(h)
    }

    pub(crate) fn move_farm(&mut self, id: HouseholdId, new_farm: CellId) {
        debug_assert!(self.is_available(new_farm));
        let h = self.households.get_mut(&id).expect("live household");
        self.farm_occupant[h.farm_cell] = None;
        h.farm_cell = new_farm;
        self.farm_occupant[new_farm] = Some(id);
    }

    /// Move the household's dwelling to the free cell within
    /// `water_source_distance` of its farm that is closest to water (then
    /// closest to the farm, then lowest id). Falls back to the free cell
    /// nearest the farm, or no dwelling when the valley is full.
    pub(crate) fn place_dwelling(&mut self, id: HouseholdId, params: &SimParams) {
        let (farm, old) = {
            let h = &self.households[&id];
            (h.farm_cell, h.dwelling_cell)
        };
        if let Some(d) = old {
            self.dwelling_occupant[d] = None;
        }
        let land = &self.landscape;
        let reach_sq = params.water_source_distance * params.water_source_distance;
        let mut best: Option<(f64, f64, CellId)> = None;
        let mut fallback: Option<(f64, CellId)> = None;
        for c in 0..land.len() {
            if !self.is_available(c) {
                continue;
            }
            let d_farm = land.distance_sq(c, farm);
            if fallback.map_or(true, |(d, _)| d_farm < d) {
                fallback = Some((d_farm, c));
            }
            if d_farm <= reach_sq {
                let d_water = land.distance_to_water(c, self.year);
                let key = (d_water, d_farm, c);
                if best.map_or(true, |b| (key.0, key.1) < (b.0, b.1)) {
                    best = Some(key);
                }
            }
        }
        let chosen = best.map(|b| b.2).or(fallback.map(|f| f.1));
        if let Some(c) = chosen {
            self.dwelling_occupant[c] = Some(id);
        }
        self.households.get_mut(&id).expect("live household").dwelling_cell = chosen;
    }

    /// Full scan of occupancy bookkeeping against household records.
    pub fn check_consistency(&self) -> Result<(), String> {
        let mut farms = BTreeSet::new();
        for h in self.households.values() {
            let cell = &self.landscape.cells[h.farm_cell];
            if cell.is_water_body {
                return Err(format!("household {} farms water body {}", h.id, h.farm_cell));
            }
            if !farms.insert(h.farm_cell) {
                return Err(format!("farm cell {} shared", h.farm_cell));
            }
            if self.farm_occupant[h.farm_cell] != Some(h.id) {
                return Err(format!("farm cell {} not marked for {}", h.farm_cell, h.id));
            }
            if let Some(d) = h.dwelling_cell {
                if self.dwelling_occupant[d] != Some(h.id) {
                    return Err(format!("dwelling cell {d} not marked for {}", h.id));
                }
            }
            if h.corn_stock < 0.0 {
                return Err(format!("household {} has negative corn stock", h.id));
            }
        }
        for (c, occ) in self.farm_occupant.iter().enumerate() {
            if let Some(id) = occ {
                if self.households.get(id).map(|h| h.farm_cell) != Some(c) {
                    return Err(format!("orphan farm mark on cell {c}"));
                }
            }
        }
        for (c, occ) in self.dwelling_occupant.iter().enumerate() {
            if let Some(id) = occ {
                if self.households.get(id).and_then(|h| h.dwelling_cell) != Some(c) {
                    return Err(format!("orphan dwelling mark on cell {c}"));
                }
                if self.farm_occupant[c].is_some() {
                    return Err(format!("cell {c} holds both a farm and a dwelling"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yield_table_interpolates_and_clamps() {
        let t = YieldTable::default();
        assert_eq!(t.base_yield(-1.0), 750.0);
        assert_eq!(t.base_yield(0.25), 615.0);
        assert_eq!(t.base_yield(0.75), 300.0);
        assert_eq!(t.base_yield(2.0), 120.0);
        assert!(t.is_valid());
        assert!(!YieldTable(vec![]).is_valid());
        assert!(!YieldTable(vec![(1.0, 1.0), (0.0, 1.0)]).is_valid());
    }
}
