//! Household farm-plot simulation on a gridded valley, and the typed factor
//! language whose rules decide where households farm.
//!
//! - [`typed`]: primitive sets with semantic types and prefix-encoded trees.
//! - [`rule`], [`text`]: factor rules, presence extraction, canonical text.
//! - [`select`]: candidate plots, factor sub-scores and the argmax choice.
//! - [`world`], [`sim`]: households, occupancy and the annual step.
//! - [`mapfile`], [`synthetic`]: map/history files and a seeded generator.

pub mod factor;
pub mod mapfile;
pub mod params;
pub mod rule;
pub mod select;
pub mod sim;
pub mod synthetic;
pub mod text;
pub mod typed;
pub mod world;

pub use factor::{Factor, SocialConfig, FACTOR_COUNT};
pub use mapfile::{load_map, parse_history, parse_map};
pub use params::{sample_params, ParamRanges, SimParams, PARAM_NAMES};
pub use rule::{Presence, PresenceVector, RuleTree};
pub use select::{candidate_set, evaluate_rule, factor_subscore};
pub use sim::{run_simulation, simulate_counts, step_year, CompiledRule, SimRun};
pub use synthetic::{baseline_rule, gen_synthetic_map, write_synthetic_map};
pub use text::{format_rule, parse_presence, parse_rule};
pub use typed::{check_typing, DepthBounds, Expr, PrimId, PrimitiveSet};
pub use world::{HistoricalSeries, SimConfig, WorldState, WorldTemplate, HORIZON};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule syntax: {0}")]
    Syntax(String),
    #[error("rule with {terms} terms does not fit within the depth bounds")]
    TooLarge { terms: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapErrorKind {
    #[error("expected `#format:v1` version line, found `{0}`")]
    Version(String),
    #[error("missing or malformed column header")]
    MissingHeader,
    #[error("bad metadata `{0}`")]
    BadMeta(String),
    #[error("expected {expected} columns, found {found}")]
    ColumnCount { expected: usize, found: usize },
    #[error("cannot parse {field} from `{value}`")]
    BadField { field: String, value: String },
    #[error("cell ids must be sequential: expected {expected}, found {found}")]
    CellOrder { expected: usize, found: usize },
    #[error("cell {id} has out-of-range or duplicate coordinate ({row}, {col})")]
    Coordinate { id: usize, row: u32, col: u32 },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("expected {expected} yearly rows, found {found}")]
    Length { expected: usize, found: usize },
    #[error("map has no cells")]
    Empty,
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{file}:{line}: {kind}")]
pub struct MapError {
    pub file: String,
    pub line: usize,
    pub kind: MapErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("history has {found} years, simulation produced {expected}")]
    HistoryLength { expected: usize, found: usize },
    #[error("{0}")]
    Stats(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("map needs at least 4 cells, got {cells}")]
    TooSmall { cells: usize },
    #[error("zone count {zones} must be between 1 and the cell count {cells}")]
    Zones { zones: u16, cells: usize },
    #[error("cannot write {0}: {1}")]
    Io(String, String),
}
