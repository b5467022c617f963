//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear
//! once. Parameter ranges are written `range.<name> = lo,hi` and must equal
//! the published intervals unless the file also sets `override = true`.
//! Relative map and history paths resolve against the config file's
//! directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use emd_core::params::PARAM_NAMES;
use emd_core::world::{PerfRank, YieldTable};
use emd_core::{ParamRanges, SimConfig};
use emd_forest::{ForestConfig, PermutationMode};
use emd_gp::GpConfig;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub map: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub gp: GpConfig,
    pub ranges: ParamRanges,
    pub override_ranges: bool,
    pub sim: SimConfig,
    pub forest: ForestConfig,
    pub permutation: PermutationMode,
    /// Candidate forest sizes; empty means use `forest.n_trees` directly.
    pub tree_candidates: Vec<usize>,
    /// Presence values seen fewer times are left out of per-value reports.
    pub min_occurrences: usize,
    /// Joint-contribution sets reported, best first.
    pub joint_top: usize,
    /// Factors (by impurity importance) given presence-level test matrices.
    pub presence_top: usize,
    pub compare_runs: usize,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            map: None,
            history: None,
            gp: GpConfig::default(),
            ranges: ParamRanges::published(),
            override_ranges: false,
            sim: SimConfig::default(),
            forest: ForestConfig::default(),
            permutation: PermutationMode::Repeats(30),
            tree_candidates: Vec::new(),
            min_occurrences: 200,
            joint_top: 20,
            presence_top: 5,
            compare_runs: 100,
            workers: None,
        }
    }
}

fn bad(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Config { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| bad(line, format!("`{key}` expects a number, got `{v}`")))
}

fn finite(line: usize, key: &str, v: &str) -> Result<f64, CliError> {
    let x: f64 = num(line, key, v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(line, format!("`{key}` must be finite")))
    }
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(line, format!("`{key}` expects true or false, got `{v}`"))),
    }
}

fn pair(line: usize, key: &str, v: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = v
        .split_once(',')
        .ok_or_else(|| bad(line, format!("`{key}` expects `lo,hi`")))?;
    Ok((finite(line, key, a.trim())?, finite(line, key, b.trim())?))
}

fn list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, CliError> {
    v.split(',').map(|s| num(line, key, s.trim())).collect()
}

fn yield_table(line: usize, v: &str) -> Result<YieldTable, CliError> {
    let pts = v
        .split(',')
        .map(|p| {
            let (x, y) = p
                .split_once(':')
                .ok_or_else(|| bad(line, "yield_table expects `dryness:yield,...`"))?;
            Ok((finite(line, "yield_table", x.trim())?, finite(line, "yield_table", y.trim())?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let t = YieldTable(pts);
    if t.is_valid() {
        Ok(t)
    } else {
        Err(bad(line, "yield_table needs ascending dryness and non-negative yields"))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = ExperimentConfig::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut range_lines: Vec<(usize, String, (f64, f64))> = Vec::new();
        let (mut repeats, mut per_tree) = (30usize, false);
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(n, format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(prev) = seen.insert(k.to_string(), n) {
                return Err(bad(n, format!("`{k}` already set on line {prev}")));
            }
            match k {
                "map" => c.map = Some(PathBuf::from(v)),
                "history" => c.history = Some(PathBuf::from(v)),
                "seed" => c.gp.seed = num(n, k, v)?,
                "workers" => c.workers = Some(num(n, k, v)?),
                "runs" => c.gp.runs = num(n, k, v)?,
                "generations" => c.gp.generations = num(n, k, v)?,
                "population_size" => c.gp.population_size = num(n, k, v)?,
                "depth_min" => c.gp.depth_min = num(n, k, v)?,
                "depth_max" => c.gp.depth_max = num(n, k, v)?,
                "crossover_rate" => c.gp.crossover_rate = finite(n, k, v)?,
                "mutation_rate" => c.gp.mutation_rate = finite(n, k, v)?,
                "social_mutation_rate" => c.gp.social_mutation_rate = finite(n, k, v)?,
                "tournament_size" => c.gp.tournament_size = num(n, k, v)?,
                "replicates" => c.gp.replicates = num(n, k, v)?,
                "override" => c.override_ranges = flag(n, k, v)?,
                "adult_age" => c.sim.adult_age = num(n, k, v)?,
                "radius" => c.sim.radius = finite(n, k, v)?,
                "top_k" => c.sim.top_k = num(n, k, v)?,
                "perf_rank" => {
                    c.sim.perf_rank = match v {
                        "corn_stock" => PerfRank::CornStock,
                        "last_yield" => PerfRank::LastYield,
                        _ => return Err(bad(n, "perf_rank expects corn_stock or last_yield")),
                    }
                }
                "yield_table" => c.sim.yield_table = yield_table(n, v)?,
                "n_trees" => c.forest.n_trees = num(n, k, v)?,
                "min_samples_leaf" => c.forest.min_samples_leaf = num(n, k, v)?,
                "max_features" => c.forest.max_features = Some(num(n, k, v)?),
                "max_depth" => c.forest.max_depth = Some(num(n, k, v)?),
                "split_fraction" => c.forest.split_fraction = finite(n, k, v)?,
                "forest_seed" => c.forest.seed = num(n, k, v)?,
                "perm_repeats" => repeats = num(n, k, v)?,
                "perm_mode" => {
                    per_tree = match v {
                        "repeats" => false,
                        "per_tree" => true,
                        _ => return Err(bad(n, "perm_mode expects repeats or per_tree")),
                    }
                }
                "tree_candidates" => c.tree_candidates = list(n, k, v)?,
                "min_occurrences" => c.min_occurrences = num(n, k, v)?,
                "joint_top" => c.joint_top = num(n, k, v)?,
                "presence_top" => c.presence_top = num(n, k, v)?,
                "compare_runs" => c.compare_runs = num(n, k, v)?,
                _ => match k.strip_prefix("range.") {
                    Some(name) if PARAM_NAMES.contains(&name) => range_lines.push((n, name.to_string(), pair(n, k, v)?)),
                    _ => return Err(bad(n, format!("unknown key `{k}`"))),
                },
            }
        }
        c.permutation = if per_tree { PermutationMode::PerTree } else { PermutationMode::Repeats(repeats) };
        let published = ParamRanges::published();
        for (n, name, (lo, hi)) in range_lines {
            if lo > hi {
                return Err(bad(n, format!("range.{name}: lower bound exceeds upper")));
            }
            if !c.override_ranges && published.get(&name) != Some((lo, hi)) {
                return Err(bad(
                    n,
                    format!("range.{name} departs from the published interval; set `override = true` to allow"),
                ));
            }
            c.ranges.set(&name, (lo, hi));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.gp.validate().map_err(|e| bad(0, e.to_string()))?;
        if !(self.sim.radius > 0.0) {
            return Err(bad(0, "radius must be positive"));
        }
        if self.sim.top_k == 0 {
            return Err(bad(0, "top_k must be positive"));
        }
        if !(self.forest.split_fraction > 0.0 && self.forest.split_fraction < 1.0) {
            return Err(bad(0, "split_fraction must lie in (0, 1)"));
        }
        if self.forest.n_trees == 0 || self.forest.min_samples_leaf == 0 {
            return Err(bad(0, "n_trees and min_samples_leaf must be positive"));
        }
        if let PermutationMode::Repeats(r) = self.permutation {
            if r < 2 {
                return Err(bad(0, "perm_repeats must be at least 2"));
            }
        }
        if self.tree_candidates.contains(&0) {
            return Err(bad(0, "tree_candidates must be positive"));
        }
        if self.compare_runs == 0 {
            return Err(bad(0, "compare_runs must be positive"));
        }
        if self.workers == Some(0) {
            return Err(bad(0, "workers must be positive"));
        }
        Ok(())
    }

    /// Read a config file, resolve relative paths against its directory and
    /// check that referenced files exist.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut c = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.map, &mut c.history].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        c.check_files()?;
        Ok(c)
    }

    pub fn check_files(&self) -> Result<(), CliError> {
        for p in [&self.map, &self.history].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::Missing(p.display().to_string()));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` form of every setting that influences
    /// results. Paths and the worker count are excluded.
    pub fn canonical(&self) -> String {
        let g = &self.gp;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("seed", g.seed.to_string());
        kv("runs", g.runs.to_string());
        kv("generations", g.generations.to_string());
        kv("population_size", g.population_size.to_string());
        kv("depth_min", g.depth_min.to_string());
        kv("depth_max", g.depth_max.to_string());
        kv("crossover_rate", g.crossover_rate.to_string());
        kv("mutation_rate", g.mutation_rate.to_string());
        kv("social_mutation_rate", g.social_mutation_rate.to_string());
        kv("tournament_size", g.tournament_size.to_string());
        kv("replicates", g.replicates.to_string());
        kv("override", self.override_ranges.to_string());
        for (name, (lo, hi)) in PARAM_NAMES.iter().zip(self.ranges.0) {
            kv(&format!("range.{name}"), format!("{lo},{hi}"));
        }
        kv("adult_age", self.sim.adult_age.to_string());
        kv("radius", self.sim.radius.to_string());
        kv("top_k", self.sim.top_k.to_string());
        let rank = match self.sim.perf_rank {
            PerfRank::CornStock => "corn_stock",
            PerfRank::LastYield => "last_yield",
        };
        kv("perf_rank", rank.to_string());
        let table: Vec<String> = self.sim.yield_table.0.iter().map(|(x, y)| format!("{x}:{y}")).collect();
        kv("yield_table", table.join(","));
        let f = &self.forest;
        kv("n_trees", f.n_trees.to_string());
        kv("min_samples_leaf", f.min_samples_leaf.to_string());
        if let Some(m) = f.max_features {
            kv("max_features", m.to_string());
        }
        if let Some(m) = f.max_depth {
            kv("max_depth", m.to_string());
        }
        kv("split_fraction", f.split_fraction.to_string());
        kv("forest_seed", f.seed.to_string());
        match self.permutation {
            PermutationMode::Repeats(r) => kv("perm_repeats", r.to_string()),
            PermutationMode::PerTree => kv("perm_mode", "per_tree".to_string()),
        }
        if !self.tree_candidates.is_empty() {
            let c: Vec<String> = self.tree_candidates.iter().map(|n| n.to_string()).collect();
            kv("tree_candidates", c.join(","));
        }
        kv("min_occurrences", self.min_occurrences.to_string());
        kv("joint_top", self.joint_top.to_string());
        kv("presence_top", self.presence_top.to_string());
        kv("compare_runs", self.compare_runs.to_string());
        s
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
