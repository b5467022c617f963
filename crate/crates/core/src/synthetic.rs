//! Seeded synthetic valleys standing in for archaeological survey data.

use std::f64::consts::TAU;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::factor::{Factor, SocialConfig};
use crate::mapfile::{format_history, format_map, parse_map};
use crate::params::SimParams;
use crate::rule::{Presence, RuleTree};
use crate::sim::simulate_counts;
use crate::world::{Cell, HistoricalSeries, InitialHousehold, Landscape, SimConfig, WorldTemplate, HORIZON};
use crate::SynthError;

pub const SYNTHETIC_START_YEAR: i32 = 800;

/// Years of the late-horizon drought in synthetic dryness series.
const DROUGHT: std::ops::Range<usize> = 470..500;

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// The closeness rule: move to the nearest available plot.
pub fn baseline_rule() -> RuleTree {
    RuleTree::from_presence(SocialConfig::All, &Presence::from_pairs(&[(Factor::Dist, -1)]))
        .expect("baseline rule fits depth bounds")
}

/// Generate `(map_text, history_text)`.
///
/// Quality is normally distributed and clipped to `[0, 1]`; dryness is a
/// smooth per-zone series with a late drought plus a small per-cell offset;
/// every zone has a permanent water source. The history is one run of the
/// closeness rule at the parameter midpoints, seeded with `seed`.
pub fn gen_synthetic_map(seed: u64, rows: u32, cols: u32, zones: u16) -> Result<(String, String), SynthError> {
    let n = rows as usize * cols as usize;
    if n < 4 {
        return Err(SynthError::TooSmall { cells: n });
    }
    if zones == 0 || usize::from(zones) > n {
        return Err(SynthError::Zones { zones, cells: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zone_of = |i: usize| (i * usize::from(zones) / n) as u16;

    let quality_dist: Normal<f64> = Normal::new(0.55, 0.2).expect("valid normal");
    let quality: Vec<f64> = (0..n)
        .map(|_| round4(quality_dist.sample(&mut rng).clamp(0.0, 1.0)))
        .collect();

    let noise: Normal<f64> = Normal::new(0.0, 0.05).expect("valid normal");
    let zone_series: Vec<Vec<f64>> = (0..zones)
        .map(|_| {
            let (p1, p2): (f64, f64) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            let mut ar = 0.0;
            (0..HORIZON)
                .map(|t| {
                    ar = 0.8 * ar + noise.sample(&mut rng);
                    let tf = t as f64;
                    let drought = if DROUGHT.contains(&t) { 0.3 } else { 0.0 };
                    (0.4 + 0.15 * (TAU * tf / 110.0 + p1).sin()
                        + 0.08 * (TAU * tf / 23.0 + p2).sin()
                        + ar
                        + drought)
                        .clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect();

    // one permanent and one seasonal spring per zone
    let mut permanent = vec![false; n];
    let mut seasonal = vec![false; n];
    for z in 0..zones {
        let members: Vec<usize> = (0..n).filter(|&i| zone_of(i) == z).collect();
        let p = members[rng.gen_range(0..members.len())];
        permanent[p] = true;
        let s = members[rng.gen_range(0..members.len())];
        if s != p {
            seasonal[s] = true;
        }
    }
    let mut water_body = vec![false; n];
    let free: Vec<usize> = (0..n).filter(|&i| !permanent[i] && !seasonal[i]).collect();
    let n_bodies = (n / 50).min(free.len());
    for k in sample(&mut rng, free.len(), n_bodies) {
        water_body[free[k]] = true;
    }

    let offset: Normal<f64> = Normal::new(0.0, 0.03).expect("valid normal");
    let cells: Vec<Cell> = (0..n)
        .map(|i| {
            let z = zone_of(i);
            let off = offset.sample(&mut rng);
            let series = &zone_series[usize::from(z)];
            Cell {
                id: i,
                row: (i / cols as usize) as u32,
                col: (i % cols as usize) as u32,
                zone: z,
                quality: quality[i],
                is_water_body: water_body[i],
                dryness_by_year: series.iter().map(|d| round4((d + off).clamp(0.0, 1.0))).collect(),
                water_by_year: series
                    .iter()
                    .map(|&d| permanent[i] || (seasonal[i] && d < 0.45))
                    .collect(),
            }
        })
        .collect();

    let land: Vec<usize> = (0..n).filter(|&i| !water_body[i]).collect();
    let n_households = (n / 25).max(1).min(land.len());
    let mut picks: Vec<usize> = sample(&mut rng, land.len(), n_households).into_vec();
    picks.sort_unstable();
    let initial_households = picks
        .into_iter()
        .map(|k| InitialHousehold {
            farm_cell: land[k],
            age: rng.gen_range(0..=25),
            corn_stock: f64::from(rng.gen_range(300u32..=600)),
        })
        .collect();

    let template = WorldTemplate {
        landscape: Arc::new(Landscape::new(rows, cols, SYNTHETIC_START_YEAR, cells)),
        initial_households,
    };
    let map_text = format_map(&template);
    // simulate on exactly what a reader of the file will see
    let reread = parse_map("<synthetic>", &map_text).expect("generated map parses");
    let counts = simulate_counts(
        &reread,
        &Arc::new(SimConfig::default()),
        &SimParams::midpoint(),
        &baseline_rule(),
        seed,
    );
    let history = HistoricalSeries {
        start_year: SYNTHETIC_START_YEAR,
        counts,
    };
    Ok((map_text, format_history(&history)))
}

/// [`gen_synthetic_map`] written to `map_file` and `history_file`.
pub fn write_synthetic_map(
    seed: u64,
    rows: u32,
    cols: u32,
    zones: u16,
    map_file: &Path,
    history_file: &Path,
) -> Result<(), SynthError> {
    let (map, history) = gen_synthetic_map(seed, rows, cols, zones)?;
    std::fs::write(map_file, map).map_err(|e| SynthError::Io(map_file.display().to_string(), e.to_string()))?;
    std::fs::write(history_file, history)
        .map_err(|e| SynthError::Io(history_file.display().to_string(), e.to_string()))?;
    Ok(())
}
