//! Resumable run state, written after every generation.
//!
//! ```text
//! #checkpoint:v1
//! seed=<u64>
//! run=<u64>
//! generation=<next generation to evaluate>
//! rows=<records written before this point>
//! individual=<selector>|<rmse or ->|<sim_seed or ->|<param_seed or ->|<s-expression>
//! ...
//! ```
//!
//! Per-generation random streams are derived from (seed, run, generation),
//! so the generation index is the whole generator state.

use std::fmt::Write as _;

use emd_core::rule::parse_sexpr;
use emd_core::{RuleTree, SocialConfig};

use crate::{Evaluation, GpError, Individual};

pub const CHECKPOINT_VERSION: &str = "#checkpoint:v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub run_id: u64,
    pub generation: u64,
    pub rows: u64,
    pub population: Vec<Individual>,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{CHECKPOINT_VERSION}\nseed={}\nrun={}\ngeneration={}\nrows={}\n",
            self.seed, self.run_id, self.generation, self.rows
        );
        for ind in &self.population {
            let (f, ss, ps) = match &ind.evaluation {
                Some(e) => (e.rmse.to_string(), e.sim_seed.to_string(), e.param_seed.to_string()),
                None => ("-".into(), "-".into(), "-".into()),
            };
            let expr = ind.rule.expr.display(emd_core::rule::rule_primitives());
            writeln!(s, "individual={}|{f}|{ss}|{ps}|{expr}", ind.rule.social).unwrap();
        }
        s
    }
}

fn bad(line: usize, msg: impl Into<String>) -> GpError {
    GpError::Checkpoint { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, GpError> {
    v.trim().parse().map_err(|_| bad(line, format!("bad {key} `{v}`")))
}

fn opt<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Option<T>, GpError> {
    if v.trim() == "-" {
        Ok(None)
    } else {
        num(line, key, v).map(Some)
    }
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint, GpError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, l)) if l.trim() == CHECKPOINT_VERSION => {}
        Some((n, l)) => return Err(bad(n, format!("expected {CHECKPOINT_VERSION}, found `{l}`"))),
        None => return Err(bad(0, "empty checkpoint")),
    }
    let (mut seed, mut run, mut generation, mut rows) = (None, None, None, None);
    let mut population = Vec::new();
    for (n, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| bad(n, format!("expected key=value, found `{l}`")))?;
        match k.trim() {
            "seed" => seed = Some(num(n, k, v)?),
            "run" => run = Some(num(n, k, v)?),
            "generation" => generation = Some(num(n, k, v)?),
            "rows" => rows = Some(num(n, k, v)?),
            "individual" => {
                let parts: Vec<&str> = v.splitn(5, '|').collect();
                if parts.len() != 5 {
                    return Err(bad(n, "individual needs 5 fields"));
                }
                let social: SocialConfig = parts[0].trim().parse().map_err(|_| bad(n, format!("bad selector `{}`", parts[0])))?;
                let rule: RuleTree = parse_sexpr(social, parts[4]).map_err(|e| bad(n, e.to_string()))?;
                let rmse: Option<f64> = opt(n, "rmse", parts[1])?;
                let sim: Option<u64> = opt(n, "sim_seed", parts[2])?;
                let param: Option<u64> = opt(n, "param_seed", parts[3])?;
                let evaluation = match (rmse, sim, param) {
                    (Some(rmse), Some(sim_seed), Some(param_seed)) if rmse.is_finite() && rmse >= 0.0 => {
                        Some(Evaluation { rmse, sim_seed, param_seed })
                    }
                    (None, None, None) => None,
                    _ => return Err(bad(n, "evaluation fields must be all present and finite, or all `-`")),
                };
                population.push(Individual { rule, evaluation });
            }
            other => return Err(bad(n, format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| bad(0, format!("missing {k}"));
    if population.is_empty() {
        return Err(missing("individuals"));
    }
    Ok(Checkpoint {
        seed: seed.ok_or_else(|| missing("seed"))?,
        run_id: run.ok_or_else(|| missing("run"))?,
        generation: generation.ok_or_else(|| missing("generation"))?,
        rows: rows.ok_or_else(|| missing("rows"))?,
        population,
    })
}
