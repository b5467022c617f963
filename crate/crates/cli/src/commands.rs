//! `gen-map`, `evolve`, `compare` and `simulate`.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use emd_core::{
    load_map, parse_rule, run_simulation, sample_params, write_synthetic_map, HistoricalSeries, RuleTree,
    WorldTemplate,
};
use emd_gp::{derive_seed, evolve_run, parse_checkpoint, EvalContext, GpError};
use emd_stats::{mann_whitney_one_tailed, rmse_counts, Alternative, SIGNIFICANCE_LEVEL};
use rayon::prelude::*;

use crate::config::{sha256_hex, ExperimentConfig};
use crate::manifest::Manifest;
use crate::records::{parse_records, PresenceRecordRow, RecordWriter};
use crate::CliError;

pub const FACTOR_SCORES: &str = "factor_scores.csv";
pub const CHECKPOINT: &str = "checkpoint.txt";
pub const BEST_RULES: &str = "best_rules.csv";
pub const COMPARE_SAMPLES: &str = "compare.csv";
pub const COMPARE_TESTS: &str = "compare_tests.csv";

/// Stream tag separating comparison seeds from evolution seeds.
const COMPARE_TAG: u64 = 0xC0;

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn inputs(config: &ExperimentConfig) -> Result<(&Path, &Path), CliError> {
    match (&config.map, &config.history) {
        (Some(m), Some(h)) => Ok((m, h)),
        _ => Err(CliError::Usage("a map and a history file are required (config keys `map`, `history`)".into())),
    }
}

fn load_world(config: &ExperimentConfig) -> Result<(WorldTemplate, HistoricalSeries), CliError> {
    let (m, h) = inputs(config)?;
    config.check_files()?;
    Ok(load_map(m, h)?)
}

fn context(config: &ExperimentConfig) -> Result<EvalContext, CliError> {
    let (template, history) = load_world(config)?;
    Ok(EvalContext::new(template, history, config.ranges.clone(), config.sim.clone())?)
}

fn record_inputs(manifest: &mut Manifest, config: &ExperimentConfig) -> Result<(), CliError> {
    let (m, h) = inputs(config)?;
    manifest.input("map", m)?;
    manifest.input("history", h)
}

/// Write a seeded synthetic valley as `map.csv` and `history.csv`.
pub fn gen_map(
    config: &ExperimentConfig,
    out_dir: &Path,
    rows: u32,
    cols: u32,
    zones: u16,
) -> Result<(PathBuf, PathBuf), CliError> {
    ensure_dir(out_dir)?;
    let map = out_dir.join("map.csv");
    let history = out_dir.join("history.csv");
    write_synthetic_map(config.gp.seed, rows, cols, zones, &map, &history)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let mut m = Manifest::new("gen-map", config);
    m.detail("rows", rows);
    m.detail("cols", cols);
    m.detail("zones", zones);
    m.output("map", &map)?;
    m.output("history", &history)?;
    m.write(&out_dir.join("manifest_gen_map.json"))?;
    Ok((map, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestRule {
    pub run: u64,
    pub rule: String,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutcome {
    /// False when stopped early by `stop_after`; a later call resumes.
    pub complete: bool,
    pub rows: u64,
    pub best: Vec<BestRule>,
}

fn checkpoint_key(config: &ExperimentConfig) -> Result<String, CliError> {
    let (m, h) = inputs(config)?;
    let mut bytes = fs::read(m).map_err(|e| CliError::io(m, e))?;
    bytes.extend(fs::read(h).map_err(|e| CliError::io(h, e))?);
    Ok(format!("#run-key:{}:{}", config.hash(), sha256_hex(&bytes)))
}

/// Keep the schema line, header and the first `rows` data lines.
fn truncate_records(path: &Path, rows: u64) -> Result<(), CliError> {
    let text = read_file(path)?;
    let keep = 2 + rows as usize;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < keep {
        return Err(CliError::Csv {
            line: lines.len() as u64,
            msg: format!("checkpoint expects {rows} rows but the file is shorter"),
        });
    }
    let mut out = lines[..keep].join("\n");
    out.push('\n');
    write_file(path, &out)
}

/// Best row per run, first occurrence on ties.
pub fn best_per_run(rows: &[PresenceRecordRow]) -> Vec<BestRule> {
    let mut best: Vec<BestRule> = Vec::new();
    for r in rows {
        match best.iter_mut().find(|b| b.run == r.run) {
            Some(b) if r.rmse < b.rmse => {
                b.rule = r.rule.clone();
                b.rmse = r.rmse;
            }
            Some(_) => {}
            None => best.push(BestRule { run: r.run, rule: r.rule.clone(), rmse: r.rmse }),
        }
    }
    best.sort_by_key(|b| b.run);
    best
}

/// Run (or resume) the whole campaign into `out_dir`. With `stop_after`,
/// return after that many generations have been checkpointed.
pub fn evolve(config: &ExperimentConfig, out_dir: &Path, stop_after: Option<usize>) -> Result<EvolveOutcome, CliError> {
    ensure_dir(out_dir)?;
    let ctx = context(config)?;
    let csv_path = out_dir.join(FACTOR_SCORES);
    let ckpt_path = out_dir.join(CHECKPOINT);
    let key = checkpoint_key(config)?;

    let resume = if ckpt_path.exists() {
        let text = read_file(&ckpt_path)?;
        let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
        if first != key {
            return Err(CliError::Usage(format!(
                "{} belongs to a different configuration or dataset; remove it or use another --out-dir",
                ckpt_path.display()
            )));
        }
        let c = parse_checkpoint(rest)?;
        truncate_records(&csv_path, c.rows)?;
        Some(c)
    } else {
        None
    };

    let file = if resume.is_some() {
        OpenOptions::new().append(true).open(&csv_path)
    } else {
        fs::File::create(&csv_path)
    }
    .map_err(|e| CliError::io(&csv_path, e))?;
    let writer = std::cell::RefCell::new(if resume.is_some() {
        RecordWriter::append(BufWriter::new(file))
    } else {
        RecordWriter::create(BufWriter::new(file))?
    });

    let generations = config.gp.generations as u64;
    let (mut run, mut pending, mut rows) = match resume {
        Some(c) if c.generation >= generations => (c.run_id + 1, None, c.rows),
        Some(c) => (c.run_id, Some(c.clone()), c.rows),
        None => (0, None, 0),
    };
    let mut budget = stop_after;
    let mut io_error: Option<CliError> = None;
    while run < config.gp.runs as u64 {
        let result = evolve_run(
            &config.gp,
            &ctx,
            run,
            pending.take(),
            rows,
            |rec| {
                writer.borrow_mut().write(&PresenceRecordRow::from(rec)).map_err(|e| {
                    io_error = Some(e.clone());
                    GpError::Sink(e.to_string())
                })
            },
            |c| {
                writer.borrow_mut().flush().map_err(|e| GpError::Sink(e.to_string()))?;
                let text = format!("{key}\n{}", c.to_text());
                let tmp = ckpt_path.with_extension("tmp");
                fs::write(&tmp, text)
                    .and_then(|_| fs::rename(&tmp, &ckpt_path))
                    .map_err(|e| GpError::Sink(e.to_string()))?;
                rows = c.rows;
                let last = c.generation >= generations && c.run_id + 1 == config.gp.runs as u64;
                if last {
                    return Ok(());
                }
                if let Some(b) = budget.as_mut() {
                    *b = b.saturating_sub(1);
                    if *b == 0 {
                        return Err(GpError::Interrupted);
                    }
                }
                Ok(())
            },
        );
        match result {
            Ok(_) => {}
            Err(GpError::Interrupted) => return Ok(EvolveOutcome { complete: false, rows, best: Vec::new() }),
            Err(e) => return Err(io_error.take().unwrap_or(CliError::Gp(e))),
        }
        run += 1;
    }
    writer.into_inner().flush()?;
    if ckpt_path.exists() {
        fs::remove_file(&ckpt_path).map_err(|e| CliError::io(&ckpt_path, e))?;
    }

    let records = parse_records(&read_file(&csv_path)?)?;
    let best = best_per_run(&records);
    let mut text = String::from("#schema:v1\nrun,rmse,rule\n");
    for b in &best {
        writeln!(text, "{},{},{}", b.run, b.rmse, b.rule).unwrap();
    }
    let best_path = out_dir.join(BEST_RULES);
    write_file(&best_path, &text)?;

    let mut m = Manifest::new("evolve", config);
    record_inputs(&mut m, config)?;
    m.detail("rows", records.len());
    m.detail("seed_derivation", "run streams keyed by (master seed, run, generation, individual)");
    m.output("factor_scores", &csv_path)?;
    m.output("best_rules", &best_path)?;
    m.write(&out_dir.join("manifest_evolve.json"))?;
    Ok(EvolveOutcome { complete: true, rows: records.len() as u64, best })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome {
    pub rules: Vec<String>,
    /// `samples[r][i]` is the RMSE of rule `r` in run `i`.
    pub samples: Vec<Vec<f64>>,
}

/// Simulation and parameter seeds of comparison run `i`, shared by all rules.
pub fn compare_seeds(master: u64, i: u64) -> (u64, u64) {
    (derive_seed(master, &[COMPARE_TAG, i, 0]), derive_seed(master, &[COMPARE_TAG, i, 1]))
}

/// Simulate each rule `n_runs` times and test every rule against the first.
pub fn compare(config: &ExperimentConfig, out_dir: &Path, rule_texts: &[String], n_runs: usize) -> Result<CompareOutcome, CliError> {
    if rule_texts.is_empty() {
        return Err(CliError::Usage("compare needs at least one --rule".into()));
    }
    if n_runs == 0 {
        return Err(CliError::Usage("compare needs at least one run".into()));
    }
    let rules: Vec<RuleTree> = rule_texts.iter().map(|t| parse_rule(t)).collect::<Result<_, _>>()?;
    ensure_dir(out_dir)?;
    let ctx = context(config)?;
    let master = config.gp.seed;
    let jobs: Vec<(usize, u64)> = (0..rules.len()).flat_map(|r| (0..n_runs as u64).map(move |i| (r, i))).collect();
    let rmses: Vec<f64> = jobs
        .par_iter()
        .map(|&(r, i)| {
            let (sim, param) = compare_seeds(master, i);
            let params = sample_params(&ctx.ranges, param);
            run_simulation(&ctx.template, &ctx.sim_config, &params, &rules[r], sim, &ctx.history).map(|s| s.rmse)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let samples: Vec<Vec<f64>> = rmses.chunks(n_runs).map(<[f64]>::to_vec).collect();
    let names: Vec<String> = rules.iter().map(|r| r.to_string()).collect();

    let mut text = String::from("#schema:v1\nrule_index,rule,run,sim_seed,param_seed,rmse\n");
    for (r, s) in samples.iter().enumerate() {
        for (i, v) in s.iter().enumerate() {
            let (sim, param) = compare_seeds(master, i as u64);
            writeln!(text, "{r},{},{i},{sim},{param},{v}", names[r]).unwrap();
        }
    }
    let samples_path = out_dir.join(COMPARE_SAMPLES);
    write_file(&samples_path, &text)?;

    let mut tests = String::from("#schema:v1\nrule_index,rule,baseline,n_a,n_b,u,p_value,method,significant\n");
    for r in 1..rules.len() {
        let t = mann_whitney_one_tailed(&samples[r], &samples[0], Alternative::Less)?;
        writeln!(
            tests,
            "{r},{},{},{},{},{},{},{},{}",
            names[r],
            names[0],
            t.n_a,
            t.n_b,
            t.u_statistic,
            t.p_value,
            t.method.as_str(),
            t.p_value < SIGNIFICANCE_LEVEL
        )
        .unwrap();
    }
    let tests_path = out_dir.join(COMPARE_TESTS);
    write_file(&tests_path, &tests)?;

    let mut m = Manifest::new("compare", config);
    record_inputs(&mut m, config)?;
    m.detail("n_runs", n_runs);
    m.detail("alternative", "rule RMSE < baseline RMSE (baseline = first rule)");
    m.detail("seed_derivation", "run i uses the same (sim, param) seeds for every rule");
    m.output("samples", &samples_path)?;
    m.output("tests", &tests_path)?;
    m.write(&out_dir.join("manifest_compare.json"))?;
    Ok(CompareOutcome { rules: names, samples })
}

/// One simulation per seed; seed `s` draws parameters and drives the run.
/// Writes `simulate_<s>.csv` with the running RMSE.
pub fn simulate(config: &ExperimentConfig, out_dir: &Path, rule_text: &str, seeds: &[u64]) -> Result<Vec<PathBuf>, CliError> {
    let rule = parse_rule(rule_text)?;
    ensure_dir(out_dir)?;
    let ctx = context(config)?;
    let mut m = Manifest::new("simulate", config);
    record_inputs(&mut m, config)?;
    m.detail("rule", &rule);
    let mut files = Vec::new();
    for &seed in seeds {
        let params = sample_params(&ctx.ranges, seed);
        let run = run_simulation(&ctx.template, &ctx.sim_config, &params, &rule, seed, &ctx.history)
            .map_err(|e| CliError::Io(e.to_string()))?;
        let target = &ctx.history.counts;
        let mut text = String::from("#schema:v1\nyear,count,rmse_so_far\n");
        for t in 0..run.counts.len() {
            let r = rmse_counts(&run.counts[..=t], &target[..=t])?;
            writeln!(text, "{},{},{r}", ctx.history.start_year + t as i32, run.counts[t]).unwrap();
        }
        let path = out_dir.join(format!("simulate_{seed}.csv"));
        write_file(&path, &text)?;
        m.detail(&format!("seed_{seed}"), format!("sim_seed={seed} param_seed={seed} rmse={}", run.rmse));
        m.output(&format!("counts_seed_{seed}"), &path)?;
        files.push(path);
    }
    m.write(&out_dir.join("manifest_simulate.json"))?;
    Ok(files)
}
