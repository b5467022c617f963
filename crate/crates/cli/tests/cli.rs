use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use emd_cli::analyze::analyze;
use emd_cli::commands::{self, CHECKPOINT, FACTOR_SCORES};
use emd_cli::records::{parse_records, PresenceRecordRow, RecordWriter};
use emd_cli::{with_workers, CliError, ExperimentConfig};
use emd_core::text::format_presence;
use emd_core::{Factor, Presence, PresenceVector, SocialConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SMALL: &str = "runs=2\ngenerations=3\npopulation_size=10\nseed=11\n";

/// A 10x10 synthetic valley plus a config pointing at it.
fn setup(dir: &Path, extra: &str) -> ExperimentConfig {
    commands::gen_map(&ExperimentConfig::default(), dir, 10, 10, 2).unwrap();
    let path = dir.join("exp.cfg");
    fs::write(&path, format!("map=map.csv\nhistory=history.csv\n{extra}")).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn evolve_writes_one_row_per_member_per_generation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = commands::evolve(&cfg, &out, None).unwrap();
    assert!(o.complete);
    assert_eq!(o.rows, 60);
    assert_eq!(o.best.len(), 2);
    let rows = parse_records(&read(out.join(FACTOR_SCORES))).unwrap();
    assert_eq!(rows.len(), 60);
    for run in 0..2u64 {
        for gen in 0..3u64 {
            assert_eq!(rows.iter().filter(|r| r.run == run && r.generation == gen).count(), 10);
        }
    }
    assert!(!out.join(CHECKPOINT).exists());
    for b in &o.best {
        let min = rows.iter().filter(|r| r.run == b.run).map(|r| r.rmse).fold(f64::INFINITY, f64::min);
        assert_eq!(b.rmse, min);
    }

    let manifest: serde_json::Value = serde_json::from_str(&read(out.join("manifest_evolve.json"))).unwrap();
    assert_eq!(manifest["command"], "evolve");
    assert_eq!(manifest["master_seed"], 11);
    assert_eq!(manifest["config_hash"], cfg.hash());
    let outputs = manifest["outputs"].as_array().unwrap();
    let scores = outputs.iter().find(|e| e["role"] == "factor_scores").unwrap();
    assert_eq!(scores["sha256"], emd_cli::config::sha256_hex(&fs::read(out.join(FACTOR_SCORES)).unwrap()));

    // A rerun into a fresh directory reproduces every byte.
    let again = dir.path().join("again");
    commands::evolve(&cfg, &again, None).unwrap();
    assert_eq!(fs::read(out.join(FACTOR_SCORES)).unwrap(), fs::read(again.join(FACTOR_SCORES)).unwrap());
}

#[test]
fn interrupted_campaign_resumes_to_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SMALL);
    let full = dir.path().join("full");
    commands::evolve(&cfg, &full, None).unwrap();

    let split = dir.path().join("split");
    // Stop mid-run 0, then at the run boundary, then finish.
    let first = commands::evolve(&cfg, &split, Some(2)).unwrap();
    assert!(!first.complete);
    assert_eq!(first.rows, 20);
    assert!(split.join(CHECKPOINT).exists());
    // Rows past the checkpoint must be discarded on resume.
    let mut text = read(split.join(FACTOR_SCORES));
    text.push_str("junk line that a crash left behind\n");
    fs::write(split.join(FACTOR_SCORES), text).unwrap();
    let second = commands::evolve(&cfg, &split, Some(1)).unwrap();
    assert!(!second.complete);
    assert_eq!(second.rows, 30);
    let last = commands::evolve(&cfg, &split, None).unwrap();
    assert!(last.complete);
    assert_eq!(read(full.join(FACTOR_SCORES)), read(split.join(FACTOR_SCORES)));
    assert_eq!(read(full.join(commands::BEST_RULES)), read(split.join(commands::BEST_RULES)));
}

#[test]
fn checkpoint_from_other_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SMALL);
    let out = dir.path().join("out");
    commands::evolve(&cfg, &out, Some(1)).unwrap();
    let mut other = cfg.clone();
    other.gp.seed = 12;
    assert!(matches!(commands::evolve(&other, &out, None), Err(CliError::Usage(_))));
}

#[test]
fn evolve_output_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "runs=1\ngenerations=2\npopulation_size=8\nseed=5\n");
    let one = dir.path().join("w1");
    let four = dir.path().join("w4");
    with_workers(1, || commands::evolve(&cfg, &one, None)).unwrap().unwrap();
    with_workers(4, || commands::evolve(&cfg, &four, None)).unwrap().unwrap();
    assert_eq!(read(one.join(FACTOR_SCORES)), read(four.join(FACTOR_SCORES)));
}

fn planted_row(rng: &mut ChaCha8Rng, social: SocialConfig, qual: i32, rmse: f64) -> PresenceRecordRow {
    let mut counts = Presence::default();
    counts.set(Factor::Qual, qual);
    counts.set(Factor::Dist, rng.gen_range(-1..=1));
    counts.set(Factor::Mig, rng.gen_range(0..=2));
    let rule = format_presence(&PresenceVector { social, counts });
    PresenceRecordRow { run: 0, generation: 0, social, presence: counts, rmse, rule, sim_seed: 0, param_seed: 0 }
}

/// S_All clearly best; RMSE driven by F_Qual; F_Qual=2 seen 199 times.
fn planted_table(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows = Vec::new();
    for (qual, n) in [(0, 201), (1, 200), (2, 199)] {
        for _ in 0..n {
            let rmse = 10.0 + 8.0 * f64::from(qual) + rng.gen_range(0.0..2.0);
            rows.push(planted_row(&mut rng, SocialConfig::All, qual, rmse));
        }
    }
    for social in [SocialConfig::Fam, SocialConfig::Neigh, SocialConfig::Perf] {
        for _ in 0..100 {
            let rmse = 60.0 + rng.gen_range(0.0..10.0);
            let qual = rng.gen_range(0..=2);
            rows.push(planted_row(&mut rng, social, qual, rmse));
        }
    }
    let mut w = RecordWriter::create(fs::File::create(path).unwrap()).unwrap();
    for r in &rows {
        w.write(r).unwrap();
    }
    w.flush().unwrap();
}

fn csv_body(p: PathBuf) -> Vec<Vec<String>> {
    read(p)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn analyze_reports_planted_structure() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("scores.csv");
    planted_table(&table);
    let cfg = ExperimentConfig::parse("n_trees=60\nperm_repeats=10\n").unwrap();
    let out = dir.path().join("a");
    let summary = analyze(&cfg, &table, &out).unwrap();
    assert_eq!(summary.n_rows, 900);
    assert_eq!(summary.n_all_rows, 600);

    let social = csv_body(out.join("social_rmse.csv"));
    for other in ["S_Fam", "S_Neigh", "S_Perf"] {
        let row = social.iter().find(|r| r[0] == "S_All" && r[1] == other).unwrap();
        assert_eq!(row[7], "true", "S_All vs {other}");
    }
    assert_eq!(social.len(), 12);

    let presence = csv_body(out.join("presence_rmse.csv"));
    let qual: Vec<&str> = presence.iter().filter(|r| r[0] == "F_Qual").map(|r| r[1].as_str()).collect();
    assert_eq!(qual, ["0", "1"], "the 199-occurrence value is filtered out");

    let importance = csv_body(out.join("importance.csv"));
    let top = importance.iter().max_by(|a, b| a[1].parse::<f64>().unwrap().total_cmp(&b[1].parse().unwrap())).unwrap();
    assert_eq!(top[0], "F_Qual");

    let pairs = csv_body(out.join("presence_pairwise.csv"));
    let q01 = pairs.iter().find(|r| r[0] == "F_Qual" && r[1] == "0" && r[2] == "1").unwrap();
    assert_eq!(q01[8], "true");
    assert!(pairs.iter().filter(|r| r[0] == "F_Qual").all(|r| r[1] != "2" && r[2] != "2"));

    let joint = csv_body(out.join("joint.csv"));
    assert_eq!(joint[0][1], "F_Qual");
    assert_eq!(joint.last().unwrap()[1], "other");

    // Same input and config, same bytes.
    let again = dir.path().join("b");
    analyze(&cfg, &table, &again).unwrap();
    for name in ["importance.csv", "joint.csv", "perm_distributions.csv", "presence_pairwise.csv", "manifest_analyze.json"] {
        assert_eq!(read(out.join(name)), read(again.join(name)), "{name}");
    }
}

#[test]
fn analyze_refuses_too_few_rows() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("scores.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut w = RecordWriter::create(fs::File::create(&table).unwrap()).unwrap();
    for i in 0..20 {
        w.write(&planted_row(&mut rng, SocialConfig::All, i % 3, 5.0)).unwrap();
    }
    w.flush().unwrap();
    let err = analyze(&ExperimentConfig::default(), &table, &dir.path().join("o")).unwrap_err();
    assert!(matches!(err, CliError::Insufficient { needed: 50, found: 20, .. }), "{err}");
}

#[test]
fn analyze_reports_tree_selection() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("scores.csv");
    planted_table(&table);
    let cfg = ExperimentConfig::parse("tree_candidates=10,30\nperm_repeats=5\n").unwrap();
    let s = analyze(&cfg, &table, &dir.path().join("o")).unwrap();
    assert!([10, 30].contains(&s.n_trees));
    let sel = csv_body(dir.path().join("o/tree_selection.csv"));
    assert_eq!(sel.len(), 2);
    assert_eq!(sel.iter().filter(|r| r[2] == "true").count(), 1);
}

const BASELINE: &str = "argmax[S_All](-1*F_Dist)";
const QUAL: &str = "argmax[S_All](1*F_Qual)";

#[test]
fn compare_writes_samples_and_one_sided_tests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "seed=2\n");
    let rules = vec![BASELINE.to_string(), QUAL.to_string()];
    let out = dir.path().join("c");
    let o = commands::compare(&cfg, &out, &rules, 10).unwrap();
    assert_eq!(o.samples.iter().map(Vec::len).sum::<usize>(), 20);
    assert_eq!(csv_body(out.join(commands::COMPARE_SAMPLES)).len(), 20);
    assert_eq!(csv_body(out.join(commands::COMPARE_TESTS)).len(), 1);

    let four = dir.path().join("c4");
    with_workers(4, || commands::compare(&cfg, &four, &rules, 10)).unwrap().unwrap();
    for name in [commands::COMPARE_SAMPLES, commands::COMPARE_TESTS] {
        assert_eq!(read(out.join(name)), read(four.join(name)));
    }

    let single = dir.path().join("s");
    commands::compare(&cfg, &single, &rules[..1], 5).unwrap();
    assert!(csv_body(single.join(commands::COMPARE_TESTS)).is_empty());
}

#[test]
fn simulate_prefix_rmse_ends_at_full_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    let files = commands::simulate(&cfg, &dir.path().join("s"), BASELINE, &[3]).unwrap();
    let rows = csv_body(files[0].clone());
    assert_eq!(rows.len(), emd_core::HORIZON);
    let last: f64 = rows.last().unwrap()[2].parse().unwrap();
    let counts: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let history = emd_core::parse_history("history.csv", &read(dir.path().join("history.csv"))).unwrap();
    let observed: Vec<f64> = history.counts.iter().map(|&c| f64::from(c)).collect();
    let direct = emd_stats::rmse(&counts, &observed).unwrap();
    assert!((direct - last).abs() < 1e-9);
}

#[test]
fn config_errors_name_the_line() {
    let dup = ExperimentConfig::parse("seed=1\nseed=2\n").unwrap_err();
    assert!(matches!(dup, CliError::Config { line: 2, .. }), "{dup}");
    let unknown = ExperimentConfig::parse("# c\nsede=1\n").unwrap_err();
    assert!(matches!(unknown, CliError::Config { line: 2, .. }), "{unknown}");
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.cfg");
    fs::write(&p, "map=nowhere.csv\n").unwrap();
    assert!(matches!(ExperimentConfig::load(&p), Err(CliError::Missing(_))));
}

#[test]
fn binary_reports_errors_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.cfg");
    fs::write(&p, "runs=0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_emd"))
        .args(["--config", p.to_str().unwrap(), "evolve"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn binary_gen_map_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_emd"))
        .args(["--seed", "9", "--out-dir", dir.path().to_str().unwrap(), "gen-map", "--rows", "8", "--cols", "8"])
        .status()
        .unwrap();
    assert!(status.success());
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("manifest_gen_map.json"))).unwrap();
    assert_eq!(m["master_seed"], 9);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    emd_core::load_map(&dir.path().join("map.csv"), &dir.path().join("history.csv")).unwrap();
}
