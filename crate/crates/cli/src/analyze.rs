//! Analysis of a FactorScores table.
//!
//! Reports written to the output directory:
//! - `social_rmse.csv`: one-tailed tests that selector A yields lower RMSE than B.
//! - `presence_rmse.csv`: RMSE summary per factor presence value, for values
//!   seen at least `min_occurrences` times among S_All rules.
//! - `importance.csv` and `perm_distributions.csv`: forest importances.
//! - `importance_pairwise.csv`: tests that factor A's permutation scores exceed B's.
//! - `joint.csv`: strongest joint contributions of factor sets up to size 3.
//! - `presence_pairwise.csv`: per leading factor, tests that presence A
//!   yields lower RMSE than presence B.
//!
//! Forest inputs are S_All rules only.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use emd_core::{Factor, SocialConfig, FACTOR_COUNT};
use emd_forest::{
    fit_forest, gini_importance, joint_contributions, permutation_importance, select_n_trees, Dataset, ForestConfig,
    PermutationMode,
};
use emd_stats::{pairwise_matrix, Alternative, PairwiseMatrix, TestResult};

use crate::config::{sha256_hex, ExperimentConfig};
use crate::manifest::Manifest;
use crate::records::{parse_records, PresenceRecordRow};
use crate::CliError;

/// Minimum S_All rows per leaf-size unit needed to train a forest.
pub const ROWS_PER_LEAF: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSummary {
    pub n_rows: usize,
    pub n_all_rows: usize,
    pub n_trees: usize,
    pub gini: Vec<f64>,
    pub files: Vec<PathBuf>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn test_cells(t: &TestResult) -> String {
    format!("{},{},{},{},{},{}", t.n_a, t.n_b, t.u_statistic, t.p_value, t.method.as_str(), t.p_value < emd_stats::SIGNIFICANCE_LEVEL)
}

fn matrix_rows(m: &PairwiseMatrix, prefix: &str, out: &mut String) {
    for i in 0..m.labels.len() {
        for j in 0..m.labels.len() {
            if let Some(t) = &m.cells[i][j] {
                writeln!(out, "{prefix}{},{},{}", m.labels[i], m.labels[j], test_cells(t)).unwrap();
            }
        }
    }
}

/// RMSE samples per presence value of `factor` that pass the occurrence filter.
fn presence_groups(rows: &[&PresenceRecordRow], factor: Factor, min_occurrences: usize) -> BTreeMap<i32, Vec<f64>> {
    let mut groups: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.presence.get(factor)).or_default().push(r.rmse);
    }
    groups.retain(|_, v| v.len() >= min_occurrences);
    groups
}

fn write(dir: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    files.push(path);
    Ok(())
}

pub fn analyze(config: &ExperimentConfig, csv_path: &Path, out_dir: &Path) -> Result<AnalysisSummary, CliError> {
    let bytes = std::fs::read(csv_path).map_err(|e| CliError::io(csv_path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;
    let rows = parse_records(&text)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut files = Vec::new();

    // (a) selector comparison
    let groups: Vec<(String, Vec<f64>)> = SocialConfig::ALL
        .iter()
        .map(|&s| (s.to_string(), rows.iter().filter(|r| r.social == s).map(|r| r.rmse).collect::<Vec<_>>()))
        .filter(|g| !g.1.is_empty())
        .collect();
    let mut a = String::from("#schema:v1\n#alternative: RMSE of a < RMSE of b\na,b,n_a,n_b,u,p_value,method,significant\n");
    if groups.len() >= 2 {
        matrix_rows(&pairwise_matrix(&groups, Alternative::Less)?, "", &mut a);
    }
    write(out_dir, "social_rmse.csv", &a, &mut files)?;

    // (b) presence value distributions
    let all: Vec<&PresenceRecordRow> = rows.iter().filter(|r| r.social == SocialConfig::All).collect();
    let mut b = format!(
        "#schema:v1\n#min_occurrences={}\nfactor,presence,count,mean,median,q1,q3,min,max\n",
        config.min_occurrences
    );
    for f in Factor::ALL {
        for (p, mut v) in presence_groups(&all, f, config.min_occurrences) {
            v.sort_by(f64::total_cmp);
            writeln!(
                b,
                "{},{p},{},{},{},{},{},{},{}",
                f.name(),
                v.len(),
                mean(&v),
                quantile(&v, 0.5),
                quantile(&v, 0.25),
                quantile(&v, 0.75),
                v[0],
                v[v.len() - 1]
            )
            .unwrap();
        }
    }
    write(out_dir, "presence_rmse.csv", &b, &mut files)?;

    // (c) forest importances
    let needed = config.forest.min_samples_leaf * ROWS_PER_LEAF;
    if all.len() < needed {
        return Err(CliError::Insufficient {
            what: format!("S_All rows to train a forest (min_samples_leaf {} x {ROWS_PER_LEAF})", config.forest.min_samples_leaf),
            needed,
            found: all.len(),
        });
    }
    let names: Vec<String> = Factor::ALL.iter().map(|f| f.name().to_string()).collect();
    let data = Dataset::new(
        all.iter().map(|r| r.presence.0.iter().map(|&c| f64::from(c)).collect()).collect(),
        all.iter().map(|r| r.rmse).collect(),
        names.clone(),
    )?;
    let mut forest_cfg = config.forest.clone();
    let mut selection = String::new();
    if !config.tree_candidates.is_empty() {
        let (best, scores) = select_n_trees(&data, &config.tree_candidates, &forest_cfg)?;
        selection.push_str("#schema:v1\nn_trees,held_out_mse,selected\n");
        for (n, mse) in &scores {
            writeln!(selection, "{n},{mse},{}", *n == best).unwrap();
        }
        forest_cfg = ForestConfig { n_trees: best, ..forest_cfg };
    }
    let (model, held) = fit_forest(&data, &forest_cfg)?;
    let gini = gini_importance(&model);
    let perm = permutation_importance(&model, &held, config.permutation, forest_cfg.seed)?;
    let perm_label = match config.permutation {
        PermutationMode::Repeats(r) => format!("repeats:{r}"),
        PermutationMode::PerTree => "per_tree".to_string(),
    };
    let mut c = format!(
        "#schema:v1\n#n_trees={}\n#forest_seed={}\n#permutation={perm_label}\n#train_rows={}\n#held_out_rows={}\nfactor,gini,perm_mean,perm_std\n",
        forest_cfg.n_trees,
        forest_cfg.seed,
        model.train_rows.len(),
        held.len()
    );
    let mut dist = String::from("#schema:v1\nfactor,index,score\n");
    for k in 0..FACTOR_COUNT {
        writeln!(c, "{},{},{},{}", names[k], gini[k], mean(&perm[k]), std_dev(&perm[k])).unwrap();
        for (i, v) in perm[k].iter().enumerate() {
            writeln!(dist, "{},{i},{v}", names[k]).unwrap();
        }
    }
    write(out_dir, "importance.csv", &c, &mut files)?;
    write(out_dir, "perm_distributions.csv", &dist, &mut files)?;
    if !selection.is_empty() {
        write(out_dir, "tree_selection.csv", &selection, &mut files)?;
    }

    // (d) permutation-importance matrix
    let perm_groups: Vec<(String, Vec<f64>)> = names.iter().cloned().zip(perm.iter().cloned()).collect();
    let mut d = String::from("#schema:v1\n#alternative: permutation importance of a > b\na,b,n_a,n_b,u,p_value,method,significant\n");
    matrix_rows(&pairwise_matrix(&perm_groups, Alternative::Greater)?, "", &mut d);
    write(out_dir, "importance_pairwise.csv", &d, &mut files)?;

    // (e) joint contributions over every S_All row
    let joint = joint_contributions(&model, &data, 3);
    let mut e = String::from("#schema:v1\nrank,factor_set,joint_score\n");
    for (i, (set, score)) in joint.ranked(&names).into_iter().take(config.joint_top).enumerate() {
        writeln!(e, "{},{set},{score}", i + 1).unwrap();
    }
    writeln!(e, "-,other,{}", joint.other).unwrap();
    write(out_dir, "joint.csv", &e, &mut files)?;

    // (f) presence-level matrices for the leading factors
    let mut order: Vec<usize> = (0..FACTOR_COUNT).collect();
    order.sort_by(|&i, &j| gini[j].total_cmp(&gini[i]).then(i.cmp(&j)));
    let mut f = String::from(
        "#schema:v1\n#alternative: RMSE with presence a < RMSE with presence b\nfactor,presence_a,presence_b,n_a,n_b,u,p_value,method,significant\n",
    );
    for &k in order.iter().take(config.presence_top) {
        let factor = Factor::ALL[k];
        let levels: Vec<(String, Vec<f64>)> = presence_groups(&all, factor, config.min_occurrences)
            .into_iter()
            .map(|(p, v)| (p.to_string(), v))
            .collect();
        if levels.len() >= 2 {
            matrix_rows(&pairwise_matrix(&levels, Alternative::Less)?, &format!("{},", factor.name()), &mut f);
        }
    }
    write(out_dir, "presence_pairwise.csv", &f, &mut files)?;

    let mut m = Manifest::new("analyze", config);
    m.inputs.push(crate::manifest::FileEntry {
        role: "factor_scores".into(),
        path: csv_path.display().to_string(),
        sha256: sha256_hex(&bytes),
    });
    m.detail("n_trees", forest_cfg.n_trees);
    m.detail("forest_seed", forest_cfg.seed);
    m.detail("permutation", &perm_label);
    m.detail("rows", rows.len());
    m.detail("s_all_rows", all.len());
    for p in &files {
        let role = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        m.output(&role, p)?;
    }
    m.write(&out_dir.join("manifest_analyze.json"))?;

    Ok(AnalysisSummary { n_rows: rows.len(), n_all_rows: all.len(), n_trees: forest_cfg.n_trees, gini, files })
}
