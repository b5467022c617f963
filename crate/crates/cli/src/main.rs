use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emd_cli::{analyze, commands, resolve_workers, with_workers, CliError, ExperimentConfig};

/// Evolve, analyse and compare household decision rules for the valley model.
#[derive(Debug, Parser)]
#[command(name = "emd", version)]
struct Cli {
    /// key=value experiment config; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "EMD_WORKERS")]
    workers: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    map: Option<PathBuf>,
    #[arg(long, global = true)]
    history: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic map and settlement history.
    GenMap {
        #[arg(long, default_value_t = 20)]
        rows: u32,
        #[arg(long, default_value_t = 20)]
        cols: u32,
        #[arg(long, default_value_t = 4)]
        zones: u16,
    },
    /// Run the evolutionary campaign and write the FactorScores table.
    Evolve {
        #[arg(long)]
        runs: Option<usize>,
        /// Stop after this many generations, leaving a checkpoint to resume from.
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Importance and significance reports for a FactorScores table.
    Analyze { csv: PathBuf },
    /// Re-simulate rules under fresh seeds and test which fits better.
    Compare {
        /// Rule text; repeat for each rule. The first is the reference.
        #[arg(long = "rule", required = true)]
        rules: Vec<String>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Yearly household counts of one rule for the given seeds.
    Simulate {
        #[arg(long)]
        rule: String,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
    },
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.gp.seed = s;
    }
    if cli.map.is_some() {
        cfg.map = cli.map.clone();
    }
    if cli.history.is_some() {
        cfg.history = cli.history.clone();
    }
    if let Command::Evolve { runs: Some(r), .. } = cli.command {
        cfg.gp.runs = r;
    }
    if let Command::Compare { runs: Some(r), .. } = cli.command {
        cfg.compare_runs = r;
    }
    cfg.validate()?;
    cfg.check_files()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli)?;
    let workers = resolve_workers(cli.workers, &cfg);
    let out = cli.out_dir.clone();
    with_workers(workers, move || match &cli.command {
        Command::GenMap { rows, cols, zones } => {
            let (m, h) = commands::gen_map(&cfg, &out, *rows, *cols, *zones)?;
            println!("wrote {} and {}", m.display(), h.display());
            Ok(())
        }
        Command::Evolve { stop_after, .. } => {
            let o = commands::evolve(&cfg, &out, *stop_after)?;
            if !o.complete {
                println!("stopped after {} records; rerun to resume", o.rows);
                return Ok(());
            }
            for b in &o.best {
                println!("run {}: rmse {:.4}  {}", b.run, b.rmse, b.rule);
            }
            Ok(())
        }
        Command::Analyze { csv } => {
            let s = analyze::analyze(&cfg, csv, &out)?;
            println!("analysed {} rows ({} S_All), {} trees", s.n_rows, s.n_all_rows, s.n_trees);
            Ok(())
        }
        Command::Compare { rules, .. } => {
            let o = commands::compare(&cfg, &out, rules, cfg.compare_runs)?;
            for (r, s) in o.rules.iter().zip(&o.samples) {
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                println!("mean rmse {mean:.4} over {} runs  {r}", s.len());
            }
            Ok(())
        }
        Command::Simulate { rule, seeds } => {
            for p in commands::simulate(&cfg, &out, rule, seeds)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    })?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
