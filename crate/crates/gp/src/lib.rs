//! Strongly-typed genetic programming over factor-rule trees.
//!
//! A run evolves a fixed-size population for a fixed number of
//! generations. Each generation evaluates every individual lacking a
//! fitness (in parallel), emits one record per population member in index
//! order, then breeds the next population: the best individual is copied
//! to slot 0 and the rest come from tournament selection followed by
//! crossover and mutation. Untouched copies keep their fitness, so the
//! generation minimum never increases.

pub mod checkpoint;
pub mod ops;
pub mod seeds;

use std::sync::Arc;

use emd_core::{
    run_simulation, sample_params, DepthBounds, HistoricalSeries, ParamRanges, PresenceVector, RuleTree, SimConfig,
    WorldTemplate, HORIZON,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use checkpoint::{parse_checkpoint, Checkpoint};
pub use seeds::derive_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("invalid GP configuration: {0}")]
    Config(String),
    #[error("history has {found} years, expected {expected}")]
    History { expected: usize, found: usize },
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
    #[error("checkpoint does not match this run: {0}")]
    Resume(String),
    #[error("record sink: {0}")]
    Sink(String),
    /// Returned by a callback to stop a run after its checkpoint.
    #[error("run stopped by caller")]
    Interrupted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub population_size: usize,
    pub generations: usize,
    pub depth_min: usize,
    pub depth_max: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Chance that a mutation changes the selector instead of the tree.
    pub social_mutation_rate: f64,
    pub tournament_size: usize,
    pub seed: u64,
    pub runs: usize,
    /// Simulations averaged per fitness evaluation.
    pub replicates: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 100,
            depth_min: 4,
            depth_max: 10,
            crossover_rate: 0.8,
            mutation_rate: 0.2,
            social_mutation_rate: 0.1,
            tournament_size: 3,
            seed: 0,
            runs: 20,
            replicates: 1,
        }
    }
}

impl GpConfig {
    pub fn bounds(&self) -> DepthBounds {
        DepthBounds::new(self.depth_min, self.depth_max)
    }

    pub fn validate(&self) -> Result<(), GpError> {
        let rate = |name: &str, r: f64| {
            if (0.0..=1.0).contains(&r) {
                Ok(())
            } else {
                Err(GpError::Config(format!("{name} {r} outside [0, 1]")))
            }
        };
        rate("crossover_rate", self.crossover_rate)?;
        rate("mutation_rate", self.mutation_rate)?;
        rate("social_mutation_rate", self.social_mutation_rate)?;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(GpError::Config(msg.to_string())) };
        check(self.population_size >= 2, "population_size must be at least 2")?;
        check(self.generations >= 1, "generations must be at least 1")?;
        check(self.depth_min >= 1, "depth_min must be at least 1")?;
        check(self.depth_min <= self.depth_max, "depth_min exceeds depth_max")?;
        // a full binary tree of depth d has 2^d - 1 nodes
        check(self.depth_max <= 16, "depth_max above 16 is not supported")?;
        check(self.tournament_size >= 1, "tournament_size must be at least 1")?;
        check(self.runs >= 1, "runs must be at least 1")?;
        check(self.replicates >= 1, "replicates must be at least 1")
    }
}

/// Everything a fitness evaluation reads. Shared read-only across workers.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub template: WorldTemplate,
    pub history: HistoricalSeries,
    pub ranges: ParamRanges,
    pub sim_config: Arc<SimConfig>,
}

impl EvalContext {
    pub fn new(
        template: WorldTemplate,
        history: HistoricalSeries,
        ranges: ParamRanges,
        sim_config: SimConfig,
    ) -> Result<Self, GpError> {
        if history.counts.len() != HORIZON {
            return Err(GpError::History { expected: HORIZON, found: history.counts.len() });
        }
        if !ranges.is_valid() {
            return Err(GpError::Config("parameter ranges are not ordered and finite".into()));
        }
        Ok(Self { template, history, ranges, sim_config: Arc::new(sim_config) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub rmse: f64,
    pub sim_seed: u64,
    pub param_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub rule: RuleTree,
    pub evaluation: Option<Evaluation>,
}

impl Individual {
    fn fresh(rule: RuleTree) -> Self {
        Self { rule, evaluation: None }
    }

    fn fitness(&self) -> f64 {
        self.evaluation.expect("evaluated").rmse
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedIndividual {
    pub rule: RuleTree,
    pub fitness: f64,
    pub presence: PresenceVector,
    pub run_id: u64,
    pub generation: u64,
    pub index: usize,
    pub sim_seed: u64,
    pub param_seed: u64,
}

/// Fitness of one rule: parameters drawn from `param_seed`, then the mean
/// RMSE of `replicates` simulations. The first replicate uses `sim_seed`.
pub fn evaluate(
    rule: &RuleTree,
    ctx: &EvalContext,
    sim_seed: u64,
    param_seed: u64,
    replicates: usize,
) -> Result<Evaluation, GpError> {
    let params = sample_params(&ctx.ranges, param_seed);
    let mut total = 0.0;
    for k in 0..replicates.max(1) {
        let seed = if k == 0 { sim_seed } else { derive_seed(sim_seed, &[k as u64]) };
        let run = run_simulation(&ctx.template, &ctx.sim_config, &params, rule, seed, &ctx.history)
            .map_err(|e| GpError::Simulation(e.to_string()))?;
        total += run.rmse;
    }
    Ok(Evaluation { rmse: total / replicates.max(1) as f64, sim_seed, param_seed })
}

/// Initial population of run `run_id`.
pub fn init_population(config: &GpConfig, run_id: u64) -> Vec<RuleTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[run_id, seeds::INIT]));
    ops::init_rules(config.bounds(), config.population_size, &mut rng)
}

/// Index of the fittest of `size` uniform draws; ties go to the lower index.
pub fn tournament(fitness: &[f64], size: usize, rng: &mut impl Rng) -> usize {
    (0..size.max(1))
        .map(|_| rng.gen_range(0..fitness.len()))
        .min_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)))
        .expect("non-empty tournament")
}

fn best_index(pop: &[Individual]) -> usize {
    (0..pop.len())
        .min_by(|&a, &b| pop[a].fitness().total_cmp(&pop[b].fitness()).then(a.cmp(&b)))
        .expect("non-empty population")
}

/// Next population: elite in slot 0, then selection, pairwise crossover and
/// mutation. Modified individuals lose their fitness.
pub fn breed(config: &GpConfig, pop: &[Individual], rng: &mut impl Rng) -> Vec<Individual> {
    let bounds = config.bounds();
    let fitness: Vec<f64> = pop.iter().map(Individual::fitness).collect();
    let elite = pop[best_index(pop)].clone();
    let mut offspring: Vec<Individual> = (1..pop.len())
        .map(|_| pop[tournament(&fitness, config.tournament_size, rng)].clone())
        .collect();
    for i in (1..offspring.len()).step_by(2) {
        if rng.gen_bool(config.crossover_rate) {
            let (a, b) = ops::crossover_rules(&offspring[i - 1].rule, &offspring[i].rule, bounds, rng);
            for (slot, child) in [(i - 1, a), (i, b)] {
                if offspring[slot].rule != child {
                    offspring[slot] = Individual::fresh(child);
                }
            }
        }
    }
    for ind in offspring.iter_mut() {
        if rng.gen_bool(config.mutation_rate) {
            let child = ops::mutate_rule(&ind.rule, bounds, config.social_mutation_rate, rng);
            if ind.rule != child {
                *ind = Individual::fresh(child);
            }
        }
    }
    let mut next = Vec::with_capacity(pop.len());
    next.push(elite);
    next.extend(offspring);
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: u64,
    /// Minimum fitness of each generation evaluated by this call.
    pub best_per_generation: Vec<f64>,
    pub best: Option<EvaluatedIndividual>,
}

/// One run. `resume` continues from a checkpoint of the same run; `rows`
/// is the number of records already written by earlier runs and is carried
/// into every checkpoint. `on_checkpoint` fires after each generation.
pub fn evolve_run(
    config: &GpConfig,
    ctx: &EvalContext,
    run_id: u64,
    resume: Option<Checkpoint>,
    rows: u64,
    mut on_record: impl FnMut(&EvaluatedIndividual) -> Result<(), GpError>,
    mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<(), GpError>,
) -> Result<RunSummary, GpError> {
    config.validate()?;
    let bounds = config.bounds();
    let (mut pop, start, mut rows) = match resume {
        Some(c) => {
            if c.seed != config.seed || c.run_id != run_id || c.population.len() != config.population_size {
                return Err(GpError::Resume(format!(
                    "checkpoint is seed {} run {} with {} individuals",
                    c.seed,
                    c.run_id,
                    c.population.len()
                )));
            }
            if let Some(bad) = c.population.iter().find(|i| !i.rule.check_typing_within(bounds)) {
                return Err(GpError::Resume(format!("rule `{}` violates the depth bounds", bad.rule)));
            }
            (c.population, c.generation as usize, c.rows)
        }
        None => (init_population(config, run_id).into_iter().map(Individual::fresh).collect(), 0, rows),
    };

    let mut summary = RunSummary { run_id, best_per_generation: Vec::new(), best: None };
    for gen in start..config.generations {
        let g = gen as u64;
        let evals: Vec<Option<Result<Evaluation, GpError>>> = pop
            .par_iter()
            .enumerate()
            .map(|(i, ind)| {
                ind.evaluation.is_none().then(|| {
                    let i = i as u64;
                    let sim = derive_seed(config.seed, &[run_id, seeds::SIM, g, i]);
                    let param = derive_seed(config.seed, &[run_id, seeds::PARAM, g, i]);
                    evaluate(&ind.rule, ctx, sim, param, config.replicates)
                })
            })
            .collect();
        for (ind, e) in pop.iter_mut().zip(evals) {
            if let Some(e) = e {
                ind.evaluation = Some(e?);
            }
        }

        for (index, ind) in pop.iter().enumerate() {
            debug_assert!(ind.rule.check_typing_within(bounds));
            let e = ind.evaluation.expect("evaluated");
            let record = EvaluatedIndividual {
                rule: ind.rule.clone(),
                fitness: e.rmse,
                presence: ind.rule.presence_vector(),
                run_id,
                generation: g,
                index,
                sim_seed: e.sim_seed,
                param_seed: e.param_seed,
            };
            on_record(&record)?;
            rows += 1;
            let better = summary.best.as_ref().map_or(true, |b| record.fitness < b.fitness);
            if better {
                summary.best = Some(record);
            }
        }
        summary.best_per_generation.push(pop[best_index(&pop)].fitness());

        if gen + 1 < config.generations {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[run_id, seeds::BREED, g]));
            pop = breed(config, &pop, &mut rng);
        }
        on_checkpoint(&Checkpoint {
            seed: config.seed,
            run_id,
            generation: g + 1,
            rows,
            population: pop.clone(),
        })?;
    }
    Ok(summary)
}

/// All runs from scratch, records streamed in (run, generation, index) order.
pub fn evolve(
    config: &GpConfig,
    ctx: &EvalContext,
    mut on_record: impl FnMut(&EvaluatedIndividual) -> Result<(), GpError>,
) -> Result<Vec<RunSummary>, GpError> {
    (0..config.runs as u64)
        .map(|run| evolve_run(config, ctx, run, None, 0, &mut on_record, |_| Ok(())))
        .collect()
}
