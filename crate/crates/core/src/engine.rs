//! Generational evolutionary loop shared by all four variants.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::genotype::{
    random_individual, sge_list_bounds, Genotype, Individual, InitParams, LearningConfig, Variant, WORST_FITNESS,
};
use crate::grammar::Pcfg;
use crate::learning::{remap_population, update_probabilities, UpdateSourcePolicy};
use crate::mapping::map_individual;
use crate::problems::{Fitness, ProblemKind};
use crate::variation::{crossover_one_point, crossover_structured, mutate, tournament_select};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("population_size must be at least 1")]
    EmptyPopulation,
    #[error("elitism_count ({elitism}) must be smaller than population_size ({population})")]
    TooManyElites { elitism: usize, population: usize },
    #[error("{name} must lie in [0, 1], got {value}")]
    RateOutOfRange { name: &'static str, value: String },
    #[error("tournament_size must be at least 1")]
    EmptyTournament,
    #[error("genotype_size must be at least 1 for linear variants")]
    EmptyGenotype,
    #[error("sigma must be finite and non-negative, got {0}")]
    BadSigma(String),
    #[error("lambda must lie in [0, 1], got {0}")]
    BadLambda(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub problem: ProblemKind,
    pub population_size: usize,
    /// Number of generations reported, counting the initial population.
    pub generations: usize,
    pub elitism_count: usize,
    /// Per-codon mutation probability.
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub tournament_size: usize,
    /// Codon count of GE and PGE genotypes.
    pub genotype_size: usize,
    pub max_depth: usize,
    /// Standard deviation of the PSGE Gaussian mutation.
    pub sigma: f64,
    pub learning: LearningConfig,
    pub seed: u64,
    /// Fill `elapsed_ms` with wall-clock time. Off by default so that output
    /// is reproducible byte for byte.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: Variant::Psge,
            problem: ProblemKind::Quartic,
            population_size: 1000,
            generations: 50,
            elitism_count: 100,
            mutation_rate: 0.05,
            crossover_rate: 0.9,
            tournament_size: 3,
            genotype_size: 128,
            max_depth: 10,
            sigma: 0.5,
            learning: LearningConfig::default(),
            seed: 0,
            timing: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_size == 0 {
            return Err(ConfigError::EmptyPopulation);
        }
        if self.elitism_count >= self.population_size {
            return Err(ConfigError::TooManyElites { elitism: self.elitism_count, population: self.population_size });
        }
        for (name, value) in [("mutation_rate", self.mutation_rate), ("crossover_rate", self.crossover_rate)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::RateOutOfRange { name, value: value.to_string() });
            }
        }
        if self.tournament_size == 0 {
            return Err(ConfigError::EmptyTournament);
        }
        if !self.variant.is_structured() && self.genotype_size == 0 {
            return Err(ConfigError::EmptyGenotype);
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(ConfigError::BadSigma(self.sigma.to_string()));
        }
        if !(0.0..=1.0).contains(&self.learning.lambda) {
            return Err(ConfigError::BadLambda(self.learning.lambda.to_string()));
        }
        Ok(())
    }

    /// Whether the grammar changes during the run.
    pub fn learns(&self) -> bool {
        self.variant.is_probabilistic() && self.learning.enabled
    }
}

/// Statistics of one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub generation: usize,
    pub best_gen: f64,
    pub best_overall: f64,
    /// Mean over valid individuals with finite fitness; the sentinel when
    /// there are none.
    pub mean: f64,
    pub invalid_count: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<RunRecord>,
    /// Best valid individual seen, as it was when found.
    pub best: Option<Individual>,
    /// Grammar at the end of the run.
    pub grammar: Pcfg,
}

/// State handed to the observer once per generation.
pub struct GenerationView<'a> {
    pub record: &'a RunRecord,
    /// Grammar the population was evaluated under.
    pub grammar: &'a Pcfg,
    pub population: &'a [Individual],
    pub best: Option<&'a Individual>,
}

/// Independent random streams. Each is keyed by the master seed plus up to two
/// indices, so parallel work never shares a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Selection = 2,
    Mask = 3,
    Appends = 4,
    Remap = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, stream: Stream, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed ^ splitmix64(stream as u64)) ^ a) ^ b)
}

pub fn stream_rng(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, stream, a, b))
}

/// Seed of the `run`-th independent run of an experiment: `master + run`.
pub fn run_seed(master: u64, run: usize) -> u64 {
    master.wrapping_add(run as u64)
}

/// Maps and scores every individual whose fitness is stale.
pub fn evaluate_population<F, R>(pop: &mut [Individual], g: &Pcfg, max_depth: usize, fitness: &F, rng_for: R)
where
    F: Fitness + ?Sized,
    R: Fn(usize) -> ChaCha8Rng + Sync,
{
    pop.par_iter_mut().enumerate().filter(|(_, ind)| !ind.evaluated).for_each(|(i, ind)| {
        map_individual(ind, g, max_depth, &mut rng_for(i));
        if let Some(ph) = &ind.phenotype {
            ind.fitness = fitness.fitness(ph);
        }
        ind.evaluated = true;
    });
}

/// Index of the lowest fitness, earliest on ties.
fn best_index(pop: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.fitness < pop[best].fitness {
            best = i;
        }
    }
    best
}

fn record_for(generation: usize, pop: &[Individual], best: Option<&Individual>, elapsed_ms: u64) -> RunRecord {
    let finite: Vec<f64> = pop.iter().filter(|i| i.valid && i.fitness.is_finite()).map(|i| i.fitness).collect();
    let mean = if finite.is_empty() { WORST_FITNESS } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    RunRecord {
        generation,
        best_gen: pop[best_index(pop)].fitness,
        best_overall: best.map_or(WORST_FITNESS, |b| b.fitness),
        mean,
        invalid_count: pop.iter().filter(|i| !i.valid).count(),
        elapsed_ms,
    }
}

pub fn run<F: Fitness + ?Sized>(config: &RunConfig, grammar: &Pcfg, fitness: &F) -> Result<RunResult, ConfigError> {
    run_with_observer(config, grammar, fitness, |_| {})
}

/// Runs one evolutionary experiment, calling `observe` after every generation.
///
/// Each generation: record statistics, keep the elites, apply the grammar
/// update and re-map the population (probabilistic variants with learning on),
/// then fill the rest by tournament, crossover and mutation.
pub fn run_with_observer<F, O>(
    config: &RunConfig,
    grammar: &Pcfg,
    fitness: &F,
    mut observe: O,
) -> Result<RunResult, ConfigError>
where
    F: Fitness + ?Sized,
    O: FnMut(GenerationView<'_>),
{
    config.validate()?;
    let start = Instant::now();
    let elapsed = || if config.timing { start.elapsed().as_millis() as u64 } else { 0 };
    let seed = config.seed;
    let n = config.population_size;
    let mut g = grammar.clone();

    let bounds = (config.variant == Variant::Sge).then(|| sge_list_bounds(&g, config.max_depth));
    let params =
        InitParams { genotype_size: config.genotype_size, max_depth: config.max_depth, sge_bounds: bounds.as_deref() };
    let mut pop: Vec<Individual> = (0..n)
        .into_par_iter()
        .map(|i| random_individual(config.variant, &g, params, &mut stream_rng(seed, Stream::Init, i as u64, 0)))
        .collect();
    evaluate_population(&mut pop, &g, config.max_depth, fitness, |i| stream_rng(seed, Stream::Appends, 0, i as u64));

    let mut select_rng = stream_rng(seed, Stream::Selection, 0, 0);
    let mut mask_rng = stream_rng(seed, Stream::Mask, 0, 0);
    let mut policy = UpdateSourcePolicy::default();
    let mut best: Option<Individual> = None;
    let total = config.generations.max(1);
    let mut records = Vec::with_capacity(total);

    for generation in 0..total {
        let gen_best = pop[best_index(&pop)].clone();
        if gen_best.valid && best.as_ref().is_none_or(|b| gen_best.fitness < b.fitness) {
            best = Some(gen_best.clone());
        }
        let record = record_for(generation, &pop, best.as_ref(), elapsed());
        observe(GenerationView { record: &record, grammar: &g, population: &pop, best: best.as_ref() });
        records.push(record);
        if generation + 1 == total {
            break;
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness));
        order.truncate(config.elitism_count);

        if config.learns() {
            if let Ok(source) = policy.select(Some(&gen_best), best.as_ref()) {
                g = update_probabilities(&g, &source.counts, config.learning.lambda);
            }
            let next_gen = generation as u64 + 1;
            remap_population(
                &mut pop,
                &g,
                config.max_depth,
                |i| stream_rng(seed, Stream::Remap, next_gen, i as u64),
                |ph| fitness.fitness(ph),
            );
        }

        let mut next: Vec<Individual> = order.iter().map(|&i| pop[i].clone()).collect();
        while next.len() < n {
            let p1 = tournament_select(&pop, config.tournament_size, &mut select_rng);
            let p2 = tournament_select(&pop, config.tournament_size, &mut select_rng);
            let mut child = if select_rng.random::<f64>() < config.crossover_rate {
                match (&p1.genotype, &p2.genotype) {
                    (Genotype::Ge(a), Genotype::Ge(b)) => {
                        Individual::unmapped(Genotype::Ge(crossover_one_point(a, b, &mut select_rng)))
                    }
                    (Genotype::Pge(a), Genotype::Pge(b)) => {
                        Individual::unmapped(Genotype::Pge(crossover_one_point(a, b, &mut select_rng)))
                    }
                    _ => crossover_structured(p1, p2, &mut mask_rng),
                }
            } else {
                p1.clone()
            };
            mutate(&mut child, &g, config.mutation_rate, config.sigma, &mut select_rng);
            next.push(child);
        }
        let next_gen = generation as u64 + 1;
        evaluate_population(&mut next, &g, config.max_depth, fitness, |i| {
            stream_rng(seed, Stream::Appends, next_gen, i as u64)
        });
        pop = next;
    }

    Ok(RunResult { records, best, grammar: g })
}
