//! Structured grammatical evolution with grammar probability learning.
//!
//! Four genotype-to-phenotype mappers share one engine: GE and SGE read
//! integer codons, PGE and PSGE read real codons through the rule
//! probabilities of a PCFG, which the engine refines between generations.

pub mod engine;
pub mod genotype;
pub mod grammar;
pub mod learning;
pub mod mapping;
pub mod problems;
pub mod variation;

pub use engine::{run, run_with_observer, ConfigError, GenerationView, RunConfig, RunRecord, RunResult};
pub use genotype::{
    ExpansionCounts, Genotype, Individual, LearningConfig, LinearGenotype, StructuredGenotype, Variant, WORST_FITNESS,
};
pub use grammar::{GrammarError, NtId, Pcfg, Production, Symbol};
pub use learning::{update_probabilities, LearningError, UpdateSourcePolicy};
pub use mapping::{map_individual, Derivation, Exhausted, TraceStep};
pub use problems::{Fitness, Problem, ProblemError, ProblemKind};
