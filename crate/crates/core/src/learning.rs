//! Grammar probability learning for the probabilistic variants.
//!
//! After each generation the rule usage of one elite individual nudges the
//! grammar: used rules gain `λ · share` (capped at 1), unused rules of the
//! same non-terminal lose a fraction `λ` of their mass, and the group is
//! rescaled to sum to one. The individual alternates between the best of the
//! current generation and the best found so far.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::genotype::{ExpansionCounts, Individual};
use crate::grammar::Pcfg;
use crate::mapping::map_individual;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearningError {
    #[error("no valid individual available to update the grammar")]
    NoValidIndividual,
}

/// Returns the grammar after one reinforcement step from `counts`.
pub fn update_probabilities(g: &Pcfg, counts: &ExpansionCounts, lambda: f64) -> Pcfg {
    let mut next = g.clone();
    if lambda == 0.0 {
        return next;
    }
    for nt in g.non_terminals() {
        let row = counts.row(nt);
        let total: u32 = row.iter().sum();
        if total == 0 {
            continue;
        }
        let probs: Vec<f64> = g
            .probabilities(nt)
            .iter()
            .zip(row)
            .map(|(&p, &c)| if c > 0 { (p + lambda * c as f64 / total as f64).min(1.0) } else { p - lambda * p })
            .collect();
        next.set_probabilities(nt, &probs);
        next.normalize_in_place(nt).expect("a used rule keeps positive mass after reinforcement");
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePhase {
    BestOfGeneration,
    BestOverall,
}

/// Alternates the source of grammar updates, starting with the generation best.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateSourcePolicy {
    phase: UpdatePhase,
}

impl Default for UpdateSourcePolicy {
    fn default() -> Self {
        UpdateSourcePolicy { phase: UpdatePhase::BestOfGeneration }
    }
}

impl UpdateSourcePolicy {
    pub fn phase(&self) -> UpdatePhase {
        self.phase
    }

    /// Returns the individual for the current phase and advances the phase.
    /// The phase advances even when the chosen individual is missing or invalid.
    pub fn select<'a>(
        &mut self,
        best_gen: Option<&'a Individual>,
        best_overall: Option<&'a Individual>,
    ) -> Result<&'a Individual, LearningError> {
        let pick = match self.phase {
            UpdatePhase::BestOfGeneration => best_gen,
            UpdatePhase::BestOverall => best_overall,
        };
        self.phase = match self.phase {
            UpdatePhase::BestOfGeneration => UpdatePhase::BestOverall,
            UpdatePhase::BestOverall => UpdatePhase::BestOfGeneration,
        };
        pick.filter(|ind| ind.valid).ok_or(LearningError::NoValidIndividual)
    }
}

/// Re-maps every individual under `g` and recomputes its fitness.
///
/// `rng_for(i)` supplies the stream used for codon appends of individual `i`,
/// so the result does not depend on scheduling.
pub fn remap_population<R, F, E>(pop: &mut [Individual], g: &Pcfg, max_depth: usize, rng_for: F, evaluate: E)
where
    R: Rng,
    F: Fn(usize) -> R + Sync,
    E: Fn(&str) -> f64 + Sync,
{
    pop.par_iter_mut().enumerate().for_each(|(i, ind)| {
        let mut rng = rng_for(i);
        map_individual(ind, g, max_depth, &mut rng);
        if let Some(ph) = &ind.phenotype {
            ind.fitness = evaluate(ph);
        }
        ind.evaluated = true;
    });
}
