//! Fixed inputs for the mapping benchmarks.

use psge_core::genotype::{create_psge_genotype, random_ge_genotype, random_sge_genotype, sge_list_bounds};
use psge_core::{Genotype, Pcfg, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `count` random genotypes of `variant` for `g`, reproducible from `seed`.
pub fn genotypes(variant: Variant, g: &Pcfg, count: usize, max_depth: usize, seed: u64) -> Vec<Genotype> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = sge_list_bounds(g, max_depth);
    (0..count)
        .map(|_| match variant {
            Variant::Ge => Genotype::Ge(random_ge_genotype(128, &mut rng)),
            Variant::Pge => Genotype::Pge(psge_core::genotype::random_pge_genotype(128, &mut rng)),
            Variant::Sge => Genotype::Sge(random_sge_genotype(g, &bounds, &mut rng)),
            Variant::Psge => Genotype::Psge(create_psge_genotype(g, max_depth, &mut rng)),
        })
        .collect()
}
