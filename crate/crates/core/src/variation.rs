//! Selection, mutation and crossover.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::genotype::{Genotype, Individual, LinearGenotype, StructuredGenotype};
use crate::grammar::Pcfg;

/// Index of the fittest of `size` uniform draws (with replacement). The
/// earliest draw wins ties.
pub fn tournament_index<R: Rng + ?Sized>(pop: &[Individual], size: usize, rng: &mut R) -> usize {
    assert!(!pop.is_empty(), "tournament over an empty population");
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size.max(1) {
        let i = rng.random_range(0..pop.len());
        if pop[i].fitness < pop[best].fitness {
            best = i;
        }
    }
    best
}

pub fn tournament_select<'a, R: Rng + ?Sized>(pop: &'a [Individual], size: usize, rng: &mut R) -> &'a Individual {
    &pop[tournament_index(pop, size, rng)]
}

/// Adds `delta` to a real codon and clamps the result into [0, 1].
pub fn gaussian_step(codon: f64, delta: f64) -> f64 {
    (codon + delta).clamp(0.0, 1.0)
}

/// Number of leading codons of a list that mutation may touch.
fn mutable_len(consumed: &[usize], lists_len: usize, nt: usize, list_len: usize) -> usize {
    if consumed.len() == lists_len {
        consumed[nt].min(list_len)
    } else {
        list_len
    }
}

/// Perturbs each consumed codon with probability `rate` by a draw from
/// `noise`. Returns the number of codons changed.
pub fn mutate_psge_with<R, F>(
    genotype: &mut StructuredGenotype<f64>,
    consumed: &[usize],
    rate: f64,
    rng: &mut R,
    mut noise: F,
) -> usize
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    let n_lists = genotype.lists.len();
    let mut hits = 0;
    for (nt, list) in genotype.lists.iter_mut().enumerate() {
        let len = mutable_len(consumed, n_lists, nt, list.len());
        for codon in &mut list[..len] {
            if rng.random::<f64>() < rate {
                *codon = gaussian_step(*codon, noise(rng));
                hits += 1;
            }
        }
    }
    hits
}

pub fn mutate_psge<R: Rng + ?Sized>(
    genotype: &mut StructuredGenotype<f64>,
    consumed: &[usize],
    rate: f64,
    sigma: f64,
    rng: &mut R,
) -> usize {
    let normal = Normal::new(0.0, sigma).expect("finite, non-negative sigma");
    mutate_psge_with(genotype, consumed, rate, rng, |r| normal.sample(r))
}

/// Replaces consumed codons with a different valid rule index. Lists of
/// single-rule non-terminals are left alone.
pub fn mutate_sge<R: Rng + ?Sized>(
    genotype: &mut StructuredGenotype<u16>,
    consumed: &[usize],
    g: &Pcfg,
    rate: f64,
    rng: &mut R,
) -> usize {
    let n_lists = genotype.lists.len();
    let mut hits = 0;
    for (nt, list) in genotype.lists.iter_mut().enumerate() {
        let rules = g.rule_count(crate::grammar::NtId(nt));
        let len = mutable_len(consumed, n_lists, nt, list.len());
        for codon in &mut list[..len] {
            if rng.random::<f64>() < rate && rules > 1 {
                // uniform over the other rules
                let pick = rng.random_range(0..rules - 1) as u16;
                *codon = if pick >= *codon { pick + 1 } else { pick };
                hits += 1;
            }
        }
    }
    hits
}

pub fn mutate_ge<R: Rng + ?Sized>(genotype: &mut LinearGenotype<u8>, rate: f64, rng: &mut R) -> usize {
    let mut hits = 0;
    for codon in &mut genotype.codons {
        if rng.random::<f64>() < rate {
            *codon = rng.random();
            hits += 1;
        }
    }
    hits
}

pub fn mutate_pge<R: Rng + ?Sized>(genotype: &mut LinearGenotype<f64>, rate: f64, rng: &mut R) -> usize {
    let mut hits = 0;
    for codon in &mut genotype.codons {
        if rng.random::<f64>() < rate {
            *codon = rng.random();
            hits += 1;
        }
    }
    hits
}

/// Applies the mutation operator of the individual's variant and marks it for
/// re-evaluation when anything changed.
pub fn mutate<R: Rng + ?Sized>(ind: &mut Individual, g: &Pcfg, rate: f64, sigma: f64, rng: &mut R) {
    let hits = match &mut ind.genotype {
        Genotype::Ge(l) => mutate_ge(l, rate, rng),
        Genotype::Pge(l) => mutate_pge(l, rate, rng),
        Genotype::Sge(s) => mutate_sge(s, &ind.consumed, g, rate, rng),
        Genotype::Psge(s) => mutate_psge(s, &ind.consumed, rate, sigma, rng),
    };
    if hits > 0 {
        ind.mark_stale();
    }
}

/// Offspring takes each non-terminal's whole list from parent 2 where the
/// mask bit is set, otherwise from parent 1.
pub fn crossover_mask<T: Clone>(
    p1: &StructuredGenotype<T>,
    p2: &StructuredGenotype<T>,
    mask: &[bool],
) -> StructuredGenotype<T> {
    assert_eq!(p1.lists.len(), p2.lists.len());
    assert_eq!(mask.len(), p1.lists.len());
    StructuredGenotype {
        lists: mask
            .iter()
            .zip(p1.lists.iter().zip(&p2.lists))
            .map(|(&bit, (a, b))| if bit { b.clone() } else { a.clone() })
            .collect(),
    }
}

fn structured_child(p1: &Individual, p2: &Individual, mask: &[bool]) -> Individual {
    let genotype = match (&p1.genotype, &p2.genotype) {
        (Genotype::Psge(a), Genotype::Psge(b)) => Genotype::Psge(crossover_mask(a, b, mask)),
        (Genotype::Sge(a), Genotype::Sge(b)) => Genotype::Sge(crossover_mask(a, b, mask)),
        _ => panic!("mask crossover needs two structured parents of the same variant"),
    };
    let mut child = Individual::unmapped(genotype);
    if p1.consumed.len() == mask.len() && p2.consumed.len() == mask.len() {
        child.consumed =
            mask.iter().enumerate().map(|(i, &bit)| if bit { p2.consumed[i] } else { p1.consumed[i] }).collect();
    }
    child
}

/// Mask crossover with an explicit mask, one bit per non-terminal.
pub fn crossover_structured_with_mask(p1: &Individual, p2: &Individual, mask: &[bool]) -> Individual {
    structured_child(p1, p2, mask)
}

/// Mask crossover with a uniformly random mask.
pub fn crossover_structured<R: Rng + ?Sized>(p1: &Individual, p2: &Individual, rng: &mut R) -> Individual {
    let n = match &p1.genotype {
        Genotype::Psge(s) => s.lists.len(),
        Genotype::Sge(s) => s.lists.len(),
        _ => panic!("mask crossover needs structured parents"),
    };
    let mask: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    structured_child(p1, p2, &mask)
}

/// Prefix of `p1` up to a cut in [1, len - 1] followed by the suffix of `p2`.
pub fn crossover_one_point<T: Clone, R: Rng + ?Sized>(
    p1: &LinearGenotype<T>,
    p2: &LinearGenotype<T>,
    rng: &mut R,
) -> LinearGenotype<T> {
    let len = p1.codons.len().min(p2.codons.len());
    if len < 2 {
        return p1.clone();
    }
    let cut = rng.random_range(1..len);
    one_point_at(p1, p2, cut)
}

pub fn one_point_at<T: Clone>(p1: &LinearGenotype<T>, p2: &LinearGenotype<T>, cut: usize) -> LinearGenotype<T> {
    let mut codons = p1.codons[..cut].to_vec();
    codons.extend_from_slice(&p2.codons[cut..]);
    LinearGenotype { codons }
}

/// One offspring from the variant's crossover operator.
pub fn crossover<R: Rng + ?Sized>(p1: &Individual, p2: &Individual, rng: &mut R) -> Individual {
    match (&p1.genotype, &p2.genotype) {
        (Genotype::Ge(a), Genotype::Ge(b)) => Individual::unmapped(Genotype::Ge(crossover_one_point(a, b, rng))),
        (Genotype::Pge(a), Genotype::Pge(b)) => Individual::unmapped(Genotype::Pge(crossover_one_point(a, b, rng))),
        _ => crossover_structured(p1, p2, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::WORST_FITNESS;
    use crate::grammar::fixtures::WEIGHTED_EXPR;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn with_fitness(f: f64) -> Individual {
        let mut ind = Individual::unmapped(Genotype::Ge(LinearGenotype { codons: vec![0] }));
        ind.fitness = f;
        ind.valid = f.is_finite();
        ind
    }

    fn psge(lists: Vec<Vec<f64>>) -> Individual {
        let consumed = lists.iter().map(Vec::len).collect();
        let mut ind = Individual::unmapped(Genotype::Psge(StructuredGenotype { lists }));
        ind.consumed = consumed;
        ind
    }

    #[test]
    fn tournament_of_one() {
        let pop = vec![with_fitness(3.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(tournament_select(&pop, 3, &mut rng).fitness, 3.0);
    }

    #[test]
    fn tournament_picks_minimum() {
        let pop = vec![with_fitness(5.0), with_fitness(2.0), with_fitness(9.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // a tournament as large as the population very likely draws index 1
        let wins = (0..200).filter(|_| tournament_select(&pop, 30, &mut rng).fitness == 2.0).count();
        assert_eq!(wins, 200);
    }

    #[test]
    fn sentinel_never_wins_against_valid() {
        let pop = vec![with_fitness(WORST_FITNESS), with_fitness(1e300)];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let valid_drawn = (0..100).all(|_| tournament_select(&pop, 50, &mut rng).valid);
        assert!(valid_drawn);
    }

    #[test]
    fn gaussian_examples() {
        assert!((gaussian_step(0.46, -0.17) - 0.29).abs() < 1e-12);
        assert_eq!(gaussian_step(0.99, 0.5), 1.0);
        assert_eq!(gaussian_step(0.1, -0.5), 0.0);
    }

    #[test]
    fn gaussian_mutation_with_injected_noise() {
        let mut genotype = StructuredGenotype { lists: vec![vec![0.19, 0.46, 0.87], vec![0.27], vec![0.32, 0.64]] };
        let consumed = vec![3, 1, 2];
        let mut draws = vec![0.0, -0.17, 0.0, 0.0, 0.0, -0.36].into_iter();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        mutate_psge_with(&mut genotype, &consumed, 1.0, &mut rng, |_| draws.next().unwrap());
        let expect = [vec![0.19, 0.29, 0.87], vec![0.27], vec![0.32, 0.28]];
        for (got, want) in genotype.lists.iter().zip(&expect) {
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() < 1e-12, "{got:?}");
            }
        }
    }

    #[test]
    fn zero_rate_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Pcfg::parse(WEIGHTED_EXPR).unwrap();
        let mut ind = psge(vec![vec![0.1, 0.2], vec![0.3], vec![0.4]]);
        let before = ind.clone();
        mutate(&mut ind, &g, 0.0, 0.5, &mut rng);
        assert_eq!(ind, before);
    }

    #[test]
    fn mutation_only_touches_consumed_codons() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut genotype = StructuredGenotype { lists: vec![vec![0.5; 6]] };
        mutate_psge(&mut genotype, &[2], 1.0, 0.5, &mut rng);
        assert!(genotype.lists[0][2..].iter().all(|&c| c == 0.5));
    }

    #[test]
    fn sge_mutation_picks_a_different_rule() {
        let g = Pcfg::parse("<s> ::= a | b\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut genotype = StructuredGenotype { lists: vec![vec![1]] };
        mutate_sge(&mut genotype, &[1], &g, 1.0, &mut rng);
        assert_eq!(genotype.lists[0], vec![0]);

        let single = Pcfg::parse("<s> ::= a").unwrap();
        let mut genotype = StructuredGenotype { lists: vec![vec![0, 0]] };
        assert_eq!(mutate_sge(&mut genotype, &[2], &single, 1.0, &mut rng), 0);
        assert_eq!(genotype.lists[0], vec![0, 0]);

        let g4 = Pcfg::parse("<s> ::= a | b | c | d").unwrap();
        for _ in 0..100 {
            let mut genotype = StructuredGenotype { lists: vec![vec![2]] };
            mutate_sge(&mut genotype, &[1], &g4, 1.0, &mut rng);
            assert!(genotype.lists[0][0] != 2 && genotype.lists[0][0] < 4);
        }
    }

    #[test]
    fn ge_mutation_resamples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut genotype = LinearGenotype { codons: vec![7u8; 64] };
        assert_eq!(mutate_ge(&mut genotype, 1.0, &mut rng), 64);
        let mut pge = LinearGenotype { codons: vec![0.5; 64] };
        mutate_pge(&mut pge, 1.0, &mut rng);
        assert!(pge.codons.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn mask_crossover_worked_example() {
        let p1 = psge(vec![vec![0.19, 0.46, 0.87], vec![0.27], vec![0.32, 0.64]]);
        let p2 = psge(vec![vec![0.02, 0.90, 0.13], vec![0.48], vec![0.75, 0.42, 0.56]]);
        let child = crossover_structured_with_mask(&p1, &p2, &[true, true, false]);
        let Genotype::Psge(s) = &child.genotype else { unreachable!() };
        assert_eq!(s.lists, vec![vec![0.02, 0.90, 0.13], vec![0.48], vec![0.32, 0.64]]);
        assert_eq!(child.consumed, vec![3, 1, 2]);

        let clone = crossover_structured_with_mask(&p1, &p2, &[false; 3]);
        assert_eq!(clone.genotype, p1.genotype);
        let same = crossover_structured_with_mask(&p1, &p1, &[true, false, true]);
        assert_eq!(same.genotype, p1.genotype);
    }

    #[test]
    fn one_point_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = LinearGenotype { codons: vec![1u8, 2] };
        let b = LinearGenotype { codons: vec![3u8, 4] };
        assert_eq!(crossover_one_point(&a, &b, &mut rng).codons, vec![1, 4]);
        assert_eq!(crossover_one_point(&a, &a, &mut rng), a);

        let a = LinearGenotype { codons: vec![0u8; 10] };
        let b = LinearGenotype { codons: vec![1u8; 10] };
        for _ in 0..100 {
            let c = crossover_one_point(&a, &b, &mut rng);
            assert_eq!(c.codons.len(), 10);
            assert_eq!(c.codons[0], 0);
            assert_eq!(c.codons[9], 1);
        }
    }
}
