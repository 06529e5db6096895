//! Genotype representations and the individual record shared by all variants.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::grammar::{NtId, Pcfg};

/// Fitness given to individuals that failed to map. Every problem minimizes.
pub const WORST_FITNESS: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Ge,
    Pge,
    Sge,
    Psge,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ge, Variant::Pge, Variant::Sge, Variant::Psge];

    pub fn is_structured(self) -> bool {
        matches!(self, Variant::Sge | Variant::Psge)
    }

    /// Variants whose grammar probabilities are learned during the run.
    pub fn is_probabilistic(self) -> bool {
        matches!(self, Variant::Pge | Variant::Psge)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Ge => "ge",
            Variant::Pge => "pge",
            Variant::Sge => "sge",
            Variant::Psge => "psge",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ge" => Ok(Variant::Ge),
            "pge" => Ok(Variant::Pge),
            "sge" => Ok(Variant::Sge),
            "psge" => Ok(Variant::Psge),
            other => Err(format!("unknown variant `{other}` (expected ge, pge, sge or psge)")),
        }
    }
}

/// One codon list per non-terminal, indexed by [`NtId`].
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGenotype<T> {
    pub lists: Vec<Vec<T>>,
}

impl<T> StructuredGenotype<T> {
    pub fn empty(g: &Pcfg) -> Self {
        StructuredGenotype { lists: (0..g.num_non_terminals()).map(|_| Vec::new()).collect() }
    }

    pub fn list(&self, nt: NtId) -> &[T] {
        &self.lists[nt.0]
    }

    pub fn codon_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }
}

/// Fixed-length codon string read left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGenotype<T> {
    pub codons: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Genotype {
    /// Integer codons in [0, 255], chosen rule = codon mod rule count.
    Ge(LinearGenotype<u8>),
    /// Real codons in [0, 1] read through cumulative probabilities.
    Pge(LinearGenotype<f64>),
    /// Per-non-terminal rule indices.
    Sge(StructuredGenotype<u16>),
    /// Per-non-terminal real codons in [0, 1].
    Psge(StructuredGenotype<f64>),
}

impl Genotype {
    pub fn variant(&self) -> Variant {
        match self {
            Genotype::Ge(_) => Variant::Ge,
            Genotype::Pge(_) => Variant::Pge,
            Genotype::Sge(_) => Variant::Sge,
            Genotype::Psge(_) => Variant::Psge,
        }
    }

    /// Codon-range invariants of the representation.
    pub fn in_range(&self, g: &Pcfg) -> bool {
        let unit = |c: &f64| (0.0..=1.0).contains(c);
        match self {
            // u8 cannot leave [0, 255]
            Genotype::Ge(_) => true,
            Genotype::Pge(l) => l.codons.iter().all(unit),
            Genotype::Psge(s) => s.lists.len() == g.num_non_terminals() && s.lists.iter().flatten().all(unit),
            Genotype::Sge(s) => {
                s.lists.len() == g.num_non_terminals()
                    && g.non_terminals().all(|nt| s.list(nt).iter().all(|&c| (c as usize) < g.rule_count(nt)))
            }
        }
    }
}

/// Bracketed text form used by individual dumps, e.g. `[[0.19,0.46],[0.27]]`.
impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, xs: &[T]) -> fmt::Result {
            f.write_str("[")?;
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str("]")
        }
        fn nested<T: fmt::Display>(f: &mut fmt::Formatter<'_>, xs: &[Vec<T>]) -> fmt::Result {
            f.write_str("[")?;
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                list(f, x)?;
            }
            f.write_str("]")
        }
        match self {
            Genotype::Ge(l) => list(f, &l.codons),
            Genotype::Pge(l) => list(f, &l.codons),
            Genotype::Sge(s) => nested(f, &s.lists),
            Genotype::Psge(s) => nested(f, &s.lists),
        }
    }
}

/// Per-rule usage counts of one derivation, indexed `[nt][rule]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExpansionCounts {
    counts: Vec<Vec<u32>>,
}

impl ExpansionCounts {
    pub fn zeros(g: &Pcfg) -> Self {
        ExpansionCounts { counts: g.non_terminals().map(|nt| vec![0; g.rule_count(nt)]).collect() }
    }

    pub fn from_rows(counts: Vec<Vec<u32>>) -> Self {
        ExpansionCounts { counts }
    }

    pub fn record(&mut self, nt: NtId, rule: usize) {
        self.counts[nt.0][rule] += 1;
    }

    pub fn get(&self, nt: NtId, rule: usize) -> u32 {
        self.counts[nt.0][rule]
    }

    pub fn row(&self, nt: NtId) -> &[u32] {
        &self.counts[nt.0]
    }

    /// Number of times `nt` was expanded.
    pub fn expansions(&self, nt: NtId) -> usize {
        self.counts.get(nt.0).map_or(0, |r| r.iter().map(|&c| c as usize).sum())
    }

    pub fn num_non_terminals(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().map(|&c| c as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genotype: Genotype,
    /// `None` until mapped, and for individuals that failed to map.
    pub phenotype: Option<String>,
    pub counts: ExpansionCounts,
    /// Codons read per non-terminal list during the last mapping (structured
    /// variants only). Mutation is restricted to these positions.
    pub consumed: Vec<usize>,
    /// Deepest level at which a non-terminal was expanded.
    pub depth: usize,
    pub fitness: f64,
    pub valid: bool,
    /// Whether phenotype and fitness reflect the current genotype.
    pub evaluated: bool,
}

impl Individual {
    /// An individual whose genotype has not been mapped yet.
    pub fn unmapped(genotype: Genotype) -> Self {
        Individual {
            genotype,
            phenotype: None,
            counts: ExpansionCounts::default(),
            consumed: Vec::new(),
            depth: 0,
            fitness: WORST_FITNESS,
            valid: false,
            evaluated: false,
        }
    }

    pub fn mark_stale(&mut self) {
        self.evaluated = false;
    }

    /// One-line dump: variant, fitness, phenotype and genotype, tab separated.
    pub fn dump_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.genotype.variant(),
            self.fitness,
            self.phenotype.as_deref().unwrap_or("<invalid>"),
            self.genotype
        )
    }
}

/// Learning factor of the probability update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningConfig {
    pub lambda: f64,
    pub enabled: bool,
}

impl LearningConfig {
    pub const DEFAULT_LAMBDA: f64 = 0.01;

    pub fn new(lambda: f64, enabled: bool) -> Result<Self, String> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(format!("learning factor {lambda} outside [0, 1]"));
        }
        Ok(LearningConfig { lambda, enabled })
    }
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig { lambda: Self::DEFAULT_LAMBDA, enabled: true }
    }
}

pub fn random_ge_genotype<R: Rng + ?Sized>(size: usize, rng: &mut R) -> LinearGenotype<u8> {
    LinearGenotype { codons: (0..size).map(|_| rng.random::<u8>()).collect() }
}

pub fn random_pge_genotype<R: Rng + ?Sized>(size: usize, rng: &mut R) -> LinearGenotype<f64> {
    LinearGenotype { codons: (0..size).map(|_| rng.random::<f64>()).collect() }
}

/// Upper bound on how often each non-terminal can be expanded in one
/// derivation when recursive rules are dropped at `max_depth`.
///
/// Each entry is maximized independently, so the bound may not be reached by
/// any single derivation.
pub fn sge_list_bounds(g: &Pcfg, max_depth: usize) -> Vec<usize> {
    let n = g.num_non_terminals();
    // memo[depth][from][target]; depths past max_depth behave like max_depth
    let mut memo: Vec<Vec<Option<Vec<usize>>>> = vec![vec![None; n]; max_depth + 1];

    fn go(g: &Pcfg, nt: NtId, depth: usize, max_depth: usize, memo: &mut Vec<Vec<Option<Vec<usize>>>>) -> Vec<usize> {
        let d = depth.min(max_depth);
        if let Some(v) = &memo[d][nt.0] {
            return v.clone();
        }
        let n = g.num_non_terminals();
        let mut best = vec![0usize; n];
        for prod in g.rules(nt) {
            if d >= max_depth && prod.recursive {
                continue;
            }
            let mut sum = vec![0usize; n];
            for child in prod.non_terminals() {
                let sub = go(g, child, d + 1, max_depth, memo);
                for (s, x) in sum.iter_mut().zip(sub) {
                    *s = s.saturating_add(x);
                }
            }
            for (b, s) in best.iter_mut().zip(sum) {
                *b = (*b).max(s);
            }
        }
        best[nt.0] = best[nt.0].saturating_add(1);
        memo[d][nt.0] = Some(best.clone());
        best
    }

    go(g, g.axiom(), 0, max_depth, &mut memo)
}

pub fn random_sge_genotype<R: Rng + ?Sized>(g: &Pcfg, bounds: &[usize], rng: &mut R) -> StructuredGenotype<u16> {
    StructuredGenotype {
        lists: g
            .non_terminals()
            .map(|nt| {
                let rules = g.rule_count(nt);
                (0..bounds[nt.0]).map(|_| rng.random_range(0..rules) as u16).collect()
            })
            .collect(),
    }
}

/// Grows a PSGE genotype from the axiom, drawing one fresh codon per expansion
/// and following the rule that codon selects.
pub fn create_psge_genotype<R: Rng + ?Sized>(g: &Pcfg, max_depth: usize, rng: &mut R) -> StructuredGenotype<f64> {
    fn grow<R: Rng + ?Sized>(
        genotype: &mut StructuredGenotype<f64>,
        nt: NtId,
        depth: usize,
        max_depth: usize,
        g: &Pcfg,
        rng: &mut R,
    ) {
        let codon: f64 = rng.random();
        genotype.lists[nt.0].push(codon);
        let rule = crate::mapping::generate_expansion(g, nt, codon, depth, max_depth);
        for child in g.rules(nt)[rule].non_terminals() {
            grow(genotype, child, depth + 1, max_depth, g, rng);
        }
    }

    let mut genotype = StructuredGenotype::empty(g);
    grow(&mut genotype, g.axiom(), 0, max_depth, g, rng);
    genotype
}

/// Creation parameters; each variant reads only the fields it needs.
#[derive(Debug, Clone, Copy)]
pub struct InitParams<'a> {
    pub genotype_size: usize,
    pub max_depth: usize,
    /// Per-non-terminal list sizes for SGE, see [`sge_list_bounds`].
    pub sge_bounds: Option<&'a [usize]>,
}

/// A random PSGE individual, mapped but not yet evaluated.
pub fn random_psge_individual<R: Rng + ?Sized>(g: &Pcfg, max_depth: usize, rng: &mut R) -> Individual {
    let genotype = Genotype::Psge(create_psge_genotype(g, max_depth, rng));
    let mut ind = Individual::unmapped(genotype);
    crate::mapping::map_individual(&mut ind, g, max_depth, rng);
    ind
}

/// A random individual of any variant, mapped but not yet evaluated. GE and
/// PGE individuals may come out invalid.
pub fn random_individual<R: Rng + ?Sized>(
    variant: Variant,
    g: &Pcfg,
    params: InitParams<'_>,
    rng: &mut R,
) -> Individual {
    if variant == Variant::Psge {
        return random_psge_individual(g, params.max_depth, rng);
    }
    let genotype = match variant {
        Variant::Ge => Genotype::Ge(random_ge_genotype(params.genotype_size, rng)),
        Variant::Pge => Genotype::Pge(random_pge_genotype(params.genotype_size, rng)),
        Variant::Sge => {
            let owned;
            let bounds = match params.sge_bounds {
                Some(b) => b,
                None => {
                    owned = sge_list_bounds(g, params.max_depth);
                    &owned
                }
            };
            Genotype::Sge(random_sge_genotype(g, bounds, rng))
        }
        Variant::Psge => unreachable!(),
    };
    let mut ind = Individual::unmapped(genotype);
    crate::mapping::map_individual(&mut ind, g, params.max_depth, rng);
    ind
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::fixtures::{UNIFORM_EXPR, WEIGHTED_EXPR};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn variant_parsing() {
        assert_eq!("PSGE".parse::<Variant>(), Ok(Variant::Psge));
        assert!("foo".parse::<Variant>().is_err());
        for v in Variant::ALL {
            assert_eq!(v.tag().parse::<Variant>(), Ok(v));
        }
    }

    #[test]
    fn linear_genotypes_have_configured_size_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ge = random_ge_genotype(128, &mut rng);
        assert_eq!(ge.codons.len(), 128);
        let pge = random_pge_genotype(128, &mut rng);
        assert_eq!(pge.codons.len(), 128);
        assert!(pge.codons.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn sge_bounds_single_rule() {
        let g = Pcfg::parse("<s> ::= a").unwrap();
        assert_eq!(sge_list_bounds(&g, 10), vec![1]);
    }

    #[test]
    fn sge_bounds_uniform_expr() {
        // <expr> at depth d < D may branch into two <expr>; at D it must be <var>.
        // E(d) = 1 + 2 E(d+1) with E(D) = 1, so E(0) = 2^(D+1) - 1.
        // <op> is used once per binary node: O(d) = 1 + 2 O(d+1), O(D) = 0.
        // <var> is used once per leaf: V(d) = 2 V(d+1), V(D) = 1.
        let g = Pcfg::parse(UNIFORM_EXPR).unwrap();
        for d in [0usize, 1, 3, 10] {
            let b = sge_list_bounds(&g, d);
            assert_eq!(b, vec![(1 << (d + 1)) - 1, (1 << d) - 1, 1 << d], "depth {d}");
        }
    }

    #[test]
    fn psge_creation_matches_expansions() {
        let g = Pcfg::parse(WEIGHTED_EXPR).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let genotype = create_psge_genotype(&g, 10, &mut rng);
        let mut replay = genotype.clone();
        let out = crate::mapping::map_psge(&mut replay, &g, 10, &mut rng, None);
        assert_eq!(replay, genotype, "no codons appended on replay");
        for nt in g.non_terminals() {
            assert_eq!(out.counts.expansions(nt), genotype.list(nt).len());
        }
    }

    #[test]
    fn random_individuals_per_variant() {
        let g = Pcfg::parse(UNIFORM_EXPR).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = InitParams { genotype_size: 128, max_depth: 10, sge_bounds: None };
        for v in Variant::ALL {
            for _ in 0..50 {
                let ind = random_individual(v, &g, params, &mut rng);
                assert_eq!(ind.genotype.variant(), v);
                assert!(ind.genotype.in_range(&g));
                if v.is_structured() {
                    assert!(ind.valid);
                }
                match &ind.genotype {
                    Genotype::Ge(l) => assert_eq!(l.codons.len(), 128),
                    Genotype::Pge(l) => assert_eq!(l.codons.len(), 128),
                    Genotype::Sge(s) => {
                        let bounds = sge_list_bounds(&g, 10);
                        assert!(s.lists.iter().map(Vec::len).eq(bounds.iter().copied()));
                    }
                    Genotype::Psge(_) => {}
                }
            }
        }
    }

    #[test]
    fn forced_psge_individual() {
        let g = Pcfg::parse("<s> ::= a").unwrap();
        let ind = random_psge_individual(&g, 10, &mut ChaCha8Rng::seed_from_u64(5));
        let Genotype::Psge(s) = &ind.genotype else { unreachable!() };
        assert_eq!(s.lists[0].len(), 1);
        assert_eq!(ind.phenotype.as_deref(), Some("a"));
    }

    #[test]
    fn dump_format() {
        let genotype = Genotype::Psge(StructuredGenotype { lists: vec![vec![0.19, 0.46], vec![0.27]] });
        let mut ind = Individual::unmapped(genotype);
        ind.phenotype = Some("x - y".into());
        ind.fitness = 0.5;
        assert_eq!(ind.dump_line(), "psge\t0.5\tx - y\t[[0.19,0.46],[0.27]]");
    }

    #[test]
    fn learning_config_range() {
        assert!(LearningConfig::new(1.5, true).is_err());
        assert!(LearningConfig::new(0.0, false).is_ok());
        assert_eq!(LearningConfig::default().lambda, 0.01);
    }
}
