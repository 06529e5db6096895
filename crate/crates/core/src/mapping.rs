//! Genotype to phenotype mapping for the four representations.
//!
//! All mappers expand the leftmost non-terminal first. The root expansion is at
//! depth 0 and every child sits one level deeper. Once a non-terminal is
//! expanded at or beyond the depth limit only its non-recursive rules are
//! eligible, which bounds the tree depth by `max_depth + |NT|`.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::genotype::{ExpansionCounts, Genotype, Individual, LinearGenotype, StructuredGenotype, WORST_FITNESS};
use crate::grammar::{NtId, Pcfg, Production, Symbol};

/// Linear genotypes ran out of codons with non-terminals left to expand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("genotype exhausted after {codons_used} codons")]
pub struct Exhausted {
    pub codons_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Codon {
    Real(f64),
    Int(u64),
}

impl fmt::Display for Codon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Codon::Real(x) => write!(f, "{x}"),
            Codon::Int(x) => write!(f, "{x}"),
        }
    }
}

/// One rule choice of a derivation, in expansion order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub nt: NtId,
    pub depth: usize,
    pub codon: Codon,
    pub rule: usize,
    /// The codon was created during mapping because the list was exhausted.
    pub appended: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    /// Terminals joined by single spaces.
    pub phenotype: String,
    pub counts: ExpansionCounts,
    /// Codons read from each non-terminal list (structured variants), or a
    /// single entry with the linear cursor position.
    pub consumed: Vec<usize>,
    /// Deepest level at which a non-terminal was expanded.
    pub depth: usize,
}

impl Derivation {
    pub fn codons_used(&self) -> usize {
        self.consumed.iter().sum()
    }
}

/// Picks the rule of `nt` whose cumulative probability interval holds `codon`.
///
/// At or beyond `max_depth` only non-recursive rules are considered and their
/// probabilities are rescaled to sum to one. A codon that lands past the last
/// cumulative sum (rounding near 1.0) selects the last rule with nonzero mass.
pub fn generate_expansion(g: &Pcfg, nt: NtId, codon: f64, depth: usize, max_depth: usize) -> usize {
    let rules = g.rules(nt);
    if depth >= max_depth {
        let total: f64 = g.non_recursive(nt).map(|p| p.probability).sum();
        if total > 0.0 {
            select_cumulative(g.non_recursive(nt), codon, |p| p.probability / total)
        } else {
            // every non-recursive rule has lost all mass to learning
            let n = g.non_recursive(nt).count() as f64;
            select_cumulative(g.non_recursive(nt), codon, |_| 1.0 / n)
        }
    } else {
        select_cumulative(rules.iter(), codon, |p| p.probability)
    }
}

fn select_cumulative<'a>(
    prods: impl Iterator<Item = &'a Production>,
    codon: f64,
    weight: impl Fn(&Production) -> f64,
) -> usize {
    let mut cum = 0.0;
    let mut fallback = None;
    let mut last = 0;
    for p in prods {
        let w = weight(p);
        cum += w;
        if codon <= cum {
            return p.index;
        }
        if w > 0.0 {
            fallback = Some(p.index);
        }
        last = p.index;
    }
    fallback.unwrap_or(last)
}

trait CodonSource {
    /// Chooses the rule for `nt`, or `None` when the genotype is exhausted.
    fn choose(&mut self, g: &Pcfg, nt: NtId, depth: usize) -> Option<(usize, Codon, bool)>;
}

struct Deriver<'t> {
    phenotype: String,
    counts: ExpansionCounts,
    depth: usize,
    trace: Option<&'t mut Vec<TraceStep>>,
}

impl<'t> Deriver<'t> {
    fn new(g: &Pcfg, trace: Option<&'t mut Vec<TraceStep>>) -> Self {
        Deriver { phenotype: String::new(), counts: ExpansionCounts::zeros(g), depth: 0, trace }
    }

    fn expand<S: CodonSource>(&mut self, g: &Pcfg, nt: NtId, depth: usize, src: &mut S) -> Result<(), ()> {
        let (rule, codon, appended) = src.choose(g, nt, depth).ok_or(())?;
        self.counts.record(nt, rule);
        self.depth = self.depth.max(depth);
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(TraceStep { nt, depth, codon, rule, appended });
        }
        for sym in &g.rules(nt)[rule].rhs {
            match sym {
                Symbol::Terminal(t) => {
                    if !self.phenotype.is_empty() {
                        self.phenotype.push(' ');
                    }
                    self.phenotype.push_str(t);
                }
                Symbol::NonTerminal(child) => self.expand(g, *child, depth + 1, src)?,
            }
        }
        Ok(())
    }

    fn finish(self, consumed: Vec<usize>) -> Derivation {
        Derivation { phenotype: self.phenotype, counts: self.counts, consumed, depth: self.depth }
    }
}

struct PsgeSource<'a, R: ?Sized> {
    genotype: &'a mut StructuredGenotype<f64>,
    positions: Vec<usize>,
    max_depth: usize,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> CodonSource for PsgeSource<'_, R> {
    fn choose(&mut self, g: &Pcfg, nt: NtId, depth: usize) -> Option<(usize, Codon, bool)> {
        let pos = self.positions[nt.0];
        let list = &mut self.genotype.lists[nt.0];
        let appended = pos >= list.len();
        if appended {
            list.push(self.rng.random::<f64>());
        }
        let codon = list[pos];
        self.positions[nt.0] += 1;
        Some((generate_expansion(g, nt, codon, depth, self.max_depth), Codon::Real(codon), appended))
    }
}

struct SgeSource<'a> {
    genotype: &'a StructuredGenotype<u16>,
    positions: Vec<usize>,
    max_depth: usize,
}

impl CodonSource for SgeSource<'_> {
    fn choose(&mut self, g: &Pcfg, nt: NtId, depth: usize) -> Option<(usize, Codon, bool)> {
        let pos = self.positions[nt.0];
        let codon = *self.genotype.lists[nt.0].get(pos)? as usize;
        self.positions[nt.0] += 1;
        let rule = if depth >= self.max_depth {
            let n = g.non_recursive(nt).count();
            g.non_recursive(nt).nth(codon % n).map(|p| p.index)?
        } else {
            codon % g.rule_count(nt)
        };
        Some((rule, Codon::Int(codon as u64), false))
    }
}

struct GeSource<'a> {
    codons: &'a [u8],
    cursor: usize,
}

impl CodonSource for GeSource<'_> {
    fn choose(&mut self, g: &Pcfg, nt: NtId, _depth: usize) -> Option<(usize, Codon, bool)> {
        let codon = *self.codons.get(self.cursor)? as usize;
        self.cursor += 1;
        Some((codon % g.rule_count(nt), Codon::Int(codon as u64), false))
    }
}

struct PgeSource<'a> {
    codons: &'a [f64],
    cursor: usize,
    max_depth: usize,
}

impl CodonSource for PgeSource<'_> {
    fn choose(&mut self, g: &Pcfg, nt: NtId, depth: usize) -> Option<(usize, Codon, bool)> {
        let codon = *self.codons.get(self.cursor)?;
        self.cursor += 1;
        Some((generate_expansion(g, nt, codon, depth, self.max_depth), Codon::Real(codon), false))
    }
}

/// Maps a PSGE genotype, appending fresh uniform codons to any list that runs
/// out. Always succeeds.
pub fn map_psge<R: Rng + ?Sized>(
    genotype: &mut StructuredGenotype<f64>,
    g: &Pcfg,
    max_depth: usize,
    rng: &mut R,
    trace: Option<&mut Vec<TraceStep>>,
) -> Derivation {
    let mut src = PsgeSource { genotype, positions: vec![0; g.num_non_terminals()], max_depth, rng };
    let mut d = Deriver::new(g, trace);
    d.expand(g, g.axiom(), 0, &mut src).expect("structured real genotypes never exhaust");
    d.finish(src.positions)
}

/// Maps an SGE genotype. Lists sized by [`crate::genotype::sge_list_bounds`]
/// never run out; a shorter genotype yields [`Exhausted`].
pub fn map_sge(
    genotype: &StructuredGenotype<u16>,
    g: &Pcfg,
    max_depth: usize,
    trace: Option<&mut Vec<TraceStep>>,
) -> Result<Derivation, Exhausted> {
    let mut src = SgeSource { genotype, positions: vec![0; g.num_non_terminals()], max_depth };
    let mut d = Deriver::new(g, trace);
    match d.expand(g, g.axiom(), 0, &mut src) {
        Ok(()) => Ok(d.finish(src.positions)),
        Err(()) => Err(Exhausted { codons_used: src.positions.iter().sum() }),
    }
}

/// Classic modulo mapping without wrapping.
pub fn map_ge(
    genotype: &LinearGenotype<u8>,
    g: &Pcfg,
    trace: Option<&mut Vec<TraceStep>>,
) -> Result<Derivation, Exhausted> {
    let mut src = GeSource { codons: &genotype.codons, cursor: 0 };
    let mut d = Deriver::new(g, trace);
    match d.expand(g, g.axiom(), 0, &mut src) {
        Ok(()) => Ok(d.finish(vec![src.cursor])),
        Err(()) => Err(Exhausted { codons_used: src.cursor }),
    }
}

/// Cumulative-interval mapping over a linear real genotype, with the same depth
/// fallback as PSGE and no wrapping.
pub fn map_pge(
    genotype: &LinearGenotype<f64>,
    g: &Pcfg,
    max_depth: usize,
    trace: Option<&mut Vec<TraceStep>>,
) -> Result<Derivation, Exhausted> {
    let mut src = PgeSource { codons: &genotype.codons, cursor: 0, max_depth };
    let mut d = Deriver::new(g, trace);
    match d.expand(g, g.axiom(), 0, &mut src) {
        Ok(()) => Ok(d.finish(vec![src.cursor])),
        Err(()) => Err(Exhausted { codons_used: src.cursor }),
    }
}

/// Maps `genotype` with the mapper of its variant. `max_depth` is ignored by GE.
pub fn map_genotype<R: Rng + ?Sized>(
    genotype: &mut Genotype,
    g: &Pcfg,
    max_depth: usize,
    rng: &mut R,
    trace: Option<&mut Vec<TraceStep>>,
) -> Result<Derivation, Exhausted> {
    match genotype {
        Genotype::Ge(l) => map_ge(l, g, trace),
        Genotype::Pge(l) => map_pge(l, g, max_depth, trace),
        Genotype::Sge(s) => map_sge(s, g, max_depth, trace),
        Genotype::Psge(s) => Ok(map_psge(s, g, max_depth, rng, trace)),
    }
}

/// Re-derives phenotype, counts and validity of `ind` under `g`. Fitness is
/// reset to the sentinel and must be evaluated afterwards.
pub fn map_individual<R: Rng + ?Sized>(ind: &mut Individual, g: &Pcfg, max_depth: usize, rng: &mut R) {
    match map_genotype(&mut ind.genotype, g, max_depth, rng, None) {
        Ok(d) => {
            ind.phenotype = Some(d.phenotype);
            ind.counts = d.counts;
            ind.consumed = d.consumed;
            ind.depth = d.depth;
            ind.valid = true;
        }
        Err(_) => {
            ind.phenotype = None;
            ind.counts = ExpansionCounts::zeros(g);
            ind.consumed = Vec::new();
            ind.depth = 0;
            ind.valid = false;
        }
    }
    ind.fitness = WORST_FITNESS;
    ind.evaluated = false;
}
