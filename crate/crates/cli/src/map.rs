//! Single-genotype mapping with a step-by-step trace.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use psge_core::mapping::map_genotype;
use psge_core::{Genotype, LinearGenotype, Pcfg, StructuredGenotype, TraceStep, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Parses a bracketed genotype: `[34,13,9]` for the linear variants,
/// `[[0.19,0.46],[0.27],[0.32]]` for the structured ones (one list per
/// non-terminal in grammar order). `[]` is an empty structured genotype.
pub fn parse_genotype(variant: Variant, text: &str, g: &Pcfg) -> Result<Genotype> {
    let text = text.trim();
    let bad = |what: &str| format!("genotype `{text}` is not {what}");
    Ok(match variant {
        Variant::Ge => Genotype::Ge(LinearGenotype {
            codons: serde_json::from_str::<Vec<u8>>(text).with_context(|| bad("a list of integers in [0, 255]"))?,
        }),
        Variant::Pge => {
            let codons: Vec<f64> = serde_json::from_str(text).with_context(|| bad("a list of numbers"))?;
            check_unit(&codons)?;
            Genotype::Pge(LinearGenotype { codons })
        }
        Variant::Sge => {
            let lists: Vec<Vec<u16>> = serde_json::from_str(text).with_context(|| bad("a list of integer lists"))?;
            let lists = pad_lists(lists, g)?;
            for (nt, list) in g.non_terminals().zip(&lists) {
                if let Some(&c) = list.iter().find(|&&c| c as usize >= g.rule_count(nt)) {
                    bail!("codon {c} is not a rule index of {}", g.name(nt));
                }
            }
            Genotype::Sge(StructuredGenotype { lists })
        }
        Variant::Psge => {
            let lists: Vec<Vec<f64>> = serde_json::from_str(text).with_context(|| bad("a list of number lists"))?;
            let lists = pad_lists(lists, g)?;
            for l in &lists {
                check_unit(l)?;
            }
            Genotype::Psge(StructuredGenotype { lists })
        }
    })
}

fn check_unit(codons: &[f64]) -> Result<()> {
    if let Some(c) = codons.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        bail!("codon {c} is outside [0, 1]");
    }
    Ok(())
}

fn pad_lists<T>(mut lists: Vec<Vec<T>>, g: &Pcfg) -> Result<Vec<Vec<T>>> {
    let n = g.num_non_terminals();
    if lists.is_empty() {
        lists.extend((0..n).map(|_| Vec::new()));
    }
    if lists.len() != n {
        bail!("expected {n} codon lists (one per non-terminal), got {}", lists.len());
    }
    Ok(lists)
}

/// Maps `genotype` and renders the trace, one rule choice per line.
pub fn trace_report(mut genotype: Genotype, g: &Pcfg, max_depth: usize, seed: u64) -> String {
    let mut steps: Vec<TraceStep> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = map_genotype(&mut genotype, g, max_depth, &mut rng, Some(&mut steps));
    let mut out = String::new();
    let width = g.non_terminals().map(|nt| g.name(nt).len() + 2).max().unwrap_or(0);
    for (i, s) in steps.iter().enumerate() {
        let rule = &g.rules(s.nt)[s.rule];
        let lhs = format!("<{}>", g.name(s.nt));
        let _ = writeln!(
            out,
            "{:>3}  depth {:>2}  {:<width$}  codon {:<8} -> rule {}: {} ::= {}{}",
            i + 1,
            s.depth,
            lhs,
            s.codon.to_string(),
            s.rule,
            lhs,
            g.render_rhs(rule),
            if s.appended { "  (appended)" } else { "" },
        );
    }
    match result {
        Ok(d) => {
            let _ = writeln!(out, "codons used: {}", d.codons_used());
            let _ = writeln!(out, "tree depth: {}", d.depth);
            if matches!(genotype, Genotype::Psge(_)) && steps.iter().any(|s| s.appended) {
                let _ = writeln!(out, "genotype after mapping: {genotype}");
            }
            let _ = writeln!(out, "phenotype: {}", d.phenotype);
        }
        Err(e) => {
            let _ = writeln!(out, "invalid: {e}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const WEIGHTED_EXPR: &str = "<expr> ::= <expr> <op> <expr> {0.37} | <var> {0.63}\n\
                        <op> ::= + {0.22} | - {0.17} | * {0.29} | / {0.32}\n\
                        <var> ::= x {0.41} | y {0.26} | 1.0 {0.33}\n";

    #[test]
    fn literals() {
        let g = Pcfg::parse(WEIGHTED_EXPR).unwrap();
        assert!(parse_genotype(Variant::Ge, "[34, 13, 9]", &g).is_ok());
        assert!(parse_genotype(Variant::Ge, "[300]", &g).is_err());
        assert!(parse_genotype(Variant::Pge, "[0.5, 1.5]", &g).is_err());
        assert!(parse_genotype(Variant::Psge, "[[0.1],[0.2]]", &g).is_err());
        assert!(parse_genotype(Variant::Sge, "[[0],[3],[3]]", &g).is_err());
        let Genotype::Psge(s) = parse_genotype(Variant::Psge, "[]", &g).unwrap() else { panic!() };
        assert_eq!(s.lists.len(), 3);
    }

    #[test]
    fn psge_trace() {
        let g = Pcfg::parse(WEIGHTED_EXPR).unwrap();
        let gt = parse_genotype(Variant::Psge, "[[0.19,0.46,0.87],[0.27],[0.32,0.64]]", &g).unwrap();
        let report = trace_report(gt, &g, 10, 0);
        assert!(report.ends_with("phenotype: x - y\n"), "{report}");
        assert_eq!(report.lines().filter(|l| l.contains("-> rule")).count(), 6);
    }
}
