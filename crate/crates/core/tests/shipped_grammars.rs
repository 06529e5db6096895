//! Every phenotype derivable from a shipped grammar must be accepted by the
//! matching problem's interpreter.

use psge_core::genotype::random_psge_individual;
use psge_core::problems::{regression_grammar, Dataset, Split, Task};
use psge_core::{Pcfg, Problem, ProblemKind, WORST_FITNESS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DERIVATIONS: usize = 10_000;

fn boston_like() -> Problem {
    let names: Vec<String> = psge_core::problems::BOSTON_COLUMNS[..13].iter().map(|s| s.to_string()).collect();
    let train = Dataset {
        inputs: (0..10).map(|i| (0..13).map(|j| (i * 13 + j) as f64).collect()).collect(),
        targets: (0..10).map(|i| i as f64).collect(),
        names,
        split: Split::Train,
    };
    Problem { kind: ProblemKind::BostonHousing, task: Task::Regression { train, test: None } }
}

fn check(problem: &Problem, g: &Pcfg, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = g.clone();
    for k in 0..DERIVATIONS {
        if k % 500 == 0 {
            // move probabilities around so rarely used rules get exercised
            for nt in g.non_terminals().collect::<Vec<_>>() {
                let w: Vec<f64> = (0..g.rule_count(nt)).map(|_| rng.random::<f64>() + 0.01).collect();
                let s: f64 = w.iter().sum();
                g.set_probabilities(nt, &w.iter().map(|x| x / s).collect::<Vec<_>>());
            }
        }
        let max_depth = rng.random_range(1..=8);
        let ind = random_psge_individual(&g, max_depth, &mut rng);
        let ph = ind.phenotype.unwrap();
        if let Err(e) = problem.parse_phenotype(&ph) {
            panic!("{}: {ph:?} rejected: {e}", problem.kind);
        }
        let f = problem.evaluate(&ph);
        assert!(f >= 0.0, "{ph}");
        if !matches!(problem.task, Task::Regression { .. }) {
            assert!(f < WORST_FITNESS, "{ph}");
        }
    }
}

#[test]
fn builtin_grammars_parse() {
    for kind in ProblemKind::ALL.into_iter().filter(|&k| k != ProblemKind::BostonHousing) {
        let p = Problem::builtin(kind).unwrap();
        let g = Pcfg::parse(&p.grammar_text()).unwrap();
        check(&p, &g, kind as u64);
    }
}

#[test]
fn boston_grammar_parses() {
    let p = boston_like();
    let g = Pcfg::parse(&p.grammar_text()).unwrap();
    check(&p, &g, 77);
}

#[test]
fn generated_regression_grammar_parses() {
    let names = vec!["alpha".to_string(), "b_2".to_string()];
    let text = regression_grammar(&names);
    let g = Pcfg::parse(&text).unwrap();
    let train = Dataset {
        names,
        inputs: vec![vec![1.0, 2.0], vec![3.0, 5.0], vec![0.5, 0.0]],
        targets: vec![1.0, 2.0, 4.0],
        split: Split::Full,
    };
    let p = Problem { kind: ProblemKind::BostonHousing, task: Task::Regression { train, test: None } };
    check(&p, &g, 5);
}
