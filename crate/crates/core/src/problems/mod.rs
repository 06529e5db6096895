//! Benchmark problems: phenotype interpreters, fitness functions and data.

pub mod ant;
pub mod boolean;
pub mod regression;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

pub use ant::{run_ant, AntProgram, AntWorld, Heading};
pub use boolean::{eval_boolean, BoolExpr, BoolTable};
pub use regression::{
    eval_regression, load_csv_dataset, make_builtin_dataset, regression_grammar, rrse, ArithExpr, Dataset, Split,
};

use crate::genotype::WORST_FITNESS;

pub const QUARTIC_GRAMMAR: &str = include_str!("../../grammars/quartic.bnf");
pub const PAGIE_GRAMMAR: &str = include_str!("../../grammars/pagie.bnf");
pub const BOSTON_GRAMMAR: &str = include_str!("../../grammars/boston.bnf");
pub const PARITY5_GRAMMAR: &str = include_str!("../../grammars/parity5.bnf");
pub const MULTIPLEXER11_GRAMMAR: &str = include_str!("../../grammars/multiplexer11.bnf");
pub const SANTAFE_GRAMMAR: &str = include_str!("../../grammars/santafe.bnf");
pub const SANTAFE_TRAIL: &str = include_str!("../../data/santafe.trail");

/// Column names of the Boston Housing file; `medv` is the usual target.
pub const BOSTON_COLUMNS: [&str; 14] =
    ["crim", "zn", "indus", "chas", "nox", "rm", "age", "dis", "rad", "tax", "ptratio", "b", "lstat", "medv"];

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("malformed phenotype `{phenotype}`: {reason}")]
    MalformedPhenotype { phenotype: String, reason: String },
    #[error("targets have zero variance")]
    DegenerateTargets,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NonNumericField { row: usize, column: String, value: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("target column `{0}` not found")]
    MissingTarget(String),
    #[error("bad trail: {0}")]
    BadTrail(String),
    #[error("problem `{0}` needs a dataset file")]
    DatasetRequired(String),
}

pub(crate) fn malformed(phenotype: &str, reason: impl Into<String>) -> ProblemError {
    ProblemError::MalformedPhenotype { phenotype: phenotype.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Quartic,
    Pagie,
    BostonHousing,
    Parity5,
    Multiplexer11,
    SantaFe,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 6] = [
        ProblemKind::Quartic,
        ProblemKind::Pagie,
        ProblemKind::BostonHousing,
        ProblemKind::Parity5,
        ProblemKind::Multiplexer11,
        ProblemKind::SantaFe,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ProblemKind::Quartic => "quartic",
            ProblemKind::Pagie => "pagie",
            ProblemKind::BostonHousing => "boston",
            ProblemKind::Parity5 => "parity5",
            ProblemKind::Multiplexer11 => "multiplexer11",
            ProblemKind::SantaFe => "santafe",
        }
    }

    pub fn default_grammar(self) -> &'static str {
        match self {
            ProblemKind::Quartic => QUARTIC_GRAMMAR,
            ProblemKind::Pagie => PAGIE_GRAMMAR,
            ProblemKind::BostonHousing => BOSTON_GRAMMAR,
            ProblemKind::Parity5 => PARITY5_GRAMMAR,
            ProblemKind::Multiplexer11 => MULTIPLEXER11_GRAMMAR,
            ProblemKind::SantaFe => SANTAFE_GRAMMAR,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase();
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .or(match s.as_str() {
                "boston_housing" | "bostonhousing" => Some(ProblemKind::BostonHousing),
                "multiplexer" | "mux11" | "11-multiplexer" => Some(ProblemKind::Multiplexer11),
                "parity" | "5-parity" => Some(ProblemKind::Parity5),
                "ant" | "santa_fe" => Some(ProblemKind::SantaFe),
                _ => None,
            })
            .ok_or_else(|| {
                format!("unknown problem `{s}` (expected one of {})", ProblemKind::ALL.map(|k| k.id()).join(", "))
            })
    }
}

/// A phenotype parsed for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprTree {
    Arith(ArithExpr),
    Bool(BoolExpr),
    Ant(AntProgram),
}

#[derive(Debug, Clone)]
pub enum Task {
    Regression { train: Dataset, test: Option<Dataset> },
    Boolean(BoolTable),
    Ant(AntWorld),
}

/// Anything that scores phenotypes; lower is better.
pub trait Fitness: Sync {
    fn fitness(&self, phenotype: &str) -> f64;
}

impl<F: Fn(&str) -> f64 + Sync> Fitness for F {
    fn fitness(&self, phenotype: &str) -> f64 {
        self(phenotype)
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub kind: ProblemKind,
    pub task: Task,
}

impl Problem {
    /// Every problem except Boston Housing, which needs [`Problem::boston`].
    pub fn builtin(kind: ProblemKind) -> Result<Problem, ProblemError> {
        let task = match kind {
            ProblemKind::Quartic | ProblemKind::Pagie => {
                Task::Regression { train: make_builtin_dataset(kind)?, test: None }
            }
            ProblemKind::Parity5 => Task::Boolean(BoolTable::even_parity(5)),
            ProblemKind::Multiplexer11 => Task::Boolean(BoolTable::multiplexer(3)),
            ProblemKind::SantaFe => Task::Ant(AntWorld::santa_fe()),
            ProblemKind::BostonHousing => return Err(ProblemError::DatasetRequired(kind.id().into())),
        };
        Ok(Problem { kind, task })
    }

    /// Boston Housing from a CSV file, split 90/10 with a seeded shuffle.
    pub fn boston(path: &Path, target: &str, seed: u64) -> Result<Problem, ProblemError> {
        let (train, test) = load_csv_dataset(path, target, 0.9, seed)?;
        Ok(Problem { kind: ProblemKind::BostonHousing, task: Task::Regression { train, test: Some(test) } })
    }

    /// Shipped grammar for the problem. For CSV regression whose columns differ
    /// from the shipped file, a grammar over the dataset's own columns.
    pub fn grammar_text(&self) -> String {
        match (&self.task, self.kind) {
            (Task::Regression { train, .. }, ProblemKind::BostonHousing) => {
                let shipped = &BOSTON_COLUMNS[..13];
                if train.names.iter().map(String::as_str).eq(shipped.iter().copied()) {
                    BOSTON_GRAMMAR.to_string()
                } else {
                    regression_grammar(&train.names)
                }
            }
            _ => self.kind.default_grammar().to_string(),
        }
    }

    pub fn parse_phenotype(&self, phenotype: &str) -> Result<ExprTree, ProblemError> {
        match &self.task {
            Task::Regression { train, .. } => ArithExpr::parse(phenotype, &train.names).map(ExprTree::Arith),
            Task::Boolean(t) => BoolExpr::parse(phenotype, &t.names).map(ExprTree::Bool),
            Task::Ant(_) => AntProgram::parse(phenotype).map(ExprTree::Ant),
        }
    }

    /// Training fitness; unparseable phenotypes score the sentinel.
    pub fn evaluate(&self, phenotype: &str) -> f64 {
        let Ok(tree) = self.parse_phenotype(phenotype) else {
            return WORST_FITNESS;
        };
        match (&self.task, tree) {
            (Task::Regression { train, .. }, ExprTree::Arith(e)) => eval_regression(&e, train),
            (Task::Boolean(t), ExprTree::Bool(e)) => eval_boolean(&e, t),
            (Task::Ant(w), ExprTree::Ant(p)) => run_ant(&p, w),
            _ => WORST_FITNESS,
        }
    }

    /// Fitness on the held-out split, when the problem has one.
    pub fn evaluate_test(&self, phenotype: &str) -> Option<f64> {
        let Task::Regression { train, test: Some(test) } = &self.task else {
            return None;
        };
        Some(match ArithExpr::parse(phenotype, &train.names) {
            Ok(e) => eval_regression(&e, test),
            Err(_) => WORST_FITNESS,
        })
    }
}

impl Fitness for Problem {
    fn fitness(&self, phenotype: &str) -> f64 {
        self.evaluate(phenotype)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token<'a> {
    Ident(&'a str),
    Number(f64),
    Op(char),
    LParen,
    RParen,
    Comma,
}

/// Splits a phenotype into identifiers, numbers and punctuation. Whitespace
/// between tokens is optional.
pub(crate) fn lex(phenotype: &str) -> Result<Vec<Token<'_>>, ProblemError> {
    let mut out = Vec::new();
    let b = phenotype.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        match c {
            c if c.is_ascii_whitespace() => i += 1,
            b'(' | b')' | b',' | b'+' | b'-' | b'*' | b'/' => {
                out.push(match c {
                    b'(' => Token::LParen,
                    b')' => Token::RParen,
                    b',' => Token::Comma,
                    op => Token::Op(op as char),
                });
                i += 1;
            }
            c if c.is_ascii_digit() || c == b'.' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && matches!(b[i], b'e' | b'E') {
                    let mut j = i + 1;
                    if j < b.len() && matches!(b[j], b'+' | b'-') {
                        j += 1;
                    }
                    if j < b.len() && b[j].is_ascii_digit() {
                        i = j;
                        while i < b.len() && b[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &phenotype[start..i];
                let v = text.parse().map_err(|_| malformed(phenotype, format!("bad number `{text}`")))?;
                out.push(Token::Number(v));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                out.push(Token::Ident(&phenotype[start..i]));
            }
            _ => {
                let other = phenotype[i..].chars().next().unwrap_or('?');
                return Err(malformed(phenotype, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexing() {
        assert_eq!(lex("x/1.0").unwrap(), vec![Token::Ident("x"), Token::Op('/'), Token::Number(1.0)]);
        assert_eq!(
            lex("and ( b0 , b1 )").unwrap(),
            vec![
                Token::Ident("and"),
                Token::LParen,
                Token::Ident("b0"),
                Token::Comma,
                Token::Ident("b1"),
                Token::RParen
            ]
        );
        assert_eq!(lex("2.5e-3").unwrap(), vec![Token::Number(2.5e-3)]);
        assert!(lex("x ^ 2").is_err());
    }

    #[test]
    fn problem_ids() {
        for k in ProblemKind::ALL {
            assert_eq!(k.id().parse::<ProblemKind>(), Ok(k));
        }
        assert!("nope".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn shipped_grammars_parse() {
        for k in ProblemKind::ALL {
            crate::grammar::Pcfg::parse(k.default_grammar()).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }

    #[test]
    fn boston_grammar_matches_generator() {
        let names: Vec<String> = BOSTON_COLUMNS[..13].iter().map(|s| s.to_string()).collect();
        assert_eq!(BOSTON_GRAMMAR, regression_grammar(&names));
    }

    #[test]
    fn boston_requires_dataset() {
        assert!(matches!(Problem::builtin(ProblemKind::BostonHousing), Err(ProblemError::DatasetRequired(_))));
    }
}
