//! Symbolic regression: arithmetic phenotypes, datasets and RRSE fitness.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{lex, malformed, ProblemError, ProblemKind, Token};
use crate::genotype::WORST_FITNESS;

/// Divisors at or below this magnitude make the quotient 1.0.
pub const PROTECTED_DIVISION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArithExpr {
    Var(usize),
    Const(f64),
    Bin(BinOp, Box<ArithExpr>, Box<ArithExpr>),
}

impl ArithExpr {
    /// Parses infix arithmetic with the usual precedence (`*` `/` over `+` `-`,
    /// all left associative). Identifiers resolve against `names`.
    pub fn parse(phenotype: &str, names: &[String]) -> Result<ArithExpr, ProblemError> {
        let tokens = lex(phenotype)?;
        let mut p = Parser { tokens: &tokens, pos: 0, names, src: phenotype };
        let e = p.expr()?;
        if p.pos != tokens.len() {
            return Err(malformed(phenotype, "trailing tokens"));
        }
        Ok(e)
    }

    pub fn eval(&self, inputs: &[f64]) -> f64 {
        match self {
            ArithExpr::Var(i) => inputs[*i],
            ArithExpr::Const(c) => *c,
            ArithExpr::Bin(op, a, b) => {
                let (a, b) = (a.eval(inputs), b.eval(inputs));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => protected_div(a, b),
                }
            }
        }
    }
}

pub fn protected_div(a: f64, b: f64) -> f64 {
    if b.abs() <= PROTECTED_DIVISION_EPS {
        1.0
    } else {
        a / b
    }
}

struct Parser<'a> {
    tokens: &'a [Token<'a>],
    pos: usize,
    names: &'a [String],
    src: &'a str,
}

impl Parser<'_> {
    fn expr(&mut self) -> Result<ArithExpr, ProblemError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.tokens.get(self.pos) {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ArithExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ArithExpr, ProblemError> {
        let mut lhs = self.factor()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.tokens.get(self.pos) {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = ArithExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ArithExpr, ProblemError> {
        let tok = self.tokens.get(self.pos).ok_or_else(|| malformed(self.src, "unexpected end"))?;
        self.pos += 1;
        match tok {
            Token::Number(v) => Ok(ArithExpr::Const(*v)),
            Token::Ident(name) => self
                .names
                .iter()
                .position(|n| n == name)
                .map(ArithExpr::Var)
                .ok_or_else(|| malformed(self.src, format!("unknown variable `{name}`"))),
            Token::LParen => {
                let e = self.expr()?;
                match self.tokens.get(self.pos) {
                    Some(Token::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(malformed(self.src, "missing `)`")),
                }
            }
            other => Err(malformed(self.src, format!("unexpected token {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Full,
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Input variable names, in column order.
    pub names: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Root relative squared error: `sqrt(Σ(p - t)² / Σ(t - mean(t))²)`.
pub fn rrse(predictions: &[f64], targets: &[f64]) -> Result<f64, ProblemError> {
    assert_eq!(predictions.len(), targets.len(), "one prediction per target");
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let sst: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    if sst == 0.0 || !sst.is_finite() {
        return Err(ProblemError::DegenerateTargets);
    }
    let sse: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / sst).sqrt())
}

/// RRSE of `tree` on `data`; non-finite predictions or errors give the sentinel.
pub fn eval_regression(tree: &ArithExpr, data: &Dataset) -> f64 {
    let predictions: Vec<f64> = data.inputs.iter().map(|x| tree.eval(x)).collect();
    if predictions.iter().any(|p| !p.is_finite()) {
        return WORST_FITNESS;
    }
    match rrse(&predictions, &data.targets) {
        Ok(v) if v.is_finite() => v,
        _ => WORST_FITNESS,
    }
}

pub fn quartic(x: f64) -> f64 {
    x + x * x + x * x * x + x * x * x * x
}

pub fn pagie(x: f64, y: f64) -> f64 {
    1.0 / (1.0 + x.powi(-4)) + 1.0 / (1.0 + y.powi(-4))
}

/// Fit cases of the synthetic regression problems.
pub fn make_builtin_dataset(kind: ProblemKind) -> Result<Dataset, ProblemError> {
    match kind {
        ProblemKind::Quartic => {
            let xs: Vec<f64> = (-10..=10).map(|i| i as f64 / 10.0).collect();
            Ok(Dataset {
                names: vec!["x".into()],
                targets: xs.iter().map(|&x| quartic(x)).collect(),
                inputs: xs.into_iter().map(|x| vec![x]).collect(),
                split: Split::Full,
            })
        }
        ProblemKind::Pagie => {
            let axis: Vec<f64> = (0..26).map(|i| -5.0 + 0.4 * i as f64).collect();
            let mut inputs = Vec::with_capacity(axis.len() * axis.len());
            for &x in &axis {
                for &y in &axis {
                    inputs.push(vec![x, y]);
                }
            }
            Ok(Dataset {
                names: vec!["x".into(), "y".into()],
                targets: inputs.iter().map(|v| pagie(v[0], v[1])).collect(),
                inputs,
                split: Split::Full,
            })
        }
        other => Err(ProblemError::DatasetRequired(other.id().into())),
    }
}

/// Reads a numeric CSV with a header row and splits it after a seeded shuffle:
/// `ceil(ratio * n)` rows for training, the rest for testing.
pub fn load_csv_dataset(path: &Path, target: &str, ratio: f64, seed: u64) -> Result<(Dataset, Dataset), ProblemError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target_idx =
        headers.iter().position(|h| h == target).ok_or_else(|| ProblemError::MissingTarget(target.to_string()))?;
    let names: Vec<String> =
        headers.iter().enumerate().filter(|(i, _)| *i != target_idx).map(|(_, h)| h.clone()).collect();

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let mut inputs = Vec::with_capacity(names.len());
        let mut y = 0.0;
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| ProblemError::NonNumericField {
                row: r + 1,
                column: headers.get(i).cloned().unwrap_or_default(),
                value: field.to_string(),
            })?;
            if i == target_idx {
                y = v;
            } else {
                inputs.push(v);
            }
        }
        rows.push((inputs, y));
    }
    if rows.is_empty() {
        return Err(ProblemError::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    let n_train = ((ratio * rows.len() as f64).ceil() as usize).min(rows.len());
    let test_rows = rows.split_off(n_train);
    let make = |rows: Vec<(Vec<f64>, f64)>, split| {
        let (inputs, targets) = rows.into_iter().unzip();
        Dataset { names: names.clone(), inputs, targets, split }
    };
    Ok((make(rows, Split::Train), make(test_rows, Split::Test)))
}

/// A regression grammar over the given input names, shaped like the shipped
/// quartic grammar.
pub fn regression_grammar(names: &[String]) -> String {
    let mut vars: Vec<&str> = names.iter().map(String::as_str).collect();
    vars.push("1.0");
    format!(
        "<expr> ::= <expr> <op> <expr> | ( <expr> <op> <expr> ) | <var>\n<op> ::= + | - | * | /\n<var> ::= {}\n",
        vars.join(" | ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_example_phenotypes() {
        let vars = names(&["x", "y"]);
        assert_eq!(
            ArithExpr::parse("x / 1.0", &vars).unwrap(),
            ArithExpr::Bin(BinOp::Div, Box::new(ArithExpr::Var(0)), Box::new(ArithExpr::Const(1.0)))
        );
        assert_eq!(
            ArithExpr::parse("x - y", &vars).unwrap(),
            ArithExpr::Bin(BinOp::Sub, Box::new(ArithExpr::Var(0)), Box::new(ArithExpr::Var(1)))
        );
        assert_eq!(ArithExpr::parse("x", &vars).unwrap(), ArithExpr::Var(0));
    }

    #[test]
    fn precedence_and_associativity() {
        let vars = names(&["x"]);
        let e = ArithExpr::parse("1.0 - x * x - ( 1.0 + x ) / x", &vars).unwrap();
        let x: f64 = 3.0;
        assert_eq!(e.eval(&[x]), 1.0 - x * x - (1.0 + x) / x);
    }

    #[test]
    fn malformed_phenotypes() {
        let vars = names(&["x"]);
        for bad in ["x +", "( x", "x x", "z", ""] {
            assert!(ArithExpr::parse(bad, &vars).is_err(), "{bad}");
        }
    }

    #[test]
    fn rrse_examples() {
        let t = [1.0, 2.0, 4.0];
        assert_eq!(rrse(&t, &t).unwrap(), 0.0);
        let mean = t.iter().sum::<f64>() / 3.0;
        assert_eq!(rrse(&[mean; 3], &t).unwrap(), 1.0);
        assert_eq!(rrse(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(rrse(&[1.0, 2.0], &[3.0, 3.0]), Err(ProblemError::DegenerateTargets)));
    }

    #[test]
    fn builtin_datasets() {
        let q = make_builtin_dataset(ProblemKind::Quartic).unwrap();
        assert_eq!(q.len(), 21);
        assert_eq!(q.inputs[0], vec![-1.0]);
        assert_eq!(q.inputs[20], vec![1.0]);
        assert_eq!(q.targets[20], 4.0);
        assert_eq!(q.targets[10], 0.0);

        let p = make_builtin_dataset(ProblemKind::Pagie).unwrap();
        assert_eq!(p.len(), 676);
        assert_eq!(p.inputs[0], vec![-5.0, -5.0]);
        assert!((p.inputs[675][0] - 5.0).abs() < 1e-12);
        assert_eq!(pagie(1.0, 1.0), 1.0);
    }

    #[test]
    fn regression_fitness() {
        let q = make_builtin_dataset(ProblemKind::Quartic).unwrap();
        let perfect = ArithExpr::parse("x * x * x * x + x * x * x + x * x + x", &q.names).unwrap();
        assert!(eval_regression(&perfect, &q) < 1e-12);

        // constant 1.0 checked against a direct evaluation
        let one = ArithExpr::parse("1.0", &q.names).unwrap();
        let mean = q.targets.iter().sum::<f64>() / 21.0;
        let sse: f64 = q.targets.iter().map(|t| (1.0 - t).powi(2)).sum();
        let sst: f64 = q.targets.iter().map(|t| (t - mean).powi(2)).sum();
        assert!((eval_regression(&one, &q) - (sse / sst).sqrt()).abs() < 1e-12);

        let div0 = ArithExpr::parse("x / ( x - x )", &q.names).unwrap();
        assert!(eval_regression(&div0, &q).is_finite());
        assert_eq!(div0.eval(&[0.5]), 1.0);
    }

    #[test]
    fn csv_split() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,y").unwrap();
        for i in 0..10 {
            writeln!(f, "{i},{},{}", i * 2, i * 3).unwrap();
        }
        f.flush().unwrap();
        let (train, test) = load_csv_dataset(f.path(), "y", 0.9, 7).unwrap();
        assert_eq!((train.len(), test.len()), (9, 1));
        assert_eq!(train.names, names(&["a", "b"]));
        let again = load_csv_dataset(f.path(), "y", 0.9, 7).unwrap();
        assert_eq!(again.0, train);
        let mut all: Vec<f64> = train.targets.iter().chain(&test.targets).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| (i * 3) as f64).collect::<Vec<_>>());
        assert!(matches!(load_csv_dataset(f.path(), "zz", 0.9, 7), Err(ProblemError::MissingTarget(_))));
    }

    #[test]
    fn csv_errors() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,y\n1,2\nfoo,3").unwrap();
        f.flush().unwrap();
        assert!(matches!(load_csv_dataset(f.path(), "y", 0.9, 0), Err(ProblemError::NonNumericField { row: 2, .. })));
        let mut e = tempfile::NamedTempFile::new().unwrap();
        writeln!(e, "a,y").unwrap();
        e.flush().unwrap();
        assert!(matches!(load_csv_dataset(e.path(), "y", 0.9, 0), Err(ProblemError::EmptyDataset)));
        assert!(matches!(
            load_csv_dataset(Path::new("/nonexistent/file.csv"), "y", 0.9, 0),
            Err(ProblemError::Csv(_) | ProblemError::Io(_))
        ));
    }

    #[test]
    fn boston_sized_split() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{}", super::super::BOSTON_COLUMNS.join(",")).unwrap();
        for i in 0..506 {
            let row: Vec<String> = (0..14).map(|c| format!("{}", (i * 7 + c) % 31)).collect();
            writeln!(f, "{}", row.join(",")).unwrap();
        }
        f.flush().unwrap();
        let (train, test) = load_csv_dataset(f.path(), "medv", 0.9, 1).unwrap();
        assert_eq!((train.len(), test.len()), (456, 50));
        assert_eq!(train.names.len(), 13);
    }
}
