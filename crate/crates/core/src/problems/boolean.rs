//! Boolean benchmarks: even parity and the multiplexer.
//!
//! Phenotypes use prefix call syntax: `and ( b0 , not ( b1 ) )`,
//! `if ( a0 , d1 , d0 )`. `true` and `false` are accepted as constants.

use super::{lex, malformed, ProblemError, Token};

#[derive(Debug, Clone, PartialEq)]
pub enum BoolExpr {
    Var(usize),
    Const(bool),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Not(Box<BoolExpr>),
    If(Box<BoolExpr>, Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn parse(phenotype: &str, names: &[String]) -> Result<BoolExpr, ProblemError> {
        let tokens = lex(phenotype)?;
        let mut pos = 0;
        let e = parse_node(&tokens, &mut pos, names, phenotype)?;
        if pos != tokens.len() {
            return Err(malformed(phenotype, "trailing tokens"));
        }
        Ok(e)
    }

    /// Evaluates with input `i` read from bit `i` of `bits`.
    pub fn eval(&self, bits: u32) -> bool {
        match self {
            BoolExpr::Var(i) => bits >> i & 1 == 1,
            BoolExpr::Const(b) => *b,
            BoolExpr::And(a, b) => a.eval(bits) && b.eval(bits),
            BoolExpr::Or(a, b) => a.eval(bits) || b.eval(bits),
            BoolExpr::Not(a) => !a.eval(bits),
            BoolExpr::If(c, t, e) => {
                if c.eval(bits) {
                    t.eval(bits)
                } else {
                    e.eval(bits)
                }
            }
        }
    }
}

fn parse_node(tokens: &[Token], pos: &mut usize, names: &[String], src: &str) -> Result<BoolExpr, ProblemError> {
    let Some(Token::Ident(name)) = tokens.get(*pos) else {
        return Err(malformed(src, "expected an identifier"));
    };
    let name: &str = name;
    *pos += 1;
    let arity = match name {
        "and" | "or" => 2,
        "not" => 1,
        "if" => 3,
        "true" => return Ok(BoolExpr::Const(true)),
        "false" => return Ok(BoolExpr::Const(false)),
        var => {
            return names
                .iter()
                .position(|n| n == var)
                .map(BoolExpr::Var)
                .ok_or_else(|| malformed(src, format!("unknown input `{var}`")))
        }
    };
    expect(tokens, pos, &Token::LParen, src)?;
    let mut args = Vec::with_capacity(arity);
    for k in 0..arity {
        if k > 0 {
            expect(tokens, pos, &Token::Comma, src)?;
        }
        args.push(Box::new(parse_node(tokens, pos, names, src)?));
    }
    expect(tokens, pos, &Token::RParen, src)?;
    let mut args = args.into_iter();
    let mut next = || args.next().expect("arity checked");
    Ok(match name {
        "and" => BoolExpr::And(next(), next()),
        "or" => BoolExpr::Or(next(), next()),
        "not" => BoolExpr::Not(next()),
        _ => BoolExpr::If(next(), next(), next()),
    })
}

fn expect(tokens: &[Token], pos: &mut usize, want: &Token, src: &str) -> Result<(), ProblemError> {
    if tokens.get(*pos) == Some(want) {
        *pos += 1;
        Ok(())
    } else {
        Err(malformed(src, format!("expected {want:?}")))
    }
}

/// Exhaustive truth table; case `k` sets input `i` to bit `i` of `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoolTable {
    pub names: Vec<String>,
    pub cases: Vec<(u32, bool)>,
    /// Bit `k` of `columns[i]` is input `i` in case `k`.
    columns: Vec<Vec<u64>>,
    expected: Vec<u64>,
}

fn pack(cases: &[(u32, bool)], bit: impl Fn(u32, bool) -> bool) -> Vec<u64> {
    let mut words = vec![0u64; cases.len().div_ceil(64)];
    for (k, &(bits, want)) in cases.iter().enumerate() {
        if bit(bits, want) {
            words[k / 64] |= 1 << (k % 64);
        }
    }
    words
}

impl BoolTable {
    pub fn new(names: Vec<String>, cases: Vec<(u32, bool)>) -> BoolTable {
        let columns = (0..names.len()).map(|i| pack(&cases, |bits, _| bits >> i & 1 == 1)).collect();
        let expected = pack(&cases, |_, want| want);
        BoolTable { names, cases, columns, expected }
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    /// True when an even number of the `n` inputs `b0..` are set.
    pub fn even_parity(n: usize) -> BoolTable {
        BoolTable::new(
            (0..n).map(|i| format!("b{i}")).collect(),
            (0..1u32 << n).map(|k| (k, k.count_ones() % 2 == 0)).collect(),
        )
    }

    /// Multiplexer with `address_bits` address lines `a0..` (a0 least
    /// significant) selecting one of the data lines `d0..`.
    pub fn multiplexer(address_bits: usize) -> BoolTable {
        let data = 1usize << address_bits;
        let names =
            (0..address_bits).map(|i| format!("a{i}")).chain((0..data).map(|i| format!("d{i}"))).collect::<Vec<_>>();
        let n = names.len();
        let cases = (0..1u32 << n)
            .map(|k| {
                let addr = (k & ((1 << address_bits) - 1)) as usize;
                (k, k >> (address_bits + addr) & 1 == 1)
            })
            .collect();
        BoolTable::new(names, cases)
    }

    fn eval_words(&self, e: &BoolExpr) -> Vec<u64> {
        let n = self.expected.len();
        match e {
            BoolExpr::Var(i) => self.columns[*i].clone(),
            BoolExpr::Const(b) => vec![if *b { !0 } else { 0 }; n],
            BoolExpr::And(a, b) => zip_with(self.eval_words(a), &self.eval_words(b), |x, y| x & y),
            BoolExpr::Or(a, b) => zip_with(self.eval_words(a), &self.eval_words(b), |x, y| x | y),
            BoolExpr::Not(a) => zip_with(self.eval_words(a), &[], |x, _| !x),
            BoolExpr::If(c, t, f) => {
                let c = self.eval_words(c);
                let t = self.eval_words(t);
                let f = self.eval_words(f);
                c.iter().zip(t.iter().zip(&f)).map(|(&c, (&t, &f))| (c & t) | (!c & f)).collect()
            }
        }
    }
}

fn zip_with(mut a: Vec<u64>, b: &[u64], op: impl Fn(u64, u64) -> u64) -> Vec<u64> {
    for (i, x) in a.iter_mut().enumerate() {
        *x = op(*x, b.get(i).copied().unwrap_or(0));
    }
    a
}

/// Number of cases the expression gets wrong.
pub fn eval_boolean(tree: &BoolExpr, table: &BoolTable) -> f64 {
    let got = table.eval_words(tree);
    let n = table.cases.len();
    let wrong: u32 = got
        .iter()
        .zip(&table.expected)
        .enumerate()
        .map(|(w, (&g, &e))| {
            let live = if (w + 1) * 64 <= n { !0 } else { (1u64 << (n - w * 64)) - 1 };
            ((g ^ e) & live).count_ones()
        })
        .sum();
    wrong as f64
}
