//! Probabilistic context-free grammars.
//!
//! Grammars are read from a small BNF dialect:
//!
//! ```text
//! # comment
//! <expr> ::= <expr> <op> <expr> {0.37} | <var> {0.63}
//! <op>   ::= + | - | * | /
//!        | '%'
//! ```
//!
//! Non-terminals are wrapped in angle brackets, terminals are bare tokens or
//! single-quoted strings and every alternative may carry a trailing `{p}`
//! weight. Groups without weights get a uniform distribution. The first
//! declared non-terminal is the axiom and file order fixes rule indices.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Slack allowed on the sum of hand-written probabilities before rescaling.
pub const PROBABILITY_INPUT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("undeclared non-terminal <{0}>")]
    UndeclaredSymbol(String),
    #[error("non-terminal <{0}> has no non-recursive production")]
    NoNonRecursiveRule(String),
    #[error("bad probabilities for <{nt}>: {reason}")]
    BadProbabilities { nt: String, reason: String },
    #[error("probabilities of <{0}> sum to zero")]
    DegenerateDistribution(String),
}

/// Index of a non-terminal inside its grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NtId(pub usize);

impl NtId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Terminal(String),
    NonTerminal(NtId),
}

impl Symbol {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Symbol::Terminal(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Production {
    pub lhs: NtId,
    pub rhs: Vec<Symbol>,
    pub probability: f64,
    pub recursive: bool,
    /// Ordinal within the lhs group.
    pub index: usize,
}

impl Production {
    pub fn non_terminals(&self) -> impl Iterator<Item = NtId> + '_ {
        self.rhs.iter().filter_map(|s| match s {
            Symbol::NonTerminal(id) => Some(*id),
            Symbol::Terminal(_) => None,
        })
    }
}

/// A validated probabilistic context-free grammar. Non-terminal 0 is the axiom.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcfg {
    names: Vec<String>,
    terminals: BTreeSet<String>,
    rules: Vec<Vec<Production>>,
}

impl Pcfg {
    pub fn parse(text: &str) -> Result<Pcfg, GrammarError> {
        let groups = parse_groups(text)?;
        build(groups)
    }

    pub fn axiom(&self) -> NtId {
        NtId(0)
    }

    pub fn num_non_terminals(&self) -> usize {
        self.names.len()
    }

    pub fn non_terminals(&self) -> impl Iterator<Item = NtId> {
        (0..self.names.len()).map(NtId)
    }

    pub fn terminals(&self) -> &BTreeSet<String> {
        &self.terminals
    }

    pub fn name(&self, nt: NtId) -> &str {
        &self.names[nt.0]
    }

    pub fn lookup(&self, name: &str) -> Option<NtId> {
        let bare = name.trim_start_matches('<').trim_end_matches('>');
        self.names.iter().position(|n| n == bare).map(NtId)
    }

    pub fn rules(&self, nt: NtId) -> &[Production] {
        &self.rules[nt.0]
    }

    pub fn rule_count(&self, nt: NtId) -> usize {
        self.rules[nt.0].len()
    }

    pub fn non_recursive(&self, nt: NtId) -> impl Iterator<Item = &Production> {
        self.rules[nt.0].iter().filter(|p| !p.recursive)
    }

    pub fn probabilities(&self, nt: NtId) -> Vec<f64> {
        self.rules[nt.0].iter().map(|p| p.probability).collect()
    }

    /// Overwrites the raw probabilities of `nt` without renormalizing.
    pub fn set_probabilities(&mut self, nt: NtId, probs: &[f64]) {
        assert_eq!(probs.len(), self.rules[nt.0].len(), "one probability per rule");
        for (rule, &p) in self.rules[nt.0].iter_mut().zip(probs) {
            rule.probability = p;
        }
    }

    /// Recomputes every recursion flag from the non-terminal reachability graph.
    ///
    /// A production is recursive when its lhs is reachable (reflexively and
    /// transitively) from one of its rhs non-terminals.
    pub fn analyze_recursion(mut self) -> Pcfg {
        let reach = self.reachability();
        for group in &mut self.rules {
            for prod in group.iter_mut() {
                let lhs = prod.lhs.0;
                prod.recursive =
                    prod.rhs.iter().any(|s| matches!(s, Symbol::NonTerminal(b) if b.0 == lhs || reach[b.0][lhs]));
            }
        }
        self
    }

    /// `reach[a][b]` is true when `b` appears in some sentential form derived
    /// from `a` in one or more steps.
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.names.len();
        let mut reach = vec![vec![false; n]; n];
        for (a, row) in reach.iter_mut().enumerate() {
            let mut stack: Vec<usize> = Vec::new();
            for prod in &self.rules[a] {
                stack.extend(prod.non_terminals().map(|b| b.0));
            }
            while let Some(b) = stack.pop() {
                if row[b] {
                    continue;
                }
                row[b] = true;
                for prod in &self.rules[b] {
                    stack.extend(prod.non_terminals().map(|c| c.0).filter(|&c| !row[c]));
                }
            }
        }
        reach
    }

    /// Returns a copy with the probabilities of `nt` divided by their sum.
    pub fn normalize(&self, nt: NtId) -> Result<Pcfg, GrammarError> {
        let mut g = self.clone();
        g.normalize_in_place(nt)?;
        Ok(g)
    }

    pub fn normalize_in_place(&mut self, nt: NtId) -> Result<(), GrammarError> {
        let group = &mut self.rules[nt.0];
        if group.iter().any(|p| p.probability < 0.0 || !p.probability.is_finite()) {
            return Err(GrammarError::BadProbabilities {
                nt: self.names[nt.0].clone(),
                reason: "negative or non-finite probability".into(),
            });
        }
        let sum: f64 = group.iter().map(|p| p.probability).sum();
        if sum <= 0.0 {
            return Err(GrammarError::DegenerateDistribution(self.names[nt.0].clone()));
        }
        for p in group.iter_mut() {
            p.probability /= sum;
        }
        Ok(())
    }

    /// Renders one rhs as text, terminals separated by single spaces.
    pub fn render_rhs(&self, prod: &Production) -> String {
        prod.rhs
            .iter()
            .map(|s| match s {
                Symbol::Terminal(t) => quote_terminal(t),
                Symbol::NonTerminal(id) => format!("<{}>", self.names[id.0]),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl FromStr for Pcfg {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pcfg::parse(s)
    }
}

/// Serializes back into the input dialect with explicit weights.
impl fmt::Display for Pcfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, group) in self.rules.iter().enumerate() {
            write!(f, "<{}> ::=", self.names[i])?;
            for (k, prod) in group.iter().enumerate() {
                if k > 0 {
                    write!(f, " |")?;
                }
                write!(f, " {} {{{}}}", self.render_rhs(prod), prod.probability)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn quote_terminal(t: &str) -> String {
    let needs_quotes =
        t.is_empty() || t.chars().any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '|' | '{' | '}' | '\''));
    if needs_quotes {
        format!("'{t}'")
    } else {
        t.to_string()
    }
}

#[derive(Debug)]
enum RawSymbol {
    Terminal(String),
    NonTerminal(String),
}

#[derive(Debug)]
struct RawAlternative {
    symbols: Vec<RawSymbol>,
    weight: Option<f64>,
    line: usize,
}

#[derive(Debug)]
struct RawGroup {
    name: String,
    line: usize,
    alternatives: Vec<RawAlternative>,
}

#[derive(Debug)]
enum Token {
    NonTerminal(String),
    Terminal(String),
    Weight(f64),
    Bar,
}

fn parse_err(line: usize, msg: impl Into<String>) -> GrammarError {
    GrammarError::Parse { line, msg: msg.into() }
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Token>, GrammarError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '|' => {
                chars.next();
                tokens.push(Token::Bar);
            }
            '<' => {
                let rest = &text[start + 1..];
                let end = rest.find('>').ok_or_else(|| parse_err(line, "unterminated non-terminal"))?;
                let name = &rest[..end];
                if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == '<') {
                    return Err(parse_err(line, format!("invalid non-terminal name <{name}>")));
                }
                tokens.push(Token::NonTerminal(name.to_string()));
                let stop = start + 1 + end;
                while chars.peek().is_some_and(|&(i, _)| i <= stop) {
                    chars.next();
                }
            }
            '\'' => {
                let rest = &text[start + 1..];
                let end = rest.find('\'').ok_or_else(|| parse_err(line, "unterminated quoted terminal"))?;
                tokens.push(Token::Terminal(rest[..end].to_string()));
                let stop = start + 1 + end;
                while chars.peek().is_some_and(|&(i, _)| i <= stop) {
                    chars.next();
                }
            }
            '{' => {
                let rest = &text[start + 1..];
                let end = rest.find('}').ok_or_else(|| parse_err(line, "unterminated weight"))?;
                let raw = rest[..end].trim();
                let w: f64 = raw.parse().map_err(|_| parse_err(line, format!("invalid weight `{raw}`")))?;
                tokens.push(Token::Weight(w));
                let stop = start + 1 + end;
                while chars.peek().is_some_and(|&(i, _)| i <= stop) {
                    chars.next();
                }
            }
            '}' | '>' => return Err(parse_err(line, format!("unexpected `{c}`"))),
            _ => {
                let mut end = text.len();
                for (i, ch) in text[start..].char_indices() {
                    if ch.is_whitespace() || matches!(ch, '|' | '<' | '{' | '\'') {
                        end = start + i;
                        break;
                    }
                }
                tokens.push(Token::Terminal(text[start..end].to_string()));
                while chars.peek().is_some_and(|&(i, _)| i < end) {
                    chars.next();
                }
            }
        }
    }
    Ok(tokens)
}

fn push_alternatives(
    group: &mut RawGroup,
    tokens: Vec<Token>,
    line: usize,
    leading_bar: bool,
) -> Result<(), GrammarError> {
    let mut current = RawAlternative { symbols: Vec::new(), weight: None, line };
    let mut first = true;
    let mut iter = tokens.into_iter().peekable();
    if leading_bar {
        match iter.next() {
            Some(Token::Bar) => {}
            _ => return Err(parse_err(line, "continuation line must start with `|`")),
        }
    }
    let finish = |alt: RawAlternative, group: &mut RawGroup| {
        if alt.symbols.is_empty() {
            return Err(parse_err(alt.line, "empty alternative"));
        }
        group.alternatives.push(alt);
        Ok(())
    };
    for tok in iter {
        match tok {
            Token::Bar => {
                let done = std::mem::replace(&mut current, RawAlternative { symbols: Vec::new(), weight: None, line });
                finish(done, group)?;
            }
            Token::Weight(w) => {
                if current.weight.is_some() || current.symbols.is_empty() {
                    return Err(parse_err(line, "weight must follow the symbols of an alternative"));
                }
                current.weight = Some(w);
            }
            Token::NonTerminal(n) | Token::Terminal(n) if current.weight.is_some() => {
                return Err(parse_err(line, format!("symbol `{n}` after weight")));
            }
            Token::NonTerminal(n) => current.symbols.push(RawSymbol::NonTerminal(n)),
            Token::Terminal(t) => current.symbols.push(RawSymbol::Terminal(t)),
        }
        first = false;
    }
    if first && !leading_bar {
        return Err(parse_err(line, "rule has no alternatives"));
    }
    finish(current, group)
}

fn parse_groups(text: &str) -> Result<Vec<RawGroup>, GrammarError> {
    let mut groups: Vec<RawGroup> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('|') {
            let group = groups.last_mut().ok_or_else(|| parse_err(line, "continuation line before any rule"))?;
            let tokens = tokenize(trimmed, line)?;
            push_alternatives(group, tokens, line, true)?;
            continue;
        }
        let (lhs, rhs) = trimmed.split_once("::=").ok_or_else(|| parse_err(line, "expected `<name> ::= ...`"))?;
        let lhs = lhs.trim();
        let name = lhs
            .strip_prefix('<')
            .and_then(|s| s.strip_suffix('>'))
            .filter(|s| !s.is_empty() && !s.contains(['<', '>']) && !s.contains(char::is_whitespace))
            .ok_or_else(|| parse_err(line, format!("invalid left-hand side `{lhs}`")))?;
        if groups.iter().any(|g| g.name == name) {
            return Err(parse_err(line, format!("<{name}> defined twice")));
        }
        let mut group = RawGroup { name: name.to_string(), line, alternatives: Vec::new() };
        push_alternatives(&mut group, tokenize(rhs, line)?, line, false)?;
        groups.push(group);
    }
    if groups.is_empty() {
        return Err(parse_err(0, "grammar has no rules"));
    }
    Ok(groups)
}

fn build(groups: Vec<RawGroup>) -> Result<Pcfg, GrammarError> {
    let index: HashMap<&str, usize> = groups.iter().enumerate().map(|(i, g)| (g.name.as_str(), i)).collect();
    let names: Vec<String> = groups.iter().map(|g| g.name.clone()).collect();
    let mut terminals = BTreeSet::new();
    let mut rules = Vec::with_capacity(groups.len());

    for (i, group) in groups.iter().enumerate() {
        let weights: Vec<Option<f64>> = group.alternatives.iter().map(|a| a.weight).collect();
        let probs = resolve_weights(&group.name, &weights)?;
        let mut prods = Vec::with_capacity(group.alternatives.len());
        for (k, (alt, p)) in group.alternatives.iter().zip(probs).enumerate() {
            let mut rhs = Vec::with_capacity(alt.symbols.len());
            for sym in &alt.symbols {
                match sym {
                    RawSymbol::Terminal(t) => {
                        terminals.insert(t.clone());
                        rhs.push(Symbol::Terminal(t.clone()));
                    }
                    RawSymbol::NonTerminal(n) => {
                        let id = index.get(n.as_str()).ok_or_else(|| GrammarError::UndeclaredSymbol(n.clone()))?;
                        rhs.push(Symbol::NonTerminal(NtId(*id)));
                    }
                }
            }
            prods.push(Production { lhs: NtId(i), rhs, probability: p, recursive: false, index: k });
        }
        debug_assert!(group.line > 0);
        rules.push(prods);
    }

    let g = Pcfg { names, terminals, rules }.analyze_recursion();
    for nt in g.non_terminals() {
        if g.non_recursive(nt).next().is_none() {
            return Err(GrammarError::NoNonRecursiveRule(g.name(nt).to_string()));
        }
    }
    Ok(g)
}

fn resolve_weights(name: &str, weights: &[Option<f64>]) -> Result<Vec<f64>, GrammarError> {
    let bad = |reason: &str| GrammarError::BadProbabilities { nt: name.to_string(), reason: reason.into() };
    let given = weights.iter().filter(|w| w.is_some()).count();
    if given == 0 {
        let n = weights.len() as f64;
        return Ok(vec![1.0 / n; weights.len()]);
    }
    if given != weights.len() {
        return Err(bad("either every alternative or none carries a weight"));
    }
    let ws: Vec<f64> = weights.iter().map(|w| w.unwrap()).collect();
    if ws.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(bad("negative or non-finite weight"));
    }
    let sum: f64 = ws.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_INPUT_TOLERANCE {
        return Err(bad(&format!("weights sum to {sum}")));
    }
    Ok(ws.into_iter().map(|w| w / sum).collect())
}
