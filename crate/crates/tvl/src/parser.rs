//! Concrete syntax for problems (`.tvl` files) and its canonical printer.
//!
//! ```text
//! vocab { unary P Q; binary R; }
//! logic c2g;
//! sentence forall x . E=1 y . (R(x,y) & x != y);
//! global 1*|P(x)| + -1*|Q(x)| >= 0;
//! ```
//!
//! Operator precedence is `!` > `&` > `|` > `->` (right associative); quantifier
//! bodies extend as far as possible. Inside `|...|` a disjunction must be
//! parenthesized. `--` starts a line comment.

use crate::ast::{
    free_vars, is_guarded_gp2, validate_global, validate_open, Cmp, Condition, CountCmp, Formula,
    GlobalConstraint, PresTerm, ValidationError, Var, Vocabulary,
};
use num_bigint::{BigInt, BigUint, Sign};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogicTag {
    C2,
    Gp2,
    C2g,
}

impl LogicTag {
    pub fn name(self) -> &'static str {
        match self {
            LogicTag::C2 => "c2",
            LogicTag::Gp2 => "gp2",
            LogicTag::C2g => "c2g",
        }
    }

    pub fn from_name(s: &str) -> Option<LogicTag> {
        match s {
            "c2" => Some(LogicTag::C2),
            "gp2" => Some(LogicTag::Gp2),
            "c2g" => Some(LogicTag::C2g),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceProblem {
    pub vocab: Vocabulary,
    pub sentence: Formula,
    pub globals: Vec<GlobalConstraint>,
    pub logic: LogicTag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{}:{}: expected {expected}, found {found}", position.line, position.column)]
    Syntax {
        position: Position,
        expected: String,
        found: String,
    },
    #[error("{}:{}: {error}", position.line, position.column)]
    Invalid {
        position: Position,
        error: ValidationError,
    },
    #[error("{}:{}: {message}", position.line, position.column)]
    Logic { position: Position, message: String },
}

impl ParseError {
    pub fn position(&self) -> Position {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::Invalid { position, .. }
            | ParseError::Logic { position, .. } => *position,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "E>=", "E<=", "E=", "P[", "->", "!=", "<=", ">=", "{", "}", "(", ")", "[", "]", ";", ",", ".", "!", "&",
    "|", "=", "<", ">", "*", "#", "+",
];

fn lex(text: &str) -> Result<Vec<(Tok, Position)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, k: usize, chars: &[char]| {
        for _ in 0..k {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Position { line, column: col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1, &chars);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            advance(&mut i, &mut line, &mut col, 1, &chars);
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            let s: String = chars[start..i].iter().collect();
            out.push((Tok::Int(s.parse().expect("digits")), pos));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            advance(&mut i, &mut line, &mut col, sym.len(), &chars);
            out.push((Tok::Sym(sym), pos));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            continue;
        }
        return Err(ParseError::Syntax {
            position: pos,
            expected: "a token".into(),
            found: format!("`{c}`"),
        });
    }
    out.push((Tok::Eof, Position { line, column: col }));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, Position)>,
    pos: usize,
    vocab: Option<&'a Vocabulary>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn here(&self) -> Position {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            position: self.here(),
            expected: expected.into(),
            found: self.peek().describe(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_kw(s) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("`{s}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(what),
        }
    }

    fn int(&mut self) -> Result<BigInt, ParseError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(i)
            }
            _ => self.err("an integer"),
        }
    }

    fn nat(&mut self) -> Result<BigUint, ParseError> {
        match self.peek().clone() {
            Tok::Int(i) if i.sign() != Sign::Minus => {
                self.bump();
                Ok(i.to_biguint().expect("non-negative"))
            }
            _ => self.err("a natural number"),
        }
    }

    fn var(&mut self) -> Result<Var, ParseError> {
        let pos = self.here();
        let name = self.ident("a variable")?;
        match name.as_str() {
            "x" => Ok(Var::X),
            "y" => Ok(Var::Y),
            _ => Err(ParseError::Invalid {
                position: pos,
                error: ValidationError::ThreeVariables(name),
            }),
        }
    }

    fn vocab(&self) -> &'a Vocabulary {
        self.vocab.expect("vocabulary parsed before formulas")
    }

    // formula := imp
    fn formula(&mut self, no_bar: bool) -> Result<Formula, ParseError> {
        let lhs = self.disjunction(no_bar)?;
        if self.is_sym("->") {
            self.bump();
            let rhs = self.formula(no_bar)?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self, no_bar: bool) -> Result<Formula, ParseError> {
        let mut f = self.conjunction(no_bar)?;
        while !no_bar && self.is_sym("|") {
            self.bump();
            let rhs = self.conjunction(no_bar)?;
            f = Formula::or(f, rhs);
        }
        Ok(f)
    }

    fn conjunction(&mut self, no_bar: bool) -> Result<Formula, ParseError> {
        let mut f = self.unary(no_bar)?;
        while self.is_sym("&") {
            self.bump();
            let rhs = self.unary(no_bar)?;
            f = Formula::and(f, rhs);
        }
        Ok(f)
    }

    fn unary(&mut self, no_bar: bool) -> Result<Formula, ParseError> {
        if self.is_sym("!") {
            self.bump();
            let inner = self.unary(no_bar)?;
            return Ok(Formula::not(inner));
        }
        self.primary(no_bar)
    }

    fn primary(&mut self, no_bar: bool) -> Result<Formula, ParseError> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Sym("(") => {
                self.bump();
                let f = self.formula(false)?;
                self.expect_sym(")")?;
                Ok(f)
            }
            Tok::Sym(s @ ("E>=" | "E<=" | "E=")) => {
                self.bump();
                let cmp = match s {
                    "E>=" => CountCmp::Ge,
                    "E<=" => CountCmp::Le,
                    _ => CountCmp::Eq,
                };
                let k = self.nat()?;
                let var = self.var()?;
                self.expect_sym(".")?;
                let body = self.formula(no_bar)?;
                Ok(Formula::Count {
                    cmp,
                    k,
                    var,
                    body: Box::new(body),
                })
            }
            Tok::Sym("P[") => {
                self.bump();
                self.presburger()
            }
            Tok::Ident(word) => match word.as_str() {
                "true" => {
                    self.bump();
                    Ok(Formula::True)
                }
                "false" => {
                    self.bump();
                    Ok(Formula::False)
                }
                "forall" | "exists" => {
                    self.bump();
                    let v = self.var()?;
                    self.expect_sym(".")?;
                    let body = self.formula(no_bar)?;
                    Ok(if word == "forall" {
                        Formula::forall(v, body)
                    } else {
                        Formula::exists(v, body)
                    })
                }
                _ if matches!(self.peek_at(1), Tok::Sym("(")) => self.atom(),
                _ if matches!(self.peek_at(1), Tok::Sym("=" | "!=")) => {
                    let a = self.var()?;
                    let neg = self.is_sym("!=");
                    self.bump();
                    let b = self.var()?;
                    Ok(if neg { Formula::Neq(a, b) } else { Formula::Eq(a, b) })
                }
                _ => Err(ParseError::Syntax {
                    position: pos,
                    expected: "a formula".into(),
                    found: format!("`{word}`"),
                }),
            },
            _ => self.err("a formula"),
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let pos = self.here();
        let name = self.ident("a predicate")?;
        self.expect_sym("(")?;
        let mut args = vec![self.var()?];
        while self.is_sym(",") {
            self.bump();
            args.push(self.var()?);
        }
        self.expect_sym(")")?;
        let vocab = self.vocab();
        let invalid = |error| Err(ParseError::Invalid { position: pos, error });
        if let Some(i) = vocab.unary_index(&name) {
            if args.len() != 1 {
                return invalid(ValidationError::ArityMismatch {
                    name,
                    expected: 1,
                    found: args.len(),
                });
            }
            Ok(Formula::Unary(i, args[0]))
        } else if let Some(i) = vocab.binary_index(&name) {
            if args.len() != 2 {
                return invalid(ValidationError::ArityMismatch {
                    name,
                    expected: 2,
                    found: args.len(),
                });
            }
            Ok(Formula::Binary(i, args[0], args[1]))
        } else {
            invalid(ValidationError::UnknownPredicate(name))
        }
    }

    fn presburger(&mut self) -> Result<Formula, ParseError> {
        let mut terms = Vec::new();
        loop {
            let coeff = self.int()?;
            self.expect_sym("*")?;
            self.expect_sym("#")?;
            let var = self.var()?;
            self.expect_sym("(")?;
            let body = self.formula(false)?;
            self.expect_sym(")")?;
            terms.push(PresTerm { coeff, var, body });
            if self.is_sym("+") {
                self.bump();
            } else {
                break;
            }
        }
        let cond = self.condition()?;
        self.expect_sym("]")?;
        Ok(Formula::Pres { terms, cond })
    }

    fn condition(&mut self) -> Result<Condition, ParseError> {
        if self.is_kw("mod") {
            self.bump();
            let modulus = self.nat()?;
            self.expect_sym("=")?;
            let residue = self.nat()?;
            return Ok(Condition::Mod { residue, modulus });
        }
        let cmp = match self.peek() {
            Tok::Sym("<=") => Cmp::Le,
            Tok::Sym(">=") => Cmp::Ge,
            Tok::Sym("=") => Cmp::Eq,
            Tok::Sym("<") => Cmp::Lt,
            Tok::Sym(">") => Cmp::Gt,
            _ => return self.err("a comparison or `mod`"),
        };
        self.bump();
        Ok(Condition::Cmp(cmp, self.int()?))
    }

    fn global(&mut self) -> Result<GlobalConstraint, ParseError> {
        let mut terms = Vec::new();
        loop {
            let coeff = self.int()?;
            self.expect_sym("*")?;
            self.expect_sym("|")?;
            let f = self.formula(true)?;
            self.expect_sym("|")?;
            terms.push((coeff, f));
            if self.is_sym("+") {
                self.bump();
            } else {
                break;
            }
        }
        let cond = self.condition()?;
        Ok(GlobalConstraint { terms, cond })
    }

    fn name_list(&mut self) -> Result<Vec<String>, ParseError> {
        let mut names = Vec::new();
        while let Tok::Ident(s) = self.peek().clone() {
            self.bump();
            names.push(s);
            if self.is_sym(",") {
                self.bump();
            }
        }
        self.expect_sym(";")?;
        Ok(names)
    }

    fn vocab_decl(&mut self) -> Result<Vocabulary, ParseError> {
        let pos = self.here();
        self.expect_sym("{")?;
        let mut unary = Vec::new();
        let mut binary = Vec::new();
        while !self.is_sym("}") {
            if self.is_kw("unary") {
                self.bump();
                unary.extend(self.name_list()?);
            } else if self.is_kw("binary") {
                self.bump();
                binary.extend(self.name_list()?);
            } else {
                return self.err("`unary`, `binary` or `}`");
            }
        }
        self.bump();
        for name in unary.iter().chain(binary.iter()) {
            if matches!(name.as_str(), "x" | "y" | "true" | "false" | "forall" | "exists" | "mod") {
                return Err(ParseError::Logic {
                    position: pos,
                    message: format!("`{name}` is reserved"),
                });
            }
        }
        Vocabulary::new(unary, binary).map_err(|error| ParseError::Invalid { position: pos, error })
    }
}

/// Parses a problem file.
pub fn parse(text: &str) -> Result<SourceProblem, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        vocab: None,
    };
    let mut vocab: Option<Vocabulary> = None;
    let mut logic: Option<(LogicTag, Position)> = None;
    let mut sentence: Option<(Formula, Position)> = None;
    let mut globals: Vec<(GlobalConstraint, Position)> = Vec::new();
    // The vocabulary must come first; everything else borrows it.
    p.expect_kw("vocab")?;
    let v = p.vocab_decl()?;
    p.expect_sym(";").or(Ok::<(), ParseError>(()))?;
    vocab.replace(v);
    let vocab_ref: &Vocabulary = vocab.as_ref().expect("set above");
    let mut p = Parser {
        toks: p.toks,
        pos: p.pos,
        vocab: Some(vocab_ref),
    };
    loop {
        let pos = p.here();
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "logic" => {
                p.bump();
                let name = p.ident("a logic name")?;
                let tag = LogicTag::from_name(&name).ok_or_else(|| ParseError::Syntax {
                    position: pos,
                    expected: "c2, gp2 or c2g".into(),
                    found: format!("`{name}`"),
                })?;
                if logic.is_some() {
                    return Err(ParseError::Logic {
                        position: pos,
                        message: "duplicate logic declaration".into(),
                    });
                }
                logic = Some((tag, pos));
            }
            Tok::Ident(kw) if kw == "sentence" => {
                p.bump();
                if sentence.is_some() {
                    return Err(ParseError::Logic {
                        position: pos,
                        message: "duplicate sentence".into(),
                    });
                }
                sentence = Some((p.formula(false)?, pos));
            }
            Tok::Ident(kw) if kw == "global" => {
                p.bump();
                globals.push((p.global()?, pos));
            }
            _ => return p.err("`logic`, `sentence` or `global`"),
        }
        p.expect_sym(";")?;
    }
    let end = p.here();
    let (logic, _) = logic.ok_or(ParseError::Logic {
        position: end,
        message: "missing logic declaration".into(),
    })?;
    let (sentence, spos) = sentence.ok_or(ParseError::Logic {
        position: end,
        message: "missing sentence".into(),
    })?;
    let vocab = vocab.expect("parsed");
    let invalid = |position, error| ParseError::Invalid { position, error };
    validate_open(&sentence, &vocab).map_err(|e| invalid(spos, e))?;
    let fv = free_vars(&sentence);
    if !fv.is_empty() {
        let names: Vec<&str> = fv.iter().map(|v| v.name()).collect();
        return Err(invalid(spos, ValidationError::FreeVariables(names.join(","))));
    }
    for (g, gpos) in &globals {
        validate_global(g, &vocab).map_err(|e| invalid(*gpos, e))?;
    }
    let logic_err = |position, message: &str| ParseError::Logic {
        position,
        message: message.into(),
    };
    match logic {
        LogicTag::Gp2 => {
            if let Some((_, gpos)) = globals.first() {
                return Err(logic_err(*gpos, "gp2 problems cannot carry global constraints"));
            }
            if !is_guarded_gp2(&sentence, &vocab) {
                return Err(logic_err(spos, "gp2 sentence has an unguarded quantifier"));
            }
        }
        LogicTag::C2 | LogicTag::C2g => {
            if sentence.has_presburger() {
                return Err(logic_err(spos, "Presburger quantifiers require logic gp2"));
            }
            if logic == LogicTag::C2 {
                if let Some((_, gpos)) = globals.first() {
                    return Err(logic_err(*gpos, "global constraints require logic c2g"));
                }
            }
            for (g, gpos) in &globals {
                if g.terms.iter().any(|(_, f)| f.has_presburger()) {
                    return Err(logic_err(*gpos, "Presburger quantifiers require logic gp2"));
                }
            }
        }
    }
    Ok(SourceProblem {
        vocab,
        sentence,
        globals: globals.into_iter().map(|(g, _)| g).collect(),
        logic,
    })
}

/// Parses a standalone formula over `vocab` (free variables allowed).
pub fn parse_formula(text: &str, vocab: &Vocabulary) -> Result<Formula, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        vocab: Some(vocab),
    };
    let f = p.formula(false)?;
    if !matches!(p.peek(), Tok::Eof) {
        return p.err("end of input");
    }
    validate_open(&f, vocab).map_err(|error| ParseError::Invalid {
        position: Position { line: 1, column: 1 },
        error,
    })?;
    Ok(f)
}

/// Canonical, fully parenthesized text of a formula.
pub fn print_formula(f: &Formula, vocab: &Vocabulary) -> String {
    let mut s = String::new();
    write_formula(&mut s, f, vocab);
    s
}

fn write_formula(s: &mut String, f: &Formula, vocab: &Vocabulary) {
    match f {
        Formula::True => s.push_str("true"),
        Formula::False => s.push_str("false"),
        Formula::Unary(i, v) => {
            let _ = write!(s, "{}({})", vocab.unary_name(*i), v);
        }
        Formula::Binary(i, a, b) => {
            let _ = write!(s, "{}({},{})", vocab.binary_name(*i), a, b);
        }
        Formula::Eq(a, b) => {
            let _ = write!(s, "{a} = {b}");
        }
        Formula::Neq(a, b) => {
            let _ = write!(s, "{a} != {b}");
        }
        Formula::Not(a) => {
            s.push_str("(!");
            write_formula(s, a, vocab);
            s.push(')');
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            let op = match f {
                Formula::And(..) => " & ",
                Formula::Or(..) => " | ",
                _ => " -> ",
            };
            s.push('(');
            write_formula(s, a, vocab);
            s.push_str(op);
            write_formula(s, b, vocab);
            s.push(')');
        }
        Formula::Forall(v, a) | Formula::Exists(v, a) => {
            let q = if matches!(f, Formula::Forall(..)) { "forall" } else { "exists" };
            let _ = write!(s, "({q} {v} . ");
            write_formula(s, a, vocab);
            s.push(')');
        }
        Formula::Count { cmp, k, var, body } => {
            let _ = write!(s, "({}{} {} . ", cmp.symbol(), k, var);
            write_formula(s, body, vocab);
            s.push(')');
        }
        Formula::Pres { terms, cond } => {
            s.push_str("P[");
            for (j, t) in terms.iter().enumerate() {
                if j > 0 {
                    s.push_str(" + ");
                }
                let _ = write!(s, "{}*#{}(", t.coeff, t.var);
                write_formula(s, &t.body, vocab);
                s.push(')');
            }
            s.push(' ');
            write_condition(s, cond);
            s.push(']');
        }
    }
}

fn write_condition(s: &mut String, cond: &Condition) {
    match cond {
        Condition::Cmp(c, d) => {
            let _ = write!(s, "{} {}", c.symbol(), d);
        }
        Condition::Mod { residue, modulus } => {
            let _ = write!(s, "mod {modulus} = {residue}");
        }
    }
}

pub fn print_global(g: &GlobalConstraint, vocab: &Vocabulary) -> String {
    let mut s = String::new();
    for (j, (c, f)) in g.terms.iter().enumerate() {
        if j > 0 {
            s.push_str(" + ");
        }
        let _ = write!(s, "{c}*|");
        write_formula(&mut s, f, vocab);
        s.push('|');
    }
    s.push(' ');
    write_condition(&mut s, &g.cond);
    s
}

pub fn print_vocab(vocab: &Vocabulary) -> String {
    format!(
        "vocab {{ unary {}; binary {}; }}",
        vocab.unary_names().join(" "),
        vocab.binary_names().join(" ")
    )
    .replace("unary ;", "unary;")
    .replace("binary ;", "binary;")
}

/// Canonical text of a problem: vocabulary, logic, sentence, then globals.
pub fn print(p: &SourceProblem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", print_vocab(&p.vocab));
    let _ = writeln!(s, "logic {};", p.logic.name());
    let _ = writeln!(s, "sentence {};", print_formula(&p.sentence, &p.vocab));
    for g in &p.globals {
        let _ = writeln!(s, "global {};", print_global(g, &p.vocab));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_counting_sentence() {
        let p = parse("vocab { unary U; binary R; } logic c2; sentence forall x . E=1 y . (R(x,y) & x != y);")
            .unwrap();
        assert_eq!(p.logic, LogicTag::C2);
        let expected = Formula::forall(
            Var::X,
            Formula::count(
                CountCmp::Eq,
                1,
                Var::Y,
                Formula::and(Formula::Binary(0, Var::X, Var::Y), Formula::Neq(Var::X, Var::Y)),
            ),
        );
        assert_eq!(p.sentence, expected);
    }

    #[test]
    fn parses_presburger_with_negative_coefficient() {
        let text = "vocab { unary P1 P2; binary R; } logic gp2;\n\
                    sentence forall x . (P1(x) -> P[ 1*#y(R(x,y) & P1(y)) + -1*#y(R(x,y) & P2(y)) = 0 ]);";
        let p = parse(text).unwrap();
        let Formula::Forall(_, body) = &p.sentence else { panic!() };
        let Formula::Implies(_, pres) = body.as_ref() else { panic!() };
        let Formula::Pres { terms, cond } = pres.as_ref() else { panic!() };
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[1].coeff, BigInt::from(-1));
        assert_eq!(*cond, Condition::Cmp(Cmp::Eq, 0.into()));
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = parse("vocab { unary ; binary R R; } logic c2; sentence true;").unwrap_err();
        assert!(matches!(
            err,
            ParseError::Invalid {
                error: ValidationError::DuplicateName(_),
                ..
            }
        ));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse("vocab { unary U; binary; }\nlogic c2;\nsentence forall x . U(x,x);").unwrap_err();
        assert_eq!(err.position().line, 3);
        assert!(matches!(
            err,
            ParseError::Invalid {
                error: ValidationError::ArityMismatch { .. },
                ..
            }
        ));
        let err = parse("vocab { unary U; binary; } logic c2; sentence forall z . U(z);").unwrap_err();
        assert!(matches!(
            err,
            ParseError::Invalid {
                error: ValidationError::ThreeVariables(_),
                ..
            }
        ));
    }

    #[test]
    fn precedence_and_printing() {
        let v = Vocabulary::anonymous(3, 0);
        let f = parse_formula("!U1(x) & U2(x) | U3(x) -> U1(x) -> U2(x)", &v).unwrap();
        assert_eq!(
            print_formula(&f, &v),
            "((((!U1(x)) & U2(x)) | U3(x)) -> (U1(x) -> U2(x)))"
        );
        let g = parse_formula("forall x . U1(x) | U2(x)", &v).unwrap();
        assert_eq!(print_formula(&g, &v), "(forall x . (U1(x) | U2(x)))");
    }

    #[test]
    fn modulus_global_round_trips() {
        let text = "vocab { unary U; binary R; }\nlogic c2g;\nsentence true;\nglobal 1*|U(x)| + -2*|(U(x) | true)| mod 3 = 1;\n";
        let p = parse(text).unwrap();
        let printed = print(&p);
        assert!(printed.contains("mod 3 = 1"));
        assert_eq!(parse(&printed).unwrap(), p);
    }

    #[test]
    fn comments_and_logic_restrictions() {
        let ok = parse("-- header\nvocab { unary U; binary R; } logic c2; sentence true; -- done\n");
        assert!(ok.is_ok());
        let bad = parse("vocab { unary U; binary R; } logic c2; sentence forall x . P[1*#y(R(x,y)) = 1];");
        assert!(matches!(bad, Err(ParseError::Logic { .. })));
        let unguarded = parse("vocab { unary U; binary R; } logic gp2; sentence forall x . P[1*#y(U(y)) = 1];");
        assert!(matches!(unguarded, Err(ParseError::Logic { .. })));
    }
}
