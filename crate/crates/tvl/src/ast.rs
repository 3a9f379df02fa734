//! Vocabularies, formulas over the variables `x` and `y`, global cardinality
//! constraints, and the two normal forms consumed by the solvers.
//!
//! Predicates are referenced by their index in the [`Vocabulary`]; unary and
//! binary predicates live in separate index spaces.

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    X,
    Y,
}

impl Var {
    pub fn other(self) -> Var {
        match self {
            Var::X => Var::Y,
            Var::Y => Var::X,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
        }
    }

    pub fn slot(self) -> usize {
        match self {
            Var::X => 0,
            Var::Y => 1,
        }
    }
}

/// Comparison used by Presburger rows and global constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
    Lt,
    Gt,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
            Cmp::Lt => "<",
            Cmp::Gt => ">",
        }
    }

    pub fn holds<T: Ord>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            Cmp::Le => lhs <= rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Eq => lhs == rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Gt => lhs > rhs,
        }
    }
}

/// Comparison of a counting quantifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CountCmp {
    Ge,
    Le,
    Eq,
}

impl CountCmp {
    pub fn symbol(self) -> &'static str {
        match self {
            CountCmp::Ge => "E>=",
            CountCmp::Le => "E<=",
            CountCmp::Eq => "E=",
        }
    }
}

/// Right-hand side of a Presburger row: a comparison with a bound, or a residue class.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Cmp(Cmp, BigInt),
    Mod { residue: BigUint, modulus: BigUint },
}

impl Condition {
    pub fn holds(&self, value: &BigInt) -> bool {
        match self {
            Condition::Cmp(c, d) => c.holds(value, d),
            Condition::Mod { residue, modulus } => {
                let m = BigInt::from(modulus.clone());
                let r = ((value % &m) + &m) % &m;
                r == BigInt::from(residue.clone())
            }
        }
    }
}

/// One summand `coeff * #var(body)` of a Presburger quantifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PresTerm {
    pub coeff: BigInt,
    pub var: Var,
    pub body: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    True,
    False,
    Unary(usize, Var),
    Binary(usize, Var, Var),
    Eq(Var, Var),
    Neq(Var, Var),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Var, Box<Formula>),
    Exists(Var, Box<Formula>),
    Count {
        cmp: CountCmp,
        k: BigUint,
        var: Var,
        body: Box<Formula>,
    },
    Pres {
        terms: Vec<PresTerm>,
        cond: Condition,
    },
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(v: Var, f: Formula) -> Formula {
        Formula::Forall(v, Box::new(f))
    }

    pub fn exists(v: Var, f: Formula) -> Formula {
        Formula::Exists(v, Box::new(f))
    }

    pub fn count(cmp: CountCmp, k: u64, var: Var, body: Formula) -> Formula {
        Formula::Count {
            cmp,
            k: BigUint::from(k),
            var,
            body: Box::new(body),
        }
    }

    /// Left-nested conjunction; `True` for an empty list.
    pub fn conj<I: IntoIterator<Item = Formula>>(parts: I) -> Formula {
        let mut it = parts.into_iter();
        match it.next() {
            None => Formula::True,
            Some(first) => it.fold(first, Formula::and),
        }
    }

    /// Left-nested disjunction; `False` for an empty list.
    pub fn disj<I: IntoIterator<Item = Formula>>(parts: I) -> Formula {
        let mut it = parts.into_iter();
        match it.next() {
            None => Formula::False,
            Some(first) => it.fold(first, Formula::or),
        }
    }

    /// Conjunction that drops `True` parts and collapses on `False`.
    pub fn conj_simplified<I: IntoIterator<Item = Formula>>(parts: I) -> Formula {
        let mut kept = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                other => kept.push(other),
            }
        }
        Formula::conj(kept)
    }

    /// Disjunction that drops `False` parts and collapses on `True`.
    pub fn disj_simplified<I: IntoIterator<Item = Formula>>(parts: I) -> Formula {
        let mut kept = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                other => kept.push(other),
            }
        }
        Formula::disj(kept)
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::True
            | Formula::False
            | Formula::Unary(..)
            | Formula::Binary(..)
            | Formula::Eq(..)
            | Formula::Neq(..) => vec![],
            Formula::Not(a) | Formula::Forall(_, a) | Formula::Exists(_, a) => vec![a],
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => vec![a, b],
            Formula::Count { body, .. } => vec![body],
            Formula::Pres { terms, .. } => terms.iter().map(|t| &t.body).collect(),
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Forall(..) | Formula::Exists(..) | Formula::Count { .. } | Formula::Pres { .. } => {
                false
            }
            _ => self.children().into_iter().all(|c| c.is_quantifier_free()),
        }
    }

    pub fn has_presburger(&self) -> bool {
        match self {
            Formula::Pres { .. } => true,
            _ => self.children().into_iter().any(|c| c.has_presburger()),
        }
    }

    /// Flattens nested conjunctions into their conjuncts.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            other => vec![other],
        }
    }

    /// Flattens nested disjunctions into their disjuncts.
    pub fn disjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::Or(a, b) => {
                let mut v = a.disjuncts();
                v.extend(b.disjuncts());
                v
            }
            other => vec![other],
        }
    }

    /// Exchanges the names `x` and `y` everywhere, bound occurrences included.
    pub fn swap_vars(&self) -> Formula {
        self.map_vars(&|v| v.other())
    }

    /// Replaces every free and bound occurrence of `from` by `to`. Intended for
    /// quantifier-free formulas, where it is plain substitution.
    pub fn substitute(&self, from: Var, to: Var) -> Formula {
        self.map_vars(&|v| if v == from { to } else { v })
    }

    fn map_vars(&self, f: &dyn Fn(Var) -> Var) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Unary(i, v) => Formula::Unary(*i, f(*v)),
            Formula::Binary(i, a, b) => Formula::Binary(*i, f(*a), f(*b)),
            Formula::Eq(a, b) => Formula::Eq(f(*a), f(*b)),
            Formula::Neq(a, b) => Formula::Neq(f(*a), f(*b)),
            Formula::Not(a) => Formula::not(a.map_vars(f)),
            Formula::And(a, b) => Formula::and(a.map_vars(f), b.map_vars(f)),
            Formula::Or(a, b) => Formula::or(a.map_vars(f), b.map_vars(f)),
            Formula::Implies(a, b) => Formula::implies(a.map_vars(f), b.map_vars(f)),
            Formula::Forall(v, a) => Formula::forall(f(*v), a.map_vars(f)),
            Formula::Exists(v, a) => Formula::exists(f(*v), a.map_vars(f)),
            Formula::Count { cmp, k, var, body } => Formula::Count {
                cmp: *cmp,
                k: k.clone(),
                var: f(*var),
                body: Box::new(body.map_vars(f)),
            },
            Formula::Pres { terms, cond } => Formula::Pres {
                terms: terms
                    .iter()
                    .map(|t| PresTerm {
                        coeff: t.coeff.clone(),
                        var: f(t.var),
                        body: t.body.map_vars(f),
                    })
                    .collect(),
                cond: cond.clone(),
            },
        }
    }

    pub fn max_abs_coeff(&self) -> BigInt {
        let own = match self {
            Formula::Pres { terms, .. } => terms.iter().map(|t| t.coeff.abs()).max().unwrap_or_default(),
            _ => BigInt::zero(),
        };
        self.children()
            .into_iter()
            .map(|c| c.max_abs_coeff())
            .fold(own, |a, b| a.max(b))
    }
}

/// Free variables under the usual binding rules: quantifiers bind their
/// variable, and each Presburger term binds its counted variable.
pub fn free_vars(f: &Formula) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    collect_free(f, &mut [false, false], &mut out);
    out
}

fn collect_free(f: &Formula, bound: &mut [bool; 2], out: &mut BTreeSet<Var>) {
    let mark = |v: Var, out: &mut BTreeSet<Var>| {
        if !bound[v.slot()] {
            out.insert(v);
        }
    };
    match f {
        Formula::True | Formula::False => {}
        Formula::Unary(_, v) => mark(*v, out),
        Formula::Binary(_, a, b) | Formula::Eq(a, b) | Formula::Neq(a, b) => {
            mark(*a, out);
            mark(*b, out);
        }
        Formula::Not(a) => collect_free(a, bound, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Formula::Forall(v, a) | Formula::Exists(v, a) => with_bound(*v, a, bound, out),
        Formula::Count { var, body, .. } => with_bound(*var, body, bound, out),
        Formula::Pres { terms, .. } => {
            for t in terms {
                with_bound(t.var, &t.body, bound, out);
            }
        }
    }
}

fn with_bound(v: Var, body: &Formula, bound: &mut [bool; 2], out: &mut BTreeSet<Var>) {
    let saved = bound[v.slot()];
    bound[v.slot()] = true;
    collect_free(body, bound, out);
    bound[v.slot()] = saved;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    unary_names: Vec<String>,
    binary_names: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("predicate `{0}` is declared more than once")]
    DuplicateName(String),
    #[error("predicate `{name}` used with {found} argument(s), declared with {expected}")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("variable `{0}` is neither x nor y")]
    ThreeVariables(String),
    #[error("modulus constraint needs residue < modulus and modulus >= 1 (got {residue} mod {modulus})")]
    BadModulus { residue: BigUint, modulus: BigUint },
    #[error("sentence has free variable(s) {0}")]
    FreeVariables(String),
    #[error("global formula must have at most one free variable")]
    GlobalArity,
}

impl Vocabulary {
    pub fn new(unary: Vec<String>, binary: Vec<String>) -> Result<Self, ValidationError> {
        let mut seen = HashSet::new();
        for name in unary.iter().chain(binary.iter()) {
            if !seen.insert(name.clone()) {
                return Err(ValidationError::DuplicateName(name.clone()));
            }
        }
        Ok(Vocabulary {
            unary_names: unary,
            binary_names: binary,
        })
    }

    /// Vocabulary with generated names `U1..Un`, `R1..Rm`.
    pub fn anonymous(n: usize, m: usize) -> Self {
        Vocabulary {
            unary_names: (1..=n).map(|i| format!("U{i}")).collect(),
            binary_names: (1..=m).map(|i| format!("R{i}")).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.unary_names.len()
    }

    pub fn m(&self) -> usize {
        self.binary_names.len()
    }

    pub fn unary_names(&self) -> &[String] {
        &self.unary_names
    }

    pub fn binary_names(&self) -> &[String] {
        &self.binary_names
    }

    pub fn unary_name(&self, i: usize) -> &str {
        &self.unary_names[i]
    }

    pub fn binary_name(&self, i: usize) -> &str {
        &self.binary_names[i]
    }

    pub fn unary_index(&self, name: &str) -> Option<usize> {
        self.unary_names.iter().position(|s| s == name)
    }

    pub fn binary_index(&self, name: &str) -> Option<usize> {
        self.binary_names.iter().position(|s| s == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.unary_index(name).is_some() || self.binary_index(name).is_some()
    }
}

/// `Σ coeff · |formula| cond`, where each formula has at most one free variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlobalConstraint {
    pub terms: Vec<(BigInt, Formula)>,
    pub cond: Condition,
}

/// Checks predicate indices, modulus bounds and closedness of `s`.
pub fn validate(s: &Formula, vocab: &Vocabulary) -> Result<(), ValidationError> {
    validate_open(s, vocab)?;
    let fv = free_vars(s);
    if !fv.is_empty() {
        let names: Vec<&str> = fv.iter().map(|v| v.name()).collect();
        return Err(ValidationError::FreeVariables(names.join(",")));
    }
    Ok(())
}

/// Like [`validate`] without the closedness requirement.
pub fn validate_open(s: &Formula, vocab: &Vocabulary) -> Result<(), ValidationError> {
    match s {
        Formula::Unary(i, _) if *i >= vocab.n() => {
            return Err(ValidationError::UnknownPredicate(format!("unary #{i}")))
        }
        Formula::Binary(i, _, _) if *i >= vocab.m() => {
            return Err(ValidationError::UnknownPredicate(format!("binary #{i}")))
        }
        Formula::Pres {
            cond: Condition::Mod { residue, modulus },
            ..
        } => check_modulus(residue, modulus)?,
        _ => {}
    }
    for c in s.children() {
        validate_open(c, vocab)?;
    }
    Ok(())
}

fn check_modulus(residue: &BigUint, modulus: &BigUint) -> Result<(), ValidationError> {
    if modulus.is_zero() || residue >= modulus {
        return Err(ValidationError::BadModulus {
            residue: residue.clone(),
            modulus: modulus.clone(),
        });
    }
    Ok(())
}

pub fn validate_global(g: &GlobalConstraint, vocab: &Vocabulary) -> Result<(), ValidationError> {
    if let Condition::Mod { residue, modulus } = &g.cond {
        check_modulus(residue, modulus)?;
    }
    for (_, f) in &g.terms {
        validate_open(f, vocab)?;
        if free_vars(f).len() > 1 {
            return Err(ValidationError::GlobalArity);
        }
    }
    Ok(())
}

/// True iff `f` is a binary atom over two distinct variables, one of them `var`.
fn is_guard_atom(f: &Formula, var: Var) -> bool {
    matches!(f, Formula::Binary(_, a, b) if a != b && (*a == var || *b == var))
}

fn has_guard_conjunct(body: &Formula, var: Var) -> bool {
    body.conjuncts().into_iter().any(|c| is_guard_atom(c, var))
}

fn forall_is_guarded(body: &Formula, var: Var) -> bool {
    match body {
        Formula::Implies(a, _) => has_guard_conjunct(a, var),
        _ => body.disjuncts().into_iter().any(|d| match d {
            Formula::Not(a) => is_guard_atom(a, var),
            _ => false,
        }),
    }
}

/// True iff every quantifier that binds one variable while the other stays free
/// is guarded by a binary atom; closed (unary) quantification is unrestricted.
pub fn is_guarded_gp2(s: &Formula, vocab: &Vocabulary) -> bool {
    let _ = vocab;
    guarded_rec(s)
}

fn guarded_rec(f: &Formula) -> bool {
    let here = match f {
        Formula::Pres { terms, .. } => terms.iter().all(|t| has_guard_conjunct(&t.body, t.var)),
        Formula::Count { var, body, .. } => has_guard_conjunct(body, *var),
        Formula::Exists(var, body) => free_vars(f).is_empty() || has_guard_conjunct(body, *var),
        Formula::Forall(var, body) => free_vars(f).is_empty() || forall_is_guarded(body, *var),
        _ => true,
    };
    here && f.children().into_iter().all(guarded_rec)
}

/// One Presburger row of the GP² normal form, attached to a unary predicate:
/// `U(x) → Σ coeff · #y[body(x,y)] cond`. Each body is quantifier-free and
/// guarded by a binary atom between `x` and `y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresRow {
    pub terms: Vec<RowTerm>,
    pub cond: Condition,
    /// 2 for a modulus row (desugared with two slack columns), else 0.
    pub slack_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowTerm {
    pub coeff: BigInt,
    pub body: Formula,
}

impl PresRow {
    /// Row with `Σ_t lambda[t] · #y[R_t(x,y) ∧ x≠y]`.
    pub fn from_lambda(lambda: &[BigInt], cond: Condition) -> PresRow {
        let terms = lambda
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_zero())
            .map(|(t, l)| RowTerm {
                coeff: l.clone(),
                body: Formula::and(Formula::Binary(t, Var::X, Var::Y), Formula::Neq(Var::X, Var::Y)),
            })
            .collect();
        let slack_count = if matches!(cond, Condition::Mod { .. }) { 2 } else { 0 };
        PresRow {
            terms,
            cond,
            slack_count,
        }
    }

    pub fn to_formula(&self) -> Formula {
        Formula::Pres {
            terms: self
                .terms
                .iter()
                .map(|t| PresTerm {
                    coeff: t.coeff.clone(),
                    var: Var::Y,
                    body: t.body.clone(),
                })
                .collect(),
            cond: self.cond.clone(),
        }
    }
}

/// `∀x γ(x) ∧ ⋀_i ∀x∀y (R_i(x,y) ∧ x≠y → α_i(x,y)) ∧ ⋀_i ∀x (U_i(x) → row_i(x))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gp2NormalForm {
    pub vocab: Vocabulary,
    pub gamma: Formula,
    /// One entry per binary predicate.
    pub alphas: Vec<Formula>,
    /// One entry per unary predicate; `None` means no counting row.
    pub rows: Vec<Option<PresRow>>,
}

impl Gp2NormalForm {
    pub fn to_formula(&self) -> Formula {
        let (x, y) = (Var::X, Var::Y);
        let mut parts = vec![Formula::forall(x, self.gamma.clone())];
        for (i, a) in self.alphas.iter().enumerate() {
            if *a == Formula::True {
                continue;
            }
            parts.push(Formula::forall(
                x,
                Formula::forall(
                    y,
                    Formula::implies(
                        Formula::and(Formula::Binary(i, x, y), Formula::Neq(x, y)),
                        a.clone(),
                    ),
                ),
            ));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if let Some(r) = r {
                parts.push(Formula::forall(
                    x,
                    Formula::implies(Formula::Unary(i, x), r.to_formula()),
                ));
            }
        }
        Formula::conj(parts)
    }

    /// Largest absolute coefficient or bound appearing in a row.
    pub fn max_coefficient(&self) -> BigInt {
        let mut best = BigInt::from(1);
        for r in self.rows.iter().flatten() {
            for t in &r.terms {
                best = best.max(t.coeff.abs());
            }
            match &r.cond {
                Condition::Cmp(_, d) => best = best.max(d.abs() + 1),
                Condition::Mod { residue, modulus } => {
                    best = best.max(BigInt::from(residue.clone())).max(BigInt::from(modulus.clone()))
                }
            }
        }
        best
    }
}

/// `∀x γ(x) ∧ ∀x∀y (x≠y → α(x,y)) ∧ ⋀_{i<m'} ∀x ∃^{=k_i}y (R_i(x,y) ∧ x≠y)`.
/// The counted binaries are the first `counts.len()` binaries of `vocab`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct C2NormalForm {
    pub vocab: Vocabulary,
    pub gamma: Formula,
    pub alpha: Formula,
    pub counts: Vec<usize>,
}

impl C2NormalForm {
    pub fn counted_prefix(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_formula(&self) -> Formula {
        let (x, y) = (Var::X, Var::Y);
        let mut parts = vec![
            Formula::forall(x, self.gamma.clone()),
            Formula::forall(x, Formula::forall(y, Formula::implies(Formula::Neq(x, y), self.alpha.clone()))),
        ];
        for (i, k) in self.counts.iter().enumerate() {
            parts.push(Formula::forall(
                x,
                Formula::count(
                    CountCmp::Eq,
                    *k as u64,
                    y,
                    Formula::and(Formula::Binary(i, x, y), Formula::Neq(x, y)),
                ),
            ));
        }
        Formula::conj(parts)
    }
}

/// Converts a natural-number literal to `usize`, if it fits.
pub fn nat_to_usize(k: &BigUint) -> Option<usize> {
    k.to_usize()
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Var::{X, Y};

    #[test]
    fn free_vars_follow_binding() {
        assert_eq!(free_vars(&Formula::Unary(0, X)), [X].into());
        let closed = Formula::forall(X, Formula::forall(Y, Formula::Binary(0, X, Y)));
        assert!(free_vars(&closed).is_empty());
        let pres = Formula::Pres {
            terms: vec![PresTerm {
                coeff: 1.into(),
                var: Y,
                body: Formula::Binary(0, X, Y),
            }],
            cond: Condition::Cmp(Cmp::Eq, 0.into()),
        };
        assert_eq!(free_vars(&pres), [X].into());
    }

    fn pres_term(coeff: i64, body: Formula) -> PresTerm {
        PresTerm {
            coeff: coeff.into(),
            var: Y,
            body,
        }
    }

    #[test]
    fn guardedness() {
        let v = Vocabulary::anonymous(1, 1);
        let good = Formula::exists(
            X,
            Formula::Pres {
                terms: vec![pres_term(1, Formula::Binary(0, X, Y)), pres_term(-3, Formula::Binary(0, Y, X))],
                cond: Condition::Cmp(Cmp::Eq, 0.into()),
            },
        );
        assert!(is_guarded_gp2(&good, &v));
        let bad = Formula::forall(
            X,
            Formula::Pres {
                terms: vec![pres_term(1, Formula::not(Formula::Binary(0, X, Y)))],
                cond: Condition::Cmp(Cmp::Eq, 0.into()),
            },
        );
        assert!(!is_guarded_gp2(&bad, &v));
        assert!(is_guarded_gp2(&Formula::forall(X, Formula::Unary(0, X)), &v));
        let unguarded_forall = Formula::forall(X, Formula::forall(Y, Formula::Unary(0, Y)));
        assert!(is_guarded_gp2(&unguarded_forall, &v));
        let open_forall = Formula::forall(X, Formula::forall(Y, Formula::Binary(0, X, Y)));
        assert!(!is_guarded_gp2(&open_forall, &v));
    }

    #[test]
    fn validation_errors() {
        let v = Vocabulary::anonymous(1, 1);
        assert!(validate(&Formula::forall(X, Formula::forall(Y, Formula::Binary(0, X, Y))), &v).is_ok());
        assert!(matches!(
            validate(&Formula::forall(X, Formula::Binary(3, X, X)), &v),
            Err(ValidationError::UnknownPredicate(_))
        ));
        let bad_mod = Formula::forall(
            X,
            Formula::Pres {
                terms: vec![pres_term(1, Formula::Binary(0, X, Y))],
                cond: Condition::Mod {
                    residue: 5u32.into(),
                    modulus: 3u32.into(),
                },
            },
        );
        assert!(matches!(validate(&bad_mod, &v), Err(ValidationError::BadModulus { .. })));
        assert!(matches!(
            validate(&Formula::Unary(0, X), &v),
            Err(ValidationError::FreeVariables(_))
        ));
        assert!(Vocabulary::new(vec![], vec!["R".into(), "R".into()]).is_err());
    }

    #[test]
    fn condition_mod_handles_negatives() {
        let c = Condition::Mod {
            residue: 1u32.into(),
            modulus: 2u32.into(),
        };
        assert!(c.holds(&BigInt::from(-3)));
        assert!(!c.holds(&BigInt::from(4)));
    }
}
