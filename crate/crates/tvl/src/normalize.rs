//! Renaming transforms into the two normal forms.
//!
//! The sentence is first put in negation normal form, so every subformula
//! occurs positively and one-directional definitions `∀x (D(x) → ψ)` suffice.
//! Quantified subformulas are then replaced bottom-up by fresh unary atoms.

use crate::ast::{
    free_vars, nat_to_usize, C2NormalForm, Cmp, Condition, CountCmp, Formula, GlobalConstraint, Gp2NormalForm,
    PresRow, PresTerm, RowTerm, Var, Vocabulary,
};
use crate::parser::{LogicTag, SourceProblem};
use crate::semantics::SigmaStructure;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("counting or Presburger body without a guard: {0}")]
    NotGuarded(String),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("number too large: {0}")]
    TooLarge(String),
    #[error("expected a {expected} problem, found {found}")]
    WrongLogic { expected: &'static str, found: &'static str },
}

/// Bookkeeping that relates a normal form to its source problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationTrace {
    /// Fresh unary names with the formula `ν(x)` each one stands for.
    pub fresh_unary: Vec<(String, Formula)>,
    pub fresh_binary: Vec<String>,
    pub original_vocab: Vocabulary,
    pub extended_vocab: Vocabulary,
}

impl NormalizationTrace {
    pub fn identity(vocab: &Vocabulary) -> Self {
        NormalizationTrace {
            fresh_unary: Vec::new(),
            fresh_binary: Vec::new(),
            original_vocab: vocab.clone(),
            extended_vocab: vocab.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Gp2Normalized {
    pub nf: Gp2NormalForm,
    pub trace: NormalizationTrace,
}

#[derive(Clone, Debug)]
pub struct C2Normalized {
    pub nf: C2NormalForm,
    pub trace: NormalizationTrace,
    /// Domain sizes on which the normal form may disagree with the source and
    /// which must be checked directly.
    pub small_cases: Vec<usize>,
    /// Global constraints over the extended vocabulary, with quantified term
    /// formulas replaced by fresh unary atoms.
    pub globals: Vec<GlobalConstraint>,
}

/// Restriction of a model over the extended vocabulary to the original one.
pub fn pull_back_model(m: &SigmaStructure, tr: &NormalizationTrace) -> SigmaStructure {
    let unary: Vec<usize> = tr
        .original_vocab
        .unary_names()
        .iter()
        .map(|n| tr.extended_vocab.unary_index(n).expect("original unary kept"))
        .collect();
    let binary: Vec<usize> = tr
        .original_vocab
        .binary_names()
        .iter()
        .map(|n| tr.extended_vocab.binary_index(n).expect("original binary kept"))
        .collect();
    m.project(&unary, &binary)
}

fn nat(k: &BigUint) -> Result<usize, NormalizeError> {
    nat_to_usize(k).ok_or_else(|| NormalizeError::TooLarge(k.to_string()))
}

fn negate_cmp(cmp: Cmp) -> Vec<Cmp> {
    match cmp {
        Cmp::Le => vec![Cmp::Gt],
        Cmp::Ge => vec![Cmp::Lt],
        Cmp::Lt => vec![Cmp::Ge],
        Cmp::Gt => vec![Cmp::Le],
        Cmp::Eq => vec![Cmp::Lt, Cmp::Gt],
    }
}

/// Negation normal form; `negated` pushes an outer negation inward.
pub fn nnf(f: &Formula, negated: bool) -> Result<Formula, NormalizeError> {
    use Formula as F;
    Ok(match (f, negated) {
        (F::True, false) | (F::False, true) => F::True,
        (F::True, true) | (F::False, false) => F::False,
        (F::Unary(..) | F::Binary(..), false) => f.clone(),
        (F::Unary(..) | F::Binary(..), true) => F::not(f.clone()),
        (F::Eq(a, b), false) | (F::Neq(a, b), true) => F::Eq(*a, *b),
        (F::Eq(a, b), true) | (F::Neq(a, b), false) => F::Neq(*a, *b),
        (F::Not(a), neg) => nnf(a, !neg)?,
        (F::And(a, b), false) | (F::Or(a, b), true) => F::and(nnf(a, negated)?, nnf(b, negated)?),
        (F::Or(a, b), false) | (F::And(a, b), true) => F::or(nnf(a, negated)?, nnf(b, negated)?),
        (F::Implies(a, b), false) => F::or(nnf(a, true)?, nnf(b, false)?),
        (F::Implies(a, b), true) => F::and(nnf(a, false)?, nnf(b, true)?),
        (F::Forall(v, a), false) | (F::Exists(v, a), true) => F::forall(*v, nnf(a, negated)?),
        (F::Exists(v, a), false) | (F::Forall(v, a), true) => F::exists(*v, nnf(a, negated)?),
        (F::Count { cmp, k, var, body }, neg) => {
            let body = nnf(body, false)?;
            let mk = |cmp: CountCmp, k: BigUint| F::Count {
                cmp,
                k,
                var: *var,
                body: Box::new(body.clone()),
            };
            let one = BigUint::one();
            match (cmp, neg) {
                (CountCmp::Ge, false) if k.is_zero() => F::True,
                (CountCmp::Ge, true) if k.is_zero() => F::False,
                (c, false) => mk(*c, k.clone()),
                (CountCmp::Ge, true) => mk(CountCmp::Le, k - &one),
                (CountCmp::Le, true) => mk(CountCmp::Ge, k + &one),
                (CountCmp::Eq, true) if k.is_zero() => mk(CountCmp::Ge, one),
                (CountCmp::Eq, true) => F::or(mk(CountCmp::Le, k - &one), mk(CountCmp::Ge, k + &one)),
            }
        }
        (F::Pres { terms, cond }, neg) => {
            let terms: Vec<PresTerm> = terms
                .iter()
                .map(|t| {
                    Ok(PresTerm {
                        coeff: t.coeff.clone(),
                        var: t.var,
                        body: nnf(&t.body, false)?,
                    })
                })
                .collect::<Result<_, NormalizeError>>()?;
            let mk = |cond: Condition| F::Pres {
                terms: terms.clone(),
                cond,
            };
            match (cond, neg) {
                (c, false) => mk(c.clone()),
                (Condition::Cmp(c, d), true) => F::disj(negate_cmp(*c).into_iter().map(|c| mk(Condition::Cmp(c, d.clone())))),
                (Condition::Mod { residue, modulus }, true) => {
                    let p = modulus
                        .to_u64()
                        .filter(|&p| p <= 4096)
                        .ok_or_else(|| NormalizeError::TooLarge(format!("negated modulus {modulus}")))?;
                    let r = residue.to_u64().unwrap_or(0);
                    F::disj((0..p).filter(|&s| s != r).map(|s| {
                        mk(Condition::Mod {
                            residue: s.into(),
                            modulus: modulus.clone(),
                        })
                    }))
                }
            }
        }
    })
}

fn is_quantifier(f: &Formula) -> bool {
    matches!(
        f,
        Formula::Forall(..) | Formula::Exists(..) | Formula::Count { .. } | Formula::Pres { .. }
    )
}

fn reindex_binaries(f: &Formula, perm: &[usize]) -> Formula {
    use Formula as F;
    match f {
        F::Binary(i, a, b) => F::Binary(perm[*i], *a, *b),
        F::True | F::False | F::Unary(..) | F::Eq(..) | F::Neq(..) => f.clone(),
        F::Not(a) => F::not(reindex_binaries(a, perm)),
        F::And(a, b) => F::and(reindex_binaries(a, perm), reindex_binaries(b, perm)),
        F::Or(a, b) => F::or(reindex_binaries(a, perm), reindex_binaries(b, perm)),
        F::Implies(a, b) => F::implies(reindex_binaries(a, perm), reindex_binaries(b, perm)),
        F::Forall(v, a) => F::forall(*v, reindex_binaries(a, perm)),
        F::Exists(v, a) => F::exists(*v, reindex_binaries(a, perm)),
        F::Count { cmp, k, var, body } => F::Count {
            cmp: *cmp,
            k: k.clone(),
            var: *var,
            body: Box::new(reindex_binaries(body, perm)),
        },
        F::Pres { terms, cond } => F::Pres {
            terms: terms
                .iter()
                .map(|t| PresTerm {
                    coeff: t.coeff.clone(),
                    var: t.var,
                    body: reindex_binaries(&t.body, perm),
                })
                .collect(),
            cond: cond.clone(),
        },
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Target {
    Gp2,
    C2,
}

/// A fresh unary `pred` with `∀x (pred(x) → node)`, where `node` binds `y`
/// and its body is quantifier-free.
struct Definition {
    pred: usize,
    node: Formula,
}

struct Renamer {
    target: Target,
    unary: Vec<String>,
    binary: Vec<String>,
    defs: Vec<Definition>,
    fresh_unary: Vec<(String, Formula)>,
    fresh_binary: Vec<String>,
    counter: usize,
    taken: std::collections::HashSet<String>,
}

impl Renamer {
    fn new(target: Target, vocab: &Vocabulary) -> Self {
        let taken = vocab.unary_names().iter().chain(vocab.binary_names()).cloned().collect();
        Renamer {
            target,
            unary: vocab.unary_names().to_vec(),
            binary: vocab.binary_names().to_vec(),
            defs: Vec::new(),
            fresh_unary: Vec::new(),
            fresh_binary: Vec::new(),
            counter: 0,
            taken,
        }
    }

    fn fresh_name(&mut self, prefix: &str) -> String {
        loop {
            self.counter += 1;
            let name = format!("{prefix}{}", self.counter);
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }

    fn fresh_unary(&mut self, prefix: &str, def: Formula) -> usize {
        let name = self.fresh_name(prefix);
        self.unary.push(name.clone());
        self.fresh_unary.push((name, def));
        self.unary.len() - 1
    }

    fn fresh_binary(&mut self, prefix: &str) -> usize {
        let name = self.fresh_name(prefix);
        self.binary.push(name.clone());
        self.fresh_binary.push(name);
        self.binary.len() - 1
    }

    /// Replaces every quantified subformula of an NNF formula by a unary atom,
    /// innermost first.
    fn rename(&mut self, f: &Formula) -> Result<Formula, NormalizeError> {
        use Formula as F;
        Ok(match f {
            F::And(a, b) => F::and(self.rename(a)?, self.rename(b)?),
            F::Or(a, b) => F::or(self.rename(a)?, self.rename(b)?),
            F::Forall(v, a) => {
                let body = self.rename(a)?;
                self.define(F::forall(*v, body))?
            }
            F::Exists(v, a) => {
                let body = self.rename(a)?;
                self.define(F::exists(*v, body))?
            }
            F::Count { cmp, k, var, body } => {
                let body = self.rename(body)?;
                self.define(F::Count {
                    cmp: *cmp,
                    k: k.clone(),
                    var: *var,
                    body: Box::new(body),
                })?
            }
            F::Pres { terms, cond } => {
                let mut out = Vec::with_capacity(terms.len());
                for t in terms {
                    out.push(PresTerm {
                        coeff: t.coeff.clone(),
                        var: t.var,
                        body: self.rename(&t.body)?,
                    });
                }
                self.define(F::Pres {
                    terms: out,
                    cond: cond.clone(),
                })?
            }
            _ => f.clone(),
        })
    }

    fn bound_var(node: &Formula) -> Result<Var, NormalizeError> {
        match node {
            Formula::Forall(v, _) | Formula::Exists(v, _) | Formula::Count { var: v, .. } => Ok(*v),
            Formula::Pres { terms, .. } => {
                let v = terms.first().map_or(Var::Y, |t| t.var);
                if terms.iter().any(|t| t.var != v) {
                    return Err(NormalizeError::Unsupported(
                        "Presburger terms binding different variables".into(),
                    ));
                }
                Ok(v)
            }
            _ => unreachable!("not a quantifier"),
        }
    }

    /// Introduces a fresh unary for a quantifier node with a quantifier-free body.
    fn define(&mut self, node: Formula) -> Result<Formula, NormalizeError> {
        let fv = free_vars(&node);
        let bound = Self::bound_var(&node)?;
        let (occurrence_var, node) = match fv.iter().next() {
            Some(&w) if w == Var::Y => (w, node.swap_vars()),
            Some(&w) => (w, node),
            None if bound == Var::X => (Var::X, node.swap_vars()),
            None => (Var::X, node),
        };
        if fv.len() > 1 {
            return Err(NormalizeError::Unsupported("quantifier leaves two variables free".into()));
        }
        let closed = fv.is_empty();
        let prefix = match (&node, self.target, closed) {
            (Formula::Exists(..), Target::Gp2, true) => "_E",
            (Formula::Forall(..), Target::Gp2, true) => {
                return Err(NormalizeError::Unsupported(
                    "closed universal quantification below the top level of a gp2 sentence".into(),
                ))
            }
            _ => "_D",
        };
        let pred = self.fresh_unary(prefix, node.clone());
        self.defs.push(Definition { pred, node });
        Ok(Formula::Unary(pred, occurrence_var))
    }
}

fn guard_check(body: &Formula) -> Result<(), NormalizeError> {
    let ok = body.conjuncts().into_iter().any(|c| {
        matches!(c, Formula::Binary(_, a, b) if a != b)
    });
    if ok {
        Ok(())
    } else {
        Err(NormalizeError::NotGuarded(format!("{body:?}")))
    }
}

fn count_cmp(c: CountCmp) -> Cmp {
    match c {
        CountCmp::Ge => Cmp::Ge,
        CountCmp::Le => Cmp::Le,
        CountCmp::Eq => Cmp::Eq,
    }
}

fn make_row(terms: Vec<RowTerm>, cond: Condition) -> PresRow {
    let slack_count = if matches!(cond, Condition::Mod { .. }) { 2 } else { 0 };
    PresRow {
        terms,
        cond,
        slack_count,
    }
}

/// Row for a guarded node with free `x` and bound `y`.
fn gp2_row(node: &Formula) -> Result<PresRow, NormalizeError> {
    let row = match node {
        Formula::Pres { terms, cond } => make_row(
            terms
                .iter()
                .map(|t| RowTerm {
                    coeff: t.coeff.clone(),
                    body: t.body.clone(),
                })
                .collect(),
            cond.clone(),
        ),
        Formula::Count { cmp, k, body, .. } => make_row(
            vec![RowTerm {
                coeff: BigInt::one(),
                body: (**body).clone(),
            }],
            Condition::Cmp(count_cmp(*cmp), BigInt::from(k.clone())),
        ),
        Formula::Exists(_, body) => make_row(
            vec![RowTerm {
                coeff: BigInt::one(),
                body: (**body).clone(),
            }],
            Condition::Cmp(Cmp::Ge, BigInt::one()),
        ),
        Formula::Forall(_, body) => make_row(
            vec![RowTerm {
                coeff: BigInt::one(),
                body: nnf(body, true)?,
            }],
            Condition::Cmp(Cmp::Eq, BigInt::zero()),
        ),
        _ => unreachable!("not a quantifier"),
    };
    for t in &row.terms {
        guard_check(&t.body)?;
    }
    Ok(row)
}

fn unary_guarded_row(c: &Formula, n_original: usize) -> Option<(usize, &Formula)> {
    let Formula::Or(a, b) = c else { return None };
    for (l, r) in [(a, b), (b, a)] {
        if let Formula::Not(inner) = &**l {
            if let Formula::Unary(u, Var::X) = **inner {
                if u < n_original && is_quantifier(r) && free_vars(r) == [Var::X].into() {
                    return Some((u, r));
                }
            }
        }
    }
    None
}

/// Guard literal `¬R_i(x,y)` among the disjuncts of `body`, swapping variables
/// when the guard is written `¬R_i(y,x)`.
fn universal_guard(body: &Formula) -> Option<(usize, Formula)> {
    for d in body.disjuncts() {
        if let Formula::Not(inner) = d {
            match **inner {
                Formula::Binary(i, Var::X, Var::Y) => return Some((i, body.clone())),
                Formula::Binary(i, Var::Y, Var::X) => return Some((i, body.swap_vars())),
                _ => {}
            }
        }
    }
    None
}

/// Puts `∀v ψ` with `v` bound into the form `∀x ψ(x)`.
fn as_forall_x(c: &Formula) -> Option<Formula> {
    match c {
        Formula::Forall(Var::X, body) => Some((**body).clone()),
        Formula::Forall(Var::Y, _) => match c.swap_vars() {
            Formula::Forall(_, body) => Some(*body),
            _ => None,
        },
        _ => None,
    }
}

pub fn to_gp2_normal_form(p: &SourceProblem) -> Result<Gp2Normalized, NormalizeError> {
    if p.logic != LogicTag::Gp2 {
        return Err(NormalizeError::WrongLogic {
            expected: "gp2",
            found: p.logic.name(),
        });
    }
    let n0 = p.vocab.n();
    let mut r = Renamer::new(Target::Gp2, &p.vocab);
    let sentence = nnf(&p.sentence, false)?;
    let mut gamma = Vec::new();
    let mut alpha_parts: Vec<(usize, Formula)> = Vec::new();
    let mut attached: Vec<(usize, Formula)> = Vec::new();
    for top in sentence.conjuncts() {
        let Some(body) = (free_vars(top).is_empty()).then(|| as_forall_x(top)).flatten() else {
            gamma.push(r.rename(top)?);
            continue;
        };
        for c in body.conjuncts() {
            if let Formula::Forall(Var::Y, inner) = c {
                if let Some((i, inner)) = universal_guard(inner) {
                    let inner = r.rename(&inner)?;
                    gamma.push(inner.substitute(Var::Y, Var::X));
                    let rest: Vec<Formula> = inner
                        .disjuncts()
                        .into_iter()
                        .filter(|d| **d != Formula::not(Formula::Binary(i, Var::X, Var::Y)))
                        .cloned()
                        .collect();
                    alpha_parts.push((i, Formula::disj(rest)));
                    continue;
                }
            }
            if let Some((u, q)) = unary_guarded_row(c, n0) {
                if !attached.iter().any(|(v, _)| *v == u) {
                    let q = match q {
                        Formula::Pres { terms, cond } => {
                            let mut out = Vec::new();
                            for t in terms {
                                out.push(PresTerm {
                                    coeff: t.coeff.clone(),
                                    var: t.var,
                                    body: r.rename(&t.body)?,
                                });
                            }
                            Formula::Pres {
                                terms: out,
                                cond: cond.clone(),
                            }
                        }
                        Formula::Forall(v, b) => Formula::forall(*v, r.rename(b)?),
                        Formula::Exists(v, b) => Formula::exists(*v, r.rename(b)?),
                        Formula::Count { cmp, k, var, body } => Formula::Count {
                            cmp: *cmp,
                            k: k.clone(),
                            var: *var,
                            body: Box::new(r.rename(body)?),
                        },
                        _ => unreachable!(),
                    };
                    let q = if Renamer::bound_var(&q)? == Var::Y { q } else { q.swap_vars() };
                    if Renamer::bound_var(&q)? == Var::Y && free_vars(&q) == [Var::X].into() {
                        attached.push((u, q));
                        continue;
                    }
                    gamma.push(Formula::or(Formula::not(Formula::Unary(u, Var::X)), r.rename(&q)?));
                    continue;
                }
            }
            gamma.push(r.rename(c)?);
        }
    }
    // Rows: attached ones first, then one per definition.
    let mut row_for: Vec<(usize, PresRow)> = Vec::new();
    for (u, q) in &attached {
        row_for.push((*u, gp2_row(q)?));
    }
    let defs = std::mem::take(&mut r.defs);
    for d in &defs {
        if let (true, Formula::Exists(_, body)) = (free_vars(&d.node).is_empty(), &d.node) {
            // Closed existential: a fresh binary points at a witness.
            let name = format!("_R{}", r.unary[d.pred].trim_start_matches('_'));
            r.taken.insert(name.clone());
            r.binary.push(name.clone());
            r.fresh_binary.push(name);
            let rel = r.binary.len() - 1;
            row_for.push((
                d.pred,
                make_row(
                    vec![RowTerm {
                        coeff: BigInt::one(),
                        body: Formula::and(Formula::Binary(rel, Var::X, Var::Y), (**body).clone()),
                    }],
                    Condition::Cmp(Cmp::Eq, BigInt::one()),
                ),
            ));
        } else {
            row_for.push((d.pred, gp2_row(&d.node)?));
        }
    }
    let vocab = Vocabulary::new(r.unary.clone(), r.binary.clone()).expect("fresh names are unique");
    let mut rows: Vec<Option<PresRow>> = vec![None; vocab.n()];
    for (u, row) in row_for {
        rows[u] = Some(row);
    }
    let mut alphas = vec![Formula::True; vocab.m()];
    for (i, a) in alpha_parts {
        alphas[i] = Formula::conj_simplified([alphas[i].clone(), a]);
    }
    let nf = Gp2NormalForm {
        vocab: vocab.clone(),
        gamma: Formula::conj_simplified(gamma),
        alphas,
        rows,
    };
    let trace = NormalizationTrace {
        fresh_unary: r.fresh_unary,
        fresh_binary: r.fresh_binary,
        original_vocab: p.vocab.clone(),
        extended_vocab: vocab,
    };
    Ok(Gp2Normalized { nf, trace })
}

/// Recognizes `E=k y (R(x,y) & x != y)` over an original binary.
fn direct_count(c: &Formula, m_original: usize) -> Option<(usize, usize)> {
    let Formula::Count {
        cmp: CountCmp::Eq,
        k,
        var: Var::Y,
        body,
    } = c
    else {
        return None;
    };
    let Formula::And(a, b) = &**body else { return None };
    let neq = Formula::Neq(Var::X, Var::Y);
    let rel = match (&**a, &**b) {
        (Formula::Binary(i, Var::X, Var::Y), other) | (other, Formula::Binary(i, Var::X, Var::Y))
            if *other == neq =>
        {
            *i
        }
        _ => return None,
    };
    (rel < m_original).then_some(())?;
    Some((rel, nat_to_usize(k)?))
}

struct C2Builder {
    gamma: Vec<Formula>,
    alpha: Vec<Formula>,
    /// `(binary index, count)` in the order they were introduced.
    counted: Vec<(usize, usize)>,
}

impl C2Builder {
    fn emit_count(
        &mut self,
        r: &mut Renamer,
        d: &Formula,
        cmp: CountCmp,
        k: usize,
        beta: &Formula,
    ) -> Result<(), NormalizeError> {
        let beta_loop = beta.substitute(Var::Y, Var::X);
        let not_d = Formula::not(d.clone());
        for loop_holds in [false, true] {
            let mode = if loop_holds {
                Formula::not(beta_loop.clone())
            } else {
                beta_loop.clone()
            };
            let k_eff = k as i64 - loop_holds as i64;
            let prem = |extra: Formula| Formula::disj([not_d.clone(), mode.clone(), extra]);
            match cmp {
                CountCmp::Ge if k_eff <= 0 => {}
                CountCmp::Le | CountCmp::Eq if k_eff < 0 => self.gamma.push(Formula::or(not_d.clone(), mode.clone())),
                CountCmp::Le | CountCmp::Eq if k_eff == 0 => self.alpha.push(prem(nnf(beta, true)?)),
                _ => {
                    let f = r.fresh_binary("_C");
                    self.counted.push((f, k_eff as usize));
                    let fxy = Formula::Binary(f, Var::X, Var::Y);
                    let part = match cmp {
                        CountCmp::Ge => Formula::or(Formula::not(fxy), beta.clone()),
                        CountCmp::Le => Formula::or(nnf(beta, true)?, fxy),
                        CountCmp::Eq => Formula::and(
                            Formula::or(Formula::not(fxy.clone()), beta.clone()),
                            Formula::or(nnf(beta, true)?, fxy),
                        ),
                    };
                    self.alpha.push(prem(part));
                }
            }
        }
        Ok(())
    }

    fn emit(&mut self, r: &mut Renamer, pred: usize, node: &Formula) -> Result<(), NormalizeError> {
        let d = Formula::Unary(pred, Var::X);
        match node {
            Formula::Forall(_, beta) => {
                self.alpha.push(Formula::or(Formula::not(d.clone()), (**beta).clone()));
                self.gamma
                    .push(Formula::or(Formula::not(d), beta.substitute(Var::Y, Var::X)));
            }
            Formula::Exists(_, beta) => self.emit_count(r, &d, CountCmp::Ge, 1, beta)?,
            Formula::Count { cmp, k, body, .. } => self.emit_count(r, &d, *cmp, nat(k)?, body)?,
            Formula::Pres { .. } => {
                return Err(NormalizeError::Unsupported("Presburger quantifier in a C2 sentence".into()))
            }
            _ => unreachable!("not a quantifier"),
        }
        Ok(())
    }
}

/// Replaces quantified global term formulas by fresh unary atoms defined by
/// `∀x (G(x) ↔ φ(x))`, returning the extra sentence conjuncts.
fn rename_globals(
    globals: &[GlobalConstraint],
    r: &mut Renamer,
) -> (Vec<GlobalConstraint>, Vec<Formula>) {
    let mut extra = Vec::new();
    let mut out = Vec::new();
    for g in globals {
        let mut terms = Vec::new();
        for (c, f) in &g.terms {
            let f1 = if free_vars(f).contains(&Var::Y) && !free_vars(f).contains(&Var::X) {
                f.swap_vars()
            } else {
                f.clone()
            };
            if f1.is_quantifier_free() {
                terms.push((c.clone(), f1));
                continue;
            }
            let pred = r.fresh_unary("_G", f1.clone());
            let atom = Formula::Unary(pred, Var::X);
            extra.push(Formula::forall(
                Var::X,
                Formula::and(
                    Formula::implies(atom.clone(), f1.clone()),
                    Formula::implies(f1, atom.clone()),
                ),
            ));
            terms.push((c.clone(), atom));
        }
        out.push(GlobalConstraint {
            terms,
            cond: g.cond.clone(),
        });
    }
    (out, extra)
}

pub fn to_c2_normal_form(p: &SourceProblem) -> Result<C2Normalized, NormalizeError> {
    if p.logic == LogicTag::Gp2 {
        return Err(NormalizeError::WrongLogic {
            expected: "c2 or c2g",
            found: p.logic.name(),
        });
    }
    let m0 = p.vocab.m();
    let mut r = Renamer::new(Target::C2, &p.vocab);
    let (globals, extra) = rename_globals(&p.globals, &mut r);
    let sentence = nnf(&Formula::conj([p.sentence.clone()].into_iter().chain(extra)), false)?;
    let mut b = C2Builder {
        gamma: Vec::new(),
        alpha: Vec::new(),
        counted: Vec::new(),
    };
    for top in sentence.conjuncts() {
        let Some(body) = (free_vars(top).is_empty()).then(|| as_forall_x(top)).flatten() else {
            b.gamma.push(r.rename(top)?);
            continue;
        };
        for c in body.conjuncts() {
            if let Formula::Forall(Var::Y, beta) = c {
                let beta = r.rename(beta)?;
                b.gamma.push(beta.substitute(Var::Y, Var::X));
                b.alpha.push(beta);
                continue;
            }
            if let Some((rel, k)) = direct_count(c, m0) {
                if !b.counted.iter().any(|(i, _)| *i == rel) {
                    b.counted.push((rel, k));
                    continue;
                }
            }
            b.gamma.push(r.rename(c)?);
        }
    }
    let defs = std::mem::take(&mut r.defs);
    for d in &defs {
        b.emit(&mut r, d.pred, &d.node)?;
    }
    // Counted binaries first, in order of introduction.
    let m = r.binary.len();
    let mut order: Vec<usize> = b.counted.iter().map(|(i, _)| *i).collect();
    order.extend((0..m).filter(|i| !b.counted.iter().any(|(j, _)| j == i)));
    let mut perm = vec![0usize; m];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    let binary_names: Vec<String> = order.iter().map(|&i| r.binary[i].clone()).collect();
    let vocab = Vocabulary::new(r.unary.clone(), binary_names).expect("fresh names are unique");
    let counts: Vec<usize> = b.counted.iter().map(|(_, k)| *k).collect();
    let nf = C2NormalForm {
        vocab: vocab.clone(),
        gamma: reindex_binaries(&Formula::conj_simplified(b.gamma), &perm),
        alpha: reindex_binaries(&Formula::conj_simplified(b.alpha), &perm),
        counts: counts.clone(),
    };
    let globals = globals
        .into_iter()
        .map(|g| GlobalConstraint {
            terms: g.terms.iter().map(|(c, f)| (c.clone(), reindex_binaries(f, &perm))).collect(),
            cond: g.cond,
        })
        .collect();
    let fresh_unary = r
        .fresh_unary
        .iter()
        .map(|(n, f)| (n.clone(), reindex_binaries(f, &perm)))
        .collect();
    let max_k = counts.iter().copied().max().unwrap_or(0);
    let trace = NormalizationTrace {
        fresh_unary,
        fresh_binary: r.fresh_binary,
        original_vocab: p.vocab.clone(),
        extended_vocab: vocab,
    };
    Ok(C2Normalized {
        nf,
        trace,
        small_cases: (1..=max_k).collect(),
        globals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::semantics::{evaluate, find_model, OracleOptions};
    use crate::typespace::TypeSpace;

    fn problem(text: &str) -> SourceProblem {
        parse(text).unwrap()
    }

    fn sat_at(sentence: &Formula, globals: &[GlobalConstraint], vocab: &Vocabulary, size: usize) -> bool {
        let ts = TypeSpace::new(vocab.n(), vocab.m());
        let mut o = OracleOptions::up_to(size);
        o.min_size = size;
        find_model(ts, sentence, globals, &o).is_some()
    }

    #[test]
    fn percentage_rows_attach_directly() {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/percentage.tvl")).unwrap();
        let p = problem(&text);
        let out = to_gp2_normal_form(&p).unwrap();
        assert!(out.trace.fresh_unary.is_empty());
        assert!(out.trace.fresh_binary.is_empty());
        assert!(out.nf.rows.iter().all(|r| r.is_some()));
        assert_eq!(out.nf.rows[1].as_ref().unwrap().terms.len(), 1);
    }

    #[test]
    fn modulus_row_has_two_slacks() {
        let p = problem("vocab { unary U; binary R; }\nlogic gp2;\nsentence forall x . (U(x) -> P[1*#y(R(x,y)) mod 2 = 1]);");
        let out = to_gp2_normal_form(&p).unwrap();
        assert_eq!(out.nf.rows[0].as_ref().unwrap().slack_count, 2);
    }

    #[test]
    fn matching_is_already_normal() {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/matching.tvl")).unwrap();
        let out = to_c2_normal_form(&problem(&text)).unwrap();
        assert_eq!(out.nf.counts, vec![1]);
        assert_eq!(out.small_cases, vec![1]);
        assert!(out.trace.fresh_unary.is_empty());
    }

    #[test]
    fn at_most_zero_becomes_universal() {
        let p = problem("vocab { unary U; binary R; }\nlogic c2;\nsentence forall x . E<=0 y . R(x,y);");
        let out = to_c2_normal_form(&p).unwrap();
        assert!(out.nf.counts.is_empty());
        assert!(out.small_cases.is_empty());
    }

    #[test]
    fn c2_counting_equisatisfiable() {
        let cases = [
            "vocab { unary U; binary R; }\nlogic c2;\nsentence forall x . E>=2 y . R(x,y);",
            "vocab { unary U; binary R; }\nlogic c2;\nsentence (forall x . E<=1 y . R(x,y)) & (exists x . E>=2 y . R(y,x));",
            "vocab { unary U; binary R; }\nlogic c2;\nsentence forall x . (U(x) | E=2 y . (R(x,y) & U(y)));",
            "vocab { unary U; binary R; }\nlogic c2;\nsentence (exists x . U(x)) & (forall x . (U(x) -> E=1 y . R(x,y)));",
        ];
        for text in cases {
            let p = problem(text);
            let out = to_c2_normal_form(&p).unwrap();
            let nf = out.nf.to_formula();
            let start = out.small_cases.last().map_or(1, |k| k + 1);
            for size in start..=3 {
                assert_eq!(
                    sat_at(&p.sentence, &[], &p.vocab, size),
                    sat_at(&nf, &[], &out.nf.vocab, size),
                    "{text} at size {size}"
                );
            }
        }
    }

    #[test]
    fn gp2_equisatisfiable_and_pull_back() {
        let cases = [
            "vocab { unary U V; binary R; }\nlogic gp2;\nsentence (exists x . U(x)) & (forall x . (U(x) -> E>=1 y . (R(x,y) & V(y))));",
            "vocab { unary U V; binary R; }\nlogic gp2;\nsentence forall x . (U(x) -> forall y . (R(x,y) -> (V(y) & exists x . (R(y,x) & U(x)))));",
            "vocab { unary U; binary R S; }\nlogic gp2;\nsentence (forall x . forall y . (R(x,y) -> S(y,x))) & (exists x . exists y . (R(x,y) & x != y));",
        ];
        for text in cases {
            let p = problem(text);
            let out = to_gp2_normal_form(&p).unwrap();
            let nf = out.nf.to_formula();
            for size in 1..=3 {
                let ts = TypeSpace::new(out.nf.vocab.n(), out.nf.vocab.m());
                let mut o = OracleOptions::up_to(size);
                o.min_size = size;
                let m = find_model(ts, &nf, &[], &o);
                assert_eq!(sat_at(&p.sentence, &[], &p.vocab, size), m.is_some(), "{text} at size {size}");
                if let Some(m) = m {
                    assert!(evaluate(&pull_back_model(&m, &out.trace), &p.sentence, &[]));
                }
            }
        }
    }

    #[test]
    fn unguarded_rejected() {
        let p = SourceProblem {
            vocab: Vocabulary::anonymous(1, 1),
            sentence: Formula::forall(
                Var::X,
                Formula::Count {
                    cmp: CountCmp::Ge,
                    k: 1u32.into(),
                    var: Var::Y,
                    body: Box::new(Formula::Unary(0, Var::Y)),
                },
            ),
            globals: vec![],
            logic: LogicTag::Gp2,
        };
        assert!(matches!(to_gp2_normal_form(&p), Err(NormalizeError::NotGuarded(_))));
    }

    #[test]
    fn globals_with_quantifiers_renamed() {
        let p = problem("vocab { unary U; binary R; }\nlogic c2g;\nsentence forall x . forall y . (R(x,y) -> R(y,x));\nglobal 1*|exists y . R(x,y)| = 2;");
        let out = to_c2_normal_form(&p).unwrap();
        assert!(out.globals[0].terms[0].1.is_quantifier_free());
        for size in 1..=3 {
            assert_eq!(
                sat_at(&p.sentence, &p.globals, &p.vocab, size),
                sat_at(&out.nf.to_formula(), &out.globals, &out.nf.vocab, size),
                "size {size}"
            );
        }
    }
}
