//! Two-variable logic with counting: cores, extended behaviors, the per-core
//! spectrum formula, satisfiability with global constraints, and model
//! construction from a solution of the spectrum formula.
//!
//! A model is split into a small core `H` and the rest. Vertices outside the
//! core are described by extended behaviors: the 2-type towards each core
//! vertex plus counts of audible edges towards the rest. Two behaviors with the
//! same counted projection towards the core play identical roles in every
//! constraint, so the formula uses one variable per projection class.

use crate::ast::{Cmp, Condition, C2NormalForm, Formula, GlobalConstraint, Gp2NormalForm, PresRow, Vocabulary};
use crate::config::Config;
use crate::gp2solver::{self, Verdict};
use crate::linear::{
    integer_solve_bounded, lp_solve, minimal_solution_bound, ConstraintProgram, IntegerLinearSystem, LinearError,
    LpOutcome, ProgramNode, SearchOptions,
};
use crate::normalize::{pull_back_model, to_c2_normal_form, NormalizeError};
use crate::par;
use crate::parser::SourceProblem;
use crate::semantics::{cardinality_vector, evaluate, find_model, one_type_of, sorted_sequences, two_type_of, OracleOptions, SigmaStructure};
use crate::typespace::{
    backward_silent, classify_pairs, dual, forward_silent, OneType, TwoType, TwoTypeClass,
    TypeSpace, UniversalPart,
};
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum C2Error {
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("model construction stuck: {0}")]
    ConstructionStuck(String),
    #[error(transparent)]
    Linear(#[from] LinearError),
}

/// Node budget of one bounded search over a spectrum formula.
const PSI_NODE_BUDGET: usize = 200_000;
/// Cap on behavior classes of one core.
const CLASS_BUDGET: usize = 50_000;
/// Cap on cores tried with a non-empty outside part.
const CORE_BUDGET: usize = 4_000;
/// Totals up to this size forced by the globals are searched exhaustively,
/// even beyond the configured core cap.
const SMALL_TOTAL: usize = 8;

/// Count vector, its sum and the core threshold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountData {
    pub counts: Vec<usize>,
    pub total: usize,
    /// `(2K+1)^2`, or 2 when `K = 0`.
    pub threshold: usize,
}

impl CountData {
    pub fn new(nf: &C2NormalForm) -> CountData {
        let total = nf.total_count();
        let threshold = if total == 0 { 2 } else { (2 * total + 1) * (2 * total + 1) };
        CountData {
            counts: nf.counts.clone(),
            total,
            threshold,
        }
    }

    pub fn counted(&self) -> usize {
        self.counts.len()
    }
}

fn fwd_bits(eta: TwoType, counted: usize) -> u32 {
    (0..counted).filter(|&i| eta.forward(i)).fold(0, |a, i| a | 1 << i)
}

fn bwd_bits(eta: TwoType, counted: usize) -> u32 {
    (0..counted).filter(|&i| eta.backward(i)).fold(0, |a, i| a | 1 << i)
}

/// Every vertex has a compatible 1-type and every pair a compatible 2-type.
pub fn is_partial_model(nf: &C2NormalForm, h: &SigmaStructure) -> bool {
    let n = h.size();
    (0..n).all(|v| nf.one_type_compatible(one_type_of(h, v)))
        && (0..n).all(|u| {
            (u + 1..n).all(|v| {
                let eta = two_type_of(h, u, v).expect("distinct vertices");
                nf.triple_compatible(one_type_of(h, u), eta, one_type_of(h, v))
            })
        })
}

/// A partial model with its 1-type counts and, per vertex, the counts still
/// missing after the edges inside the core.
#[derive(Clone, Debug)]
pub struct PartialModel {
    pub structure: SigmaStructure,
    pub types: Vec<OneType>,
    pub type_counts: BTreeMap<OneType, usize>,
    /// `k - Σ_{u in core} forward(v,u)`, per vertex and counted binary.
    pub residual: Vec<Vec<i64>>,
}

impl PartialModel {
    pub fn new(nf: &C2NormalForm, h: SigmaStructure) -> Option<PartialModel> {
        if !is_partial_model(nf, &h) {
            return None;
        }
        let n = h.size();
        let types: Vec<OneType> = (0..n).map(|v| one_type_of(&h, v)).collect();
        let mut type_counts = BTreeMap::new();
        for &t in &types {
            *type_counts.entry(t).or_insert(0) += 1;
        }
        let residual = (0..n)
            .map(|v| {
                nf.counts
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| k as i64 - (0..n).filter(|&u| u != v && h.binary(i, v, u)).count() as i64)
                    .collect()
            })
            .collect();
        Some(PartialModel {
            structure: h,
            types,
            type_counts,
            residual,
        })
    }

    pub fn size(&self) -> usize {
        self.types.len()
    }

    /// The core satisfies the counting condition on its own.
    pub fn is_complete(&self) -> bool {
        self.residual.iter().flatten().all(|&r| r == 0)
    }
}

/// Result of the core selection rounds.
#[derive(Clone, Debug)]
pub struct EllCore {
    /// Selected vertices of the input, ascending.
    pub vertices: Vec<usize>,
    pub structure: SigmaStructure,
    pub rounds: usize,
}

type Triple = (OneType, TwoType, OneType);

fn outside_counts(g: &SigmaStructure, outside: &[usize]) -> (BTreeMap<OneType, usize>, BTreeMap<Triple, usize>) {
    let mut ones = BTreeMap::new();
    let mut triples = BTreeMap::new();
    for &v in outside {
        *ones.entry(one_type_of(g, v)).or_insert(0) += 1;
    }
    for &v in outside {
        for &u in outside {
            if u != v {
                let t = (one_type_of(g, v), two_type_of(g, v, u).expect("distinct"), one_type_of(g, u));
                *triples.entry(t).or_insert(0) += 1;
            }
        }
    }
    (ones, triples)
}

/// Repeatedly moves into the core every vertex of a 1-type, or every vertex of
/// a pair realizing a triple, that occurs outside the core fewer than `ell`
/// times. Selection order is by 1-type mask, then by triple.
pub fn ell_core(g: &SigmaStructure, ell: usize) -> EllCore {
    let mut inside = vec![false; g.size()];
    let mut rounds = 0;
    loop {
        let outside: Vec<usize> = (0..g.size()).filter(|&v| !inside[v]).collect();
        let (ones, triples) = outside_counts(g, &outside);
        if let Some((&pi, _)) = ones.iter().find(|(_, &c)| c >= 1 && c < ell) {
            for &v in &outside {
                if one_type_of(g, v) == pi {
                    inside[v] = true;
                }
            }
        } else if let Some((&t, _)) = triples.iter().find(|(_, &c)| c >= 1 && c < ell) {
            for &v in &outside {
                for &u in &outside {
                    if u != v
                        && one_type_of(g, v) == t.0
                        && one_type_of(g, u) == t.2
                        && two_type_of(g, v, u).expect("distinct") == t.1
                    {
                        inside[v] = true;
                        inside[u] = true;
                    }
                }
            }
        } else {
            break;
        }
        rounds += 1;
    }
    let vertices: Vec<usize> = (0..g.size()).filter(|&v| inside[v]).collect();
    EllCore {
        structure: g.induced(&vertices),
        vertices,
        rounds,
    }
}

/// Checks the core conditions on the vertices of `g` outside `core`.
pub fn audit_core(g: &SigmaStructure, core: &[usize], ell: usize) -> bool {
    let core: HashSet<usize> = core.iter().copied().collect();
    let outside: Vec<usize> = (0..g.size()).filter(|v| !core.contains(v)).collect();
    let (ones, triples) = outside_counts(g, &outside);
    ones.values().chain(triples.values()).all(|&c| c == 0 || c >= ell)
}

/// The size bound on small cores, `2^(2n+4m+2) · ell`.
pub fn core_size_bound(ts: &TypeSpace, ell: usize) -> BigInt {
    BigInt::from(ell) << (2 * ts.n + 4 * ts.m + 2)
}

/// For two 1-types without a compatible silent 2-type that are both realized,
/// one of them is realized at most `2K+1` times.
pub fn noisy_pair_bound_holds(nf: &C2NormalForm, g: &SigmaStructure) -> bool {
    let cls = classify_pairs(nf);
    let bound = 2 * nf.total_count() + 1;
    let mut counts: BTreeMap<OneType, usize> = BTreeMap::new();
    for v in 0..g.size() {
        *counts.entry(one_type_of(g, v)).or_insert(0) += 1;
    }
    for (&a, &ca) in &counts {
        for (&b, &cb) in &counts {
            if cls.position(a).is_none() || cls.position(b).is_none() {
                continue;
            }
            if cls.noisy(a, b) && ca.min(cb) > bound {
                return false;
            }
        }
    }
    true
}

/// An extended behavior: the 2-type from the vertex to each core vertex, and
/// counts of non-forward-silent edges by (2-type, neighbour 1-type).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtendedBehavior {
    pub g: Vec<TwoType>,
    pub f: Vec<((TwoType, OneType), u32)>,
}

/// Extended behaviors grouped by their counted projection towards the core.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BehaviorClass {
    /// Per core vertex: forward and backward counted bits.
    pub projection: Vec<(u32, u32)>,
    /// A compatible 2-type per core vertex with that projection.
    pub g: Vec<TwoType>,
    pub f: Vec<((TwoType, OneType), u32)>,
}

impl BehaviorClass {
    pub fn f_at(&self, eta: TwoType, pi: OneType) -> u32 {
        self.f
            .binary_search_by(|(k, _)| k.cmp(&(eta, pi)))
            .map_or(0, |i| self.f[i].1)
    }
}

struct Ctx<'a> {
    nf: &'a C2NormalForm,
    ts: TypeSpace,
    cls: TwoTypeClass,
    data: CountData,
}

impl<'a> Ctx<'a> {
    fn new(nf: &'a C2NormalForm) -> Self {
        Ctx {
            nf,
            ts: nf.type_space(),
            cls: classify_pairs(nf),
            data: CountData::new(nf),
        }
    }

    fn k(&self) -> Vec<i64> {
        self.data.counts.iter().map(|&k| k as i64).collect()
    }

    fn compatible(&self, a: OneType, b: OneType) -> Vec<TwoType> {
        self.cls.get(a, b).all().collect()
    }

    /// Non-forward-silent compatible entries `(η, π')` for vertices of type `pi`.
    fn audible_entries(&self, pi: OneType) -> Vec<(TwoType, OneType)> {
        let mut out = Vec::new();
        for eta in self.ts.two_types() {
            if forward_silent(eta, self.data.counted()) {
                continue;
            }
            for &p2 in &self.cls.one_types {
                if self.nf.triple_compatible(pi, eta, p2) {
                    out.push((eta, p2));
                }
            }
        }
        out
    }

    fn enumerate_f(
        &self,
        entries: &[(TwoType, OneType)],
        residual: Vec<i64>,
        budget: usize,
        out: &mut Vec<Vec<((TwoType, OneType), u32)>>,
    ) -> Result<(), C2Error> {
        fn rec(
            counted: usize,
            entries: &[(TwoType, OneType)],
            idx: usize,
            residual: &mut Vec<i64>,
            cur: &mut Vec<((TwoType, OneType), u32)>,
            budget: usize,
            out: &mut Vec<Vec<((TwoType, OneType), u32)>>,
        ) -> Result<(), C2Error> {
            if residual.iter().all(|&r| r == 0) {
                if out.len() >= budget {
                    return Err(C2Error::BudgetExceeded("extended behaviors".into()));
                }
                let mut f = cur.clone();
                f.sort();
                out.push(f);
                return Ok(());
            }
            if idx == entries.len() {
                return Ok(());
            }
            let (eta, _) = entries[idx];
            let bits: Vec<usize> = (0..counted).filter(|&i| eta.forward(i)).collect();
            let max = bits.iter().map(|&i| residual[i]).min().unwrap_or(0).max(0);
            // Larger counts first keeps the output in a fixed order.
            rec(counted, entries, idx + 1, residual, cur, budget, out)?;
            for c in 1..=max {
                for &i in &bits {
                    residual[i] -= 1;
                }
                cur.push((entries[idx], c as u32));
                rec(counted, entries, idx + 1, residual, cur, budget, out)?;
                cur.pop();
            }
            for &i in &bits {
                residual[i] += max;
            }
            Ok(())
        }
        let mut residual = residual;
        rec(self.data.counted(), entries, 0, &mut residual, &mut Vec::new(), budget, out)
    }
}

/// All extended behaviors of `pi` towards `h` compatible with the sentence, in
/// lexicographic order.
pub fn extended_behaviors(
    nf: &C2NormalForm,
    pi: OneType,
    h: &PartialModel,
    budget: usize,
) -> Result<Vec<ExtendedBehavior>, C2Error> {
    let ctx = Ctx::new(nf);
    if !nf.one_type_compatible(pi) {
        return Ok(Vec::new());
    }
    let options: Vec<Vec<TwoType>> = h.types.iter().map(|&t| ctx.compatible(pi, t)).collect();
    let entries = ctx.audible_entries(pi);
    let counted = ctx.data.counted();
    let k = ctx.k();
    let mut out = Vec::new();
    let mut g = Vec::with_capacity(options.len());
    fn rec(
        ctx: &Ctx,
        options: &[Vec<TwoType>],
        entries: &[(TwoType, OneType)],
        counted: usize,
        residual: Vec<i64>,
        g: &mut Vec<TwoType>,
        budget: usize,
        out: &mut Vec<ExtendedBehavior>,
    ) -> Result<(), C2Error> {
        if g.len() == options.len() {
            let mut fs = Vec::new();
            ctx.enumerate_f(entries, residual, budget, &mut fs)?;
            fs.sort();
            for f in fs {
                if out.len() >= budget {
                    return Err(C2Error::BudgetExceeded("extended behaviors".into()));
                }
                out.push(ExtendedBehavior { g: g.clone(), f });
            }
            return Ok(());
        }
        for &eta in &options[g.len()] {
            let mut r = residual.clone();
            for (i, ri) in r.iter_mut().enumerate().take(counted) {
                *ri -= eta.forward(i) as i64;
            }
            if r.iter().any(|&v| v < 0) {
                continue;
            }
            g.push(eta);
            rec(ctx, options, entries, counted, r, g, budget, out)?;
            g.pop();
        }
        Ok(())
    }
    rec(&ctx, &options, &entries, counted, k, &mut g, budget, &mut out)?;
    Ok(out)
}

fn behavior_classes(ctx: &Ctx, pi: OneType, h: &PartialModel, budget: usize) -> Result<Vec<BehaviorClass>, C2Error> {
    let counted = ctx.data.counted();
    let mut options: Vec<Vec<((u32, u32), TwoType)>> = Vec::new();
    for (v, &t) in h.types.iter().enumerate() {
        let mut by_proj: BTreeMap<(u32, u32), TwoType> = BTreeMap::new();
        for eta in ctx.compatible(pi, t) {
            let p = (fwd_bits(eta, counted), bwd_bits(eta, counted));
            // An edge the core vertex would count is useless once its count is met.
            if (0..counted).any(|i| p.1 >> i & 1 == 1 && h.residual[v][i] <= 0) {
                continue;
            }
            by_proj.entry(p).or_insert(eta);
        }
        if by_proj.is_empty() {
            return Ok(Vec::new());
        }
        options.push(by_proj.into_iter().collect());
    }
    let entries = ctx.audible_entries(pi);
    let mut out = Vec::new();
    let mut choice: Vec<((u32, u32), TwoType)> = Vec::new();
    fn rec(
        ctx: &Ctx,
        options: &[Vec<((u32, u32), TwoType)>],
        entries: &[(TwoType, OneType)],
        residual: Vec<i64>,
        choice: &mut Vec<((u32, u32), TwoType)>,
        budget: usize,
        out: &mut Vec<BehaviorClass>,
    ) -> Result<(), C2Error> {
        if choice.len() == options.len() {
            let mut fs = Vec::new();
            ctx.enumerate_f(entries, residual, budget, &mut fs)?;
            fs.sort();
            for f in fs {
                if out.len() >= budget {
                    return Err(C2Error::BudgetExceeded("behavior classes".into()));
                }
                out.push(BehaviorClass {
                    projection: choice.iter().map(|c| c.0).collect(),
                    g: choice.iter().map(|c| c.1).collect(),
                    f,
                });
            }
            return Ok(());
        }
        for &opt in &options[choice.len()] {
            let r: Vec<i64> = residual
                .iter()
                .enumerate()
                .map(|(i, &v)| v - (opt.0 .0 >> i & 1) as i64)
                .collect();
            if r.iter().any(|&v| v < 0) {
                continue;
            }
            choice.push(opt);
            rec(ctx, options, entries, r, choice, budget, out)?;
            choice.pop();
        }
        Ok(())
    }
    rec(ctx, &options, &entries, ctx.k(), &mut choice, budget, &mut out)?;
    Ok(out)
}

/// The spectrum formula of one core, as six sub-programs over shared
/// variables: `x_π` per compatible 1-type, then one `y` per behavior class,
/// then parity witnesses.
#[derive(Clone, Debug)]
pub struct SpectrumFormula {
    pub core: PartialModel,
    pub data: CountData,
    pub x_types: Vec<OneType>,
    pub classes: Vec<(OneType, BehaviorClass)>,
    /// Class variables of each entry of `x_types`.
    pub class_ranges: Vec<Range<usize>>,
    pub var_count: usize,
    pub sum: ProgramNode,
    pub comp: ProgramNode,
    pub silent: ProgramNode,
    pub big: ProgramNode,
    pub match_audible: ProgramNode,
    pub match_one_way: ProgramNode,
}

impl SpectrumFormula {
    pub fn x_var(&self, pi: OneType) -> Option<usize> {
        self.x_types.binary_search(&pi).ok()
    }

    pub fn y_var(&self, class: usize) -> usize {
        self.x_types.len() + class
    }

    pub fn program(&self) -> ConstraintProgram {
        ConstraintProgram {
            var_count: self.var_count,
            root: ProgramNode::And(vec![
                self.sum.clone(),
                self.comp.clone(),
                self.silent.clone(),
                self.big.clone(),
                self.match_audible.clone(),
                self.match_one_way.clone(),
            ]),
        }
    }
}

fn sys_row(var_count: usize, terms: &[(usize, i64)], rel: Cmp, rhs: i64) -> IntegerLinearSystem {
    let mut s = IntegerLinearSystem::new(var_count);
    let t: Vec<(usize, BigInt)> = terms.iter().map(|&(v, c)| (v, BigInt::from(c))).collect();
    s.push_sparse(&t, rel, BigInt::from(rhs));
    s
}

fn zero_or_at_least(var_count: usize, terms: &[(usize, i64)], threshold: usize) -> ProgramNode {
    ProgramNode::Or(vec![
        ProgramNode::Sys(sys_row(var_count, terms, Cmp::Eq, 0)),
        ProgramNode::Sys(sys_row(var_count, terms, Cmp::Ge, threshold as i64)),
    ])
}

pub fn build_psi(nf: &C2NormalForm, h: &PartialModel) -> Result<SpectrumFormula, C2Error> {
    build_psi_ctx(&Ctx::new(nf), h)
}

fn build_psi_ctx(ctx: &Ctx, h: &PartialModel) -> Result<SpectrumFormula, C2Error> {
    let x_types = ctx.cls.one_types.clone();
    let mut classes = Vec::new();
    let mut class_ranges = Vec::new();
    for &pi in &x_types {
        let start = classes.len();
        for c in behavior_classes(ctx, pi, h, CLASS_BUDGET)? {
            classes.push((pi, c));
        }
        if classes.len() > CLASS_BUDGET {
            return Err(C2Error::BudgetExceeded("behavior classes".into()));
        }
        class_ranges.push(start..classes.len());
    }
    let nx = x_types.len();
    let counted = ctx.data.counted();
    let ell = ctx.data.threshold;
    let y = |c: usize| nx + c;
    // Parity witnesses are counted first so every system has its final width.
    let mut parity_tuples = Vec::new();
    let both_audible = |eta: TwoType| !forward_silent(eta, counted) && !backward_silent(eta, counted);
    for (i1, &p1) in x_types.iter().enumerate() {
        for &p2 in &x_types {
            for eta in ctx.ts.two_types().filter(|&e| both_audible(e)) {
                if !ctx.nf.triple_compatible(p1, eta, p2) {
                    continue;
                }
                let t = (p1, eta, p2);
                let d = (p2, dual(eta), p1);
                if t > d {
                    continue;
                }
                parity_tuples.push((i1, t, d));
            }
        }
    }
    let self_dual = parity_tuples.iter().filter(|(_, t, d)| t == d).count();
    let var_count = nx + classes.len() + self_dual;
    let idx_of = |p: OneType| x_types.binary_search(&p).expect("compatible");

    let mut sum = IntegerLinearSystem::new(var_count);
    for (i, &pi) in x_types.iter().enumerate() {
        let mut terms = vec![(i, BigInt::one())];
        terms.extend(class_ranges[i].clone().map(|c| (y(c), -BigInt::one())));
        let s = *h.type_counts.get(&pi).unwrap_or(&0);
        sum.push_sparse(&terms, Cmp::Eq, BigInt::from(s));
    }

    let mut comp = IntegerLinearSystem::new(var_count);
    for (v, res) in h.residual.iter().enumerate() {
        for (i, &r) in res.iter().enumerate() {
            let terms: Vec<(usize, BigInt)> = classes
                .iter()
                .enumerate()
                .filter(|(_, (_, c))| c.projection[v].1 >> i & 1 == 1)
                .map(|(j, _)| (y(j), BigInt::one()))
                .collect();
            comp.push_sparse(&terms, Cmp::Eq, BigInt::from(r));
        }
    }

    let mut silent = Vec::new();
    for (i1, &p1) in x_types.iter().enumerate() {
        for (i2, &p2) in x_types.iter().enumerate().skip(i1) {
            if !ctx.cls.noisy(p1, p2) {
                continue;
            }
            let t1: Vec<(usize, i64)> = class_ranges[i1].clone().map(|c| (y(c), 1)).collect();
            let t2: Vec<(usize, i64)> = class_ranges[i2].clone().map(|c| (y(c), 1)).collect();
            if t1.is_empty() || t2.is_empty() {
                continue;
            }
            if i1 == i2 {
                silent.push(ProgramNode::Sys(sys_row(var_count, &t1, Cmp::Eq, 0)));
            } else {
                silent.push(ProgramNode::Or(vec![
                    ProgramNode::Sys(sys_row(var_count, &t1, Cmp::Eq, 0)),
                    ProgramNode::Sys(sys_row(var_count, &t2, Cmp::Eq, 0)),
                ]));
            }
        }
    }

    let mut big = Vec::new();
    for r in &class_ranges {
        let t: Vec<(usize, i64)> = r.clone().map(|c| (y(c), 1)).collect();
        if !t.is_empty() {
            big.push(zero_or_at_least(var_count, &t, ell));
        }
    }
    let f_terms = |i1: usize, eta: TwoType, p2: OneType| -> Vec<(usize, i64)> {
        class_ranges[i1]
            .clone()
            .filter_map(|c| {
                let f = classes[c].1.f_at(eta, p2);
                (f > 0).then_some((y(c), f as i64))
            })
            .collect()
    };
    for (i1, &p1) in x_types.iter().enumerate() {
        for &p2 in &x_types {
            for eta in ctx.ts.two_types().filter(|&e| both_audible(e)) {
                if !ctx.nf.triple_compatible(p1, eta, p2) {
                    continue;
                }
                let t = f_terms(i1, eta, p2);
                if !t.is_empty() {
                    big.push(zero_or_at_least(var_count, &t, ell));
                }
            }
        }
    }

    let mut matching = IntegerLinearSystem::new(var_count);
    let mut next_parity = nx + classes.len();
    for &(i1, t, d) in &parity_tuples {
        let mut terms: Vec<(usize, BigInt)> = f_terms(i1, t.1, t.2)
            .into_iter()
            .map(|(v, c)| (v, BigInt::from(c)))
            .collect();
        if t == d {
            terms.push((next_parity, BigInt::from(-2)));
            next_parity += 1;
        } else {
            let i2 = idx_of(d.0);
            terms.extend(f_terms(i2, d.1, d.2).into_iter().map(|(v, c)| (v, BigInt::from(-c))));
        }
        if terms.iter().any(|(v, _)| *v < nx + classes.len()) {
            matching.push_sparse(&terms, Cmp::Eq, BigInt::zero());
        }
    }

    let mut one_way = Vec::new();
    for (i1, &p1) in x_types.iter().enumerate() {
        for (i2, &p2) in x_types.iter().enumerate() {
            for eta in ctx.ts.two_types() {
                if forward_silent(eta, counted) || !backward_silent(eta, counted) {
                    continue;
                }
                if !ctx.nf.triple_compatible(p1, eta, p2) {
                    continue;
                }
                let consequent: Vec<usize> = f_terms(i1, eta, p2).into_iter().map(|(v, _)| v).collect();
                if consequent.is_empty() {
                    continue;
                }
                let antecedent: Vec<usize> = class_ranges[i2].clone().map(y).collect();
                if antecedent.is_empty() {
                    let mut s = IntegerLinearSystem::new(var_count);
                    for v in consequent {
                        s.push_sparse(&[(v, BigInt::one())], Cmp::Eq, BigInt::zero());
                    }
                    one_way.push(ProgramNode::Sys(s));
                } else {
                    one_way.push(ProgramNode::ZeroImp { antecedent, consequent });
                }
            }
        }
    }

    Ok(SpectrumFormula {
        core: h.clone(),
        data: ctx.data.clone(),
        x_types,
        classes,
        class_ranges,
        var_count,
        sum: ProgramNode::Sys(sum),
        comp: ProgramNode::Sys(comp),
        silent: ProgramNode::And(silent),
        big: ProgramNode::And(big),
        match_audible: ProgramNode::Sys(matching),
        match_one_way: ProgramNode::And(one_way),
    })
}

fn widen(node: &ProgramNode, var_count: usize) -> ProgramNode {
    match node {
        ProgramNode::Sys(s) => {
            let mut w = IntegerLinearSystem::new(var_count);
            for r in &s.rows {
                let mut c = r.coeffs.clone();
                c.resize(var_count, BigInt::zero());
                w.push(c, r.rel, r.rhs.clone());
            }
            ProgramNode::Sys(w)
        }
        ProgramNode::And(v) => ProgramNode::And(v.iter().map(|n| widen(n, var_count)).collect()),
        ProgramNode::Or(v) => ProgramNode::Or(v.iter().map(|n| widen(n, var_count)).collect()),
        z @ ProgramNode::ZeroImp { .. } => z.clone(),
    }
}

/// Coefficient of each `x_π` in a global constraint.
fn global_coeffs(ts: &TypeSpace, x_types: &[OneType], g: &GlobalConstraint) -> Vec<BigInt> {
    x_types
        .iter()
        .map(|&pi| {
            g.terms
                .iter()
                .filter(|(_, f)| ts.eval_single(f, pi))
                .map(|(c, _)| c.clone())
                .sum()
        })
        .collect()
}

/// Rows for the globals over the first `x_types.len()` variables; modulus
/// constraints use two slack columns starting at `slack_start`.
fn global_rows(
    ts: &TypeSpace,
    x_types: &[OneType],
    globals: &[GlobalConstraint],
    var_count: usize,
    slack_start: usize,
) -> IntegerLinearSystem {
    let mut s = IntegerLinearSystem::new(var_count);
    let mut slack = slack_start;
    for g in globals {
        let coeffs = global_coeffs(ts, x_types, g);
        let mut terms: Vec<(usize, BigInt)> = coeffs.into_iter().enumerate().collect();
        match &g.cond {
            Condition::Cmp(c, d) => s.push_sparse(&terms, *c, d.clone()),
            Condition::Mod { residue, modulus } => {
                let p = BigInt::from(modulus.clone());
                terms.push((slack, -p.clone()));
                terms.push((slack + 1, p));
                slack += 2;
                s.push_sparse(&terms, Cmp::Eq, BigInt::from(residue.clone()));
            }
        }
    }
    s
}

fn mod_count(globals: &[GlobalConstraint]) -> usize {
    globals.iter().filter(|g| matches!(g.cond, Condition::Mod { .. })).count()
}

/// Canonical cores: sorted 1-type sequences with compatible 2-types, up to
/// permutations inside blocks of equal 1-types.
struct CoreSearch<'a> {
    ctx: &'a Ctx<'a>,
    types: Vec<OneType>,
    pairs: Vec<(usize, usize)>,
    options: Vec<Vec<TwoType>>,
    complete: bool,
}

impl<'a> CoreSearch<'a> {
    fn new(ctx: &'a Ctx<'a>, types: &[OneType], complete: bool) -> Option<Self> {
        let n = types.len();
        let mut pairs = Vec::new();
        for j in 1..n {
            for i in 0..j {
                pairs.push((i, j));
            }
        }
        let options: Vec<Vec<TwoType>> = pairs.iter().map(|&(i, j)| ctx.compatible(types[i], types[j])).collect();
        if options.iter().any(|o| o.is_empty()) {
            return None;
        }
        Some(CoreSearch {
            ctx,
            types: types.to_vec(),
            pairs,
            options,
            complete,
        })
    }

    fn structure(&self, etas: &[TwoType]) -> SigmaStructure {
        let ts = self.ctx.ts;
        let mut s = SigmaStructure::empty(ts.n, ts.m, self.types.len());
        for (v, &t) in self.types.iter().enumerate() {
            s.set_one_type(v, t);
        }
        for (&(i, j), &eta) in self.pairs.iter().zip(etas) {
            s.set_two_type(i, j, eta);
        }
        s
    }

    /// Visits assignments until `visit` returns `Some`.
    fn run<R>(&self, visit: &mut dyn FnMut(&[TwoType]) -> Option<R>) -> Option<R> {
        let n = self.types.len();
        let counted = self.ctx.data.counted();
        let k = self.ctx.k();
        let mut fwd = vec![vec![0i64; counted]; n];
        let mut remaining = vec![n.saturating_sub(1) as i64; n];
        let mut etas = Vec::with_capacity(self.pairs.len());
        self.rec(0, &k, &mut fwd, &mut remaining, &mut etas, visit)
    }

    fn rec<R>(
        &self,
        idx: usize,
        k: &[i64],
        fwd: &mut Vec<Vec<i64>>,
        remaining: &mut Vec<i64>,
        etas: &mut Vec<TwoType>,
        visit: &mut dyn FnMut(&[TwoType]) -> Option<R>,
    ) -> Option<R> {
        if idx == self.pairs.len() {
            if self.complete && fwd.iter().any(|f| f.as_slice() != k) {
                return None;
            }
            return visit(etas);
        }
        let (i, j) = self.pairs[idx];
        let counted = k.len();
        remaining[i] -= 1;
        remaining[j] -= 1;
        for &eta in &self.options[idx] {
            let mut ok = true;
            for c in 0..counted {
                fwd[i][c] += eta.forward(c) as i64;
                fwd[j][c] += eta.backward(c) as i64;
            }
            for c in 0..counted {
                for v in [i, j] {
                    if fwd[v][c] > k[c] || (self.complete && fwd[v][c] + remaining[v] < k[c]) {
                        ok = false;
                    }
                }
            }
            if ok {
                etas.push(eta);
                let r = self.rec(idx + 1, k, fwd, remaining, etas, visit);
                etas.pop();
                if r.is_some() {
                    for c in 0..counted {
                        fwd[i][c] -= eta.forward(c) as i64;
                        fwd[j][c] -= eta.backward(c) as i64;
                    }
                    remaining[i] += 1;
                    remaining[j] += 1;
                    return r;
                }
            }
            for c in 0..counted {
                fwd[i][c] -= eta.forward(c) as i64;
                fwd[j][c] -= eta.backward(c) as i64;
            }
        }
        remaining[i] += 1;
        remaining[j] += 1;
        None
    }

    /// Lexicographically least 2-type sequence over block permutations, when
    /// there are few enough of them.
    fn canonical_key(&self, etas: &[TwoType]) -> Vec<u32> {
        let n = self.types.len();
        let mut blocks: Vec<Range<usize>> = Vec::new();
        let mut start = 0;
        for v in 1..=n {
            if v == n || self.types[v] != self.types[start] {
                blocks.push(start..v);
                start = v;
            }
        }
        let perms: usize = blocks.iter().map(|b| (1..=b.len()).product::<usize>()).product();
        let mut matrix = vec![vec![TwoType::NULL; n]; n];
        for (&(i, j), &eta) in self.pairs.iter().zip(etas) {
            matrix[i][j] = eta;
            matrix[j][i] = dual(eta);
        }
        let key_of = |perm: &[usize]| -> Vec<u32> { self.pairs.iter().map(|&(i, j)| matrix[perm[i]][perm[j]].0).collect() };
        let identity: Vec<usize> = (0..n).collect();
        if perms > 720 {
            return key_of(&identity);
        }
        let mut best = key_of(&identity);
        let mut perm = identity.clone();
        fn walk(
            blocks: &[Range<usize>],
            b: usize,
            perm: &mut Vec<usize>,
            key_of: &dyn Fn(&[usize]) -> Vec<u32>,
            best: &mut Vec<u32>,
        ) {
            if b == blocks.len() {
                let k = key_of(perm);
                if k < *best {
                    *best = k;
                }
                return;
            }
            let r = blocks[b].clone();
            permute(blocks, b, r.start, r.end, perm, key_of, best);
        }
        fn permute(
            blocks: &[Range<usize>],
            b: usize,
            at: usize,
            end: usize,
            perm: &mut Vec<usize>,
            key_of: &dyn Fn(&[usize]) -> Vec<u32>,
            best: &mut Vec<u32>,
        ) {
            if at == end {
                walk(blocks, b + 1, perm, key_of, best);
                return;
            }
            for i in at..end {
                perm.swap(at, i);
                permute(blocks, b, at + 1, end, perm, key_of, best);
                perm.swap(at, i);
            }
        }
        walk(&blocks, 0, &mut perm, &key_of, &mut best);
        best
    }
}

/// Canonical partial models on the 1-type sequence `types`.
fn cores_on(ctx: &Ctx, types: &[OneType], limit: usize) -> Vec<PartialModel> {
    let Some(search) = CoreSearch::new(ctx, types, false) else {
        return Vec::new();
    };
    if ctx.data.total == 0 {
        // Without counting, internal 2-types only have to exist.
        let etas: Vec<TwoType> = search.options.iter().map(|o| o[0]).collect();
        return PartialModel::new(ctx.nf, search.structure(&etas)).into_iter().collect();
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    search.run::<()>(&mut |etas| {
        if seen.insert(search.canonical_key(etas)) {
            if let Some(pm) = PartialModel::new(ctx.nf, search.structure(etas)) {
                out.push(pm);
            }
        }
        (out.len() >= limit).then_some(())
    });
    out
}

/// A model whose 1-types are exactly `types`, if one exists.
fn complete_model_on(ctx: &Ctx, types: &[OneType]) -> Option<SigmaStructure> {
    let search = CoreSearch::new(ctx, types, true)?;
    search.run(&mut |etas| Some(search.structure(etas)))
}

fn type_vector(ts: &TypeSpace, types: &[OneType]) -> Vec<usize> {
    let mut v = vec![0; ts.one_type_count()];
    for t in types {
        v[t.0 as usize] += 1;
    }
    v
}

fn globals_hold_on_counts(ts: &TypeSpace, x_types: &[OneType], counts: &[usize], globals: &[GlobalConstraint]) -> bool {
    globals.iter().all(|g| {
        let coeffs = global_coeffs(ts, x_types, g);
        let value: BigInt = coeffs.iter().zip(counts).map(|(c, &n)| c * BigInt::from(n)).sum();
        g.cond.holds(&value)
    })
}

/// Builds a model from a solution of the spectrum formula: core-to-rest edges
/// from the class representatives, audible edges matched pairwise and made
/// simple by endpoint exchanges, one-way audible edges sent to distinct
/// targets, and silent 2-types everywhere else.
pub fn extract_model(nf: &C2NormalForm, psi: &SpectrumFormula, solution: &[i64]) -> Result<SigmaStructure, C2Error> {
    let ctx = Ctx::new(nf);
    let counted = ctx.data.counted();
    let h = &psi.core;
    let hn = h.size();
    let mut owner: Vec<usize> = Vec::new();
    for (c, _) in psi.classes.iter().enumerate() {
        let count = solution[psi.y_var(c)];
        if count < 0 {
            return Err(C2Error::ConstructionStuck("negative class count".into()));
        }
        owner.extend(std::iter::repeat_n(c, count as usize));
    }
    let rest = owner.len();
    let total = hn + rest;
    let ts = ctx.ts;
    let mut s = SigmaStructure::empty(ts.n, ts.m, total);
    for v in 0..hn {
        s.set_one_type(v, h.types[v]);
    }
    for u in 0..hn {
        for v in u + 1..hn {
            s.set_two_type(u, v, two_type_of(&h.structure, u, v).expect("distinct"));
        }
    }
    let type_of = |w: usize| psi.classes[owner[w]].0;
    for w in 0..rest {
        s.set_one_type(hn + w, type_of(w));
        let class = &psi.classes[owner[w]].1;
        for v in 0..hn {
            s.set_two_type(hn + w, v, class.g[v]);
        }
    }
    // Edge multiset among the rest, indexed by rest position.
    let mut cnt = vec![0u32; rest * rest];
    let at = |a: usize, b: usize| a.min(b) * rest + a.max(b);

    // Audible both ways: stubs per tuple, paired with stubs of the dual tuple.
    let mut kinds: BTreeMap<Triple, Vec<usize>> = BTreeMap::new();
    let mut one_way: BTreeMap<Triple, Vec<usize>> = BTreeMap::new();
    for w in 0..rest {
        let (pi, class) = &psi.classes[owner[w]];
        for &((eta, p2), f) in &class.f {
            let dest = if backward_silent(eta, counted) { &mut one_way } else { &mut kinds };
            dest.entry((*pi, eta, p2)).or_default().extend(std::iter::repeat_n(w, f as usize));
        }
    }
    // Edges as (a, b, 2-type from a to b, kind id).
    let mut edges: Vec<(usize, usize, TwoType, usize)> = Vec::new();
    let mut kind_id = 0;
    for (&t, a) in &kinds {
        let d = (t.2, dual(t.1), t.0);
        if d < t {
            continue;
        }
        if d == t {
            if a.len() % 2 == 1 {
                return Err(C2Error::ConstructionStuck("odd number of self-dual stubs".into()));
            }
            let half = a.len() / 2;
            for i in 0..half {
                edges.push((a[i], a[i + half], t.1, kind_id));
            }
        } else {
            let b = kinds.get(&d).map(|v| v.as_slice()).unwrap_or(&[]);
            if a.len() != b.len() {
                return Err(C2Error::ConstructionStuck("unmatched audible stubs".into()));
            }
            let shift = b.len() / 2;
            for i in 0..a.len() {
                edges.push((a[i], b[(i + shift) % b.len()], t.1, kind_id));
            }
        }
        kind_id += 1;
    }
    for &(a, b, _, _) in &edges {
        if a != b {
            cnt[at(a, b)] += 1;
        }
    }
    let bad = |e: &(usize, usize, TwoType, usize), cnt: &[u32]| e.0 == e.1 || cnt[at(e.0, e.1)] > 1;
    let mut progress = true;
    while progress {
        progress = false;
        for i in 0..edges.len() {
            if !bad(&edges[i], &cnt) {
                continue;
            }
            let (a, b, eta, kind) = edges[i];
            let found = (0..edges.len()).find(|&j| {
                if j == i || edges[j].3 != kind {
                    return false;
                }
                let (c, d, _, _) = edges[j];
                if a == d || c == b || at(a, d) == at(c, b) {
                    return false;
                }
                let mut tmp = cnt[at(a, d)];
                if a == c || b == d {
                    return false;
                }
                tmp += 1;
                tmp == 1 && cnt[at(c, b)] == 0
            });
            if let Some(j) = found {
                let (c, d, _, _) = edges[j];
                if a != b {
                    cnt[at(a, b)] -= 1;
                }
                cnt[at(c, d)] -= 1;
                cnt[at(a, d)] += 1;
                cnt[at(c, b)] += 1;
                edges[i] = (a, d, eta, kind);
                edges[j] = (c, b, eta, kind);
                progress = true;
            }
        }
    }
    if edges.iter().any(|e| bad(e, &cnt)) {
        return Err(C2Error::ConstructionStuck("no exchange removes a parallel audible edge".into()));
    }
    // One-way audible edges: each stub picks the least used free target.
    let mut degree = vec![0usize; rest];
    for &(a, b, _, _) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    for (&(p1, eta, p2), stubs) in &one_way {
        let _ = p1;
        for &w in stubs {
            let target = (0..rest)
                .filter(|&u| u != w && type_of(u) == p2 && cnt[at(w, u)] == 0)
                .min_by_key(|&u| (degree[u], u))
                .ok_or_else(|| C2Error::ConstructionStuck("no free target for a one-way edge".into()))?;
            cnt[at(w, target)] += 1;
            degree[w] += 1;
            degree[target] += 1;
            edges.push((w, target, eta, usize::MAX));
        }
    }
    for &(a, b, eta, _) in &edges {
        s.set_two_type(hn + a, hn + b, eta);
    }
    for a in 0..rest {
        for b in a + 1..rest {
            if cnt[at(a, b)] > 0 {
                continue;
            }
            let eta = ctx
                .cls
                .get(type_of(a), type_of(b))
                .silent
                .first()
                .copied()
                .ok_or_else(|| C2Error::ConstructionStuck("no silent 2-type for a remaining pair".into()))?;
            s.set_two_type(hn + a, hn + b, eta);
        }
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum C2Verdict {
    Sat,
    Unsat,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoreStat {
    pub size: usize,
    pub classes: usize,
    pub outcome: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct C2Stats {
    pub compatible_one_types: usize,
    pub count_total: usize,
    pub threshold: usize,
    /// Largest core size searched.
    pub core_cap: usize,
    pub complete_models_tried: usize,
    pub cores_tried: usize,
    /// First cores with a non-empty rest, in search order.
    pub per_core: Vec<CoreStat>,
}

#[derive(Clone, Debug)]
pub struct C2Report {
    pub verdict: C2Verdict,
    /// Evaluator-checked model of the sentence and the globals.
    pub model: Option<SigmaStructure>,
    pub reason: String,
    pub stats: C2Stats,
}

/// Necessary conditions in the guarded fragment: every counting conjunct as a
/// row on a fresh unary true everywhere, the pair condition on edges only.
pub fn audible_relaxation(nf: &C2NormalForm) -> Gp2NormalForm {
    let mut unary: Vec<String> = nf.vocab.unary_names().to_vec();
    let n0 = unary.len();
    for i in 0..nf.counts.len() {
        let mut name = format!("_K{i}");
        while nf.vocab.contains(&name) || unary.contains(&name) {
            name.push('_');
        }
        unary.push(name);
    }
    let vocab = Vocabulary::new(unary, nf.vocab.binary_names().to_vec()).expect("fresh names");
    let gamma = Formula::conj(
        std::iter::once(nf.gamma.clone()).chain((0..nf.counts.len()).map(|i| Formula::Unary(n0 + i, crate::ast::Var::X))),
    );
    let mut rows: Vec<Option<PresRow>> = vec![None; vocab.n()];
    for (i, &k) in nf.counts.iter().enumerate() {
        let mut lambda = vec![BigInt::zero(); nf.vocab.m()];
        lambda[i] = BigInt::one();
        rows[n0 + i] = Some(PresRow::from_lambda(&lambda, Condition::Cmp(Cmp::Eq, BigInt::from(k))));
    }
    Gp2NormalForm {
        alphas: vec![nf.alpha.clone(); nf.vocab.m()],
        vocab,
        gamma,
        rows,
    }
}

/// Largest total allowed by the linear globals, if bounded.
fn total_bound(ts: &TypeSpace, x_types: &[OneType], globals: &[GlobalConstraint]) -> Option<usize> {
    let nx = x_types.len();
    let mut sys = IntegerLinearSystem::new(nx);
    for g in globals {
        if let Condition::Cmp(c, d) = &g.cond {
            let coeffs = global_coeffs(ts, x_types, g);
            let (rel, rhs) = match c {
                Cmp::Lt => (Cmp::Le, d - 1),
                Cmp::Gt => (Cmp::Ge, d + 1),
                other => (*other, d.clone()),
            };
            sys.push(coeffs, rel, rhs);
        }
    }
    let objective = vec![-BigInt::one(); nx];
    match lp_solve(&sys, Some(&objective)).ok()? {
        LpOutcome::Infeasible => Some(0),
        LpOutcome::Unbounded => None,
        LpOutcome::Optimal { value, .. } => {
            let v = -value;
            (v.floor().to_integer()).to_usize()
        }
    }
}

/// Bounded search over a spectrum formula plus globals. Returns the solution
/// and whether the box was large enough for the answer to be exact.
fn solve_psi(
    ctx: &Ctx,
    psi: &SpectrumFormula,
    globals: &[GlobalConstraint],
    fixed: Option<&[usize]>,
    allow_empty: bool,
    search_box: usize,
) -> Result<(Option<Vec<i64>>, bool), C2Error> {
    let nx = psi.x_types.len();
    let var_count = psi.var_count + 2 * mod_count(globals);
    let mut parts: Vec<ProgramNode> = match widen(&ProgramNode::And(vec![psi.program().root]), var_count) {
        ProgramNode::And(v) => v,
        _ => unreachable!(),
    };
    parts.push(ProgramNode::Sys(global_rows(&ctx.ts, &psi.x_types, globals, var_count, psi.var_count)));
    let mut exact = false;
    let bound = if let Some(v) = fixed {
        let mut s = IntegerLinearSystem::new(var_count);
        for (i, &pi) in psi.x_types.iter().enumerate() {
            s.push_sparse(&[(i, BigInt::one())], Cmp::Eq, BigInt::from(v[pi.0 as usize]));
        }
        parts.push(ProgramNode::Sys(s));
        let total: usize = v.iter().sum();
        exact = globals.is_empty();
        (ctx.data.total.max(1) * total + total + 1).max(2)
    } else {
        if !allow_empty {
            let terms: Vec<(usize, BigInt)> = (0..nx).map(|i| (i, BigInt::one())).collect();
            let mut s = IntegerLinearSystem::new(var_count);
            s.push_sparse(&terms, Cmp::Ge, BigInt::one());
            parts.push(ProgramNode::Sys(s));
        }
        if ctx.data.total == 0 {
            // Once the classes present are fixed, the rest is a linear system
            // over shifted counts. This system dominates all of them in
            // size, coefficients and right-hand side, so its minimal-solution
            // bound covers some solution of each.
            let mut worst = IntegerLinearSystem::new(nx + 2 * globals.len() + 2);
            let shift: usize = psi.core.size() + 2 * nx;
            for g in globals {
                let coeffs = global_coeffs(&ctx.ts, &psi.x_types, g);
                let max_c: BigInt = coeffs.iter().map(num_traits::Signed::abs).max().unwrap_or_default();
                let (p, rhs) = match &g.cond {
                    Condition::Cmp(_, d) => (BigInt::one(), num_traits::Signed::abs(d) + 1),
                    Condition::Mod { residue, modulus } => (BigInt::from(modulus.clone()), BigInt::from(residue.clone())),
                };
                let row = vec![max_c.clone().max(p); worst.var_count];
                worst.push(row, Cmp::Eq, rhs + max_c * BigInt::from(shift));
            }
            let b = minimal_solution_bound(&worst) + BigInt::from(psi.core.size() + 3);
            if let Some(b) = b.to_usize().filter(|&b| b <= 512) {
                exact = true;
                b.max(search_box)
            } else {
                search_box.max(2 * ctx.data.threshold + 1)
            }
        } else {
            search_box.max(2 * ctx.data.threshold + 1)
        }
    };
    let prog = ConstraintProgram {
        var_count,
        root: ProgramNode::And(parts),
    };
    let opts = SearchOptions {
        node_budget: PSI_NODE_BUDGET,
        lp_root_check: true,
    };
    match integer_solve_bounded(&prog, bound as i64, opts) {
        Ok(sol) => Ok((sol, exact)),
        Err(LinearError::SearchBudgetExceeded(_)) => Ok((None, false)),
        Err(e) => Err(e.into()),
    }
}

/// Membership of a full-dimension 1-type vector in the 1-type spectrum.
/// `Err(Inconclusive)` when the cores needed exceed the configured cap.
pub fn spectrum_membership(nf: &C2NormalForm, v: &[usize], cfg: &Config) -> Result<bool, C2Error> {
    let ctx = Ctx::new(nf);
    membership_ctx(&ctx, v, cfg).map(|w| w.is_some())
}

/// A model whose 1-type cardinality vector is exactly `v`. `Ok(None)` when
/// `v` is not in the spectrum; the inner error reports a member for which
/// the construction failed.
pub fn spectrum_witness(nf: &C2NormalForm, v: &[usize], cfg: &Config) -> Result<Option<Witness>, C2Error> {
    membership_ctx(&Ctx::new(nf), v, cfg)
}

pub type Witness = Result<SigmaStructure, C2Error>;

fn membership_ctx(ctx: &Ctx, v: &[usize], cfg: &Config) -> Result<Option<Witness>, C2Error> {
    let ts = ctx.ts;
    assert_eq!(v.len(), ts.one_type_count(), "vector dimension");
    let total: usize = v.iter().sum();
    if total == 0 {
        return Ok(cfg.allow_empty.then(|| Ok(SigmaStructure::empty(ctx.ts.n, ctx.ts.m, 0))));
    }
    if v.iter().enumerate().any(|(m, &c)| c > 0 && ctx.cls.position(OneType(m as u32)).is_none()) {
        return Ok(None);
    }
    let ell = ctx.data.threshold;
    let support: Vec<OneType> = ctx.cls.one_types.iter().copied().filter(|p| v[p.0 as usize] > 0).collect();
    // Admissible core counts per type: all of them, or leave at least `ell`.
    let per_type: Vec<Vec<usize>> = support
        .iter()
        .map(|p| {
            let c = v[p.0 as usize];
            let max_core = if ctx.data.total == 0 { 1 } else { c };
            (0..=c.min(max_core)).filter(|&s| s == c || c - s >= ell).collect()
        })
        .collect();
    // Without counting, cores hold at most one element per type.
    let cap = if ctx.data.total == 0 { cfg.core_cap.max(support.len()) } else { cfg.core_cap };
    let whole_cap = cap.max(SMALL_TOTAL);
    let mut choices = vec![Vec::new()];
    for opts in &per_type {
        let mut next = Vec::new();
        for c in &choices {
            for &s in opts {
                let mut c2: Vec<usize> = c.clone();
                c2.push(s);
                next.push(c2);
            }
        }
        choices = next;
    }
    let admissible = choices.len();
    choices.retain(|c| {
        let s: usize = c.iter().sum();
        s <= cap || (s == total && total <= whole_cap)
    });
    let complete = choices.len() == admissible || BigInt::from(cap) >= core_size_bound(&ts, ell);
    choices.sort_by_key(|c| std::cmp::Reverse(c.iter().sum::<usize>()));
    let found = par::find_map_first(cfg.exec, &choices, |core_counts| -> Option<Result<Witness, C2Error>> {
        let mut types = Vec::new();
        for (p, &s) in support.iter().zip(core_counts) {
            types.extend(std::iter::repeat_n(*p, s));
        }
        if core_counts.iter().zip(&support).all(|(&s, p)| s == v[p.0 as usize]) {
            return complete_model_on(ctx, &types).map(|m| Ok(Ok(m)));
        }
        for h in cores_on(ctx, &types, CORE_BUDGET) {
            let psi = match build_psi_ctx(ctx, &h) {
                Ok(p) => p,
                Err(e) => return Some(Err(e)),
            };
            match solve_psi(ctx, &psi, &[], Some(v), cfg.allow_empty, cfg.search_box) {
                Ok((Some(sol), _)) => return Some(Ok(extract_model(ctx.nf, &psi, &sol))),
                Ok((None, true)) => {}
                Ok((None, false)) => return Some(Err(C2Error::Inconclusive("search budget".into()))),
                Err(e) => return Some(Err(e)),
            }
        }
        None
    });
    match found {
        Some(r) => r.map(Some),
        None if complete => Ok(None),
        None => Err(C2Error::Inconclusive(format!(
            "cores up to size {cap} do not cover a vector of total {total}"
        ))),
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SpectrumReport {
    /// Member vectors, indexed by 1-type mask.
    pub members: Vec<Vec<usize>>,
    /// Vectors whose membership was not decided.
    pub inconclusive: Vec<Vec<usize>>,
    /// Domain sizes of the members.
    pub totals: BTreeSet<usize>,
}

/// All members of the 1-type spectrum with total at most `size_cap`.
pub fn spectrum_report(nf: &C2NormalForm, size_cap: usize, cfg: &Config) -> SpectrumReport {
    let ctx = Ctx::new(nf);
    let ts = ctx.ts;
    let mut out = SpectrumReport::default();
    let lo = if cfg.allow_empty { 0 } else { 1 };
    let mut vectors = Vec::new();
    for total in lo..=size_cap {
        for seq in sorted_sequences(&ctx.cls.one_types, total) {
            vectors.push(type_vector(&ts, &seq));
        }
    }
    let results = par::map(cfg.exec, &vectors, |v| membership_ctx(&ctx, v, cfg));
    for (v, r) in vectors.into_iter().zip(results) {
        match r {
            Ok(Some(_)) => {
                out.totals.insert(v.iter().sum());
                out.members.push(v);
            }
            Ok(None) => {}
            Err(_) => out.inconclusive.push(v),
        }
    }
    out
}

/// Finite satisfiability of the normal form together with global constraints
/// over its vocabulary.
pub fn decide_sat_global(nf: &C2NormalForm, globals: &[GlobalConstraint], cfg: &Config) -> C2Report {
    let ctx = Ctx::new(nf);
    let ts = ctx.ts;
    let x_types = ctx.cls.one_types.clone();
    let mut stats = C2Stats {
        compatible_one_types: x_types.len(),
        count_total: ctx.data.total,
        threshold: ctx.data.threshold,
        ..Default::default()
    };
    let report = |verdict, model, reason: &str, stats: C2Stats| C2Report {
        verdict,
        model,
        reason: reason.to_string(),
        stats,
    };
    let empty_ok = cfg.allow_empty && globals_hold_on_counts(&ts, &x_types, &vec![0; x_types.len()], globals);
    if empty_ok {
        return report(C2Verdict::Sat, Some(SigmaStructure::empty(ts.n, ts.m, 0)), "empty structure", stats);
    }
    if x_types.is_empty() {
        return report(C2Verdict::Unsat, None, "no compatible 1-type", stats);
    }
    let bound = total_bound(&ts, &x_types, globals);
    if bound == Some(0) {
        return report(C2Verdict::Unsat, None, "globals admit no non-empty structure", stats);
    }
    let forced_small = bound.filter(|&b| b <= SMALL_TOTAL);
    let cap = forced_small.map_or(cfg.core_cap, |b| b.max(cfg.core_cap));
    stats.core_cap = cap;

    // Models that are their own core.
    for size in 1..=cap {
        let seqs: Vec<Vec<OneType>> = sorted_sequences(&x_types, size)
            .into_iter()
            .filter(|seq| {
                let counts: Vec<usize> = x_types.iter().map(|p| seq.iter().filter(|q| *q == p).count()).collect();
                globals_hold_on_counts(&ts, &x_types, &counts, globals)
            })
            .collect();
        stats.complete_models_tried += seqs.len();
        if let Some(m) = par::find_map_first(cfg.exec, &seqs, |seq| complete_model_on(&ctx, seq)) {
            debug_assert!(evaluate(&m, &nf.to_formula(), globals));
            return report(C2Verdict::Sat, Some(m), "model within the core cap", stats);
        }
    }
    if let Some(b) = forced_small {
        if b <= cap {
            return report(C2Verdict::Unsat, None, "globals bound the size and no model is that small", stats);
        }
    }
    if gp2_relaxation_unsat(nf, cfg) {
        return report(C2Verdict::Unsat, None, "guarded relaxation is unsatisfiable", stats);
    }
    if !globals.is_empty() {
        if let Some(m) = combine_small_models(&ctx, globals, cfg) {
            if evaluate(&m, &nf.to_formula(), globals) {
                return report(C2Verdict::Sat, Some(m), "disjoint union of small models", stats);
            }
        }
    }

    // Cores with a non-empty rest.
    let core_sizes: Vec<usize> = if ctx.data.total == 0 { (0..=x_types.len()).collect() } else { (0..=cap).collect() };
    let mut all_exact = ctx.data.total == 0;
    let mut failure: Option<String> = None;
    for size in core_sizes {
        let seqs: Vec<Vec<OneType>> = if ctx.data.total == 0 {
            distinct_subsets(&x_types, size)
        } else {
            sorted_sequences(&x_types, size)
        };
        let mut cores = Vec::new();
        for seq in &seqs {
            cores.extend(cores_on(&ctx, seq, CORE_BUDGET));
            if stats.cores_tried + cores.len() > CORE_BUDGET {
                all_exact = false;
                failure = Some("core budget exhausted".into());
                break;
            }
        }
        stats.cores_tried += cores.len();
        let outcomes = par::map(cfg.exec, &cores, |h| -> (CoreStat, Option<Result<SigmaStructure, String>>, bool) {
            let psi = match build_psi_ctx(&ctx, h) {
                Ok(p) => p,
                Err(e) => {
                    return (
                        CoreStat { size: h.size(), classes: 0, outcome: e.to_string() },
                        None,
                        false,
                    )
                }
            };
            let classes = psi.classes.len();
            match solve_psi(&ctx, &psi, globals, None, false, cfg.search_box) {
                Ok((Some(sol), _)) => {
                    let built = extract_model(nf, &psi, &sol).map_err(|e| e.to_string()).and_then(|m| {
                        if evaluate(&m, &nf.to_formula(), globals) {
                            Ok(m)
                        } else {
                            Err("constructed structure fails the evaluator".to_string())
                        }
                    });
                    let outcome = match &built {
                        Ok(m) => format!("model of size {}", m.size()),
                        Err(e) => e.clone(),
                    };
                    (CoreStat { size: h.size(), classes, outcome }, Some(built), true)
                }
                Ok((None, exact)) => (
                    CoreStat {
                        size: h.size(),
                        classes,
                        outcome: if exact { "no solution".into() } else { "no solution in box".into() },
                    },
                    None,
                    exact,
                ),
                Err(e) => (CoreStat { size: h.size(), classes, outcome: e.to_string() }, None, false),
            }
        });
        for (stat, built, exact) in outcomes {
            all_exact &= exact;
            if stats.per_core.len() < 64 {
                stats.per_core.push(stat);
            }
            match built {
                Some(Ok(m)) => return report(C2Verdict::Sat, Some(m), "model built from a core", stats),
                Some(Err(e)) => {
                    all_exact = false;
                    failure.get_or_insert(e);
                }
                None => {}
            }
        }
        if failure.is_some() && !all_exact {
            break;
        }
    }
    if all_exact {
        return report(C2Verdict::Unsat, None, "every core of the complete collection is infeasible", stats);
    }
    let reason = failure.unwrap_or_else(|| format!("no model found with cores up to size {cap}"));
    report(C2Verdict::Inconclusive, None, &reason, stats)
}

/// Verdict on a source problem, with a model over the source vocabulary.
#[derive(Clone, Debug)]
pub struct C2ProblemReport {
    pub report: C2Report,
    /// The normal-form model restricted to the source vocabulary, or a model
    /// found directly for a small domain size.
    pub source_model: Option<SigmaStructure>,
}

/// Normalizes a `c2`/`c2g` problem and decides it. Domain sizes on which the
/// normal form may be stricter than the source are searched exhaustively.
pub fn solve_problem(p: &SourceProblem, cfg: &Config) -> Result<C2ProblemReport, NormalizeError> {
    let norm = to_c2_normal_form(p)?;
    let ts = TypeSpace::new(p.vocab.n(), p.vocab.m());
    for &size in &norm.small_cases {
        let opts = OracleOptions {
            min_size: size,
            max_size: size,
            allow_empty: false,
            exec: cfg.exec,
            ..OracleOptions::up_to(size)
        };
        if let Some(m) = find_model(ts, &p.sentence, &p.globals, &opts) {
            let report = C2Report {
                verdict: C2Verdict::Sat,
                model: None,
                reason: format!("source model of size {size}"),
                stats: C2Stats::default(),
            };
            return Ok(C2ProblemReport {
                report,
                source_model: Some(m),
            });
        }
    }
    if cfg.allow_empty && evaluate(&SigmaStructure::empty(ts.n, ts.m, 0), &p.sentence, &p.globals) {
        let report = C2Report {
            verdict: C2Verdict::Sat,
            model: None,
            reason: "empty structure".into(),
            stats: C2Stats::default(),
        };
        return Ok(C2ProblemReport {
            report,
            source_model: Some(SigmaStructure::empty(ts.n, ts.m, 0)),
        });
    }
    let mut inner = cfg.clone();
    inner.allow_empty = false;
    let mut report = decide_sat_global(&norm.nf, &norm.globals, &inner);
    let mut source_model = None;
    if let Some(m) = &report.model {
        let pulled = pull_back_model(m, &norm.trace);
        if evaluate(&pulled, &p.sentence, &p.globals) {
            source_model = Some(pulled);
        } else {
            report.verdict = C2Verdict::Inconclusive;
            report.reason = "normal-form model fails the source problem".into();
            report.model = None;
        }
    }
    Ok(C2ProblemReport { report, source_model })
}

/// Largest model used as a building block of disjoint unions.
const BLOCK_SIZE: usize = 4;
const BLOCK_LIMIT: usize = 48;

/// Searches for multiplicities of small models whose disjoint union meets the
/// globals. Copies are joined by silent 2-types, so type pairs across copies
/// must not be noisy.
fn combine_small_models(ctx: &Ctx, globals: &[GlobalConstraint], cfg: &Config) -> Option<SigmaStructure> {
    let ts = ctx.ts;
    let x_types = &ctx.cls.one_types;
    let mut blocks: Vec<SigmaStructure> = Vec::new();
    for size in 1..=cfg.core_cap.min(BLOCK_SIZE) {
        let seqs = sorted_sequences(x_types, size);
        let found = par::map(cfg.exec, &seqs, |seq| complete_model_on(ctx, seq));
        blocks.extend(found.into_iter().flatten());
        if blocks.len() >= BLOCK_LIMIT {
            blocks.truncate(BLOCK_LIMIT);
            break;
        }
    }
    if blocks.is_empty() {
        return None;
    }
    let nb = blocks.len();
    let types: Vec<BTreeSet<OneType>> = blocks
        .iter()
        .map(|b| (0..b.size()).map(|v| one_type_of(b, v)).collect())
        .collect();
    let counts: Vec<Vec<usize>> = blocks
        .iter()
        .map(|b| {
            let v = cardinality_vector(b);
            x_types.iter().map(|p| v[p.0 as usize]).collect()
        })
        .collect();
    let clash = |a: &BTreeSet<OneType>, b: &BTreeSet<OneType>| a.iter().any(|&p| b.iter().any(|&q| ctx.cls.noisy(p, q)));
    let var_count = nb + 2 * mod_count(globals);
    let mut sys = IntegerLinearSystem::new(var_count);
    let mut slack = nb;
    for g in globals {
        let coeffs = global_coeffs(&ts, x_types, g);
        let mut terms: Vec<(usize, BigInt)> = (0..nb)
            .map(|j| (j, coeffs.iter().zip(&counts[j]).map(|(c, &n)| c * BigInt::from(n)).sum()))
            .collect();
        match &g.cond {
            Condition::Cmp(c, d) => sys.push_sparse(&terms, *c, d.clone()),
            Condition::Mod { residue, modulus } => {
                let p = BigInt::from(modulus.clone());
                terms.push((slack, -p.clone()));
                terms.push((slack + 1, p));
                slack += 2;
                sys.push_sparse(&terms, Cmp::Eq, BigInt::from(residue.clone()));
            }
        }
    }
    let all: Vec<(usize, BigInt)> = (0..nb).map(|j| (j, BigInt::one())).collect();
    sys.push_sparse(&all, Cmp::Ge, BigInt::one());
    let mut nodes = vec![ProgramNode::Sys(sys)];
    for j in 0..nb {
        if clash(&types[j], &types[j]) {
            nodes.push(ProgramNode::Sys(sys_row(var_count, &[(j, 1)], Cmp::Le, 1)));
        }
        for k in j + 1..nb {
            if clash(&types[j], &types[k]) {
                nodes.push(ProgramNode::Or(vec![
                    ProgramNode::Sys(sys_row(var_count, &[(j, 1)], Cmp::Eq, 0)),
                    ProgramNode::Sys(sys_row(var_count, &[(k, 1)], Cmp::Eq, 0)),
                ]));
            }
        }
    }
    let prog = ConstraintProgram {
        var_count,
        root: ProgramNode::And(nodes),
    };
    let opts = SearchOptions {
        node_budget: PSI_NODE_BUDGET,
        lp_root_check: false,
    };
    let sol = integer_solve_bounded(&prog, cfg.search_box as i64, opts).ok()??;
    let mut parts = Vec::new();
    for (j, &c) in sol.iter().take(nb).enumerate() {
        parts.extend(std::iter::repeat_n(&blocks[j], c as usize));
    }
    let total: usize = parts.iter().map(|b| b.size()).sum();
    let mut s = SigmaStructure::empty(ts.n, ts.m, total);
    let mut offset = 0;
    let mut owner = Vec::with_capacity(total);
    for (idx, b) in parts.iter().enumerate() {
        for v in 0..b.size() {
            s.set_one_type(offset + v, one_type_of(b, v));
            owner.push(idx);
            for u in v + 1..b.size() {
                s.set_two_type(offset + v, offset + u, two_type_of(b, v, u).expect("distinct"));
            }
        }
        offset += b.size();
    }
    for u in 0..total {
        for v in u + 1..total {
            if owner[u] != owner[v] {
                let eta = *ctx.cls.get(one_type_of(&s, u), one_type_of(&s, v)).silent.first()?;
                s.set_two_type(u, v, eta);
            }
        }
    }
    Some(s)
}

fn distinct_subsets(items: &[OneType], size: usize) -> Vec<Vec<OneType>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(items: &[OneType], start: usize, size: usize, cur: &mut Vec<OneType>, out: &mut Vec<Vec<OneType>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, i + 1, size, cur, out);
            cur.pop();
        }
    }
    rec(items, 0, size, &mut cur, &mut out);
    out
}

fn gp2_relaxation_unsat(nf: &C2NormalForm, cfg: &Config) -> bool {
    let relaxed = audible_relaxation(nf);
    if relaxed.vocab.n() + relaxed.vocab.m() > 10 {
        return false;
    }
    matches!(gp2solver::decide_sat(&relaxed, cfg), Ok(r) if r.verdict == Verdict::Unsat)
}
