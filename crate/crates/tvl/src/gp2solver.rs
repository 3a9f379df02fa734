//! Satisfiability of the guarded fragment with local Presburger rows.
//!
//! For every compatible 1-type the counting rows become a linear system over
//! behavior counts. The global system asks for one Kleene-star element per
//! 1-type such that edge counts between 1-types match up. Its homogenized
//! relaxation is decided by exact rational simplex; a rational solution scales
//! to an integer one, which is turned into a pseudo-model and then into a model.

use crate::ast::{Cmp, Condition, Formula, Gp2NormalForm};
use crate::config::Config;
use crate::linear::{
    build_simple_automaton, flow_matrix, lp_solve, small_solution_bounds, ConstraintProgram,
    IntegerLinearSystem, LinearError, LpOutcome, ProgramNode, SimpleAutomaton,
};
use crate::normalize::{pull_back_model, to_gp2_normal_form, NormalizeError};
use crate::par;
use crate::parser::SourceProblem;
use crate::semantics::{evaluate, ColoredMultigraph, SigmaStructure};
use crate::typespace::{compatible_one_types, dual, OneType, TwoType, TypeSpace, UniversalPart};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Gp2Error {
    #[error("resource limit: {0}")]
    Resource(#[from] LinearError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    #[error("solution does not decompose into accepted words of 1-type {0}")]
    DecompositionMissing(u32),
    #[error("witness would need {0} vertices")]
    TooLarge(usize),
    #[error("solution entry does not fit in 64 bits")]
    Overflow,
}

/// Fixed ordering of (audible 2-type, 1-type) pairs.
#[derive(Clone, Debug)]
pub struct BehaviorIndex {
    pub two_types: Vec<TwoType>,
    pub one_types: Vec<OneType>,
}

impl BehaviorIndex {
    pub fn new(ts: &TypeSpace) -> Self {
        BehaviorIndex {
            two_types: ts.audible_two_types().collect(),
            one_types: ts.one_types().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.two_types.len() * self.one_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, eta: TwoType, pi: OneType) -> Option<usize> {
        let e = self.two_types.iter().position(|&t| t == eta)?;
        Some(e * self.one_types.len() + pi.0 as usize)
    }

    pub fn get(&self, i: usize) -> (TwoType, OneType) {
        let k = self.one_types.len();
        (self.two_types[i / k], self.one_types[i % k])
    }
}

/// One counting row of a 1-type: behavior coefficients, slack coefficients
/// and the right-hand side with the loop contribution already moved over.
struct CountingRow {
    coeffs: Vec<BigInt>,
    slacks: Vec<BigInt>,
    rhs: BigInt,
}

fn counting_rows(nf: &Gp2NormalForm, ts: &TypeSpace, pi: OneType, behaviors: &[(TwoType, OneType)]) -> Vec<CountingRow> {
    let mut out = Vec::new();
    for (i, row) in nf.rows.iter().enumerate() {
        let Some(row) = row else { continue };
        if !ts.unary(pi, i) {
            continue;
        }
        let coeffs: Vec<BigInt> = behaviors
            .iter()
            .map(|&(eta, p2)| {
                row.terms
                    .iter()
                    .filter(|t| ts.eval_pair(&t.body, pi, eta, p2))
                    .map(|t| t.coeff.clone())
                    .sum()
            })
            .collect();
        let loop_value: BigInt = row
            .terms
            .iter()
            .filter(|t| ts.eval_single(&t.body, pi))
            .map(|t| t.coeff.clone())
            .sum();
        let (slacks, rhs) = match &row.cond {
            Condition::Cmp(Cmp::Eq, d) => (vec![], d.clone()),
            Condition::Cmp(Cmp::Le, d) => (vec![BigInt::one()], d.clone()),
            Condition::Cmp(Cmp::Lt, d) => (vec![BigInt::one()], d - 1),
            Condition::Cmp(Cmp::Ge, d) => (vec![-BigInt::one()], d.clone()),
            Condition::Cmp(Cmp::Gt, d) => (vec![-BigInt::one()], d + 1),
            Condition::Mod { residue, modulus } => {
                let p = BigInt::from(modulus.clone());
                (vec![p.clone(), -p], BigInt::from(residue.clone()))
            }
        };
        out.push(CountingRow {
            coeffs,
            slacks,
            rhs: rhs - loop_value,
        });
    }
    out
}

/// True iff a lone element of type `pi` satisfies all of its rows.
fn zero_behavior_ok(nf: &Gp2NormalForm, ts: &TypeSpace, pi: OneType) -> bool {
    nf.rows.iter().enumerate().all(|(i, row)| match row {
        Some(row) if ts.unary(pi, i) => {
            let loop_value: BigInt = row
                .terms
                .iter()
                .filter(|t| ts.eval_single(&t.body, pi))
                .map(|t| t.coeff.clone())
                .sum();
            row.cond.holds(&loop_value)
        }
        _ => true,
    })
}

/// Counting rows of one 1-type over the full behavior index, with incompatible
/// entries forced to zero. Slack columns follow the behavior columns.
#[derive(Clone, Debug)]
pub struct CharacteristicSystem {
    pub pi: OneType,
    pub index: BehaviorIndex,
    pub system: IntegerLinearSystem,
    pub slack_count: usize,
}

pub fn characteristic_system(nf: &Gp2NormalForm, pi: OneType) -> CharacteristicSystem {
    let ts = nf.type_space();
    let index = BehaviorIndex::new(&ts);
    let behaviors: Vec<(TwoType, OneType)> = (0..index.len()).map(|i| index.get(i)).collect();
    let rows = counting_rows(nf, &ts, pi, &behaviors);
    let slack_count: usize = rows.iter().map(|r| r.slacks.len()).sum();
    let cols = index.len() + slack_count;
    let mut sys = IntegerLinearSystem::new(cols);
    let pi_ok = nf.one_type_compatible(pi);
    for (j, &(eta, p2)) in behaviors.iter().enumerate() {
        if !(pi_ok && nf.one_type_compatible(p2) && nf.triple_compatible(pi, eta, p2)) {
            sys.push_sparse(&[(j, BigInt::one())], Cmp::Eq, BigInt::zero());
        }
    }
    let mut slack = index.len();
    for r in rows {
        let mut coeffs = r.coeffs;
        coeffs.resize(cols, BigInt::zero());
        for s in r.slacks {
            coeffs[slack] = s;
            slack += 1;
        }
        sys.push(coeffs, Cmp::Eq, r.rhs);
    }
    CharacteristicSystem {
        pi,
        index,
        system: sys,
        slack_count,
    }
}

/// Per-1-type block of the global system.
#[derive(Clone, Debug)]
pub struct Block {
    pub pi: OneType,
    /// Compatible behaviors grouped by identical coefficient column.
    pub groups: Vec<Vec<(TwoType, OneType)>>,
    pub slack_count: usize,
    /// Counting rows over the letters: the groups, then the slacks.
    pub compressed: IntegerLinearSystem,
    /// `None` when the rows are homogeneous and the star is the solution set.
    pub automaton: Option<SimpleAutomaton>,
    pub w_start: usize,
    pub p_start: usize,
    pub h_start: usize,
}

impl Block {
    pub fn letters(&self) -> usize {
        self.groups.len() + self.slack_count
    }

    fn transitions(&self) -> usize {
        self.automaton.as_ref().map_or(0, |a| a.transitions.len())
    }
}

/// The global system: one merged variable per matched pair of triples plus a
/// star block per compatible 1-type.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub one_types: Vec<OneType>,
    /// Representative triple of each merged edge-count variable.
    pub pair_vars: Vec<(OneType, TwoType, OneType)>,
    pair_index: HashMap<(OneType, TwoType, OneType), usize>,
    pub blocks: Vec<Block>,
    pub var_count: usize,
    /// Linking, automaton, homogeneous and non-triviality rows.
    pub base: IntegerLinearSystem,
    pub max_coefficient: BigInt,
    pub n: usize,
}

fn canonical(t: (OneType, TwoType, OneType)) -> (OneType, TwoType, OneType) {
    let d = (t.2, dual(t.1), t.0);
    if (d.0 .0, d.1 .0, d.2 .0) < (t.0 .0, t.1 .0, t.2 .0) {
        d
    } else {
        t
    }
}

impl GlobalSystem {
    pub fn pair_var(&self, t: (OneType, TwoType, OneType)) -> usize {
        self.pair_index[&canonical(t)]
    }

    /// The system with star implications `(y1 = 0) → (y2 = 0)`.
    pub fn q_program(&self) -> ConstraintProgram {
        let mut parts = vec![ProgramNode::Sys(self.base.clone())];
        for b in &self.blocks {
            if b.automaton.is_some() {
                parts.push(ProgramNode::ZeroImp {
                    antecedent: (b.w_start..b.h_start).collect(),
                    consequent: (b.h_start..b.h_start + b.letters()).collect(),
                });
            }
        }
        ConstraintProgram {
            var_count: self.var_count,
            root: ProgramNode::And(parts),
        }
    }

    /// Homogeneous relaxation: each implication becomes `Σ y2 ≤ M · Σ y1`.
    pub fn homogenize(&self, m: &BigInt) -> IntegerLinearSystem {
        let mut sys = self.base.clone();
        for b in &self.blocks {
            if b.automaton.is_none() {
                continue;
            }
            let mut terms: Vec<(usize, BigInt)> = (b.w_start..b.h_start).map(|j| (j, -m.clone())).collect();
            terms.extend((b.h_start..b.h_start + b.letters()).map(|j| (j, BigInt::one())));
            sys.push_sparse(&terms, Cmp::Le, BigInt::zero());
        }
        sys
    }

    /// `2^n · c1·t·(t·K)^(c2·t)` with `t` the row count.
    pub fn compute_m(&self, cfg: &Config) -> BigInt {
        let t = self.base.rows.len();
        let (_, value) = small_solution_bounds(t, &self.max_coefficient, cfg.small_solution_constants);
        value << self.n
    }
}

fn build_block(
    nf: &Gp2NormalForm,
    ts: &TypeSpace,
    pi: OneType,
    compatible: &[OneType],
    budget: usize,
) -> Result<Block, LinearError> {
    let behaviors: Vec<(TwoType, OneType)> = ts
        .audible_two_types()
        .flat_map(|eta| compatible.iter().map(move |&p2| (eta, p2)))
        .filter(|&(eta, p2)| nf.triple_compatible(pi, eta, p2))
        .collect();
    let rows = counting_rows(nf, ts, pi, &behaviors);
    let mut by_column: BTreeMap<Vec<BigInt>, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<(TwoType, OneType)>> = Vec::new();
    let mut group_cols: Vec<Vec<BigInt>> = Vec::new();
    for (j, &b) in behaviors.iter().enumerate() {
        let col: Vec<BigInt> = rows.iter().map(|r| r.coeffs[j].clone()).collect();
        match by_column.get(&col) {
            Some(&g) => groups[g].push(b),
            None => {
                by_column.insert(col.clone(), groups.len());
                groups.push(vec![b]);
                group_cols.push(col);
            }
        }
    }
    let slack_count: usize = rows.iter().map(|r| r.slacks.len()).sum();
    let letters = groups.len() + slack_count;
    let mut compressed = IntegerLinearSystem::new(letters);
    let mut slack = groups.len();
    for (r, row) in rows.iter().enumerate() {
        let mut coeffs: Vec<BigInt> = group_cols.iter().map(|c| c[r].clone()).collect();
        coeffs.resize(letters, BigInt::zero());
        for s in &row.slacks {
            coeffs[slack] = s.clone();
            slack += 1;
        }
        compressed.push(coeffs, Cmp::Eq, row.rhs.clone());
    }
    let automaton = if compressed.is_homogeneous() {
        None
    } else {
        Some(build_simple_automaton(&compressed, budget)?)
    };
    Ok(Block {
        pi,
        groups,
        slack_count,
        compressed,
        automaton,
        w_start: 0,
        p_start: 0,
        h_start: 0,
    })
}

pub fn build_global_system(nf: &Gp2NormalForm, cfg: &Config) -> Result<GlobalSystem, Gp2Error> {
    let ts = nf.type_space();
    let compatible = compatible_one_types(nf);
    let built = par::map(cfg.exec, &compatible, |&pi| {
        build_block(nf, &ts, pi, &compatible, cfg.automaton_state_budget)
    });
    let mut blocks = Vec::with_capacity(built.len());
    for b in built {
        blocks.push(b?);
    }
    let mut pair_vars = Vec::new();
    let mut pair_index = HashMap::new();
    for b in &blocks {
        for g in &b.groups {
            for &(eta, p2) in g {
                let key = canonical((b.pi, eta, p2));
                pair_index.entry(key).or_insert_with(|| {
                    pair_vars.push(key);
                    pair_vars.len() - 1
                });
            }
        }
    }
    let mut next = pair_vars.len();
    for b in &mut blocks {
        let l = b.letters();
        b.w_start = next;
        b.p_start = if b.automaton.is_some() { next + l } else { next };
        b.h_start = b.p_start + b.transitions();
        next = b.h_start + l;
    }
    let var_count = next;
    let mut base = IntegerLinearSystem::new(var_count);
    for b in &blocks {
        let l = b.letters();
        for (j, g) in b.groups.iter().enumerate() {
            let mut terms: Vec<(usize, BigInt)> = g
                .iter()
                .map(|&(eta, p2)| (pair_index[&canonical((b.pi, eta, p2))], BigInt::one()))
                .collect();
            if b.automaton.is_some() {
                terms.push((b.w_start + j, -BigInt::one()));
            }
            terms.push((b.h_start + j, -BigInt::one()));
            base.push_sparse(&terms, Cmp::Eq, BigInt::zero());
        }
        if let Some(aut) = &b.automaton {
            for i in 0..l {
                let mut terms = vec![(b.w_start + i, -BigInt::one())];
                for (t, &(_, a, _)) in aut.transitions.iter().enumerate() {
                    if a == i {
                        terms.push((b.p_start + t, BigInt::one()));
                    }
                }
                base.push_sparse(&terms, Cmp::Eq, BigInt::zero());
            }
            for row in flow_matrix(aut) {
                if row.iter().all(|&v| v == 0) {
                    continue;
                }
                let terms: Vec<(usize, BigInt)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(t, &v)| (b.p_start + t, BigInt::from(v)))
                    .collect();
                base.push_sparse(&terms, Cmp::Eq, BigInt::zero());
            }
        }
        for row in &b.compressed.rows {
            let terms: Vec<(usize, BigInt)> = row
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(j, c)| (b.h_start + j, c.clone()))
                .collect();
            if !terms.is_empty() {
                base.push_sparse(&terms, Cmp::Eq, BigInt::zero());
            }
        }
    }
    let all: Vec<(usize, BigInt)> = (0..pair_vars.len()).map(|j| (j, BigInt::one())).collect();
    base.push_sparse(&all, Cmp::Ge, BigInt::one());
    Ok(GlobalSystem {
        one_types: compatible,
        pair_vars,
        pair_index,
        blocks,
        var_count,
        base,
        max_coefficient: nf.max_coefficient(),
        n: nf.vocab.n(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Sat,
    Unsat,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Gp2Stats {
    pub one_types: usize,
    pub system_rows: usize,
    pub system_cols: usize,
    /// The bound `M` used for the unsatisfiability claim, in decimal.
    #[serde(rename = "M")]
    pub m_bound: String,
    /// The value of `M` whose relaxation produced the solution, if any.
    pub m_used: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub verdict: Verdict,
    /// Model over the normal form's vocabulary, verified by the evaluator.
    pub model: Option<SigmaStructure>,
    pub stats: Gp2Stats,
    /// Why a SAT verdict carries no model.
    pub witness_note: Option<String>,
}

const VERTEX_CAP: usize = 4096;

pub fn decide_sat(nf: &Gp2NormalForm, cfg: &Config) -> Result<SolveReport, Gp2Error> {
    let ts = nf.type_space();
    let compatible = compatible_one_types(nf);
    let mut stats = Gp2Stats {
        one_types: compatible.len(),
        ..Default::default()
    };
    if compatible.is_empty() {
        return Ok(SolveReport {
            verdict: Verdict::Unsat,
            model: None,
            stats,
            witness_note: None,
        });
    }
    if let Some(&pi) = compatible.iter().find(|&&pi| zero_behavior_ok(nf, &ts, pi)) {
        let mut s = SigmaStructure::empty(ts.n, ts.m, 1);
        s.set_one_type(0, pi);
        debug_assert!(evaluate(&s, &nf.to_formula(), &[]));
        return Ok(SolveReport {
            verdict: Verdict::Sat,
            model: Some(s),
            stats,
            witness_note: None,
        });
    }
    let q = build_global_system(nf, cfg)?;
    stats.system_rows = q.base.rows.len();
    stats.system_cols = q.var_count;
    let m_phi = q.compute_m(cfg);
    stats.m_bound = m_phi.to_string();
    let objective: Vec<BigInt> = (0..q.var_count)
        .map(|j| if j < q.pair_vars.len() { BigInt::one() } else { BigInt::zero() })
        .collect();
    let mut candidates: Vec<BigInt> = [1u32, 4, 16, 256]
        .into_iter()
        .map(BigInt::from)
        .filter(|m| *m < m_phi)
        .collect();
    candidates.push(m_phi.clone());
    for m in candidates {
        let sys = q.homogenize(&m);
        match lp_solve(&sys, Some(&objective))? {
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => unreachable!("objective is bounded below by the non-triviality row"),
            LpOutcome::Optimal { point, .. } => {
                stats.m_used = Some(m.to_string());
                let (model, note) = match witness_from_rational(nf, &q, &point) {
                    Ok(s) => (Some(s), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                return Ok(SolveReport {
                    verdict: Verdict::Sat,
                    model,
                    stats,
                    witness_note: note,
                });
            }
        }
    }
    Ok(SolveReport {
        verdict: Verdict::Unsat,
        model: None,
        stats,
        witness_note: None,
    })
}

fn witness_from_rational(
    nf: &Gp2NormalForm,
    q: &GlobalSystem,
    point: &[num_rational::BigRational],
) -> Result<SigmaStructure, WitnessError> {
    let lcd = point.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let mut ints = Vec::with_capacity(q.var_count);
    for v in point {
        ints.push((v.numer() * (&lcd / v.denom())).to_u64().ok_or(WitnessError::Overflow)?);
    }
    ints.resize(q.var_count, 0);
    let g = extract_pseudo_model(q, &ints, &nf.type_space())?;
    let s = desugar_pseudo_model(&g, VERTEX_CAP)?;
    debug_assert!(evaluate(&s, &nf.to_formula(), &[]), "witness fails the normal form");
    Ok(s)
}

/// Builds a colored multigraph whose vertex behaviors are the accepted words
/// encoded by an integer solution of the global system.
pub fn extract_pseudo_model(q: &GlobalSystem, sol: &[u64], ts: &TypeSpace) -> Result<ColoredMultigraph, WitnessError> {
    let mut colors: Vec<OneType> = Vec::new();
    // Per vertex: stubs (2-type seen from the vertex, neighbor type).
    let mut stubs: Vec<Vec<(TwoType, OneType)>> = Vec::new();
    for b in &q.blocks {
        let l = b.letters();
        let mut words: Vec<Vec<u64>> = Vec::new();
        if let Some(aut) = &b.automaton {
            let mut remaining: Vec<u64> = (0..aut.transitions.len()).map(|t| sol[b.p_start + t]).collect();
            let mut out: Vec<Vec<usize>> = vec![Vec::new(); aut.states.len()];
            for (t, &(s, _, _)) in aut.transitions.iter().enumerate() {
                out[s].push(t);
            }
            loop {
                let Some(&first) = out[aut.initial].iter().find(|&&t| remaining[t] > 0) else {
                    break;
                };
                let mut word = vec![0u64; l];
                let mut t = first;
                loop {
                    remaining[t] -= 1;
                    let (_, a, d) = aut.transitions[t];
                    word[a] += 1;
                    if d == aut.accepting {
                        break;
                    }
                    t = *out[d]
                        .iter()
                        .find(|&&t2| remaining[t2] > 0)
                        .ok_or(WitnessError::DecompositionMissing(b.pi.0))?;
                }
                words.push(word);
            }
            if remaining.iter().any(|&r| r > 0) {
                return Err(WitnessError::DecompositionMissing(b.pi.0));
            }
        }
        let h: Vec<u64> = (0..l).map(|j| sol[b.h_start + j]).collect();
        if h.iter().any(|&v| v > 0) {
            match words.first_mut() {
                Some(w) => w.iter_mut().zip(&h).for_each(|(a, b)| *a += b),
                // Homogeneous rows: the whole star element is one vertex.
                None if b.automaton.is_none() => words.push(h),
                None => return Err(WitnessError::DecompositionMissing(b.pi.0)),
            }
        }
        if colors.len() + words.len() > VERTEX_CAP {
            return Err(WitnessError::TooLarge(colors.len() + words.len()));
        }
        // Distribute group counts over the behaviors of each group.
        let mut left: Vec<Vec<u64>> = b
            .groups
            .iter()
            .map(|g| g.iter().map(|&(eta, p2)| sol[q.pair_var((b.pi, eta, p2))]).collect())
            .collect();
        for w in &words {
            let mut mine = Vec::new();
            for (j, g) in b.groups.iter().enumerate() {
                let mut need = w[j];
                for (k, &beh) in g.iter().enumerate() {
                    let take = need.min(left[j][k]);
                    left[j][k] -= take;
                    need -= take;
                    mine.extend(std::iter::repeat_n(beh, take as usize));
                }
                if need > 0 {
                    return Err(WitnessError::DecompositionMissing(b.pi.0));
                }
            }
            colors.push(b.pi);
            stubs.push(mine);
        }
        if left.iter().flatten().any(|&v| v > 0) {
            return Err(WitnessError::DecompositionMissing(b.pi.0));
        }
    }
    Ok(pair_stubs(ts, &colors, &stubs))
}

type Kind = (OneType, TwoType, OneType);

fn kind_key(k: Kind) -> (u32, u32, u32) {
    (k.0 .0, k.1 .0, k.2 .0)
}

/// Pairs stubs of each kind with stubs of the dual kind. Edges never join a
/// vertex to itself; when one copy of the vertex set cannot achieve that, two
/// copies are used and every edge crosses between them.
fn pair_stubs(ts: &TypeSpace, colors: &[OneType], stubs: &[Vec<(TwoType, OneType)>]) -> ColoredMultigraph {
    let mut by_kind: BTreeMap<(u32, u32, u32), Vec<usize>> = BTreeMap::new();
    for (v, list) in stubs.iter().enumerate() {
        for &(eta, p2) in list {
            by_kind.entry(kind_key((colors[v], eta, p2))).or_default().push(v);
        }
    }
    let kinds: Vec<(u32, u32, u32)> = by_kind.keys().copied().collect();
    let dual_key = |k: (u32, u32, u32)| kind_key((OneType(k.2), dual(TwoType(k.1)), OneType(k.0)));
    // Single copy.
    let mut edges = Vec::new();
    let mut ok = true;
    'kinds: for &k in &kinds {
        let d = dual_key(k);
        if d < k {
            continue;
        }
        let a = &by_kind[&k];
        if d == k {
            if a.len() % 2 == 1 {
                ok = false;
                break;
            }
            let half = a.len() / 2;
            for i in 0..half {
                if a[i] == a[i + half] {
                    ok = false;
                    break 'kinds;
                }
                edges.push((a[i], a[i + half], TwoType(k.1)));
            }
        } else {
            let b = &by_kind[&d];
            let len = a.len();
            let shift = (0..len.max(1)).find(|&s| (0..len).all(|i| a[i] != b[(i + s) % len]));
            let Some(s) = shift else {
                ok = false;
                break;
            };
            for i in 0..len {
                edges.push((a[i], b[(i + s) % len], TwoType(k.1)));
            }
        }
    }
    if ok {
        return ColoredMultigraph {
            ts: *ts,
            colors: colors.to_vec(),
            edges,
        };
    }
    let n = colors.len();
    let mut edges = Vec::new();
    for &k in &kinds {
        let d = dual_key(k);
        if d < k {
            continue;
        }
        let a = &by_kind[&k];
        let b = &by_kind[&d];
        for i in 0..a.len() {
            edges.push((a[i], b[i] + n, TwoType(k.1)));
            if d != k {
                edges.push((a[i] + n, b[i], TwoType(k.1)));
            }
        }
    }
    let mut all_colors = colors.to_vec();
    all_colors.extend_from_slice(colors);
    ColoredMultigraph {
        ts: *ts,
        colors: all_colors,
        edges,
    }
}

fn pair_key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Removes parallel edges by exchanging endpoints between two edges of the
/// same kind, as long as such exchanges exist. Behaviors are unchanged.
pub fn reduce_parallel_edges(g: &mut ColoredMultigraph) {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for &(u, v, _) in &g.edges {
        *count.entry(pair_key(u, v)).or_insert(0) += 1;
    }
    let mut progress = true;
    while progress {
        progress = false;
        for i in 0..g.edges.len() {
            let (a, b, eta) = g.edges[i];
            if count[&pair_key(a, b)] < 2 {
                continue;
            }
            let found = (0..g.edges.len()).find_map(|j| {
                if j == i {
                    return None;
                }
                let (c0, d0, e0) = g.edges[j];
                let orient = if e0 == eta && g.colors[c0] == g.colors[a] && g.colors[d0] == g.colors[b] {
                    Some((c0, d0))
                } else if dual(e0) == eta && g.colors[d0] == g.colors[a] && g.colors[c0] == g.colors[b] {
                    Some((d0, c0))
                } else {
                    None
                };
                let (c, d) = orient?;
                let fresh = |x: usize, y: usize| x != y && !count.contains_key(&pair_key(x, y));
                (fresh(a, d) && fresh(c, b) && pair_key(a, d) != pair_key(c, b)).then_some((j, c, d))
            });
            if let Some((j, c, d)) = found {
                for (x, y) in [(a, b), (g.edges[j].0, g.edges[j].1)] {
                    let e = count.get_mut(&pair_key(x, y)).expect("counted");
                    *e -= 1;
                    if *e == 0 {
                        count.remove(&pair_key(x, y));
                    }
                }
                g.edges[i] = (a, d, eta);
                g.edges[j] = (c, b, eta);
                *count.entry(pair_key(a, d)).or_insert(0) += 1;
                *count.entry(pair_key(c, b)).or_insert(0) += 1;
                progress = true;
            }
        }
    }
}

/// One duplicate-and-swap round: two copies of `g`, and for every pair with
/// parallel edges one of them is replaced by two edges across the copies.
pub fn duplicate_and_swap_round(g: &ColoredMultigraph) -> ColoredMultigraph {
    let n = g.colors.len();
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for &(u, v, _) in &g.edges {
        *count.entry(pair_key(u, v)).or_insert(0) += 1;
    }
    let mut swapped: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(2 * g.edges.len());
    for &(u, v, eta) in &g.edges {
        let key = pair_key(u, v);
        if count[&key] >= 2 && swapped.insert(key) {
            edges.push((u, v + n, eta));
            edges.push((u + n, v, eta));
        } else {
            edges.push((u, v, eta));
            edges.push((u + n, v + n, eta));
        }
    }
    let mut colors = g.colors.clone();
    colors.extend_from_slice(&g.colors);
    ColoredMultigraph {
        ts: g.ts,
        colors,
        edges,
    }
}

/// Turns a pseudo-model into a structure: exchanges endpoints where possible,
/// then runs duplicate-and-swap rounds until no parallel edges remain. Pairs
/// without an edge get the 2-type with no binary atoms.
pub fn desugar_pseudo_model(g: &ColoredMultigraph, vertex_cap: usize) -> Result<SigmaStructure, WitnessError> {
    let mut g = g.clone();
    reduce_parallel_edges(&mut g);
    while g.multiplicity() > 1 {
        if 2 * g.colors.len() > vertex_cap {
            return Err(WitnessError::TooLarge(2 * g.colors.len()));
        }
        g = duplicate_and_swap_round(&g);
    }
    Ok(g.to_structure())
}

/// Normalizes a `gp2` problem, decides it and maps a witness back to the
/// source vocabulary. Returns the report and the source-level model.
pub fn solve_problem(p: &SourceProblem, cfg: &Config) -> Result<(SolveReport, Option<SigmaStructure>), ProblemError> {
    let norm = to_gp2_normal_form(p)?;
    let report = decide_sat(&norm.nf, cfg)?;
    let model = report.model.as_ref().map(|m| pull_back_model(m, &norm.trace));
    if let Some(m) = &model {
        debug_assert!(evaluate(m, &p.sentence, &[]), "pulled-back witness fails the source");
        if !evaluate(m, &p.sentence, &[]) {
            return Err(ProblemError::WitnessRejected);
        }
    }
    Ok((report, model))
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Solve(#[from] Gp2Error),
    #[error("witness rejected by the evaluator on the source problem")]
    WitnessRejected,
}

/// Convenience for tests and the CLI: the formula of the normal form.
pub fn normal_form_sentence(nf: &Gp2NormalForm) -> Formula {
    nf.to_formula()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::to_gp2_normal_form;
    use crate::parser::parse;
    use crate::semantics::{behavior_vector, find_model, OracleOptions};

    fn load(name: &str) -> Gp2NormalForm {
        let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
        let p = parse(&std::fs::read_to_string(path).unwrap()).unwrap();
        to_gp2_normal_form(&p).unwrap().nf
    }

    fn nf_of(text: &str) -> Gp2NormalForm {
        to_gp2_normal_form(&parse(text).unwrap()).unwrap().nf
    }

    #[test]
    fn percentage_is_sat_with_verified_model() {
        let nf = load("percentage.tvl");
        let r = decide_sat(&nf, &Config::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Sat);
        let m = r.model.expect("witness");
        assert!(evaluate(&m, &nf.to_formula(), &[]));
    }

    #[test]
    fn counting_row_conflict_is_unsat() {
        let nf = nf_of(
            "vocab { unary U; binary R; }\nlogic gp2;\nsentence (forall x . (U(x) -> P[1*#y(R(x,y) & x != y) = 1])) & (forall x . U(x)) & (forall x . forall y . (R(x,y) -> x = y));",
        );
        let r = decide_sat(&nf, &Config::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Unsat);
        let ts = nf.type_space();
        assert!(find_model(ts, &nf.to_formula(), &[], &OracleOptions::up_to(4)).is_none());
    }

    #[test]
    fn unsatisfiable_gamma() {
        let nf = nf_of("vocab { unary U; binary R; }\nlogic gp2;\nsentence forall x . (U(x) & !U(x));");
        let r = decide_sat(&nf, &Config::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Unsat);
        assert_eq!(r.stats.one_types, 0);
    }

    #[test]
    fn characteristic_system_rows() {
        let nf = nf_of("vocab { unary U; binary R; }\nlogic gp2;\nsentence forall x . (U(x) -> P[1*#y(R(x,y) & x != y) = 2]);");
        let ts = nf.type_space();
        let with_u = ts.make_one_type(&[true], &[false]);
        let cs = characteristic_system(&nf, with_u);
        let counting: Vec<_> = cs.system.rows.iter().filter(|r| r.rhs == BigInt::from(2)).collect();
        assert_eq!(counting.len(), 1);
        let without = ts.make_one_type(&[false], &[false]);
        let cs = characteristic_system(&nf, without);
        assert!(cs.system.rows.iter().all(|r| r.rhs.is_zero()));
    }

    #[test]
    fn homogenized_m_monotone() {
        let nf = load("percentage.tvl");
        let q = build_global_system(&nf, &Config::default()).unwrap();
        let m = q.compute_m(&Config::default());
        assert!(m > BigInt::from(256));
        let k = crate::linear::SmallSolutionConstants::default();
        assert_eq!(small_solution_bounds(1, &BigInt::one(), k).1 << 0usize, BigInt::one());
    }

    #[test]
    fn duplicate_and_swap_two_vertices() {
        let ts = TypeSpace::new(0, 1);
        let eta = TwoType::from_bits(&[true], &[false]);
        let g = ColoredMultigraph {
            ts,
            colors: vec![OneType(0), OneType(0)],
            edges: vec![(0, 1, eta), (0, 1, eta)],
        };
        assert_eq!(g.multiplicity(), 2);
        let h = duplicate_and_swap_round(&g);
        assert_eq!(h.colors.len(), 4);
        assert_eq!(h.multiplicity(), 1);
        for v in 0..4 {
            assert_eq!(h.behavior(v), g.behavior(v % 2));
        }
        let s = desugar_pseudo_model(&g, 64).unwrap();
        assert_eq!(behavior_vector(&s, 0).values().sum::<usize>(), 2);
    }
}
