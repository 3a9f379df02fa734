//! Finite structures, evaluation of sentences and global constraints, type
//! reads, and the exhaustive model finder used as ground truth.
//!
//! The evaluator is three-valued so that the model finder can evaluate
//! partially assigned structures and prune early.

use crate::ast::{Cmp, Condition, CountCmp, Formula, GlobalConstraint, Vocabulary};
use crate::par::{self, ExecMode};
use crate::typespace::{OneType, TwoType, TypeSpace};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// A finite structure over `n` unary and `m` binary predicates. Binary
/// relations may contain loops.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SigmaStructure {
    size: usize,
    n: usize,
    m: usize,
    unary: Vec<bool>,
    binary: Vec<bool>,
}

impl SigmaStructure {
    pub fn empty(n: usize, m: usize, size: usize) -> SigmaStructure {
        SigmaStructure {
            size,
            n,
            m,
            unary: vec![false; n * size],
            binary: vec![false; m * size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn type_space(&self) -> TypeSpace {
        TypeSpace::new(self.n, self.m)
    }

    pub fn unary(&self, i: usize, v: usize) -> bool {
        self.unary[i * self.size + v]
    }

    pub fn binary(&self, i: usize, u: usize, v: usize) -> bool {
        self.binary[(i * self.size + u) * self.size + v]
    }

    pub fn set_unary(&mut self, i: usize, v: usize, value: bool) {
        self.unary[i * self.size + v] = value;
    }

    pub fn set_binary(&mut self, i: usize, u: usize, v: usize, value: bool) {
        self.binary[(i * self.size + u) * self.size + v] = value;
    }

    /// Sets the 1-type of `v` (unary predicates and loops).
    pub fn set_one_type(&mut self, v: usize, pi: OneType) {
        let ts = self.type_space();
        for i in 0..self.n {
            self.set_unary(i, v, ts.unary(pi, i));
        }
        for i in 0..self.m {
            self.set_binary(i, v, v, ts.loop_bit(pi, i));
        }
    }

    /// Sets the 2-type of the ordered pair `(u,v)`, `u ≠ v`.
    pub fn set_two_type(&mut self, u: usize, v: usize, eta: TwoType) {
        assert_ne!(u, v);
        for i in 0..self.m {
            self.set_binary(i, u, v, eta.forward(i));
            self.set_binary(i, v, u, eta.backward(i));
        }
    }

    /// Restriction to the listed unary and binary predicates (in that order).
    pub fn project(&self, unary: &[usize], binary: &[usize]) -> SigmaStructure {
        let mut out = SigmaStructure::empty(unary.len(), binary.len(), self.size);
        for (j, &i) in unary.iter().enumerate() {
            for v in 0..self.size {
                out.set_unary(j, v, self.unary(i, v));
            }
        }
        for (j, &i) in binary.iter().enumerate() {
            for u in 0..self.size {
                for v in 0..self.size {
                    out.set_binary(j, u, v, self.binary(i, u, v));
                }
            }
        }
        out
    }

    /// Substructure induced by `vertices`, renumbered in the given order.
    pub fn induced(&self, vertices: &[usize]) -> SigmaStructure {
        let mut out = SigmaStructure::empty(self.n, self.m, vertices.len());
        for (a, &u) in vertices.iter().enumerate() {
            for i in 0..self.n {
                out.set_unary(i, a, self.unary(i, u));
            }
            for (b, &v) in vertices.iter().enumerate() {
                for i in 0..self.m {
                    out.set_binary(i, a, b, self.binary(i, u, v));
                }
            }
        }
        out
    }

    /// Disjoint union of `copies` copies of this structure.
    pub fn replicate(&self, copies: usize) -> SigmaStructure {
        let size = self.size * copies;
        let mut out = SigmaStructure::empty(self.n, self.m, size);
        for c in 0..copies {
            let off = c * self.size;
            for v in 0..self.size {
                for i in 0..self.n {
                    out.set_unary(i, off + v, self.unary(i, v));
                }
                for w in 0..self.size {
                    for i in 0..self.m {
                        out.set_binary(i, off + v, off + w, self.binary(i, v, w));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tv {
    F,
    T,
    U,
}

impl Tv {
    fn from_bool(b: bool) -> Tv {
        if b {
            Tv::T
        } else {
            Tv::F
        }
    }

    fn not(self) -> Tv {
        match self {
            Tv::F => Tv::T,
            Tv::T => Tv::F,
            Tv::U => Tv::U,
        }
    }
}

/// Read access to a (possibly partial) interpretation.
pub trait Interp {
    fn size(&self) -> usize;
    fn unary_tv(&self, i: usize, v: usize) -> Tv;
    fn binary_tv(&self, i: usize, u: usize, v: usize) -> Tv;
}

impl Interp for SigmaStructure {
    fn size(&self) -> usize {
        self.size
    }

    fn unary_tv(&self, i: usize, v: usize) -> Tv {
        Tv::from_bool(self.unary(i, v))
    }

    fn binary_tv(&self, i: usize, u: usize, v: usize) -> Tv {
        Tv::from_bool(self.binary(i, u, v))
    }
}

/// Structure whose binary bits may be unknown.
#[derive(Clone, Debug)]
pub struct PartialStructure {
    size: usize,
    n: usize,
    m: usize,
    unary: Vec<bool>,
    /// 0 false, 1 true, 2 unknown.
    binary: Vec<u8>,
}

impl PartialStructure {
    fn with_types(ts: TypeSpace, types: &[OneType]) -> PartialStructure {
        let size = types.len();
        let mut p = PartialStructure {
            size,
            n: ts.n,
            m: ts.m,
            unary: vec![false; ts.n * size],
            binary: vec![2; ts.m * size * size],
        };
        for (v, &pi) in types.iter().enumerate() {
            for i in 0..ts.n {
                p.unary[i * size + v] = ts.unary(pi, i);
            }
            for i in 0..ts.m {
                p.binary[(i * size + v) * size + v] = ts.loop_bit(pi, i) as u8;
            }
        }
        p
    }

    fn to_structure(&self) -> SigmaStructure {
        SigmaStructure {
            size: self.size,
            n: self.n,
            m: self.m,
            unary: self.unary.clone(),
            binary: self.binary.iter().map(|&b| b == 1).collect(),
        }
    }
}

impl Interp for PartialStructure {
    fn size(&self) -> usize {
        self.size
    }

    fn unary_tv(&self, i: usize, v: usize) -> Tv {
        Tv::from_bool(self.unary[i * self.size + v])
    }

    fn binary_tv(&self, i: usize, u: usize, v: usize) -> Tv {
        match self.binary[(i * self.size + u) * self.size + v] {
            0 => Tv::F,
            1 => Tv::T,
            _ => Tv::U,
        }
    }
}

/// Three-valued (Kleene) evaluation under the assignment `env = [x, y]`.
pub fn eval3<I: Interp>(s: &I, f: &Formula, env: [usize; 2]) -> Tv {
    match f {
        Formula::True => Tv::T,
        Formula::False => Tv::F,
        Formula::Unary(i, v) => s.unary_tv(*i, env[v.slot()]),
        Formula::Binary(i, a, b) => s.binary_tv(*i, env[a.slot()], env[b.slot()]),
        Formula::Eq(a, b) => Tv::from_bool(env[a.slot()] == env[b.slot()]),
        Formula::Neq(a, b) => Tv::from_bool(env[a.slot()] != env[b.slot()]),
        Formula::Not(a) => eval3(s, a, env).not(),
        Formula::And(a, b) => match eval3(s, a, env) {
            Tv::F => Tv::F,
            Tv::T => eval3(s, b, env),
            Tv::U => match eval3(s, b, env) {
                Tv::F => Tv::F,
                _ => Tv::U,
            },
        },
        Formula::Or(a, b) => match eval3(s, a, env) {
            Tv::T => Tv::T,
            Tv::F => eval3(s, b, env),
            Tv::U => match eval3(s, b, env) {
                Tv::T => Tv::T,
                _ => Tv::U,
            },
        },
        Formula::Implies(a, b) => match eval3(s, a, env) {
            Tv::F => Tv::T,
            Tv::T => eval3(s, b, env),
            Tv::U => match eval3(s, b, env) {
                Tv::T => Tv::T,
                _ => Tv::U,
            },
        },
        Formula::Forall(v, a) => {
            let mut out = Tv::T;
            for e in 0..s.size() {
                match eval3(s, a, bind(env, *v, e)) {
                    Tv::F => return Tv::F,
                    Tv::U => out = Tv::U,
                    Tv::T => {}
                }
            }
            out
        }
        Formula::Exists(v, a) => {
            let mut out = Tv::F;
            for e in 0..s.size() {
                match eval3(s, a, bind(env, *v, e)) {
                    Tv::T => return Tv::T,
                    Tv::U => out = Tv::U,
                    Tv::F => {}
                }
            }
            out
        }
        Formula::Count { cmp, k, var, body } => {
            let (t, u) = count3(s, body, *var, env);
            let k = match k.to_usize() {
                Some(k) => k,
                None => usize::MAX,
            };
            let (lo, hi) = (t, t + u);
            match cmp {
                CountCmp::Ge => decide(lo >= k, hi < k),
                CountCmp::Le => decide(hi <= k, lo > k),
                CountCmp::Eq => decide(lo == k && hi == k, k < lo || k > hi),
            }
        }
        Formula::Pres { terms, cond } => {
            let mut bounds = Vec::with_capacity(terms.len());
            for t in terms {
                bounds.push((&t.coeff, count3(s, &t.body, t.var, env)));
            }
            pres_decide(&bounds, cond)
        }
    }
}

fn bind(env: [usize; 2], v: crate::ast::Var, e: usize) -> [usize; 2] {
    let mut env = env;
    env[v.slot()] = e;
    env
}

fn decide(is_true: bool, is_false: bool) -> Tv {
    if is_true {
        Tv::T
    } else if is_false {
        Tv::F
    } else {
        Tv::U
    }
}

/// (definitely true, unknown) counts of `body` over the values of `var`.
fn count3<I: Interp>(s: &I, body: &Formula, var: crate::ast::Var, env: [usize; 2]) -> (usize, usize) {
    let (mut t, mut u) = (0, 0);
    for e in 0..s.size() {
        match eval3(s, body, bind(env, var, e)) {
            Tv::T => t += 1,
            Tv::U => u += 1,
            Tv::F => {}
        }
    }
    (t, u)
}

/// Decides `Σ coeff · count cond` where each count lies in `[t, t+u]`.
fn pres_decide(bounds: &[(&BigInt, (usize, usize))], cond: &Condition) -> Tv {
    let mut small: Option<(i128, i128)> = Some((0, 0));
    for (c, (t, u)) in bounds {
        small = small.and_then(|(lo, hi)| {
            let c = c.to_i64()? as i128;
            let (a, b) = (c * *t as i128, c * (*t + *u) as i128);
            Some((lo + a.min(b), hi + a.max(b)))
        });
    }
    let (lo, hi) = match small {
        Some((lo, hi)) => (BigInt::from(lo), BigInt::from(hi)),
        None => {
            let mut lo = BigInt::zero();
            let mut hi = BigInt::zero();
            for (c, (t, u)) in bounds {
                let a = *c * BigInt::from(*t);
                let b = *c * BigInt::from(*t + *u);
                if a <= b {
                    lo += a;
                    hi += b;
                } else {
                    lo += b;
                    hi += a;
                }
            }
            (lo, hi)
        }
    };
    if lo == hi {
        return Tv::from_bool(cond.holds(&lo));
    }
    match cond {
        Condition::Cmp(c, d) => match c {
            Cmp::Le => decide(hi <= *d, lo > *d),
            Cmp::Lt => decide(hi < *d, lo >= *d),
            Cmp::Ge => decide(lo >= *d, hi < *d),
            Cmp::Gt => decide(lo > *d, hi <= *d),
            Cmp::Eq => decide(false, *d < lo || *d > hi),
        },
        Condition::Mod { .. } => Tv::U,
    }
}

/// Three-valued truth of a global constraint. Each formula is evaluated with
/// both variables bound to the counted element.
pub fn eval_global3<I: Interp>(s: &I, g: &GlobalConstraint) -> Tv {
    let mut bounds = Vec::with_capacity(g.terms.len());
    for (c, f) in &g.terms {
        let (mut t, mut u) = (0, 0);
        for e in 0..s.size() {
            match eval3(s, f, [e, e]) {
                Tv::T => t += 1,
                Tv::U => u += 1,
                Tv::F => {}
            }
        }
        bounds.push((c, (t, u)));
    }
    pres_decide(&bounds, &g.cond)
}

/// Standard finite semantics of a sentence together with global constraints.
pub fn evaluate(s: &SigmaStructure, sentence: &Formula, globals: &[GlobalConstraint]) -> bool {
    eval3(s, sentence, [0, 0]) == Tv::T && globals.iter().all(|g| eval_global3(s, g) == Tv::T)
}

/// Truth of a formula with free variables at the given assignment.
pub fn holds_at(s: &SigmaStructure, f: &Formula, env: [usize; 2]) -> bool {
    eval3(s, f, env) == Tv::T
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("a 2-type needs two distinct elements")]
    SelfPair,
}

pub fn one_type_of(s: &SigmaStructure, v: usize) -> OneType {
    let ts = s.type_space();
    let unary: Vec<bool> = (0..s.n).map(|i| s.unary(i, v)).collect();
    let loops: Vec<bool> = (0..s.m).map(|i| s.binary(i, v, v)).collect();
    ts.make_one_type(&unary, &loops)
}

pub fn two_type_of(s: &SigmaStructure, u: usize, v: usize) -> Result<TwoType, SemanticsError> {
    if u == v {
        return Err(SemanticsError::SelfPair);
    }
    let fwd: Vec<bool> = (0..s.m).map(|i| s.binary(i, u, v)).collect();
    let bwd: Vec<bool> = (0..s.m).map(|i| s.binary(i, v, u)).collect();
    Ok(TwoType::from_bits(&fwd, &bwd))
}

/// Counts of audible neighbours by (2-type, neighbour 1-type).
pub fn behavior_vector(s: &SigmaStructure, v: usize) -> BTreeMap<(TwoType, OneType), usize> {
    let mut out = BTreeMap::new();
    for u in 0..s.size {
        if u == v {
            continue;
        }
        let eta = two_type_of(s, v, u).expect("distinct");
        if !eta.is_silent() {
            *out.entry((eta, one_type_of(s, u))).or_insert(0) += 1;
        }
    }
    out
}

/// Number of elements of each 1-type, indexed by mask.
pub fn cardinality_vector(s: &SigmaStructure) -> Vec<usize> {
    let mut out = vec![0; s.type_space().one_type_count()];
    for v in 0..s.size {
        out[one_type_of(s, v).0 as usize] += 1;
    }
    out
}

/// Vertices coloured by 1-types and edges coloured by audible 2-types, with
/// parallel edges allowed. An edge `(u, v, eta)` gives the pair `(u,v)` type `eta`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoredMultigraph {
    pub ts: TypeSpace,
    pub colors: Vec<OneType>,
    pub edges: Vec<(usize, usize, TwoType)>,
}

impl ColoredMultigraph {
    /// Largest number of edges between one unordered pair of vertices.
    pub fn multiplicity(&self) -> usize {
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &(u, v, _) in &self.edges {
            *counts.entry((u.min(v), u.max(v))).or_insert(0) += 1;
        }
        counts.values().copied().max().unwrap_or(0)
    }

    /// Counts of incident edges by (2-type seen from `v`, neighbour colour).
    pub fn behavior(&self, v: usize) -> BTreeMap<(TwoType, OneType), usize> {
        let mut out = BTreeMap::new();
        for &(a, b, eta) in &self.edges {
            if a == v {
                *out.entry((eta, self.colors[b])).or_insert(0) += 1;
            }
            if b == v {
                *out.entry((crate::typespace::dual(eta), self.colors[a])).or_insert(0) += 1;
            }
        }
        out
    }

    /// The structure realizing this graph. Requires multiplicity ≤ 1.
    pub fn to_structure(&self) -> SigmaStructure {
        assert!(self.multiplicity() <= 1, "parallel edges cannot be realized");
        let mut s = SigmaStructure::empty(self.ts.n, self.ts.m, self.colors.len());
        for (v, &c) in self.colors.iter().enumerate() {
            s.set_one_type(v, c);
        }
        for &(u, v, eta) in &self.edges {
            s.set_two_type(u, v, eta);
        }
        s
    }
}

pub fn type_graph(s: &SigmaStructure) -> ColoredMultigraph {
    let colors = (0..s.size).map(|v| one_type_of(s, v)).collect();
    let mut edges = Vec::new();
    for u in 0..s.size {
        for v in u + 1..s.size {
            let eta = two_type_of(s, u, v).expect("distinct");
            if !eta.is_silent() {
                edges.push((u, v, eta));
            }
        }
    }
    ColoredMultigraph {
        ts: s.type_space(),
        colors,
        edges,
    }
}

/// JSON shape of a structure: predicate names map to sorted element lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelJson {
    pub size: usize,
    pub unary: BTreeMap<String, Vec<usize>>,
    pub binary: BTreeMap<String, Vec<[usize; 2]>>,
}

pub fn model_to_json(s: &SigmaStructure, vocab: &Vocabulary) -> ModelJson {
    let mut unary = BTreeMap::new();
    for i in 0..s.n {
        unary.insert(
            vocab.unary_name(i).to_string(),
            (0..s.size).filter(|&v| s.unary(i, v)).collect(),
        );
    }
    let mut binary = BTreeMap::new();
    for i in 0..s.m {
        let mut pairs = Vec::new();
        for u in 0..s.size {
            for v in 0..s.size {
                if s.binary(i, u, v) {
                    pairs.push([u, v]);
                }
            }
        }
        binary.insert(vocab.binary_name(i).to_string(), pairs);
    }
    ModelJson {
        size: s.size,
        unary,
        binary,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelJsonError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("element {0} out of range")]
    OutOfRange(usize),
}

pub fn model_from_json(j: &ModelJson, vocab: &Vocabulary) -> Result<SigmaStructure, ModelJsonError> {
    let mut s = SigmaStructure::empty(vocab.n(), vocab.m(), j.size);
    for (name, elems) in &j.unary {
        let i = vocab
            .unary_index(name)
            .ok_or_else(|| ModelJsonError::UnknownPredicate(name.clone()))?;
        for &v in elems {
            if v >= j.size {
                return Err(ModelJsonError::OutOfRange(v));
            }
            s.set_unary(i, v, true);
        }
    }
    for (name, pairs) in &j.binary {
        let i = vocab
            .binary_index(name)
            .ok_or_else(|| ModelJsonError::UnknownPredicate(name.clone()))?;
        for &[u, v] in pairs {
            if u >= j.size || v >= j.size {
                return Err(ModelJsonError::OutOfRange(u.max(v)));
            }
            s.set_binary(i, u, v, true);
        }
    }
    Ok(s)
}

/// Search space of the exhaustive model finder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub min_size: usize,
    pub max_size: usize,
    /// Admit the structure with no elements.
    pub allow_empty: bool,
    /// Only structures without loops.
    pub loop_free: bool,
    /// Only structures with exactly this 1-type cardinality vector (indexed by mask).
    pub type_vector: Option<Vec<usize>>,
    /// Lexicographic symmetry breaking between same-typed elements.
    pub symmetry: bool,
    pub exec: ExecMode,
}

impl OracleOptions {
    pub fn up_to(max_size: usize) -> OracleOptions {
        OracleOptions {
            min_size: 1,
            max_size,
            allow_empty: false,
            loop_free: false,
            type_vector: None,
            symmetry: true,
            exec: ExecMode::Parallel,
        }
    }
}

/// Exhaustive search for a model of `sentence` and `globals` over `ts`, by
/// increasing size. Complete within the size bound; returns the first model in
/// a fixed enumeration order.
pub fn find_model(
    ts: TypeSpace,
    sentence: &Formula,
    globals: &[GlobalConstraint],
    opts: &OracleOptions,
) -> Option<SigmaStructure> {
    if let Some(vec) = &opts.type_vector {
        assert_eq!(vec.len(), ts.one_type_count(), "type vector dimension");
        let mut types = Vec::new();
        for (mask, &c) in vec.iter().enumerate() {
            if c > 0 && opts.loop_free && !ts.loop_free(OneType(mask as u32)) {
                return None;
            }
            types.extend(std::iter::repeat_n(OneType(mask as u32), c));
        }
        if types.is_empty() && !opts.allow_empty {
            return None;
        }
        return search_assignment(ts, sentence, globals, &types, opts.symmetry);
    }
    let lo = if opts.allow_empty { 0 } else { opts.min_size.max(1) };
    let allowed: Vec<OneType> = ts.one_types().filter(|&p| !opts.loop_free || ts.loop_free(p)).collect();
    for size in lo..=opts.max_size {
        let seqs = sorted_sequences(&allowed, size);
        let found = par::find_map_first(opts.exec, &seqs, |types| {
            search_assignment(ts, sentence, globals, types, opts.symmetry)
        });
        if found.is_some() {
            return found;
        }
    }
    None
}

/// All nondecreasing sequences of length `len` over `items`.
pub fn sorted_sequences<T: Copy>(items: &[T], len: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn rec<T: Copy>(items: &[T], start: usize, len: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, i, len, cur, out);
            cur.pop();
        }
    }
    rec(items, 0, len, &mut cur, &mut out);
    out
}

fn eval_all(p: &PartialStructure, sentence: &Formula, globals: &[GlobalConstraint]) -> Tv {
    let mut out = Tv::T;
    for g in globals {
        match eval_global3(p, g) {
            Tv::F => return Tv::F,
            Tv::U => out = Tv::U,
            Tv::T => {}
        }
    }
    match eval3(p, sentence, [0, 0]) {
        Tv::F => Tv::F,
        Tv::U => Tv::U,
        Tv::T => out,
    }
}

struct Search<'a> {
    sentence: &'a Formula,
    globals: &'a [GlobalConstraint],
    positions: Vec<(usize, usize, usize)>,
    /// Adjacent same-typed element pairs `(a, a+1)`.
    swaps: Vec<usize>,
    part: PartialStructure,
}

impl Search<'_> {
    fn index(&self, i: usize, u: usize, v: usize) -> usize {
        let n = self.part.size;
        (i * n + u) * n + v
    }

    /// Cross bits in search order: by source, then target, then predicate.
    fn lex_ok(&self) -> bool {
        for &a in &self.swaps {
            let tau = |w: usize| {
                if w == a {
                    a + 1
                } else if w == a + 1 {
                    a
                } else {
                    w
                }
            };
            for &(i, u, v) in &self.positions {
                let x = self.part.binary[self.index(i, u, v)];
                let y = self.part.binary[self.index(i, tau(u), tau(v))];
                if x == 2 || y == 2 || x < y {
                    break;
                }
                if x > y {
                    return false;
                }
            }
        }
        true
    }

    fn dfs(&mut self, depth: usize) -> bool {
        if depth == self.positions.len() {
            return eval_all(&self.part, self.sentence, self.globals) == Tv::T;
        }
        let (i, u, v) = self.positions[depth];
        let idx = self.index(i, u, v);
        for value in [0u8, 1] {
            self.part.binary[idx] = value;
            if !self.lex_ok() {
                continue;
            }
            match eval_all(&self.part, self.sentence, self.globals) {
                Tv::F => continue,
                Tv::T => {
                    for &(i2, u2, v2) in &self.positions[depth + 1..] {
                        let j = self.index(i2, u2, v2);
                        self.part.binary[j] = 0;
                    }
                    if self.lex_ok() {
                        return true;
                    }
                    for &(i2, u2, v2) in &self.positions[depth + 1..] {
                        let j = self.index(i2, u2, v2);
                        self.part.binary[j] = 2;
                    }
                    if self.dfs(depth + 1) {
                        return true;
                    }
                }
                Tv::U => {
                    if self.dfs(depth + 1) {
                        return true;
                    }
                }
            }
        }
        self.part.binary[idx] = 2;
        false
    }
}

/// Searches the cross bits for a fixed 1-type assignment.
fn search_assignment(
    ts: TypeSpace,
    sentence: &Formula,
    globals: &[GlobalConstraint],
    types: &[OneType],
    symmetry: bool,
) -> Option<SigmaStructure> {
    let size = types.len();
    let part = PartialStructure::with_types(ts, types);
    match eval_all(&part, sentence, globals) {
        Tv::F => return None,
        Tv::T if ts.m == 0 || size < 2 => return Some(part.to_structure()),
        _ => {}
    }
    let mut positions = Vec::new();
    for u in 0..size {
        for v in 0..size {
            if u != v {
                for i in 0..ts.m {
                    positions.push((i, u, v));
                }
            }
        }
    }
    let swaps = if symmetry {
        (0..size.saturating_sub(1)).filter(|&a| types[a] == types[a + 1]).collect()
    } else {
        vec![]
    };
    let mut search = Search {
        sentence,
        globals,
        positions,
        swaps,
        part,
    };
    if search.dfs(0) {
        Some(search.part.to_structure())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse, parse_formula};

    fn matching() -> crate::parser::SourceProblem {
        parse(
            "vocab { unary; binary R; } logic c2;\n\
             sentence (forall x . E=1 y . (R(x,y) & x != y)) & (forall x . forall y . (R(x,y) -> R(y,x)));",
        )
        .unwrap()
    }

    fn two_cycle() -> SigmaStructure {
        let mut s = SigmaStructure::empty(0, 1, 2);
        s.set_binary(0, 0, 1, true);
        s.set_binary(0, 1, 0, true);
        s
    }

    #[test]
    fn matching_on_two_cycle() {
        let p = matching();
        assert!(evaluate(&two_cycle(), &p.sentence, &[]));
        let ts = TypeSpace::new(0, 1);
        let model = find_model(ts, &p.sentence, &[], &OracleOptions::up_to(3)).unwrap();
        assert_eq!(model.size(), 2);
    }

    #[test]
    fn matching_with_odd_total_has_no_model() {
        let p = parse(
            "vocab { unary; binary R; } logic c2g;\n\
             sentence (forall x . E=1 y . (R(x,y) & x != y)) & (forall x . forall y . (R(x,y) -> R(y,x)));\n\
             global 1*|true| = 3;",
        )
        .unwrap();
        let ts = TypeSpace::new(0, 1);
        assert!(find_model(ts, &p.sentence, &p.globals, &OracleOptions::up_to(5)).is_none());
    }

    #[test]
    fn modulus_global() {
        let v = Vocabulary::new(vec!["U1".into()], vec![]).unwrap();
        let p = parse("vocab { unary U1; binary; } logic c2g; sentence true; global 1*|U1(x)| mod 2 = 0;").unwrap();
        let mut s = SigmaStructure::empty(1, 0, 3);
        for e in 0..3 {
            s.set_unary(0, e, true);
        }
        assert!(!evaluate(&s, &p.sentence, &p.globals));
        s.set_unary(0, 2, false);
        assert!(evaluate(&s, &p.sentence, &p.globals));
        assert_eq!(v.n(), 1);
    }

    #[test]
    fn percentage_small_instance() {
        let p = parse(include_str!("../fixtures/percentage.tvl")).unwrap();
        // V1 = {0,1} with no edges, V2 = {2,3,4}.
        let mut s = SigmaStructure::empty(2, 1, 5);
        s.set_unary(0, 0, true);
        s.set_unary(0, 1, true);
        for v in 2..5 {
            s.set_unary(1, v, true);
        }
        assert!(!evaluate(&s, &p.sentence, &[]));
    }

    #[test]
    fn type_reads() {
        let s = two_cycle();
        let b = behavior_vector(&s, 0);
        assert_eq!(b.len(), 1);
        assert_eq!(b[&(TwoType(0b11), OneType(0))], 1);
        assert_eq!(two_type_of(&s, 0, 0), Err(SemanticsError::SelfPair));
        let iso = SigmaStructure::empty(1, 1, 1);
        assert!(behavior_vector(&iso, 0).is_empty());
        assert_eq!(cardinality_vector(&s).iter().sum::<usize>(), 2);
        assert_eq!(type_graph(&s).multiplicity(), 1);
    }

    #[test]
    fn json_round_trip() {
        let vocab = Vocabulary::new(vec!["U1".into()], vec!["R1".into()]).unwrap();
        let mut s = SigmaStructure::empty(1, 1, 3);
        s.set_unary(0, 0, true);
        s.set_unary(0, 2, true);
        s.set_binary(0, 0, 1, true);
        s.set_binary(0, 1, 0, true);
        let j = model_to_json(&s, &vocab);
        let text = serde_json::to_string(&j).unwrap();
        assert_eq!(text, r#"{"size":3,"unary":{"U1":[0,2]},"binary":{"R1":[[0,1],[1,0]]}}"#);
        assert_eq!(model_from_json(&j, &vocab).unwrap(), s);
    }

    #[test]
    fn three_valued_counting() {
        let vocab = Vocabulary::anonymous(0, 1);
        let f = parse_formula("E>=1 y . R1(x,y)", &vocab).unwrap();
        let part = PartialStructure::with_types(TypeSpace::new(0, 1), &[OneType(0), OneType(0)]);
        assert_eq!(eval3(&part, &f, [0, 0]), Tv::U);
    }
}
