//! 1-types and 2-types as bitmasks.
//!
//! A 1-type over `n` unary and `m` binary predicates uses bits `0..n` for
//! `U_i(x)` and bits `n..n+m` for the loops `R_i(x,x)`. A 2-type uses bit `2i`
//! for `R_i(x,y)` and bit `2i+1` for `R_i(y,x)`. Orderings are by mask value.

use crate::ast::{C2NormalForm, Formula, Gp2NormalForm, Var};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OneType(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TwoType(pub u32);

impl TwoType {
    pub const NULL: TwoType = TwoType(0);

    pub fn is_silent(self) -> bool {
        self.0 == 0
    }

    /// Holds `R_i(x,y)`.
    pub fn forward(self, i: usize) -> bool {
        self.0 >> (2 * i) & 1 == 1
    }

    /// Holds `R_i(y,x)`.
    pub fn backward(self, i: usize) -> bool {
        self.0 >> (2 * i + 1) & 1 == 1
    }

    pub fn from_bits(forward: &[bool], backward: &[bool]) -> TwoType {
        let mut mask = 0;
        for (i, (&f, &b)) in forward.iter().zip(backward).enumerate() {
            mask |= (f as u32) << (2 * i) | (b as u32) << (2 * i + 1);
        }
        TwoType(mask)
    }
}

/// Swaps the roles of `x` and `y`.
pub fn dual(eta: TwoType) -> TwoType {
    let even = eta.0 & 0x5555_5555;
    let odd = eta.0 & 0xAAAA_AAAA;
    TwoType(even << 1 | odd >> 1)
}

/// Component `i < counted` is 1 iff `R_i(x,y)` holds.
pub fn forward_vec(eta: TwoType, counted: usize) -> Vec<u8> {
    (0..counted).map(|i| eta.forward(i) as u8).collect()
}

/// Component `i < counted` is 1 iff `R_i(y,x)` holds.
pub fn backward_vec(eta: TwoType, counted: usize) -> Vec<u8> {
    (0..counted).map(|i| eta.backward(i) as u8).collect()
}

pub fn forward_silent(eta: TwoType, counted: usize) -> bool {
    (0..counted).all(|i| !eta.forward(i))
}

pub fn backward_silent(eta: TwoType, counted: usize) -> bool {
    (0..counted).all(|i| !eta.backward(i))
}

/// Fixed enumeration of the type space for `n` unary and `m` binary predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSpace {
    pub n: usize,
    pub m: usize,
}

impl TypeSpace {
    pub fn new(n: usize, m: usize) -> TypeSpace {
        assert!(n + m <= 24 && m <= 12, "type space too large");
        TypeSpace { n, m }
    }

    pub fn one_type_count(&self) -> usize {
        1 << (self.n + self.m)
    }

    pub fn two_type_count(&self) -> usize {
        1 << (2 * self.m)
    }

    pub fn one_types(&self) -> impl Iterator<Item = OneType> {
        (0..self.one_type_count() as u32).map(OneType)
    }

    /// All 2-types, silent one first.
    pub fn two_types(&self) -> impl Iterator<Item = TwoType> {
        (0..self.two_type_count() as u32).map(TwoType)
    }

    /// Audible 2-types.
    pub fn audible_two_types(&self) -> impl Iterator<Item = TwoType> {
        (1..self.two_type_count() as u32).map(TwoType)
    }

    /// 2-types containing `R_t(x,y)`.
    pub fn two_types_with(&self, t: usize) -> impl Iterator<Item = TwoType> {
        self.two_types().filter(move |e| e.forward(t))
    }

    pub fn unary(&self, pi: OneType, i: usize) -> bool {
        pi.0 >> i & 1 == 1
    }

    pub fn loop_bit(&self, pi: OneType, i: usize) -> bool {
        pi.0 >> (self.n + i) & 1 == 1
    }

    pub fn loop_free(&self, pi: OneType) -> bool {
        pi.0 >> self.n == 0
    }

    pub fn make_one_type(&self, unary: &[bool], loops: &[bool]) -> OneType {
        let mut mask = 0u32;
        for (i, &b) in unary.iter().enumerate() {
            mask |= (b as u32) << i;
        }
        for (i, &b) in loops.iter().enumerate() {
            mask |= (b as u32) << (self.n + i);
        }
        OneType(mask)
    }

    /// Truth of a quantifier-free formula when both variables denote one element of type `pi`.
    pub fn eval_single(&self, f: &Formula, pi: OneType) -> bool {
        eval_qf(f, &|lit| match lit {
            Lit::Unary(i, _) => self.unary(pi, i),
            Lit::Binary(i, _, _) => self.loop_bit(pi, i),
            Lit::Eq(_, _) => true,
        })
    }

    /// Truth of a quantifier-free formula with `x` of type `p1`, `y` of type `p2`,
    /// `x ≠ y` and the pair `(x,y)` of 2-type `eta`.
    pub fn eval_pair(&self, f: &Formula, p1: OneType, eta: TwoType, p2: OneType) -> bool {
        eval_qf(f, &|lit| match lit {
            Lit::Unary(i, Var::X) => self.unary(p1, i),
            Lit::Unary(i, Var::Y) => self.unary(p2, i),
            Lit::Binary(i, Var::X, Var::X) => self.loop_bit(p1, i),
            Lit::Binary(i, Var::Y, Var::Y) => self.loop_bit(p2, i),
            Lit::Binary(i, Var::X, Var::Y) => eta.forward(i),
            Lit::Binary(i, Var::Y, Var::X) => eta.backward(i),
            Lit::Eq(a, b) => a == b,
        })
    }
}

enum Lit {
    Unary(usize, Var),
    Binary(usize, Var, Var),
    Eq(Var, Var),
}

fn eval_qf(f: &Formula, lit: &dyn Fn(Lit) -> bool) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Unary(i, v) => lit(Lit::Unary(*i, *v)),
        Formula::Binary(i, a, b) => lit(Lit::Binary(*i, *a, *b)),
        Formula::Eq(a, b) => lit(Lit::Eq(*a, *b)),
        Formula::Neq(a, b) => !lit(Lit::Eq(*a, *b)),
        Formula::Not(a) => !eval_qf(a, lit),
        Formula::And(a, b) => eval_qf(a, lit) && eval_qf(b, lit),
        Formula::Or(a, b) => eval_qf(a, lit) || eval_qf(b, lit),
        Formula::Implies(a, b) => !eval_qf(a, lit) || eval_qf(b, lit),
        _ => panic!("quantified formula where a quantifier-free one was expected"),
    }
}

/// The universal part of a normal form: which 1-types and type triples it admits.
pub trait UniversalPart {
    fn type_space(&self) -> TypeSpace;
    fn one_type_compatible(&self, pi: OneType) -> bool;
    /// Both orientations of the pair satisfy the binary universal part.
    fn triple_compatible(&self, p1: OneType, eta: TwoType, p2: OneType) -> bool;
}

impl UniversalPart for Gp2NormalForm {
    fn type_space(&self) -> TypeSpace {
        TypeSpace::new(self.vocab.n(), self.vocab.m())
    }

    fn one_type_compatible(&self, pi: OneType) -> bool {
        self.type_space().eval_single(&self.gamma, pi)
    }

    fn triple_compatible(&self, p1: OneType, eta: TwoType, p2: OneType) -> bool {
        let ts = self.type_space();
        let back = dual(eta);
        self.alphas.iter().enumerate().all(|(i, a)| {
            (!eta.forward(i) || ts.eval_pair(a, p1, eta, p2)) && (!back.forward(i) || ts.eval_pair(a, p2, back, p1))
        })
    }
}

impl UniversalPart for C2NormalForm {
    fn type_space(&self) -> TypeSpace {
        TypeSpace::new(self.vocab.n(), self.vocab.m())
    }

    fn one_type_compatible(&self, pi: OneType) -> bool {
        self.type_space().eval_single(&self.gamma, pi)
    }

    fn triple_compatible(&self, p1: OneType, eta: TwoType, p2: OneType) -> bool {
        let ts = self.type_space();
        ts.eval_pair(&self.alpha, p1, eta, p2) && ts.eval_pair(&self.alpha, p2, dual(eta), p1)
    }
}

pub fn one_type_compatible<N: UniversalPart>(nf: &N, pi: OneType) -> bool {
    nf.one_type_compatible(pi)
}

pub fn triple_compatible<N: UniversalPart>(nf: &N, p1: OneType, eta: TwoType, p2: OneType) -> bool {
    nf.triple_compatible(p1, eta, p2)
}

/// Compatible 1-types in mask order.
pub fn compatible_one_types<N: UniversalPart>(nf: &N) -> Vec<OneType> {
    nf.type_space().one_types().filter(|&p| nf.one_type_compatible(p)).collect()
}

/// The compatible 2-types between an ordered pair of 1-types, split by
/// audibility relative to the counted prefix.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairClass {
    /// Forward- and backward-silent.
    pub silent: Vec<TwoType>,
    /// Forward-audible, backward-silent.
    pub forward: Vec<TwoType>,
    /// Forward-silent, backward-audible.
    pub backward: Vec<TwoType>,
    /// Audible both ways.
    pub both: Vec<TwoType>,
}

impl PairClass {
    pub fn all(&self) -> impl Iterator<Item = TwoType> + '_ {
        self.silent
            .iter()
            .chain(&self.forward)
            .chain(&self.backward)
            .chain(&self.both)
            .copied()
    }
}

/// Classification of all compatible pairs of a C² normal form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoTypeClass {
    pub one_types: Vec<OneType>,
    /// Indexed `[i * len + j]` over positions in `one_types`.
    pub pairs: Vec<PairClass>,
}

impl TwoTypeClass {
    pub fn position(&self, pi: OneType) -> Option<usize> {
        self.one_types.binary_search(&pi).ok()
    }

    pub fn get(&self, p1: OneType, p2: OneType) -> &PairClass {
        let (i, j) = (
            self.position(p1).expect("compatible 1-type"),
            self.position(p2).expect("compatible 1-type"),
        );
        &self.pairs[i * self.one_types.len() + j]
    }

    /// No compatible 2-type is silent in both directions.
    pub fn noisy(&self, p1: OneType, p2: OneType) -> bool {
        self.get(p1, p2).silent.is_empty()
    }
}

pub fn classify_pairs(nf: &C2NormalForm) -> TwoTypeClass {
    let ts = nf.type_space();
    let counted = nf.counted_prefix();
    let one_types = compatible_one_types(nf);
    let mut pairs = Vec::with_capacity(one_types.len() * one_types.len());
    for &p1 in &one_types {
        for &p2 in &one_types {
            let mut c = PairClass::default();
            for eta in ts.two_types() {
                if !nf.triple_compatible(p1, eta, p2) {
                    continue;
                }
                match (forward_silent(eta, counted), backward_silent(eta, counted)) {
                    (true, true) => c.silent.push(eta),
                    (false, true) => c.forward.push(eta),
                    (true, false) => c.backward.push(eta),
                    (false, false) => c.both.push(eta),
                }
            }
            pairs.push(c);
        }
    }
    TwoTypeClass { one_types, pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Vocabulary;
    use Var::{X, Y};

    #[test]
    fn dual_examples() {
        assert_eq!(dual(TwoType(0b01)), TwoType(0b10));
        assert_eq!(dual(TwoType::NULL), TwoType::NULL);
        assert_eq!(dual(TwoType(0b11)), TwoType(0b11));
        for m in 0..=4 {
            let ts = TypeSpace::new(0, m);
            assert!(ts.two_types().all(|e| dual(dual(e)) == e));
        }
    }

    #[test]
    fn characteristic_vectors() {
        let e = TwoType(0b01);
        assert_eq!(forward_vec(e, 1), vec![1]);
        assert_eq!(backward_vec(e, 1), vec![0]);
        assert_eq!(forward_vec(TwoType::NULL, 2), vec![0, 0]);
        // R1(y,x) and R2(x,y)
        let e = TwoType(0b0110);
        assert_eq!(forward_vec(e, 2), vec![0, 1]);
        assert_eq!(backward_vec(e, 2), vec![1, 0]);
    }

    fn c2(gamma: Formula, alpha: Formula, counts: Vec<usize>) -> C2NormalForm {
        C2NormalForm {
            vocab: Vocabulary::anonymous(1, 1),
            gamma,
            alpha,
            counts,
        }
    }

    #[test]
    fn compatibility_examples() {
        let nf = c2(Formula::Unary(0, X), Formula::True, vec![]);
        assert!(one_type_compatible(&nf, OneType(0b01)));
        assert!(!one_type_compatible(&nf, OneType(0b00)));
        let alpha = Formula::or(Formula::not(Formula::Binary(0, X, Y)), Formula::Unary(0, Y));
        let nf = c2(Formula::True, alpha, vec![]);
        assert!(triple_compatible(&nf, OneType(0), TwoType(0b01), OneType(1)));
        assert!(!triple_compatible(&nf, OneType(0), TwoType(0b01), OneType(0)));
    }

    #[test]
    fn noisy_pairs() {
        let nf = c2(Formula::True, Formula::True, vec![]);
        let cls = classify_pairs(&nf);
        assert!(cls.one_types.iter().all(|&a| cls.one_types.iter().all(|&b| !cls.noisy(a, b))));
        let alpha = Formula::or(Formula::Binary(0, X, Y), Formula::Binary(0, Y, X));
        let nf = c2(Formula::True, alpha, vec![1]);
        let cls = classify_pairs(&nf);
        assert!(cls.one_types.iter().all(|&a| cls.one_types.iter().all(|&b| cls.noisy(a, b))));
    }

    #[test]
    fn type_counts() {
        for n in 0..3 {
            for m in 0..=4 {
                let ts = TypeSpace::new(n, m);
                assert_eq!(ts.one_types().count(), 1 << (n + m));
                assert_eq!(ts.audible_two_types().count(), (1 << (2 * m)) - 1);
                for t in 0..m {
                    assert_eq!(ts.two_types_with(t).count(), 1 << (2 * m - 1));
                }
            }
        }
    }
}
