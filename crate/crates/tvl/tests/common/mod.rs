//! Seeded generators for random normal forms and global constraints.
#![allow(dead_code)]

use num_bigint::{BigInt, BigUint};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tvl::ast::{C2NormalForm, Cmp, Condition, Formula, GlobalConstraint, Gp2NormalForm, PresRow, Var, Vocabulary};
use tvl::normalize::to_c2_normal_form;
use tvl::parser::{parse, SourceProblem};

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

const CMPS: [Cmp; 5] = [Cmp::Eq, Cmp::Le, Cmp::Lt, Cmp::Ge, Cmp::Gt];

fn literal(rng: &mut Rng8, atoms: &[Formula]) -> Formula {
    let a = atoms.choose(rng).expect("atoms").clone();
    if rng.gen_bool(0.5) {
        Formula::not(a)
    } else {
        a
    }
}

fn clause(rng: &mut Rng8, atoms: &[Formula], max_len: usize) -> Formula {
    let len = rng.gen_range(1..=max_len);
    let mut f = literal(rng, atoms);
    for _ in 1..len {
        f = Formula::or(f, literal(rng, atoms));
    }
    f
}

/// Conjunction of up to `max_clauses` random clauses; `True` when zero.
fn cnf(rng: &mut Rng8, atoms: &[Formula], max_clauses: usize) -> Formula {
    if atoms.is_empty() {
        return Formula::True;
    }
    let k = rng.gen_range(0..=max_clauses);
    Formula::conj((0..k).map(|_| clause(rng, atoms, 3)))
}

fn one_var_atoms(n: usize, m: usize) -> Vec<Formula> {
    let mut atoms: Vec<Formula> = (0..n).map(|i| Formula::Unary(i, Var::X)).collect();
    atoms.extend((0..m).map(|i| Formula::Binary(i, Var::X, Var::X)));
    atoms
}

fn two_var_atoms(n: usize, m: usize, forward: bool) -> Vec<Formula> {
    let mut atoms = Vec::new();
    for i in 0..n {
        atoms.push(Formula::Unary(i, Var::X));
        atoms.push(Formula::Unary(i, Var::Y));
    }
    for i in 0..m {
        if forward {
            atoms.push(Formula::Binary(i, Var::X, Var::Y));
        }
        atoms.push(Formula::Binary(i, Var::Y, Var::X));
    }
    atoms
}

/// Random guarded normal form with `n ≤ 2` unary and `m ≤ 1` binary symbols,
/// row coefficients and bounds in `[-2, 2]`.
pub fn random_gp2(rng: &mut Rng8) -> Gp2NormalForm {
    let n = rng.gen_range(1..=2);
    let m = if rng.gen_bool(0.9) { 1 } else { 0 };
    let vocab = Vocabulary::anonymous(n, m);
    let gamma = cnf(rng, &one_var_atoms(n, m), 2);
    let alphas = (0..m)
        .map(|_| {
            if rng.gen_bool(0.4) {
                Formula::True
            } else {
                cnf(rng, &two_var_atoms(n, m, false), 1)
            }
        })
        .collect();
    let rows = (0..n)
        .map(|_| {
            if m == 0 || rng.gen_bool(0.3) {
                return None;
            }
            let lambda: Vec<BigInt> = (0..m)
                .map(|_| {
                    let v: i64 = *[-2, -1, 1, 2].choose(rng).unwrap();
                    BigInt::from(v)
                })
                .collect();
            let cond = if rng.gen_bool(0.8) {
                Condition::Cmp(*CMPS.choose(rng).unwrap(), BigInt::from(rng.gen_range(-2..=2)))
            } else {
                Condition::Mod {
                    residue: BigUint::from(rng.gen_range(0u32..2)),
                    modulus: BigUint::from(2u32),
                }
            };
            Some(PresRow::from_lambda(&lambda, cond))
        })
        .collect();
    Gp2NormalForm {
        vocab,
        gamma,
        alphas,
        rows,
    }
}

/// Random counting normal form with `n ≤ 2`, `m ≤ 1`, one counted binary at
/// most, and counts `k ≤ 2`.
pub fn random_c2(rng: &mut Rng8) -> C2NormalForm {
    let n = rng.gen_range(0..=2);
    let m = 1;
    let counted = rng.gen_range(0..=m);
    let vocab = Vocabulary::anonymous(n, m);
    let gamma = cnf(rng, &one_var_atoms(n, m), 2);
    let alpha = if rng.gen_bool(0.3) {
        Formula::True
    } else {
        cnf(rng, &two_var_atoms(n, m, true), 2)
    };
    let counts = (0..counted).map(|_| rng.gen_range(0..=2)).collect();
    C2NormalForm {
        vocab,
        gamma,
        alpha,
        counts,
    }
}

/// Random global constraint with coefficients in `[-2, 2]` and bounds or
/// moduli up to 6 in absolute value.
pub fn random_global(rng: &mut Rng8, n: usize, m: usize) -> GlobalConstraint {
    let mut atoms = vec![Formula::True];
    atoms.extend(one_var_atoms(n, m));
    let terms = (0..rng.gen_range(1..=2))
        .map(|_| {
            let k: i64 = *[-2, -1, 1, 2].choose(rng).unwrap();
            let a = atoms.choose(rng).unwrap().clone();
            let f = if a != Formula::True && rng.gen_bool(0.3) { Formula::not(a) } else { a };
            (BigInt::from(k), f)
        })
        .collect();
    let cond = if rng.gen_bool(0.75) {
        Condition::Cmp(*CMPS.choose(rng).unwrap(), BigInt::from(rng.gen_range(-6..=6)))
    } else {
        let p = rng.gen_range(2u32..=4);
        Condition::Mod {
            residue: BigUint::from(rng.gen_range(0..p)),
            modulus: BigUint::from(p),
        }
    };
    GlobalConstraint { terms, cond }
}

pub fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn load_problem(name: &str) -> SourceProblem {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    parse(&text).expect("fixture parses")
}

pub fn load_c2(name: &str) -> C2NormalForm {
    to_c2_normal_form(&load_problem(name)).expect("fixture normalizes").nf
}

/// The counting fixtures, all without global constraints.
pub const C2_FIXTURES: [&str; 10] = [
    "matching.tvl",
    "out_one.tvl",
    "cycle_cover.tvl",
    "bipartite_matching.tvl",
    "no_two_cycles.tvl",
    "pointing_into_p.tvl",
    "at_most_one_p.tvl",
    "complete_pair.tvl",
    "loops_mark_p.tvl",
    "two_relations.tvl",
];
