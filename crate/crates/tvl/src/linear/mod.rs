//! Exact arithmetic over integer linear systems.
//!
//! Systems are `A x (rel) c` over the naturals with arbitrary-precision
//! coefficients. The module provides exact rational feasibility, bounded
//! integer search over boolean combinations of systems, minimal solutions, the
//! simple automaton whose Parikh image sits between the minimal solutions and
//! all solutions, and the Kleene-star system built from that automaton.

mod automaton;
mod lp;
mod search;

pub use automaton::{
    automaton_bounds, build_simple_automaton, build_simple_automaton_full, flow_matrix, kleene_star_system, path_matrix,
    star_membership, AutState, SimpleAutomaton, StarSystem,
};
pub use lp::{lp_solve, rational_feasible, LpOutcome};
pub use search::{integer_solve_bounded, SearchOptions};

use crate::ast::Cmp;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinearError {
    #[error("strict inequality in a non-homogeneous system")]
    NonHomogeneousStrict,
    #[error("minimal-solution search exceeded its budget of {0} nodes")]
    BoxTooLarge(usize),
    #[error("automaton would need {count} states, over the budget of {budget}")]
    StateBudgetExceeded { count: String, budget: usize },
    #[error("integer search exceeded its budget of {0} nodes")]
    SearchBudgetExceeded(usize),
    #[error("coefficient or bound does not fit in 64 bits")]
    Overflow,
    #[error("the system has a non-zero right-hand side where a homogeneous one is required")]
    NotHomogeneous,
    #[error("equality system expected")]
    NotEquality,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearRow {
    pub coeffs: Vec<BigInt>,
    pub rel: Cmp,
    pub rhs: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerLinearSystem {
    pub var_count: usize,
    pub rows: Vec<LinearRow>,
}

impl IntegerLinearSystem {
    pub fn new(var_count: usize) -> Self {
        IntegerLinearSystem {
            var_count,
            rows: Vec::new(),
        }
    }

    /// Builds `A x = c` from small integer data.
    pub fn equalities(a: &[Vec<i64>], c: &[i64]) -> Self {
        let var_count = a.first().map_or(0, |r| r.len());
        let mut s = IntegerLinearSystem::new(var_count);
        for (row, &rhs) in a.iter().zip(c) {
            s.push(row.iter().map(|&v| BigInt::from(v)).collect(), Cmp::Eq, BigInt::from(rhs));
        }
        s
    }

    pub fn push(&mut self, coeffs: Vec<BigInt>, rel: Cmp, rhs: BigInt) {
        assert_eq!(coeffs.len(), self.var_count, "row length");
        self.rows.push(LinearRow { coeffs, rel, rhs });
    }

    /// Adds a row given as sparse `(variable, coefficient)` pairs.
    pub fn push_sparse(&mut self, terms: &[(usize, BigInt)], rel: Cmp, rhs: BigInt) {
        let mut coeffs = vec![BigInt::zero(); self.var_count];
        for (v, c) in terms {
            coeffs[*v] += c;
        }
        self.push(coeffs, rel, rhs);
    }

    /// Max absolute coefficient.
    pub fn norm_a(&self) -> BigInt {
        self.rows
            .iter()
            .flat_map(|r| r.coeffs.iter())
            .map(|c| c.abs())
            .max()
            .unwrap_or_default()
    }

    /// Max absolute right-hand side.
    pub fn norm_c(&self) -> BigInt {
        self.rows.iter().map(|r| r.rhs.abs()).max().unwrap_or_default()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.rows.iter().all(|r| r.rhs.is_zero())
    }

    pub fn is_equality(&self) -> bool {
        self.rows.iter().all(|r| r.rel == Cmp::Eq)
    }

    pub fn satisfied_by(&self, x: &[BigInt]) -> bool {
        self.rows.iter().all(|r| {
            let lhs: BigInt = r.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            r.rel.holds(&lhs, &r.rhs)
        })
    }

    pub fn satisfied_by_u64(&self, x: &[u64]) -> bool {
        let x: Vec<BigInt> = x.iter().map(|&v| BigInt::from(v)).collect();
        self.satisfied_by(&x)
    }

    /// Equivalent equality system with one slack column per inequality,
    /// appended after the original variables. Strict rows become weak ones
    /// shifted by one, which is exact over the integers.
    pub fn slacked(&self) -> IntegerLinearSystem {
        let extra = self.rows.iter().filter(|r| r.rel != Cmp::Eq).count();
        let mut out = IntegerLinearSystem::new(self.var_count + extra);
        let mut slack = self.var_count;
        for r in &self.rows {
            let mut coeffs = r.coeffs.clone();
            coeffs.resize(out.var_count, BigInt::zero());
            let (sign, rhs) = match r.rel {
                Cmp::Eq => (0, r.rhs.clone()),
                Cmp::Le => (1, r.rhs.clone()),
                Cmp::Lt => (1, &r.rhs - 1),
                Cmp::Ge => (-1, r.rhs.clone()),
                Cmp::Gt => (-1, &r.rhs + 1),
            };
            if sign != 0 {
                coeffs[slack] = BigInt::from(sign);
                slack += 1;
            }
            out.push(coeffs, Cmp::Eq, rhs);
        }
        out
    }
}

/// Leaf or inner node of a [`ConstraintProgram`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProgramNode {
    Sys(IntegerLinearSystem),
    And(Vec<ProgramNode>),
    Or(Vec<ProgramNode>),
    /// `(all antecedent variables are 0) → (all consequent variables are 0)`.
    ZeroImp {
        antecedent: Vec<usize>,
        consequent: Vec<usize>,
    },
}

/// Boolean combination of linear systems over shared natural-number variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintProgram {
    pub var_count: usize,
    pub root: ProgramNode,
}

impl ConstraintProgram {
    pub fn holds(&self, x: &[BigInt]) -> bool {
        node_holds(&self.root, x)
    }
}

fn node_holds(node: &ProgramNode, x: &[BigInt]) -> bool {
    match node {
        ProgramNode::Sys(s) => s.satisfied_by(x),
        ProgramNode::And(v) => v.iter().all(|n| node_holds(n, x)),
        ProgramNode::Or(v) => v.iter().any(|n| node_holds(n, x)),
        ProgramNode::ZeroImp { antecedent, consequent } => {
            antecedent.iter().any(|&i| !x[i].is_zero()) || consequent.iter().all(|&i| x[i].is_zero())
        }
    }
}

/// Constants in the small-solution bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallSolutionConstants {
    pub c1: u32,
    pub c2: u32,
}

impl Default for SmallSolutionConstants {
    fn default() -> Self {
        SmallSolutionConstants { c1: 1, c2: 1 }
    }
}

/// For a system with `t` rows and coefficients bounded by `norm`: a bound on
/// the number of non-zero variables (`c1·t·log2(c2·t·norm)`, rounded up) and
/// on their values (`c1·t·(t·norm)^(c2·t)`) in some solution.
pub fn small_solution_bounds(t: usize, norm: &BigInt, k: SmallSolutionConstants) -> (BigInt, BigInt) {
    let t_big = BigInt::from(t);
    let inner = BigInt::from(k.c2) * &t_big * norm;
    let log = if inner <= BigInt::one() {
        0
    } else {
        (inner - 1u32).bits()
    };
    let count = BigInt::from(k.c1) * &t_big * BigInt::from(log);
    let base = &t_big * norm;
    let exp = (k.c2 as usize * t) as u32;
    let value = BigInt::from(k.c1) * &t_big * num_traits::pow(base, exp as usize);
    (count, value)
}

/// `((n+1)·‖A‖ + ‖c‖ + 1)^m`, the bound on entries of minimal solutions.
pub fn minimal_solution_bound(sys: &IntegerLinearSystem) -> BigInt {
    let n = BigInt::from(sys.var_count);
    let base = (n + 1) * sys.norm_a() + sys.norm_c() + 1;
    num_traits::pow(base, sys.rows.len())
}

/// All ≤-minimal natural solutions of `A x = c`, sorted.
///
/// Works on the homogenized system `A x − c z = 0`: the minimal non-zero
/// solutions with `z = 1` are exactly the minimal solutions of the original.
/// They are enumerated by the completion procedure that grows candidate vectors
/// one unit at a time, only in directions that reduce the defect, and prunes
/// candidates that dominate a solution already found.
pub fn minimal_solutions(sys: &IntegerLinearSystem, node_budget: usize) -> Result<Vec<Vec<u64>>, LinearError> {
    if !sys.is_equality() {
        return Err(LinearError::NotEquality);
    }
    let n = sys.var_count;
    let m = sys.rows.len();
    let to_i64 = |b: &BigInt| b.to_i64().ok_or(LinearError::Overflow);
    // Columns of the homogenized system, the last one being -c.
    let mut cols: Vec<Vec<i64>> = vec![vec![0; m]; n + 1];
    for (r, row) in sys.rows.iter().enumerate() {
        for j in 0..n {
            cols[j][r] = to_i64(&row.coeffs[j])?;
        }
        cols[n][r] = -to_i64(&row.rhs)?;
    }
    let z = n;
    let dim = n + 1;
    let mut basis: Vec<Vec<u32>> = Vec::new();
    let mut frontier: Vec<(Vec<u32>, Vec<i64>)> = (0..dim)
        .map(|j| {
            let mut v = vec![0u32; dim];
            v[j] = 1;
            (v, cols[j].clone())
        })
        .collect();
    let mut nodes = 0usize;
    while !frontier.is_empty() {
        let mut next_seen: HashSet<Vec<u32>> = HashSet::new();
        let mut next = Vec::new();
        let mut queue: VecDeque<(Vec<u32>, Vec<i64>)> = frontier.into_iter().collect();
        let mut level_solutions = Vec::new();
        let mut open = Vec::new();
        while let Some((v, defect)) = queue.pop_front() {
            if defect.iter().all(|&d| d == 0) {
                level_solutions.push(v);
            } else {
                open.push((v, defect));
            }
        }
        basis.extend(level_solutions);
        for (v, defect) in open {
            for (j, col) in cols.iter().enumerate() {
                let dot: i128 = defect.iter().zip(col).map(|(&a, &b)| a as i128 * b as i128).sum();
                if dot >= 0 {
                    continue;
                }
                if j == z && v[z] >= 1 {
                    continue;
                }
                let mut w = v.clone();
                w[j] += 1;
                if basis.iter().any(|b| b.iter().zip(&w).all(|(x, y)| x <= y)) {
                    continue;
                }
                if !next_seen.insert(w.clone()) {
                    continue;
                }
                nodes += 1;
                if nodes > node_budget {
                    return Err(LinearError::BoxTooLarge(node_budget));
                }
                let d: Vec<i64> = defect.iter().zip(col).map(|(a, b)| a + b).collect();
                next.push((w, d));
            }
        }
        frontier = next;
    }
    let mut out: Vec<Vec<u64>> = basis
        .into_iter()
        .filter(|b| b[z] == 1)
        .map(|b| b[..n].iter().map(|&v| v as u64).collect())
        .collect();
    if sys.rows.iter().all(|r| r.rhs.is_zero()) {
        out = vec![vec![0; n]];
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_solutions_examples() {
        let s = IntegerLinearSystem::equalities(&[vec![1, 2]], &[4]);
        assert_eq!(minimal_solutions(&s, 10_000).unwrap(), vec![vec![0, 2], vec![2, 1], vec![4, 0]]);
        let s = IntegerLinearSystem::equalities(&[vec![2, -1]], &[0]);
        assert_eq!(minimal_solutions(&s, 10_000).unwrap(), vec![vec![0, 0]]);
        let s = IntegerLinearSystem::equalities(&[vec![1, 1]], &[2]);
        assert_eq!(minimal_solutions(&s, 10_000).unwrap(), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        let s = IntegerLinearSystem::equalities(&[vec![2, 2]], &[3]);
        assert!(minimal_solutions(&s, 10_000).unwrap().is_empty());
    }

    #[test]
    fn minimal_solutions_with_homogeneous_directions() {
        // x1 - x2 = 1: minimal solution (1,0); (2,1) = (1,0) + (1,1) is not minimal.
        let s = IntegerLinearSystem::equalities(&[vec![1, -1]], &[1]);
        assert_eq!(minimal_solutions(&s, 10_000).unwrap(), vec![vec![1, 0]]);
    }

    #[test]
    fn slacking_adds_one_column_per_inequality() {
        let mut s = IntegerLinearSystem::new(1);
        s.push(vec![1.into()], Cmp::Le, 5.into());
        let e = s.slacked();
        assert_eq!(e.var_count, 2);
        assert_eq!(e.rows.len(), 1);
        assert!(e.is_equality());
    }

    #[test]
    fn small_solution_bounds_values() {
        let k = SmallSolutionConstants::default();
        let (c, v) = small_solution_bounds(1, &BigInt::from(1), k);
        assert_eq!(c, BigInt::from(0));
        assert_eq!(v, BigInt::from(1));
        let (c2, v2) = small_solution_bounds(2, &BigInt::from(3), k);
        let (c3, v3) = small_solution_bounds(3, &BigInt::from(3), k);
        assert!(c2 <= c3 && v2 <= v3);
        let (c4, v4) = small_solution_bounds(2, &BigInt::from(4), k);
        assert!(c2 <= c4 && v2 <= v4);
    }
}
