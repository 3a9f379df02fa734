//! The simple automaton of a system `A x = c` and the Kleene-star program.

use super::{
    integer_solve_bounded, minimal_solution_bound, minimal_solutions, ConstraintProgram, IntegerLinearSystem,
    LinearError, ProgramNode, SearchOptions,
};
use crate::ast::Cmp;
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AutState {
    Accept,
    /// Last letter read (none for the initial state), how many times it was
    /// read in a row, and the partial sum `A v` so far.
    Inner {
        letter: Option<usize>,
        count: u64,
        sum: Vec<i64>,
    },
}

/// Acyclic, unambiguous automaton with a single accepting state. Letters are
/// column indices of the underlying system.
#[derive(Clone, Debug)]
pub struct SimpleAutomaton {
    pub letters: usize,
    pub states: Vec<AutState>,
    pub transitions: Vec<(usize, usize, usize)>,
    pub initial: usize,
    pub accepting: usize,
}

impl SimpleAutomaton {
    fn empty_word(letters: usize, rows: usize) -> Self {
        SimpleAutomaton {
            letters,
            states: vec![AutState::Inner {
                letter: None,
                count: 0,
                sum: vec![0; rows],
            }],
            transitions: Vec::new(),
            initial: 0,
            accepting: 0,
        }
    }

    /// Parikh vectors of all accepted words. Exponential in general; meant for
    /// small automata.
    pub fn accepted_parikh(&self) -> BTreeSet<Vec<u64>> {
        let mut out_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.states.len()];
        for &(s, a, d) in &self.transitions {
            out_edges[s].push((a, d));
        }
        let mut result = BTreeSet::new();
        let mut stack = vec![(self.initial, vec![0u64; self.letters])];
        while let Some((q, v)) = stack.pop() {
            if q == self.accepting {
                result.insert(v.clone());
            }
            for &(a, d) in &out_edges[q] {
                let mut w = v.clone();
                w[a] += 1;
                stack.push((d, w));
            }
        }
        result
    }

    /// Line-based dump: `state q`, `init q`, `acc q`, `trans src letter dst`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for q in 0..self.states.len() {
            let _ = writeln!(s, "state {q}");
        }
        let _ = writeln!(s, "init {}", self.initial);
        let _ = writeln!(s, "acc {}", self.accepting);
        for (src, a, dst) in &self.transitions {
            let _ = writeln!(s, "trans {src} {a} {dst}");
        }
        s
    }
}

struct DenseSystem {
    cols: Vec<Vec<i64>>,
    c: Vec<i64>,
}

fn dense(sys: &IntegerLinearSystem) -> Result<DenseSystem, LinearError> {
    if !sys.is_equality() {
        return Err(LinearError::NotEquality);
    }
    let m = sys.rows.len();
    let mut cols = vec![vec![0i64; m]; sys.var_count];
    let mut c = vec![0i64; m];
    for (r, row) in sys.rows.iter().enumerate() {
        for (j, a) in row.coeffs.iter().enumerate() {
            cols[j][r] = a.to_i64().ok_or(LinearError::Overflow)?;
        }
        c[r] = row.rhs.to_i64().ok_or(LinearError::Overflow)?;
    }
    Ok(DenseSystem { cols, c })
}

/// The bounds `L` (per-letter counter) and `D` (partial-sum box).
pub fn automaton_bounds(sys: &IntegerLinearSystem) -> (BigInt, BigInt) {
    let l = minimal_solution_bound(sys);
    let d = BigInt::from(sys.var_count) * sys.norm_a() * &l;
    (l, d)
}

fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

struct Builder {
    states: Vec<AutState>,
    index: HashMap<AutState, usize>,
    transitions: Vec<(usize, usize, usize)>,
    seen: HashSet<(usize, usize, usize)>,
}

impl Builder {
    fn new(rows: usize) -> Self {
        let mut b = Builder {
            states: Vec::new(),
            index: HashMap::new(),
            transitions: Vec::new(),
            seen: HashSet::new(),
        };
        b.state(AutState::Inner {
            letter: None,
            count: 0,
            sum: vec![0; rows],
        });
        b.state(AutState::Accept);
        b
    }

    fn state(&mut self, s: AutState) -> (usize, bool) {
        if let Some(&i) = self.index.get(&s) {
            return (i, false);
        }
        let i = self.states.len();
        self.states.push(s.clone());
        self.index.insert(s, i);
        (i, true)
    }

    fn trans(&mut self, src: usize, a: usize, dst: usize) {
        if self.seen.insert((src, a, dst)) {
            self.transitions.push((src, a, dst));
        }
    }
}

/// Automaton made of the sorted-letter runs of the minimal solutions.
///
/// Runs share states whenever they agree on the last letter, its repetition
/// count and the partial sum, so every accepted word still sums to `c`. The
/// Parikh image therefore contains every minimal solution and consists only of
/// solutions. For `c = 0` the automaton accepts only the empty word.
pub fn build_simple_automaton(sys: &IntegerLinearSystem, node_budget: usize) -> Result<SimpleAutomaton, LinearError> {
    let ds = dense(sys)?;
    let n = sys.var_count;
    let m = sys.rows.len();
    if ds.c.iter().all(|&v| v == 0) {
        return Ok(SimpleAutomaton::empty_word(n, m));
    }
    let mins = minimal_solutions(sys, node_budget)?;
    let (l, d) = automaton_bounds(sys);
    let mut b = Builder::new(m);
    for v in &mins {
        let total: u64 = v.iter().sum();
        let mut step = 0u64;
        let mut cur = 0usize;
        let mut sum = vec![0i64; m];
        for (i, &vi) in v.iter().enumerate() {
            for k in 1..=vi {
                step += 1;
                sum = add(&sum, &ds.cols[i]);
                debug_assert!(BigInt::from(k) <= l);
                debug_assert!(sum.iter().all(|x| BigInt::from(x.abs()) <= d));
                let next = if step == total {
                    1
                } else {
                    b.state(AutState::Inner {
                        letter: Some(i),
                        count: k,
                        sum: sum.clone(),
                    })
                    .0
                };
                b.trans(cur, i, next);
                cur = next;
            }
        }
    }
    Ok(SimpleAutomaton {
        letters: n,
        states: b.states,
        transitions: b.transitions,
        initial: 0,
        accepting: 1,
    })
}

/// The automaton over the whole reachable part of the grid
/// `[n] × [L] × [-D, D]^m`, pruned to states that reach acceptance.
pub fn build_simple_automaton_full(
    sys: &IntegerLinearSystem,
    state_budget: usize,
) -> Result<SimpleAutomaton, LinearError> {
    let ds = dense(sys)?;
    let n = sys.var_count;
    let m = sys.rows.len();
    if ds.c.iter().all(|&v| v == 0) {
        return Ok(SimpleAutomaton::empty_word(n, m));
    }
    let (l, d) = automaton_bounds(sys);
    let grid = || {
        let side = BigInt::from(2) * &d + 1;
        let k: BigInt = BigInt::from(n) * &l * num_traits::pow(side, m) + 1u32;
        k.to_string()
    };
    let l_small = l.to_u64().unwrap_or(u64::MAX);
    let d_small = d.to_i64().unwrap_or(i64::MAX);
    let mut b = Builder::new(m);
    let mut queue = VecDeque::from([0usize]);
    while let Some(q) = queue.pop_front() {
        let AutState::Inner { letter, count, sum } = b.states[q].clone() else {
            continue;
        };
        if count >= l_small {
            continue;
        }
        let first = letter.unwrap_or(0);
        for j in first..n {
            let next_sum = add(&sum, &ds.cols[j]);
            if next_sum == ds.c {
                b.trans(q, j, 1);
            }
            if next_sum.iter().all(|x| x.abs() <= d_small) {
                let next_count = if Some(j) == letter { count + 1 } else { 1 };
                let (id, fresh) = b.state(AutState::Inner {
                    letter: Some(j),
                    count: next_count,
                    sum: next_sum,
                });
                if b.states.len() > state_budget {
                    return Err(LinearError::StateBudgetExceeded {
                        count: grid(),
                        budget: state_budget,
                    });
                }
                b.trans(q, j, id);
                if fresh {
                    queue.push_back(id);
                }
            }
        }
    }
    // Keep only states from which acceptance is reachable.
    let k = b.states.len();
    let mut back: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(s, _, t) in &b.transitions {
        back[t].push(s);
    }
    let mut live = vec![false; k];
    live[1] = true;
    let mut stack = vec![1usize];
    while let Some(q) = stack.pop() {
        for &p in &back[q] {
            if !live[p] {
                live[p] = true;
                stack.push(p);
            }
        }
    }
    live[0] = true;
    let mut remap = vec![usize::MAX; k];
    let mut states = Vec::new();
    for q in 0..k {
        if live[q] {
            remap[q] = states.len();
            states.push(b.states[q].clone());
        }
    }
    let transitions = b
        .transitions
        .iter()
        .filter(|(s, _, t)| live[*s] && live[*t])
        .map(|&(s, a, t)| (remap[s], a, remap[t]))
        .collect();
    Ok(SimpleAutomaton {
        letters: n,
        states,
        transitions,
        initial: remap[0],
        accepting: remap[1],
    })
}

/// `n × t` matrix whose column for a transition marks its letter.
pub fn path_matrix(aut: &SimpleAutomaton) -> Vec<Vec<i64>> {
    let mut b = vec![vec![0i64; aut.transitions.len()]; aut.letters];
    for (j, &(_, a, _)) in aut.transitions.iter().enumerate() {
        b[a][j] = 1;
    }
    b
}

/// `k × t` flow-conservation matrix: +1 for incoming and -1 for outgoing
/// transitions, with zero rows for the initial and accepting states.
pub fn flow_matrix(aut: &SimpleAutomaton) -> Vec<Vec<i64>> {
    let mut f = vec![vec![0i64; aut.transitions.len()]; aut.states.len()];
    for (j, &(s, _, t)) in aut.transitions.iter().enumerate() {
        if t != aut.initial && t != aut.accepting {
            f[t][j] += 1;
        }
        if s != aut.initial && s != aut.accepting {
            f[s][j] -= 1;
        }
    }
    f
}

/// Program whose solutions (projected to the first `n` variables) are the
/// Kleene star of the solutions of `A x = c`.
///
/// Variable layout: `x` (n), then `y1 = (w, p)` with `w` (n) the letter counts
/// and `p` (t) the transition counts, then `y2` (n) the homogeneous part.
#[derive(Clone, Debug)]
pub struct StarSystem {
    pub base: IntegerLinearSystem,
    pub automaton: Option<SimpleAutomaton>,
    /// `[-I | B ; 0 | F]` with `B` the path matrix and `F` the flow matrix.
    pub a_tilde: Vec<Vec<i64>>,
    pub program: ConstraintProgram,
}

impl StarSystem {
    pub fn dimension(&self) -> usize {
        self.base.var_count
    }
}

pub fn kleene_star_system(sys: &IntegerLinearSystem, node_budget: usize) -> Result<StarSystem, LinearError> {
    let n = sys.var_count;
    if sys.is_homogeneous() {
        // The star of a cone's integer points is the set itself.
        return Ok(StarSystem {
            base: sys.clone(),
            automaton: None,
            a_tilde: Vec::new(),
            program: ConstraintProgram {
                var_count: n,
                root: ProgramNode::Sys(sys.clone()),
            },
        });
    }
    let aut = build_simple_automaton(sys, node_budget)?;
    let t = aut.transitions.len();
    let b = path_matrix(&aut);
    let f = flow_matrix(&aut);
    let mut a_tilde = Vec::with_capacity(n + f.len());
    for (i, brow) in b.iter().enumerate() {
        let mut row = vec![0i64; n + t];
        row[i] = -1;
        row[n..].copy_from_slice(brow);
        a_tilde.push(row);
    }
    for frow in &f {
        let mut row = vec![0i64; n + t];
        row[n..].copy_from_slice(frow);
        a_tilde.push(row);
    }
    let total = 3 * n + t;
    let x = 0;
    let y1 = n;
    let y2 = 2 * n + t;
    let mut s = IntegerLinearSystem::new(total);
    for i in 0..n {
        s.push_sparse(
            &[(x + i, 1.into()), (y1 + i, (-1).into()), (y2 + i, (-1).into())],
            Cmp::Eq,
            BigInt::zero(),
        );
    }
    for row in &a_tilde {
        if row.iter().all(|&v| v == 0) {
            continue;
        }
        let terms: Vec<(usize, BigInt)> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(j, &v)| (y1 + j, BigInt::from(v)))
            .collect();
        s.push_sparse(&terms, Cmp::Eq, BigInt::zero());
    }
    for r in &sys.rows {
        let terms: Vec<(usize, BigInt)> = r
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, v)| (y2 + j, v.clone()))
            .collect();
        s.push_sparse(&terms, Cmp::Eq, BigInt::zero());
    }
    let program = ConstraintProgram {
        var_count: total,
        root: ProgramNode::And(vec![
            ProgramNode::Sys(s),
            ProgramNode::ZeroImp {
                antecedent: (y1..y1 + n + t).collect(),
                consequent: (y2..y2 + n).collect(),
            },
        ]),
    };
    Ok(StarSystem {
        base: sys.clone(),
        automaton: Some(aut),
        a_tilde,
        program,
    })
}

/// Decides whether `v` lies in the star. Every accepted word is non-empty, so
/// no variable exceeds `|v|_1` in a witness and the search box is complete.
pub fn star_membership(star: &StarSystem, v: &[u64], node_budget: usize) -> Result<bool, LinearError> {
    let n = star.dimension();
    assert_eq!(v.len(), n, "dimension mismatch");
    let mut fix = IntegerLinearSystem::new(star.program.var_count);
    for (i, &vi) in v.iter().enumerate() {
        fix.push_sparse(&[(i, 1.into())], Cmp::Eq, BigInt::from(vi));
    }
    let prog = ConstraintProgram {
        var_count: star.program.var_count,
        root: ProgramNode::And(vec![star.program.root.clone(), ProgramNode::Sys(fix)]),
    };
    let bound = v.iter().sum::<u64>() as i64 + 1;
    let opts = SearchOptions {
        node_budget,
        lp_root_check: false,
    };
    Ok(integer_solve_bounded(&prog, bound, opts)?.is_some())
}
