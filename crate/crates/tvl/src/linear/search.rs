//! Bounded integer search over constraint programs: bounds propagation plus
//! depth-first labeling, with disjunctions expanded lazily.

use super::{lp::rational_feasible, ConstraintProgram, IntegerLinearSystem, LinearError, ProgramNode};
use crate::ast::Cmp;
use num_bigint::BigInt;
use num_traits::ToPrimitive;

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub node_budget: usize,
    /// Check rational feasibility of the conjunctive part (with the box) first.
    pub lp_root_check: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            node_budget: 1_000_000,
            lp_root_check: false,
        }
    }
}

#[derive(Clone, Debug)]
struct SparseRow {
    terms: Vec<(usize, i64)>,
    /// `true` for equality, `false` for `<=`.
    eq: bool,
    rhs: i64,
}

#[derive(Clone)]
struct Domains {
    lb: Vec<i64>,
    ub: Vec<i64>,
}

struct Solver {
    budget: usize,
    nodes: usize,
}

fn to_i64(b: &BigInt) -> Result<i64, LinearError> {
    b.to_i64().ok_or(LinearError::Overflow)
}

fn compile_system(sys: &IntegerLinearSystem) -> Result<Vec<SparseRow>, LinearError> {
    let mut out = Vec::with_capacity(sys.rows.len());
    for r in &sys.rows {
        let mut terms = Vec::new();
        for (j, c) in r.coeffs.iter().enumerate() {
            let c = to_i64(c)?;
            if c != 0 {
                terms.push((j, c));
            }
        }
        let rhs = to_i64(&r.rhs)?;
        let (sign, eq, rhs) = match r.rel {
            Cmp::Eq => (1, true, rhs),
            Cmp::Le => (1, false, rhs),
            Cmp::Lt => (1, false, rhs - 1),
            Cmp::Ge => (-1, false, -rhs),
            Cmp::Gt => (-1, false, -rhs - 1),
        };
        if sign < 0 {
            for t in &mut terms {
                t.1 = -t.1;
            }
        }
        out.push(SparseRow { terms, eq, rhs });
    }
    Ok(out)
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

/// Tightens bounds for `sum terms <= rhs`. Returns `None` on conflict and
/// `Some(changed)` otherwise.
fn tighten_le(terms: &[(usize, i64)], rhs: i128, sign: i64, d: &mut Domains) -> Option<bool> {
    let mut min_sum: i128 = 0;
    for &(j, c) in terms {
        let c = (c * sign) as i128;
        min_sum += if c > 0 { c * d.lb[j] as i128 } else { c * d.ub[j] as i128 };
    }
    if min_sum > rhs {
        return None;
    }
    let mut changed = false;
    for &(j, c) in terms {
        let c = (c * sign) as i128;
        let own_min = if c > 0 { c * d.lb[j] as i128 } else { c * d.ub[j] as i128 };
        let slack = rhs - (min_sum - own_min);
        if c > 0 {
            let nu = floor_div(slack, c);
            if nu < d.ub[j] as i128 {
                if nu < d.lb[j] as i128 {
                    return None;
                }
                d.ub[j] = nu as i64;
                changed = true;
            }
        } else {
            let nl = ceil_div(slack, c);
            if nl > d.lb[j] as i128 {
                if nl > d.ub[j] as i128 {
                    return None;
                }
                d.lb[j] = nl as i64;
                changed = true;
            }
        }
    }
    Some(changed)
}

impl Solver {
    fn tick(&mut self) -> Result<(), LinearError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            Err(LinearError::SearchBudgetExceeded(self.budget))
        } else {
            Ok(())
        }
    }

    fn propagate(&mut self, rows: &[SparseRow], d: &mut Domains) -> Result<bool, LinearError> {
        loop {
            self.tick()?;
            let mut changed = false;
            for r in rows {
                let rhs = r.rhs as i128;
                match tighten_le(&r.terms, rhs, 1, d) {
                    None => return Ok(false),
                    Some(c) => changed |= c,
                }
                if r.eq {
                    match tighten_le(&r.terms, -rhs, -1, d) {
                        None => return Ok(false),
                        Some(c) => changed |= c,
                    }
                }
            }
            if !changed {
                return Ok(true);
            }
        }
    }

    fn solve(
        &mut self,
        mut rows: Vec<SparseRow>,
        mut pending: Vec<&ProgramNode>,
        mut d: Domains,
    ) -> Result<Option<Vec<i64>>, LinearError> {
        // Absorb conjunctive leaves before propagating.
        loop {
            let mut progressed = false;
            let mut rest = Vec::with_capacity(pending.len());
            for node in pending {
                match node {
                    ProgramNode::Sys(s) => {
                        rows.extend(compile_system(s)?);
                        progressed = true;
                    }
                    ProgramNode::And(children) => {
                        rest.extend(children.iter());
                        progressed = true;
                    }
                    other => rest.push(other),
                }
            }
            pending = rest;
            if !progressed {
                break;
            }
        }
        // Propagate, then resolve implications the domains already decide,
        // until nothing changes.
        let mut open = pending;
        loop {
            if !self.propagate(&rows, &mut d)? {
                return Ok(None);
            }
            let mut forced = false;
            let mut still = Vec::with_capacity(open.len());
            for node in open {
                if let ProgramNode::Or(alts) = node {
                    // Keep only branches that survive propagation.
                    let mut alive = Vec::new();
                    for alt in alts {
                        match alt {
                            ProgramNode::Sys(s) => {
                                let extra = compile_system(s)?;
                                let mut e = d.clone();
                                if self.propagate(&extra, &mut e)? {
                                    alive.push(alt);
                                }
                            }
                            _ => alive.push(alt),
                        }
                        if alive.len() > 1 {
                            break;
                        }
                    }
                    match alive.as_slice() {
                        [] => return Ok(None),
                        [ProgramNode::Sys(s)] => {
                            rows.extend(compile_system(s)?);
                            forced = true;
                            continue;
                        }
                        _ => {}
                    }
                }
                if let ProgramNode::ZeroImp { antecedent, consequent } = node {
                    if antecedent.iter().any(|&i| d.lb[i] >= 1) || consequent.iter().all(|&i| d.ub[i] == 0) {
                        continue;
                    }
                    if antecedent.iter().all(|&i| d.ub[i] == 0) {
                        for &i in consequent {
                            if d.lb[i] > 0 {
                                return Ok(None);
                            }
                            d.ub[i] = 0;
                        }
                        forced = true;
                        continue;
                    }
                }
                still.push(node);
            }
            open = still;
            if !forced {
                break;
            }
        }
        if !open.is_empty() {
            let node = open.remove(0);
            match node {
                ProgramNode::Or(alts) => {
                    for alt in alts {
                        let mut p = open.clone();
                        p.push(alt);
                        if let Some(sol) = self.solve(rows.clone(), p, d.clone())? {
                            return Ok(Some(sol));
                        }
                    }
                    return Ok(None);
                }
                ProgramNode::ZeroImp { antecedent, consequent } => {
                    let mut zero = d.clone();
                    for &i in consequent {
                        zero.ub[i] = 0;
                    }
                    if consequent.iter().all(|&i| d.lb[i] == 0) {
                        if let Some(sol) = self.solve(rows.clone(), open.clone(), zero)? {
                            return Ok(Some(sol));
                        }
                    }
                    let mut r2 = rows;
                    r2.push(SparseRow {
                        terms: antecedent.iter().map(|&i| (i, -1)).collect(),
                        eq: false,
                        rhs: -1,
                    });
                    return self.solve(r2, open, d);
                }
                _ => unreachable!("conjunctive nodes were absorbed"),
            }
        }
        self.label(&rows, d)
    }

    fn label(&mut self, rows: &[SparseRow], d: Domains) -> Result<Option<Vec<i64>>, LinearError> {
        let pick = (0..d.lb.len())
            .filter(|&j| d.lb[j] < d.ub[j])
            .min_by_key(|&j| (d.ub[j] - d.lb[j], j));
        let Some(j) = pick else {
            return Ok(Some(d.lb));
        };
        for v in d.lb[j]..=d.ub[j] {
            self.tick()?;
            let mut e = d.clone();
            e.lb[j] = v;
            e.ub[j] = v;
            if !self.propagate(rows, &mut e)? {
                continue;
            }
            if let Some(sol) = self.label(rows, e)? {
                return Ok(Some(sol));
            }
        }
        Ok(None)
    }
}

fn conjunctive_rows(node: &ProgramNode, out: &mut IntegerLinearSystem) -> bool {
    match node {
        ProgramNode::Sys(s) => {
            out.rows.extend(s.rows.iter().cloned());
            true
        }
        ProgramNode::And(children) => children.iter().all(|c| conjunctive_rows(c, out)),
        _ => false,
    }
}

/// Searches for a solution with every variable in `0..=bound`.
/// `Ok(None)` means no solution exists inside the box.
pub fn integer_solve_bounded(
    prog: &ConstraintProgram,
    bound: i64,
    options: SearchOptions,
) -> Result<Option<Vec<i64>>, LinearError> {
    if options.lp_root_check {
        let mut sys = IntegerLinearSystem::new(prog.var_count);
        if conjunctive_rows(&prog.root, &mut sys) {
            for j in 0..prog.var_count {
                let mut coeffs = vec![BigInt::from(0); prog.var_count];
                coeffs[j] = 1.into();
                sys.push(coeffs, Cmp::Le, bound.into());
            }
            let has_strict = sys.rows.iter().any(|r| matches!(r.rel, Cmp::Lt | Cmp::Gt));
            if !has_strict && !rational_feasible(&sys)? {
                return Ok(None);
            }
        }
    }
    let mut solver = Solver {
        budget: options.node_budget,
        nodes: 0,
    };
    let d = Domains {
        lb: vec![0; prog.var_count],
        ub: vec![bound; prog.var_count],
    };
    let sol = solver.solve(Vec::new(), vec![&prog.root], d)?;
    if let Some(s) = &sol {
        let big: Vec<BigInt> = s.iter().map(|&v| BigInt::from(v)).collect();
        debug_assert!(prog.holds(&big), "search returned a non-solution");
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(a: &[Vec<i64>], c: &[i64]) -> IntegerLinearSystem {
        IntegerLinearSystem::equalities(a, c)
    }

    #[test]
    fn finds_solution_in_box() {
        let prog = ConstraintProgram {
            var_count: 2,
            root: ProgramNode::Sys(sys(&[vec![3, 5]], &[19])),
        };
        let s = integer_solve_bounded(&prog, 10, SearchOptions::default()).unwrap().unwrap();
        assert_eq!(3 * s[0] + 5 * s[1], 19);
        let prog = ConstraintProgram {
            var_count: 2,
            root: ProgramNode::Sys(sys(&[vec![2, 4]], &[7])),
        };
        assert_eq!(integer_solve_bounded(&prog, 10, SearchOptions::default()).unwrap(), None);
    }

    #[test]
    fn zero_implication_and_disjunction() {
        // x0 = x1 + x2, and x1 > 0 forces x2 = 0 unless... (x1 = 0 -> x2 = 0)
        let base = sys(&[vec![1, -1, -1]], &[0]);
        let mut need = IntegerLinearSystem::new(3);
        need.push(vec![0.into(), 0.into(), 1.into()], Cmp::Ge, 1.into());
        let prog = ConstraintProgram {
            var_count: 3,
            root: ProgramNode::And(vec![
                ProgramNode::Sys(base),
                ProgramNode::Sys(need),
                ProgramNode::ZeroImp {
                    antecedent: vec![1],
                    consequent: vec![2],
                },
            ]),
        };
        let s = integer_solve_bounded(&prog, 5, SearchOptions::default()).unwrap().unwrap();
        assert!(s[1] >= 1 && s[2] >= 1);
        let mut one = IntegerLinearSystem::new(1);
        one.push(vec![1.into()], Cmp::Eq, 4.into());
        let mut two = IntegerLinearSystem::new(1);
        two.push(vec![1.into()], Cmp::Eq, 2.into());
        let prog = ConstraintProgram {
            var_count: 1,
            root: ProgramNode::Or(vec![ProgramNode::Sys(one), ProgramNode::Sys(two)]),
        };
        let s = integer_solve_bounded(&prog, 3, SearchOptions::default()).unwrap().unwrap();
        assert_eq!(s, vec![2]);
    }

    #[test]
    fn budget_is_reported() {
        let prog = ConstraintProgram {
            var_count: 6,
            root: ProgramNode::Sys(sys(&[vec![2, 2, 2, 2, 2, 2]], &[13])),
        };
        let opts = SearchOptions {
            node_budget: 5,
            lp_root_check: false,
        };
        assert!(matches!(
            integer_solve_bounded(&prog, 20, opts),
            Err(LinearError::SearchBudgetExceeded(5))
        ));
    }

    #[test]
    fn division_helpers() {
        assert_eq!(floor_div(-3, 2), -2);
        assert_eq!(ceil_div(-3, 2), -1);
        assert_eq!(floor_div(3, -2), -2);
        assert_eq!(ceil_div(3, 2), 2);
    }
}
