//! Exact two-phase simplex over the rationals, Bland's rule.

use super::{IntegerLinearSystem, LinearError};
use crate::ast::Cmp;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

type Q = BigRational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Infeasible,
    /// Minimum of the objective (0 when no objective was given) and a point
    /// attaining it, restricted to the original variables.
    Optimal { value: BigRational, point: Vec<BigRational> },
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Q>>,
    rhs: Vec<Q>,
    basis: Vec<usize>,
    obj: Vec<Q>,
    obj_rhs: Q,
    allowed: Vec<bool>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        let nz: Vec<usize> = (0..self.rows[r].len()).filter(|&j| !self.rows[r][j].is_zero()).collect();
        for &j in &nz {
            self.rows[r][j] = &self.rows[r][j] / &p;
        }
        self.rhs[r] = &self.rhs[r] / &p;
        let prow: Vec<(usize, Q)> = nz.iter().map(|&j| (j, self.rows[r][j].clone())).collect();
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for (j, v) in &prow {
                let d = &f * v;
                self.rows[i][*j] -= d;
            }
            self.rhs[i] -= &f * &prhs;
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for (j, v) in &prow {
                let d = &f * v;
                self.obj[*j] -= d;
            }
            self.obj_rhs -= &f * &prhs;
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations; `false` means unbounded.
    fn optimize(&mut self) -> bool {
        loop {
            let entering = (0..self.obj.len()).find(|&j| self.allowed[j] && self.obj[j].is_negative());
            let Some(c) = entering else { return true };
            let mut best: Option<(usize, Q)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }

    fn set_objective(&mut self, costs: &[Q]) {
        let cols = self.obj.len();
        self.obj = (0..cols).map(|j| costs.get(j).cloned().unwrap_or_else(Q::zero)).collect();
        self.obj_rhs = Q::zero();
        for i in 0..self.rows.len() {
            let cb = costs.get(self.basis[i]).cloned().unwrap_or_else(Q::zero);
            if cb.is_zero() {
                continue;
            }
            for j in 0..cols {
                if !self.rows[i][j].is_zero() {
                    let d = &cb * &self.rows[i][j];
                    self.obj[j] -= d;
                }
            }
            self.obj_rhs -= &cb * &self.rhs[i];
        }
    }
}

/// Minimizes `objective · x` subject to `sys` over non-negative rationals.
/// Strict rows are rejected; see [`rational_feasible`] for those.
pub fn lp_solve(sys: &IntegerLinearSystem, objective: Option<&[BigInt]>) -> Result<LpOutcome, LinearError> {
    if sys.rows.iter().any(|r| matches!(r.rel, Cmp::Lt | Cmp::Gt)) {
        return Err(LinearError::NonHomogeneousStrict);
    }
    let n = sys.var_count;
    let slack_count = sys.rows.iter().filter(|r| r.rel != Cmp::Eq).count();
    // Normalize to rhs >= 0 and decide which rows need an artificial.
    let mut norm: Vec<(Vec<BigInt>, Cmp, BigInt)> = Vec::with_capacity(sys.rows.len());
    for r in &sys.rows {
        if r.rhs.is_negative() {
            let rel = match r.rel {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                other => other,
            };
            norm.push((r.coeffs.iter().map(|c| -c).collect(), rel, -&r.rhs));
        } else {
            norm.push((r.coeffs.clone(), r.rel, r.rhs.clone()));
        }
    }
    let art_count = norm.iter().filter(|(_, rel, _)| *rel != Cmp::Le).count();
    let cols = n + slack_count + art_count;
    let mut rows = Vec::with_capacity(norm.len());
    let mut rhs = Vec::with_capacity(norm.len());
    let mut basis = Vec::with_capacity(norm.len());
    let mut slack = n;
    let mut art = n + slack_count;
    for (coeffs, rel, b) in &norm {
        let mut row: Vec<Q> = vec![Q::zero(); cols];
        for (j, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                row[j] = Q::from_integer(c.clone());
            }
        }
        match rel {
            Cmp::Le => {
                row[slack] = Q::from_integer(1.into());
                basis.push(slack);
                slack += 1;
            }
            Cmp::Ge => {
                row[slack] = Q::from_integer((-1).into());
                slack += 1;
                row[art] = Q::from_integer(1.into());
                basis.push(art);
                art += 1;
            }
            _ => {
                row[art] = Q::from_integer(1.into());
                basis.push(art);
                art += 1;
            }
        }
        rows.push(row);
        rhs.push(Q::from_integer(b.clone()));
    }
    let first_art = n + slack_count;
    let mut t = Tableau {
        rows,
        rhs,
        basis,
        obj: vec![Q::zero(); cols],
        obj_rhs: Q::zero(),
        allowed: vec![true; cols],
    };
    if art_count > 0 {
        let costs: Vec<Q> = (0..cols)
            .map(|j| if j >= first_art { Q::from_integer(1.into()) } else { Q::zero() })
            .collect();
        t.set_objective(&costs);
        t.optimize();
        if !t.obj_rhs.is_zero() {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive artificials out of the basis, dropping redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= first_art {
                match (0..first_art).find(|&j| !t.rows[i][j].is_zero()) {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.rhs.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for j in first_art..cols {
            t.allowed[j] = false;
        }
    }
    let costs: Vec<Q> = match objective {
        Some(o) => o.iter().map(|c| Q::from_integer(c.clone())).collect(),
        None => Vec::new(),
    };
    t.set_objective(&costs);
    if !t.optimize() {
        return Ok(LpOutcome::Unbounded);
    }
    let mut point = vec![Q::zero(); n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            point[b] = t.rhs[i].clone();
        }
    }
    Ok(LpOutcome::Optimal {
        value: -t.obj_rhs.clone(),
        point,
    })
}

/// Rational feasibility. Strict rows are allowed in homogeneous systems, where
/// scaling turns `> 0` into `>= 1` without changing feasibility.
pub fn rational_feasible(sys: &IntegerLinearSystem) -> Result<bool, LinearError> {
    let has_strict = sys.rows.iter().any(|r| matches!(r.rel, Cmp::Lt | Cmp::Gt));
    let owned;
    let sys = if has_strict {
        if !sys.is_homogeneous() {
            return Err(LinearError::NonHomogeneousStrict);
        }
        let mut s = sys.clone();
        for r in &mut s.rows {
            match r.rel {
                Cmp::Gt => {
                    r.rel = Cmp::Ge;
                    r.rhs = 1.into();
                }
                Cmp::Lt => {
                    r.rel = Cmp::Le;
                    r.rhs = (-1).into();
                }
                _ => {}
            }
        }
        owned = s;
        &owned
    } else {
        sys
    };
    Ok(!matches!(lp_solve(sys, None)?, LpOutcome::Infeasible))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Q {
        Q::new(a.into(), b.into())
    }

    #[test]
    fn simple_optimum() {
        // min -x - y s.t. x + 2y <= 4, 3x + y <= 6
        let mut s = IntegerLinearSystem::new(2);
        s.push(vec![1.into(), 2.into()], Cmp::Le, 4.into());
        s.push(vec![3.into(), 1.into()], Cmp::Le, 6.into());
        let obj = vec![BigInt::from(-1), BigInt::from(-1)];
        match lp_solve(&s, Some(&obj)).unwrap() {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, q(-14, 5));
                assert_eq!(point, vec![q(8, 5), q(6, 5)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut s = IntegerLinearSystem::new(1);
        s.push(vec![1.into()], Cmp::Ge, 3.into());
        s.push(vec![1.into()], Cmp::Le, 2.into());
        assert_eq!(lp_solve(&s, None).unwrap(), LpOutcome::Infeasible);
        let mut s = IntegerLinearSystem::new(2);
        s.push(vec![1.into(), (-1).into()], Cmp::Eq, 0.into());
        let obj = vec![BigInt::from(-1), BigInt::from(0)];
        assert_eq!(lp_solve(&s, Some(&obj)).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut s = IntegerLinearSystem::new(2);
        s.push(vec![1.into(), 1.into()], Cmp::Eq, 2.into());
        s.push(vec![2.into(), 2.into()], Cmp::Eq, 4.into());
        s.push(vec![1.into(), (-1).into()], Cmp::Eq, 0.into());
        match lp_solve(&s, None).unwrap() {
            LpOutcome::Optimal { point, .. } => assert_eq!(point, vec![q(1, 1), q(1, 1)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strict_homogeneous() {
        let mut s = IntegerLinearSystem::new(2);
        s.push(vec![1.into(), (-2).into()], Cmp::Eq, 0.into());
        s.push(vec![1.into(), 0.into()], Cmp::Gt, 0.into());
        assert!(rational_feasible(&s).unwrap());
        s.push(vec![0.into(), 1.into()], Cmp::Eq, 0.into());
        assert!(!rational_feasible(&s).unwrap());
        let mut t = IntegerLinearSystem::new(1);
        t.push(vec![1.into()], Cmp::Gt, 1.into());
        assert_eq!(rational_feasible(&t), Err(LinearError::NonHomogeneousStrict));
    }

    #[test]
    fn negative_rhs() {
        let mut s = IntegerLinearSystem::new(2);
        s.push(vec![(-1).into(), (-1).into()], Cmp::Le, (-3).into());
        s.push(vec![1.into(), 0.into()], Cmp::Le, 1.into());
        let obj = vec![BigInt::from(0), BigInt::from(1)];
        match lp_solve(&s, Some(&obj)).unwrap() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, q(2, 1)),
            other => panic!("{other:?}"),
        }
    }
}
