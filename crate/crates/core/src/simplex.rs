//! Dense two-phase simplex for small standard-form programs
//! `min cᵀx  s.t.  Ax = b, x ≥ 0`, using Bland's rule throughout.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Debug)]
pub struct StandardForm {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, objective: f64 },
    /// `farkas` satisfies `farkasᵀA ≤ 0` and `farkasᵀb = infeasibility > 0`.
    Infeasible { infeasibility: f64, farkas: Vec<f64> },
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    n_vars: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        *self.rows[i].last().expect("nonempty row")
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let width = self.rows[0].len();
        let mut r = cost.to_vec();
        r.push(0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..width {
                    r[j] -= cb * row[j];
                }
            }
        }
        self.reduced = r;
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let p = self.rows[pr][pc];
        for v in self.rows[pr].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[pr].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == pr {
                continue;
            }
            let f = row[pc];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.reduced[pc];
        if f != 0.0 {
            for (v, pv) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.reduced[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Runs Bland's rule to optimality over columns `< allowed`. Returns false when unbounded.
    fn optimize(&mut self, allowed: usize) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..allowed).find(|&j| self.reduced[j] < -COST_EPS) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((l, best)) => {
                            if ratio < best - 1e-15 || (ratio <= best + 1e-15 && self.basis[i] < self.basis[l]) {
                                Some((i, ratio))
                            } else {
                                Some((l, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((row, _)) => self.pivot(row, enter),
            }
        }
        Err(Error::Numeric(format!("simplex exceeded {MAX_PIVOTS} pivots")))
    }
}

/// Solves `lp`; phase one declares infeasibility when the residual mass exceeds `feas_tol`.
pub fn solve(lp: &StandardForm, feas_tol: f64) -> Result<LpSolution> {
    let m = lp.b.len();
    let n = lp.c.len();
    if lp.a.len() != m || lp.a.iter().any(|r| r.len() != n) {
        return Err(Error::domain("inconsistent LP dimensions"));
    }
    if m == 0 {
        return Ok(if lp.c.iter().any(|&c| c < 0.0) {
            LpSolution::Unbounded
        } else {
            LpSolution::Optimal { x: vec![0.0; n], objective: 0.0 }
        });
    }

    let flip: Vec<f64> = lp.b.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; n + m + 1];
        for j in 0..n {
            row[j] = flip[i] * lp.a[i][j];
        }
        row[n + i] = 1.0;
        row[n + m] = flip[i] * lp.b[i];
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        reduced: Vec::new(),
        n_vars: n,
    };

    let mut phase_one_cost = vec![0.0; n + m];
    for c in &mut phase_one_cost[n..] {
        *c = 1.0;
    }
    t.set_costs(&phase_one_cost);
    t.optimize(n + m)?;
    let infeasibility = -t.reduced[n + m];
    if infeasibility > feas_tol {
        let farkas = (0..m).map(|i| flip[i] * (1.0 - t.reduced[n + i])).collect();
        return Ok(LpSolution::Infeasible { infeasibility, farkas });
    }

    // Pivot zero-level artificials out; rows where that is impossible are redundant.
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t.rows[i][j].abs() > 1e-9) {
                t.pivot(i, j);
            }
        }
    }

    let mut cost = lp.c.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    t.set_costs(&cost);
    if !t.optimize(t.n_vars)? {
        return Ok(LpSolution::Unbounded);
    }
    let mut x = vec![0.0; n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            x[bv] = t.rhs(i);
        }
    }
    let objective = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution::Optimal { x, objective })
}
