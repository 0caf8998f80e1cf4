//! Dense two-phase tableau simplex with Bland's rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;
const PHASE_ONE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// Sparse `(variable, coefficient)` terms.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { terms, sense, rhs }
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this constraint (0 when satisfied).
    pub fn residual(&self, x: &[f64]) -> f64 {
        let d = self.lhs(x) - self.rhs;
        match self.sense {
            Sense::Le => d.max(0.0),
            Sense::Ge => (-d).max(0.0),
            Sense::Eq => d.abs(),
        }
    }
}

/// Maximize `objective · x` subject to `constraints` and `x >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(variables: usize) -> Self {
        Self {
            objective: vec![0.0; variables],
            constraints: Vec::new(),
        }
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest constraint or sign violation at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let sign = x.iter().fold(0.0f64, |acc, v| acc.max(-v));
        self.constraints.iter().fold(sign, |acc, c| acc.max(c.residual(x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Meaningful only when `status` is optimal.
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

struct Tableau {
    a: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    iterations: usize,
    limit: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, d: &mut [f64], pr: usize, pc: usize) {
        let w = self.width();
        let inv = 1.0 / self.a[pr * w + pc];
        for c in 0..w {
            self.a[pr * w + c] *= inv;
        }
        self.a[pr * w + pc] = 1.0;
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).chain(after.chunks_mut(w)).for_each(eliminate);
        let f = d[pc];
        if f != 0.0 {
            for (x, p) in d.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            d[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Reduced-cost row for `cost`; the last entry holds minus the objective value.
    fn reduced(&self, cost: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = cost.to_vec();
        d.push(0.0);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (c, dc) in d.iter_mut().enumerate() {
                    *dc -= cb * self.at(r, c);
                }
            }
        }
        d
    }

    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<(Phase, f64)> {
        let mut d = self.reduced(cost);
        loop {
            // Bland: lowest-index improving column.
            let Some(e) = (0..allowed).find(|&j| d[j] > PIVOT_TOL) else {
                return Ok((Phase::Optimal, -d[self.cols]));
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, e);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, best)) => {
                            if ratio < best - RATIO_TIE || (ratio <= best + RATIO_TIE && self.basis[r] < self.basis[br]) {
                                Some((r, ratio))
                            } else {
                                Some((br, best))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Ok((Phase::Unbounded, f64::INFINITY));
            };
            if self.iterations >= self.limit {
                return Err(Error::Stall { iterations: self.iterations });
            }
            self.iterations += 1;
            self.pivot(&mut d, pr, e);
        }
    }
}

/// Largest tableau (rows times columns) the solver will allocate.
pub const MAX_TABLEAU_CELLS: usize = 50_000_000;

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let nv = lp.variables();
    let rows = lp.constraints.len();
    let slacks = lp.constraints.iter().filter(|c| c.sense != Sense::Eq).count();
    // Every row gets an artificial so the initial basis is the identity; Le rows with
    // nonnegative rhs use their slack instead.
    let mut needs_art = Vec::with_capacity(rows);
    for c in &lp.constraints {
        let flip = c.rhs < 0.0;
        let sense = match (c.sense, flip) {
            (Sense::Le, true) => Sense::Ge,
            (Sense::Ge, true) => Sense::Le,
            (s, _) => s,
        };
        needs_art.push(sense != Sense::Le);
    }
    let arts = needs_art.iter().filter(|&&b| b).count();
    let cols = nv + slacks + arts;
    let cells = (rows + 1).saturating_mul(cols + 1);
    if cells > MAX_TABLEAU_CELLS {
        return Err(Error::TooLarge { count: cells, limit: MAX_TABLEAU_CELLS });
    }

    let w = cols + 1;
    let mut t = Tableau {
        a: vec![0.0; rows * w],
        rows,
        cols,
        basis: vec![0; rows],
        iterations: 0,
        limit: 10_000 + 200 * (rows + cols),
    };
    let (mut next_slack, mut next_art) = (nv, nv + slacks);
    for (r, c) in lp.constraints.iter().enumerate() {
        let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
        for &(j, a) in &c.terms {
            t.a[r * w + j] += sign * a;
        }
        t.a[r * w + cols] = sign * c.rhs;
        if c.sense != Sense::Eq {
            let s = if c.sense == Sense::Le { sign } else { -sign };
            t.a[r * w + next_slack] = s;
            if !needs_art[r] {
                t.basis[r] = next_slack;
            }
            next_slack += 1;
        }
        if needs_art[r] {
            t.a[r * w + next_art] = 1.0;
            t.basis[r] = next_art;
            next_art += 1;
        }
    }

    if arts > 0 {
        let mut cost = vec![0.0; cols];
        cost[nv + slacks..].iter_mut().for_each(|c| *c = -1.0);
        let (_, value) = t.optimize(&cost, cols)?;
        if value < -PHASE_ONE_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                x: vec![0.0; nv],
                iterations: t.iterations,
            });
        }
        // Drive zero-level artificials out of the basis where possible; rows that
        // cannot be pivoted are redundant and stay inert.
        let mut scratch = vec![0.0; w];
        for r in 0..rows {
            if t.basis[r] >= nv + slacks {
                if let Some(c) = (0..nv + slacks).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                    t.pivot(&mut scratch, r, c);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..nv].copy_from_slice(&lp.objective);
    let (phase, objective) = t.optimize(&cost, nv + slacks)?;
    let mut x = vec![0.0; nv];
    for r in 0..rows {
        if t.basis[r] < nv {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let status = match phase {
        Phase::Optimal => LpStatus::Optimal,
        Phase::Unbounded => LpStatus::Unbounded,
    };
    Ok(LpSolution {
        status,
        objective,
        x,
        iterations: t.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::new(1);
        lp.objective[0] = 1.0;
        lp.push(Constraint::new(vec![(0, 1.0)], Sense::Le, 3.0));
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.x[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_two_variables() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.push(Constraint::new(vec![(0, 1.0)], Sense::Le, 4.0));
        lp.push(Constraint::new(vec![(1, 2.0)], Sense::Le, 12.0));
        lp.push(Constraint::new(vec![(0, 3.0), (1, 2.0)], Sense::Le, 18.0));
        let s = solve(&lp).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x + y, x + y = 2, x >= 0.5, y >= 0.5 -> 2; min x via max -x -> 0.5
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.push(Constraint::new(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 2.0));
        lp.push(Constraint::new(vec![(0, 1.0)], Sense::Ge, 0.5));
        lp.push(Constraint::new(vec![(1, 1.0)], Sense::Ge, 0.5));
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.5).abs() < 1e-9);
        assert!(lp.max_residual(&s.x) < 1e-9);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // -x <= -2 means x >= 2; min x -> 2
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![-1.0];
        lp.push(Constraint::new(vec![(0, -1.0)], Sense::Le, -2.0));
        let s = solve(&lp).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.push(Constraint::new(vec![(0, 1.0)], Sense::Le, 1.0));
        lp.push(Constraint::new(vec![(0, 1.0)], Sense::Ge, 2.0));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.push(Constraint::new(vec![(0, 1.0), (1, -1.0)], Sense::Le, 1.0));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities_do_not_cycle() {
        // 3x3 doubly stochastic: row sums = 1 and column sums = 1 (one redundant row).
        let idx = |i: usize, j: usize| i * 3 + j;
        let mut lp = LinearProgram::new(9);
        let w = [[3.0, 1.0, 2.0], [2.0, 3.0, 1.0], [1.0, 2.0, 3.0]];
        for i in 0..3 {
            for j in 0..3 {
                lp.objective[idx(i, j)] = w[i][j];
            }
            lp.push(Constraint::new((0..3).map(|j| (idx(i, j), 1.0)).collect(), Sense::Eq, 1.0));
            lp.push(Constraint::new((0..3).map(|k| (idx(k, i), 1.0)).collect(), Sense::Eq, 1.0));
        }
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 9.0).abs() < 1e-9);
        assert!(lp.max_residual(&s.x) < 1e-9);
    }

    #[test]
    fn degenerate_vertex() {
        // Beale-style degenerate instance; Bland's rule terminates.
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -150.0, 0.02, -6.0];
        lp.push(Constraint::new(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Sense::Le, 0.0));
        lp.push(Constraint::new(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Sense::Le, 0.0));
        lp.push(Constraint::new(vec![(2, 1.0)], Sense::Le, 1.0));
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.05).abs() < 1e-9, "{}", s.objective);
    }
}
