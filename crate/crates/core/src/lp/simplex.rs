//! Two-phase revised primal simplex with an explicit dense basis inverse.
//!
//! Pricing is Dantzig's rule with lowest-index tie breaking. After a run of
//! degenerate pivots the solver switches to Bland's rule until the objective
//! moves again, which rules out cycling. Everything is deterministic.

use log::trace;

use super::{LinearProgram, LpSolution, LpSolver, Relation, SolveStats};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_pivots: usize,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_tol: 1e-10,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            max_pivots: 200_000,
            refactor_every: 300,
            degenerate_limit: 50,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct DenseSimplex {
    pub options: SimplexOptions,
}

impl DenseSimplex {
    pub fn new(options: SimplexOptions) -> Self {
        DenseSimplex { options }
    }
}

impl LpSolver for DenseSimplex {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        let mut tab = Tableau::new(lp)?;
        tab.solve(lp, &self.options, None)
    }

    fn solve_from_basis(&self, lp: &LinearProgram, basis: &[usize]) -> Result<LpSolution> {
        let mut tab = Tableau::new(lp)?;
        tab.solve(lp, &self.options, Some(basis))
    }
}

enum Kind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    m: usize,
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    kinds: Vec<Kind>,
    /// Slack or surplus column of each row, if any.
    row_slack: Vec<Option<usize>>,
    row_artificial: Vec<Option<usize>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    stats: SolveStats,
    since_refactor: usize,
}

enum Phase {
    One,
    Two,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Result<Self> {
        let m = lp.num_constraints();
        let n = lp.num_vars();
        if lp.var_names.len() != n {
            return Err(Error::Shape("variable names and objective differ in length".into()));
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut kinds: Vec<Kind> = (0..n).map(|_| Kind::Structural).collect();
        let mut b = Vec::with_capacity(m);
        let mut rel = Vec::with_capacity(m);
        for (r, c) in lp.constraints.iter().enumerate() {
            let flip = c.rhs < 0.0;
            let sign = if flip { -1.0 } else { 1.0 };
            for &(j, a) in &c.coeffs {
                if j >= n {
                    return Err(Error::Shape(format!(
                        "constraint {} references variable {j} of {n}",
                        c.name
                    )));
                }
                if a != 0.0 {
                    cols[j].push((r, sign * a));
                }
            }
            b.push(sign * c.rhs);
            rel.push(match (c.relation, flip) {
                (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
                (Relation::Ge, false) | (Relation::Le, true) => Relation::Ge,
                (Relation::Eq, _) => Relation::Eq,
            });
        }
        // Merge duplicate entries so each column has one value per row.
        for col in cols.iter_mut() {
            col.sort_by_key(|&(r, _)| r);
            col.dedup_by(|next, prev| {
                if next.0 == prev.0 {
                    prev.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        let mut row_slack = vec![None; m];
        let mut row_artificial = vec![None; m];
        let mut basis = vec![0; m];
        for r in 0..m {
            match rel[r] {
                Relation::Le => {
                    row_slack[r] = Some(cols.len());
                    basis[r] = cols.len();
                    cols.push(vec![(r, 1.0)]);
                    kinds.push(Kind::Slack);
                }
                Relation::Ge => {
                    row_slack[r] = Some(cols.len());
                    cols.push(vec![(r, -1.0)]);
                    kinds.push(Kind::Slack);
                }
                Relation::Eq => {}
            }
        }
        for r in 0..m {
            if rel[r] != Relation::Le {
                row_artificial[r] = Some(cols.len());
                basis[r] = cols.len();
                cols.push(vec![(r, 1.0)]);
                kinds.push(Kind::Artificial);
            }
        }
        let mut in_basis = vec![false; cols.len()];
        for &j in &basis {
            in_basis[j] = true;
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        let xb = b.clone();
        Ok(Tableau {
            m,
            n_struct: n,
            cols,
            kinds,
            row_slack,
            row_artificial,
            b,
            basis,
            in_basis,
            binv,
            xb,
            stats: SolveStats::default(),
            since_refactor: 0,
        })
    }

    fn is_artificial(&self, j: usize) -> bool {
        matches!(self.kinds[j], Kind::Artificial)
    }

    fn set_basis(&mut self, basis: Vec<usize>) {
        self.in_basis.iter_mut().for_each(|x| *x = false);
        for &j in &basis {
            self.in_basis[j] = true;
        }
        self.basis = basis;
    }

    /// Recompute the basis inverse from scratch by Gauss-Jordan elimination
    /// with partial pivoting.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            for &(row, v) in &self.cols[j] {
                a[row * m + r] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for c in 0..m {
            let mut p = c;
            let mut best = a[c * m + c].abs();
            for r in c + 1..m {
                let v = a[r * m + c].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-12 {
                return Err(Error::Numerical("singular basis".into()));
            }
            if p != c {
                for k in 0..m {
                    a.swap(c * m + k, p * m + k);
                    inv.swap(c * m + k, p * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.xb[r] = row.iter().zip(&self.b).map(|(x, y)| x * y).sum();
        }
        self.stats.refactorizations += 1;
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yk, bk) in y.iter_mut().zip(row) {
                    *yk += cb * bk;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        cost[j] - self.cols[j].iter().map(|&(r, v)| y[r] * v).sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(row, v) in &self.cols[j] {
            for (r, wr) in w.iter_mut().enumerate() {
                *wr += self.binv[r * m + row] * v;
            }
        }
        w
    }

    fn pivot(&mut self, leave: usize, enter: usize, w: &[f64], theta: f64) {
        let m = self.m;
        let piv = w[leave];
        let (before, rest) = self.binv.split_at_mut(leave * m);
        let (prow, after) = rest.split_at_mut(m);
        prow.iter_mut().for_each(|v| *v /= piv);
        for (r, chunk) in before.chunks_mut(m).enumerate() {
            let f = w[r];
            if f != 0.0 {
                chunk.iter_mut().zip(prow.iter()).for_each(|(a, p)| *a -= f * p);
            }
        }
        for (k, chunk) in after.chunks_mut(m).enumerate() {
            let f = w[leave + 1 + k];
            if f != 0.0 {
                chunk.iter_mut().zip(prow.iter()).for_each(|(a, p)| *a -= f * p);
            }
        }
        for r in 0..m {
            if r != leave {
                self.xb[r] -= theta * w[r];
            }
        }
        self.xb[leave] = theta;
        self.in_basis[self.basis[leave]] = false;
        self.in_basis[enter] = true;
        self.basis[leave] = enter;
        self.stats.pivots += 1;
        self.since_refactor += 1;
    }

    /// Minimize `cost · x` from the current feasible basis.
    fn iterate(&mut self, cost: &[f64], phase: Phase, opts: &SimplexOptions) -> Result<()> {
        let ncols = self.cols.len();
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.stats.pivots >= opts.max_pivots {
                return Err(Error::IterationLimit(self.stats.pivots));
            }
            if self.since_refactor >= opts.refactor_every {
                self.refactor()?;
            }
            let y = self.duals(cost);
            let mut enter = None;
            let mut best = -opts.optimality_tol;
            for j in 0..ncols {
                if self.in_basis[j] {
                    continue;
                }
                if matches!(phase, Phase::Two) && self.is_artificial(j) {
                    continue;
                }
                let d = self.reduced_cost(cost, &y, j);
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else {
                return Ok(());
            };
            let w = self.ftran(q);
            let leave = if bland {
                self.ratio_bland(&w, opts)
            } else {
                self.ratio_harris(&w, opts)
            };
            let Some(r) = leave else {
                return Err(Error::Unbounded(q));
            };
            let theta = self.xb[r].max(0.0) / w[r];
            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= opts.degenerate_limit && !bland {
                    trace!("switching to Bland's rule after {degenerate_run} degenerate pivots");
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
            if bland {
                self.stats.bland_pivots += 1;
            }
            if matches!(phase, Phase::One) {
                self.stats.phase_one_pivots += 1;
            }
            self.pivot(r, q, &w, theta);
        }
    }

    /// Harris two-pass ratio test: among rows whose ratio is within the
    /// feasibility tolerance of the minimum, take the largest pivot.
    fn ratio_harris(&self, w: &[f64], opts: &SimplexOptions) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for (r, &wr) in w.iter().enumerate() {
            if wr > opts.pivot_tol {
                bound = bound.min((self.xb[r].max(0.0) + opts.feasibility_tol) / wr);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut pick: Option<usize> = None;
        for (r, &wr) in w.iter().enumerate() {
            if wr > opts.pivot_tol && self.xb[r].max(0.0) / wr <= bound {
                match pick {
                    Some(p) if w[p] >= wr => {}
                    _ => pick = Some(r),
                }
            }
        }
        pick
    }

    /// Textbook minimum ratio with ties broken by lowest basic column index.
    fn ratio_bland(&self, w: &[f64], opts: &SimplexOptions) -> Option<usize> {
        let mut pick: Option<(usize, f64)> = None;
        for (r, &wr) in w.iter().enumerate() {
            if wr > opts.pivot_tol {
                let ratio = self.xb[r].max(0.0) / wr;
                match pick {
                    Some((p, best))
                        if ratio > best + 1e-12
                            || (ratio >= best - 1e-12 && self.basis[p] < self.basis[r]) => {}
                    _ => pick = Some((r, ratio)),
                }
            }
        }
        pick.map(|(r, _)| r)
    }

    /// Pivot basic artificials (at level zero) out of the basis where a
    /// non-artificial column has a usable entry in their row.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut pick = None;
            let mut best = 1e-7;
            for j in 0..self.cols.len() {
                if self.in_basis[j] || self.is_artificial(j) {
                    continue;
                }
                let v: f64 = self.cols[j].iter().map(|&(k, a)| row[k] * a).sum();
                if v.abs() > best {
                    best = v.abs();
                    pick = Some(j);
                }
            }
            if let Some(j) = pick {
                let w = self.ftran(j);
                self.pivot(r, j, &w, 0.0);
            }
        }
    }

    fn try_warm_start(&mut self, hint: &[usize], opts: &SimplexOptions) -> bool {
        let mut basis: Vec<usize> = hint.to_vec();
        if basis.iter().any(|&j| j >= self.n_struct) {
            return false;
        }
        basis.extend(
            (0..self.m).filter_map(|r| match (self.row_slack[r], self.row_artificial[r]) {
                (Some(s), None) => Some(s),
                _ => None,
            }),
        );
        if basis.len() != self.m {
            return false;
        }
        let saved = (self.basis.clone(), self.binv.clone(), self.xb.clone());
        self.set_basis(basis);
        let ok = self.refactor().is_ok() && self.xb.iter().all(|&v| v >= -opts.feasibility_tol);
        if !ok {
            let (b, inv, xb) = saved;
            self.set_basis(b);
            self.binv = inv;
            self.xb = xb;
        }
        ok
    }

    fn solve(
        &mut self,
        lp: &LinearProgram,
        opts: &SimplexOptions,
        hint: Option<&[usize]>,
    ) -> Result<LpSolution> {
        let ncols = self.cols.len();
        let warm = hint.is_some_and(|h| self.try_warm_start(h, opts));
        self.stats.warm_started = warm;
        let has_artificial_basic = self.basis.iter().any(|&j| self.is_artificial(j));
        if !warm && has_artificial_basic {
            let cost: Vec<f64> = (0..ncols)
                .map(|j| if self.is_artificial(j) { 1.0 } else { 0.0 })
                .collect();
            self.iterate(&cost, Phase::One, opts)?;
            self.refactor()?;
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(j, _)| self.is_artificial(**j))
                .map(|(_, v)| v.max(0.0))
                .sum();
            let scale = 1.0 + self.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if infeas > opts.feasibility_tol * scale {
                return Err(Error::Infeasible(infeas));
            }
            self.drive_out_artificials();
        }
        // Phase two minimizes the negated objective.
        let mut cost = vec![0.0; ncols];
        for (j, &c) in lp.objective.iter().enumerate() {
            cost[j] = -c;
        }
        for _ in 0..5 {
            self.iterate(&cost, Phase::Two, opts)?;
            self.refactor()?;
            let y = self.duals(&cost);
            let still_improving = (0..ncols).any(|j| {
                !self.in_basis[j]
                    && !self.is_artificial(j)
                    && self.reduced_cost(&cost, &y, j) < -opts.optimality_tol
            });
            let feasible = self.xb.iter().all(|&v| v >= -opts.feasibility_tol);
            if !still_improving && feasible {
                break;
            }
            if !feasible {
                return Err(Error::Numerical(
                    "basic solution lost primal feasibility after refactorization".into(),
                ));
            }
        }
        let mut x = vec![0.0; self.n_struct];
        let mut basis = vec![None; self.m];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < self.n_struct {
                x[j] = self.xb[r].max(0.0);
                basis[r] = Some(j);
            }
        }
        let mut stats = std::mem::take(&mut self.stats);
        stats.max_violation = lp.max_violation(&x);
        trace!(
            "simplex: {} pivots ({} phase one, {} Bland), violation {:e}",
            stats.pivots,
            stats.phase_one_pivots,
            stats.bland_pivots,
            stats.max_violation
        );
        Ok(LpSolution {
            objective: lp.objective_value(&x),
            x,
            basis,
            stats,
        })
    }
}
