//! Linear programs and a dense revised simplex solver.

mod builder;
mod simplex;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use builder::{build_lp, MeanFieldLp};
pub use simplex::{DenseSimplex, SimplexOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sparse coefficients `(variable, value)`.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize c·x  subject to  rows, x >= 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub var_names: Vec<String>,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, obj: f64) -> usize {
        self.var_names.push(name.into());
        self.objective.push(obj);
        self.objective.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// `c·x` for a candidate point.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any constraint or of non-negativity at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |m, &v| m.max(-v));
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Plain-text dump in an LP-file-like layout, for inspection with
    /// external solvers.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("maximize\n  obj:");
        write_terms(
            &mut out,
            self.objective
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, &c)| (j, c)),
            &self.var_names,
        );
        out.push_str("\nsubject to\n");
        for c in &self.constraints {
            let _ = write!(out, "  {}:", c.name);
            write_terms(&mut out, c.coeffs.iter().cloned(), &self.var_names);
            let _ = writeln!(out, " {} {}", c.relation, c.rhs);
        }
        out.push_str("bounds\n");
        for name in &self.var_names {
            let _ = writeln!(out, "  {name} >= 0");
        }
        out.push_str("end\n");
        out
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (usize, f64)>, names: &[String]) {
    let mut any = false;
    for (j, c) in terms {
        let sign = if c < 0.0 { '-' } else { '+' };
        if any || c < 0.0 {
            let _ = write!(out, " {sign}");
        }
        let _ = write!(out, " {} {}", c.abs(), names[j]);
        any = true;
    }
    if !any {
        out.push_str(" 0");
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub pivots: usize,
    pub phase_one_pivots: usize,
    pub bland_pivots: usize,
    pub refactorizations: usize,
    /// Largest constraint or bound violation of the returned point.
    pub max_violation: f64,
    /// Whether a caller-supplied starting basis was used.
    pub warm_started: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    /// Structural variables that are basic at the optimum, by row.
    pub basis: Vec<Option<usize>>,
    pub stats: SolveStats,
}

/// Anything that can solve a [`LinearProgram`] to optimality.
pub trait LpSolver: Send + Sync {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution>;

    /// Solve starting from a basis given as one structural column per row.
    /// Solvers that cannot use the hint may ignore it.
    fn solve_from_basis(&self, lp: &LinearProgram, _basis: &[usize]) -> Result<LpSolution> {
        self.solve(lp)
    }
}

/// Solve with the default dense simplex.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    DenseSimplex::default().solve(lp)
}
