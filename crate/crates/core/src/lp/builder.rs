//! The mean-field linear program of a clustered restless bandit.

use super::{LinearProgram, Relation};
use crate::counts::{FractionalAction, FractionalState};
use crate::error::{Error, Result};
use crate::instance::{Dims, RmabInstance};

/// The mean-field LP over periods `t0..horizon` together with the variable
/// layout needed to read a solution back.
///
/// Variables are fractional action counts `alpha[t][i][s][a]` followed by
/// fractional state counts `mu[t][i][s]`. Rows are, in order: the initial
/// state, flow conservation between consecutive periods, one budget row per
/// period, and consistency `sum_a alpha = mu`.
#[derive(Clone, Debug)]
pub struct MeanFieldLp {
    pub lp: LinearProgram,
    pub t0: usize,
    pub horizon: usize,
    pub dims: Dims,
    /// A primal feasible starting basis: every `mu` and every `alpha` on the
    /// zero-cost action (budget slacks fill the remaining rows).
    pub crash_basis: Vec<usize>,
}

impl MeanFieldLp {
    pub fn periods(&self) -> usize {
        self.horizon - self.t0
    }

    pub fn alpha_var(&self, t: usize, i: usize, s: usize, a: usize) -> usize {
        let d = self.dims;
        (((t - self.t0) * d.clusters + i) * d.states + s) * d.actions + a
    }

    pub fn mu_var(&self, t: usize, i: usize, s: usize) -> usize {
        let d = self.dims;
        self.periods() * d.action_cells() + ((t - self.t0) * d.clusters + i) * d.states + s
    }

    /// Split a solution vector into per-period action and state tensors.
    pub fn unpack(&self, x: &[f64]) -> (Vec<FractionalAction>, Vec<FractionalState>) {
        let d = self.dims;
        let mut actions = Vec::with_capacity(self.periods());
        let mut states = Vec::with_capacity(self.periods());
        for t in self.t0..self.horizon {
            let mut alpha = FractionalAction::zeros(d);
            let mut mu = FractionalState::zeros(d.clusters, d.states);
            for i in 0..d.clusters {
                for s in 0..d.states {
                    mu.set(i, s, x[self.mu_var(t, i, s)]);
                    for a in 0..d.actions {
                        alpha.set(i, s, a, x[self.alpha_var(t, i, s, a)]);
                    }
                }
            }
            actions.push(alpha);
            states.push(mu);
        }
        (actions, states)
    }
}

/// Build the mean-field LP started from `start` at period `t0`. Rewards of
/// period `t` are weighted by `discount^t` (absolute time).
pub fn build_lp(inst: &RmabInstance, start: &FractionalState, t0: usize) -> Result<MeanFieldLp> {
    let d = inst.dims();
    let horizon = inst.horizon();
    if t0 >= horizon {
        return Err(Error::InvalidArgument(format!(
            "start period {t0} beyond horizon {horizon}"
        )));
    }
    if start.num_clusters() != d.clusters || start.num_states() != d.states {
        return Err(Error::Shape(format!(
            "start state is {}x{}, instance has {}x{}",
            start.num_clusters(),
            start.num_states(),
            d.clusters,
            d.states
        )));
    }
    if start.as_slice().iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument("start state has a negative entry".into()));
    }
    let mut m = MeanFieldLp {
        lp: LinearProgram::new(),
        t0,
        horizon,
        dims: d,
        crash_basis: Vec::new(),
    };
    for t in t0..horizon {
        let w = inst.weight(t);
        for i in 0..d.clusters {
            for s in 0..d.states {
                for a in 0..d.actions {
                    m.lp.add_var(format!("alpha_t{t}_c{i}_s{s}_a{a}"), w * inst.reward(t, i, s, a));
                }
            }
        }
    }
    for t in t0..horizon {
        for i in 0..d.clusters {
            for s in 0..d.states {
                m.lp.add_var(format!("mu_t{t}_c{i}_s{s}"), 0.0);
            }
        }
    }
    for i in 0..d.clusters {
        for s in 0..d.states {
            let v = m.mu_var(t0, i, s);
            m.lp
                .add_constraint(format!("init_c{i}_s{s}"), vec![(v, 1.0)], Relation::Eq, start.get(i, s));
        }
    }
    for t in t0..horizon - 1 {
        for i in 0..d.clusters {
            for next in 0..d.states {
                let mut row = vec![(m.mu_var(t + 1, i, next), 1.0)];
                for s in 0..d.states {
                    for a in 0..d.actions {
                        let p = inst.prob(t, i, s, a, next);
                        if p != 0.0 {
                            row.push((m.alpha_var(t, i, s, a), -p));
                        }
                    }
                }
                m.lp
                    .add_constraint(format!("flow_t{}_c{i}_s{next}", t + 1), row, Relation::Eq, 0.0);
            }
        }
    }
    for t in t0..horizon {
        let mut row = Vec::new();
        for i in 0..d.clusters {
            for s in 0..d.states {
                for a in 0..d.actions {
                    let c = inst.cost(t, i, s, a);
                    if c != 0.0 {
                        row.push((m.alpha_var(t, i, s, a), c));
                    }
                }
            }
        }
        m.lp
            .add_constraint(format!("budget_t{t}"), row, Relation::Le, inst.budget(t));
    }
    for t in t0..horizon {
        for i in 0..d.clusters {
            for s in 0..d.states {
                let mut row: Vec<(usize, f64)> =
                    (0..d.actions).map(|a| (m.alpha_var(t, i, s, a), 1.0)).collect();
                row.push((m.mu_var(t, i, s), -1.0));
                m.lp
                    .add_constraint(format!("consistency_t{t}_c{i}_s{s}"), row, Relation::Eq, 0.0);
            }
        }
    }
    let mut crash = Vec::with_capacity(2 * m.periods() * d.cells());
    for t in t0..horizon {
        for i in 0..d.clusters {
            for s in 0..d.states {
                crash.push(m.mu_var(t, i, s));
                crash.push(m.alpha_var(t, i, s, inst.zero_cost_action(t, i, s)));
            }
        }
    }
    m.crash_basis = crash;
    Ok(m)
}
