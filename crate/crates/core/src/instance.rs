//! Clustered restless bandit instances.
//!
//! Arms are grouped into clusters that share transition, reward and cost
//! parameters. Periods are indexed `t = 0..horizon` and the reward collected
//! in period `t` is weighted by `discount^t`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on transition row sums used by [`validate_instance`].
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub clusters: usize,
    pub states: usize,
    pub actions: usize,
}

impl Dims {
    pub fn new(clusters: usize, states: usize, actions: usize) -> Self {
        Dims {
            clusters,
            states,
            actions,
        }
    }

    pub fn cells(&self) -> usize {
        self.clusters * self.states
    }

    pub fn action_cells(&self) -> usize {
        self.clusters * self.states * self.actions
    }
}

/// A clustered finite-horizon (or truncated discounted) restless bandit.
///
/// Parameters are stored per time slice. A stationary instance keeps a single
/// slice that is shared by every period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmabInstance {
    dims: Dims,
    horizon: usize,
    discount: f64,
    cluster_sizes: Vec<u64>,
    budgets: Vec<f64>,
    stationary: bool,
    // [slice][i][a][s][s']
    transitions: Vec<f64>,
    // [slice][i][s][a]
    rewards: Vec<f64>,
    costs: Vec<f64>,
    // [slice][i][s]
    zero_cost: Vec<usize>,
    state_labels: Vec<String>,
}

impl RmabInstance {
    /// Zero-filled instance: all transitions zero, rewards and costs zero,
    /// zero-cost action 0 everywhere. Fill it in with the setters.
    pub fn zeros(
        dims: Dims,
        horizon: usize,
        discount: f64,
        cluster_sizes: Vec<u64>,
        stationary: bool,
    ) -> Result<Self> {
        if dims.clusters == 0 || dims.states == 0 || dims.actions == 0 {
            return Err(Error::Shape(format!(
                "dimensions must be positive, got K={} S={} A={}",
                dims.clusters, dims.states, dims.actions
            )));
        }
        if horizon == 0 {
            return Err(Error::Shape("horizon must be at least 1".into()));
        }
        if cluster_sizes.len() != dims.clusters {
            return Err(Error::Shape(format!(
                "{} cluster sizes for {} clusters",
                cluster_sizes.len(),
                dims.clusters
            )));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::InvalidArgument(format!(
                "discount {discount} outside [0, 1]"
            )));
        }
        let slices = if stationary { 1 } else { horizon };
        let (k, s, a) = (dims.clusters, dims.states, dims.actions);
        Ok(RmabInstance {
            dims,
            horizon,
            discount,
            cluster_sizes,
            budgets: vec![0.0; horizon],
            stationary,
            transitions: vec![0.0; slices * k * a * s * s],
            rewards: vec![0.0; slices * k * s * a],
            costs: vec![0.0; slices * k * s * a],
            zero_cost: vec![0; slices * k * s],
            state_labels: (0..s).map(|x| x.to_string()).collect(),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn num_clusters(&self) -> usize {
        self.dims.clusters
    }
    pub fn num_states(&self) -> usize {
        self.dims.states
    }
    pub fn num_actions(&self) -> usize {
        self.dims.actions
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn discount(&self) -> f64 {
        self.discount
    }
    pub fn is_stationary(&self) -> bool {
        self.stationary
    }
    pub fn cluster_sizes(&self) -> &[u64] {
        &self.cluster_sizes
    }
    pub fn cluster_size(&self, i: usize) -> u64 {
        self.cluster_sizes[i]
    }
    /// Total number of arms N.
    pub fn total_arms(&self) -> u64 {
        self.cluster_sizes.iter().sum()
    }
    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }
    pub fn budget(&self, t: usize) -> f64 {
        self.budgets[t]
    }
    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }
    pub fn state_label(&self, s: usize) -> &str {
        &self.state_labels[s]
    }

    /// Weight `discount^t` applied to rewards of period `t`.
    pub fn weight(&self, t: usize) -> f64 {
        self.discount.powi(t as i32)
    }

    fn slice(&self, t: usize) -> usize {
        if self.stationary {
            0
        } else {
            t
        }
    }

    fn num_slices(&self) -> usize {
        if self.stationary {
            1
        } else {
            self.horizon
        }
    }

    fn trans_offset(&self, t: usize, i: usize, a: usize, s: usize) -> usize {
        let Dims {
            clusters: k,
            states: ns,
            actions: na,
        } = self.dims;
        (((self.slice(t) * k + i) * na + a) * ns + s) * ns
    }

    fn cell_offset(&self, t: usize, i: usize, s: usize) -> usize {
        (self.slice(t) * self.dims.clusters + i) * self.dims.states + s
    }

    /// Row `P_t(· | s, a)` for cluster `i`.
    pub fn transition_row(&self, t: usize, i: usize, s: usize, a: usize) -> &[f64] {
        let o = self.trans_offset(t, i, a, s);
        &self.transitions[o..o + self.dims.states]
    }

    pub fn prob(&self, t: usize, i: usize, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[self.trans_offset(t, i, a, s) + next]
    }

    pub fn reward(&self, t: usize, i: usize, s: usize, a: usize) -> f64 {
        self.rewards[self.cell_offset(t, i, s) * self.dims.actions + a]
    }

    pub fn cost(&self, t: usize, i: usize, s: usize, a: usize) -> f64 {
        self.costs[self.cell_offset(t, i, s) * self.dims.actions + a]
    }

    pub fn zero_cost_action(&self, t: usize, i: usize, s: usize) -> usize {
        self.zero_cost[self.cell_offset(t, i, s)]
    }

    /// Largest reward over all periods, clusters, states and actions.
    pub fn r_max(&self) -> f64 {
        self.rewards.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_cost(&self) -> f64 {
        self.costs.iter().cloned().fold(0.0, f64::max)
    }

    // Setters. For a stationary instance `t` is ignored and the single slice
    // is written; otherwise `t` selects the period.

    pub fn set_prob(&mut self, t: usize, i: usize, s: usize, a: usize, next: usize, p: f64) {
        let o = self.trans_offset(t, i, a, s);
        self.transitions[o + next] = p;
    }

    pub fn set_transition_row(&mut self, t: usize, i: usize, s: usize, a: usize, row: &[f64]) {
        assert_eq!(row.len(), self.dims.states, "transition row length");
        let o = self.trans_offset(t, i, a, s);
        self.transitions[o..o + row.len()].copy_from_slice(row);
    }

    pub fn set_reward(&mut self, t: usize, i: usize, s: usize, a: usize, r: f64) {
        let o = self.cell_offset(t, i, s) * self.dims.actions + a;
        self.rewards[o] = r;
    }

    pub fn set_cost(&mut self, t: usize, i: usize, s: usize, a: usize, c: f64) {
        let o = self.cell_offset(t, i, s) * self.dims.actions + a;
        self.costs[o] = c;
    }

    pub fn set_zero_cost_action(&mut self, t: usize, i: usize, s: usize, a: usize) {
        let o = self.cell_offset(t, i, s);
        self.zero_cost[o] = a;
    }

    pub fn set_budget(&mut self, t: usize, b: f64) {
        self.budgets[t] = b;
    }

    pub fn set_all_budgets(&mut self, b: f64) {
        self.budgets.iter_mut().for_each(|x| *x = b);
    }

    pub fn set_state_labels<S: Into<String>>(&mut self, labels: Vec<S>) -> Result<()> {
        if labels.len() != self.dims.states {
            return Err(Error::Shape(format!(
                "{} labels for {} states",
                labels.len(),
                self.dims.states
            )));
        }
        self.state_labels = labels.into_iter().map(Into::into).collect();
        Ok(())
    }

    pub fn set_cluster_sizes(&mut self, sizes: Vec<u64>) -> Result<()> {
        if sizes.len() != self.dims.clusters {
            return Err(Error::Shape(format!(
                "{} cluster sizes for {} clusters",
                sizes.len(),
                self.dims.clusters
            )));
        }
        self.cluster_sizes = sizes;
        Ok(())
    }

    /// Indices of the stored parameter slices (just `0` when stationary).
    pub fn slices(&self) -> std::ops::Range<usize> {
        0..self.num_slices()
    }

    /// Copy of the instance with a different horizon. Budgets are extended
    /// with the last budget value. Only stationary instances can be extended.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Shape("horizon must be at least 1".into()));
        }
        if !self.stationary && horizon > self.horizon {
            return Err(Error::InvalidArgument(format!(
                "cannot extend a non-stationary instance from {} to {} periods",
                self.horizon, horizon
            )));
        }
        let mut out = self.clone();
        let last = *self.budgets.last().unwrap();
        out.budgets.resize(horizon, last);
        out.horizon = horizon;
        if !self.stationary {
            let k = self.dims.clusters;
            let (ns, na) = (self.dims.states, self.dims.actions);
            out.transitions.truncate(horizon * k * na * ns * ns);
            out.rewards.truncate(horizon * k * ns * na);
            out.costs.truncate(horizon * k * ns * na);
            out.zero_cost.truncate(horizon * k * ns);
        }
        Ok(out)
    }

    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::InvalidArgument(format!(
                "discount {discount} outside [0, 1]"
            )));
        }
        let mut out = self.clone();
        out.discount = discount;
        Ok(out)
    }

    /// Copy restricted to periods `from..horizon`, re-indexed so that period
    /// `from` becomes period 0. Discounting keeps absolute time, so the
    /// caller must reweight by `discount^from` if needed.
    pub fn tail_from(&self, from: usize) -> Result<Self> {
        if from >= self.horizon {
            return Err(Error::InvalidArgument(format!(
                "tail start {from} beyond horizon {}",
                self.horizon
            )));
        }
        let mut out = self.clone();
        out.horizon = self.horizon - from;
        out.budgets = self.budgets[from..].to_vec();
        if !self.stationary {
            let k = self.dims.clusters;
            let (ns, na) = (self.dims.states, self.dims.actions);
            out.transitions = self.transitions[from * k * na * ns * ns..].to_vec();
            out.rewards = self.rewards[from * k * ns * na..].to_vec();
            out.costs = self.costs[from * k * ns * na..].to_vec();
            out.zero_cost = self.zero_cost[from * k * ns..].to_vec();
        }
        Ok(out)
    }

    /// Rescale every transition row whose sum is within `tol` of one so that
    /// it sums to one exactly. Rows further off are left untouched and will
    /// be reported by [`validate_instance`].
    pub fn renormalize_rows(&mut self, tol: f64) {
        let ns = self.dims.states;
        for row in self.transitions.chunks_mut(ns) {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() <= tol && sum > 0.0 {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
    }
}

/// One problem found by [`validate_instance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    RowSum {
        t: usize,
        cluster: usize,
        state: usize,
        action: usize,
        sum: f64,
    },
    NegativeProbability {
        t: usize,
        cluster: usize,
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    NegativeReward {
        t: usize,
        cluster: usize,
        state: usize,
        action: usize,
        value: f64,
    },
    NegativeCost {
        t: usize,
        cluster: usize,
        state: usize,
        action: usize,
        value: f64,
    },
    ZeroCostActionOutOfRange {
        t: usize,
        cluster: usize,
        state: usize,
        action: usize,
    },
    ZeroCostActionHasCost {
        t: usize,
        cluster: usize,
        state: usize,
        action: usize,
        cost: f64,
    },
    NegativeBudget {
        t: usize,
        value: f64,
    },
    EmptyCluster {
        cluster: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            RowSum {
                t,
                cluster,
                state,
                action,
                sum,
            } => write!(
                f,
                "transition row (t={t}, cluster={cluster}, state={state}, action={action}) sums to {sum}"
            ),
            NegativeProbability {
                t,
                cluster,
                state,
                action,
                next,
                value,
            } => write!(
                f,
                "P(t={t}, cluster={cluster}, {state} -> {next} | action {action}) = {value} is negative"
            ),
            NegativeReward {
                t,
                cluster,
                state,
                action,
                value,
            } => write!(
                f,
                "reward (t={t}, cluster={cluster}, state={state}, action={action}) = {value} is negative"
            ),
            NegativeCost {
                t,
                cluster,
                state,
                action,
                value,
            } => write!(
                f,
                "cost (t={t}, cluster={cluster}, state={state}, action={action}) = {value} is negative"
            ),
            ZeroCostActionOutOfRange {
                t,
                cluster,
                state,
                action,
            } => write!(
                f,
                "zero-cost action {action} at (t={t}, cluster={cluster}, state={state}) is out of range"
            ),
            ZeroCostActionHasCost {
                t,
                cluster,
                state,
                action,
                cost,
            } => write!(
                f,
                "declared zero-cost action {action} at (t={t}, cluster={cluster}, state={state}) costs {cost}"
            ),
            NegativeBudget { t, value } => write!(f, "budget at t={t} is {value}"),
            EmptyCluster { cluster } => write!(f, "cluster {cluster} has no arms"),
        }
    }
}

/// Report every violated instance invariant. An empty list means the instance
/// is usable by the rest of the toolkit.
pub fn validate_instance(inst: &RmabInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let Dims {
        clusters,
        states,
        actions,
    } = inst.dims;
    for (cluster, &n) in inst.cluster_sizes.iter().enumerate() {
        if n == 0 {
            out.push(Violation::EmptyCluster { cluster });
        }
    }
    for t in inst.slices() {
        for i in 0..clusters {
            for s in 0..states {
                for a in 0..actions {
                    let row = inst.transition_row(t, i, s, a);
                    for (next, &p) in row.iter().enumerate() {
                        if !(p >= 0.0) {
                            out.push(Violation::NegativeProbability {
                                t,
                                cluster: i,
                                state: s,
                                action: a,
                                next,
                                value: p,
                            });
                        }
                    }
                    let sum: f64 = row.iter().sum();
                    if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
                        out.push(Violation::RowSum {
                            t,
                            cluster: i,
                            state: s,
                            action: a,
                            sum,
                        });
                    }
                    let r = inst.reward(t, i, s, a);
                    if !(r >= 0.0) || !r.is_finite() {
                        out.push(Violation::NegativeReward {
                            t,
                            cluster: i,
                            state: s,
                            action: a,
                            value: r,
                        });
                    }
                    let c = inst.cost(t, i, s, a);
                    if !(c >= 0.0) || !c.is_finite() {
                        out.push(Violation::NegativeCost {
                            t,
                            cluster: i,
                            state: s,
                            action: a,
                            value: c,
                        });
                    }
                }
                let z = inst.zero_cost_action(t, i, s);
                if z >= actions {
                    out.push(Violation::ZeroCostActionOutOfRange {
                        t,
                        cluster: i,
                        state: s,
                        action: z,
                    });
                } else if inst.cost(t, i, s, z) != 0.0 {
                    out.push(Violation::ZeroCostActionHasCost {
                        t,
                        cluster: i,
                        state: s,
                        action: z,
                        cost: inst.cost(t, i, s, z),
                    });
                }
            }
        }
    }
    for (t, &b) in inst.budgets.iter().enumerate() {
        if !(b >= 0.0) {
            out.push(Violation::NegativeBudget { t, value: b });
        }
    }
    out
}

/// [`validate_instance`] as a `Result`.
pub fn ensure_valid(inst: &RmabInstance) -> Result<()> {
    let v = validate_instance(inst);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidInstance(v))
    }
}
