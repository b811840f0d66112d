//! Integral and fractional occupation counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Dims, RmabInstance};

/// Number of arms of each cluster in each state, `[i][s]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateCount {
    clusters: usize,
    states: usize,
    counts: Vec<u64>,
}

impl StateCount {
    pub fn zeros(clusters: usize, states: usize) -> Self {
        StateCount {
            clusters,
            states,
            counts: vec![0; clusters * states],
        }
    }

    pub fn from_nested(rows: &[Vec<u64>]) -> Result<Self> {
        let states = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != states) {
            return Err(Error::Shape("ragged state-count rows".into()));
        }
        Ok(StateCount {
            clusters: rows.len(),
            states,
            counts: rows.concat(),
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters
    }
    pub fn num_states(&self) -> usize {
        self.states
    }
    pub fn get(&self, i: usize, s: usize) -> u64 {
        self.counts[i * self.states + s]
    }
    pub fn set(&mut self, i: usize, s: usize, n: u64) {
        self.counts[i * self.states + s] = n;
    }
    pub fn add(&mut self, i: usize, s: usize, n: u64) {
        self.counts[i * self.states + s] += n;
    }
    pub fn cluster(&self, i: usize) -> &[u64] {
        &self.counts[i * self.states..(i + 1) * self.states]
    }
    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }
    pub fn cluster_total(&self, i: usize) -> u64 {
        self.cluster(i).iter().sum()
    }
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_fractional(&self) -> FractionalState {
        FractionalState {
            clusters: self.clusters,
            states: self.states,
            values: self.counts.iter().map(|&c| c as f64).collect(),
        }
    }

    /// Check that the shape matches the instance and cluster totals equal N_i.
    pub fn check_against(&self, inst: &RmabInstance) -> Result<()> {
        if self.clusters != inst.num_clusters() || self.states != inst.num_states() {
            return Err(Error::Shape(format!(
                "state count is {}x{}, instance has {}x{}",
                self.clusters,
                self.states,
                inst.num_clusters(),
                inst.num_states()
            )));
        }
        for i in 0..self.clusters {
            if self.cluster_total(i) != inst.cluster_size(i) {
                return Err(Error::InvalidArgument(format!(
                    "cluster {i} holds {} arms, instance declares {}",
                    self.cluster_total(i),
                    inst.cluster_size(i)
                )));
            }
        }
        Ok(())
    }
}

/// Number of arms of each cluster in each state taking each action, `[i][s][a]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionCount {
    dims: Dims,
    counts: Vec<u64>,
}

impl ActionCount {
    pub fn zeros(dims: Dims) -> Self {
        ActionCount {
            dims,
            counts: vec![0; dims.action_cells()],
        }
    }

    /// Every arm takes the declared zero-cost action of its cell.
    pub fn all_zero_cost(inst: &RmabInstance, t: usize, mu: &StateCount) -> Self {
        let mut out = ActionCount::zeros(inst.dims());
        for i in 0..inst.num_clusters() {
            for s in 0..inst.num_states() {
                out.set(i, s, inst.zero_cost_action(t, i, s), mu.get(i, s));
            }
        }
        out
    }

    fn idx(&self, i: usize, s: usize, a: usize) -> usize {
        (i * self.dims.states + s) * self.dims.actions + a
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn get(&self, i: usize, s: usize, a: usize) -> u64 {
        self.counts[self.idx(i, s, a)]
    }
    pub fn set(&mut self, i: usize, s: usize, a: usize, n: u64) {
        let k = self.idx(i, s, a);
        self.counts[k] = n;
    }
    pub fn add(&mut self, i: usize, s: usize, a: usize, n: u64) {
        let k = self.idx(i, s, a);
        self.counts[k] += n;
    }
    pub fn cell(&self, i: usize, s: usize) -> &[u64] {
        let k = self.idx(i, s, 0);
        &self.counts[k..k + self.dims.actions]
    }
    pub fn cell_total(&self, i: usize, s: usize) -> u64 {
        self.cell(i, s).iter().sum()
    }
    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    /// The state occupation implied by summing over actions.
    pub fn state_marginal(&self) -> StateCount {
        let mut out = StateCount::zeros(self.dims.clusters, self.dims.states);
        for i in 0..self.dims.clusters {
            for s in 0..self.dims.states {
                out.set(i, s, self.cell_total(i, s));
            }
        }
        out
    }

    pub fn to_fractional(&self) -> FractionalAction {
        FractionalAction {
            dims: self.dims,
            values: self.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// Fractional state occupation `[i][s]` (mean-field state).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalState {
    clusters: usize,
    states: usize,
    values: Vec<f64>,
}

impl FractionalState {
    pub fn zeros(clusters: usize, states: usize) -> Self {
        FractionalState {
            clusters,
            states,
            values: vec![0.0; clusters * states],
        }
    }
    pub fn from_values(clusters: usize, states: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != clusters * states {
            return Err(Error::Shape(format!(
                "{} values for a {}x{} state",
                values.len(),
                clusters,
                states
            )));
        }
        Ok(FractionalState {
            clusters,
            states,
            values,
        })
    }
    pub fn num_clusters(&self) -> usize {
        self.clusters
    }
    pub fn num_states(&self) -> usize {
        self.states
    }
    pub fn get(&self, i: usize, s: usize) -> f64 {
        self.values[i * self.states + s]
    }
    pub fn set(&mut self, i: usize, s: usize, v: f64) {
        self.values[i * self.states + s] = v;
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// L1 distance to an integral state count of the same shape.
    pub fn l1_to_counts(&self, other: &StateCount) -> f64 {
        self.values
            .iter()
            .zip(other.as_slice())
            .map(|(a, &b)| (a - b as f64).abs())
            .sum()
    }

    pub fn l1(&self, other: &FractionalState) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Fractional action occupation `[i][s][a]` (mean-field action).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalAction {
    dims: Dims,
    values: Vec<f64>,
}

impl FractionalAction {
    pub fn zeros(dims: Dims) -> Self {
        FractionalAction {
            dims,
            values: vec![0.0; dims.action_cells()],
        }
    }
    fn idx(&self, i: usize, s: usize, a: usize) -> usize {
        (i * self.dims.states + s) * self.dims.actions + a
    }
    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn get(&self, i: usize, s: usize, a: usize) -> f64 {
        self.values[self.idx(i, s, a)]
    }
    pub fn set(&mut self, i: usize, s: usize, a: usize, v: f64) {
        let k = self.idx(i, s, a);
        self.values[k] = v;
    }
    pub fn cell(&self, i: usize, s: usize) -> &[f64] {
        let k = self.idx(i, s, 0);
        &self.values[k..k + self.dims.actions]
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn l1(&self, other: &FractionalAction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn l1_to_counts(&self, other: &ActionCount) -> f64 {
        self.values
            .iter()
            .zip(other.as_slice())
            .map(|(a, &b)| (a - b as f64).abs())
            .sum()
    }
}

/// Anything that assigns a (possibly fractional) number of arms to each
/// `(cluster, state, action)` cell.
pub trait ActionTensor {
    fn dims(&self) -> Dims;
    fn value(&self, i: usize, s: usize, a: usize) -> f64;
}

impl ActionTensor for ActionCount {
    fn dims(&self) -> Dims {
        self.dims
    }
    fn value(&self, i: usize, s: usize, a: usize) -> f64 {
        self.get(i, s, a) as f64
    }
}

impl ActionTensor for FractionalAction {
    fn dims(&self) -> Dims {
        self.dims
    }
    fn value(&self, i: usize, s: usize, a: usize) -> f64 {
        self.get(i, s, a)
    }
}

fn weighted_sum<T: ActionTensor + ?Sized>(
    inst: &RmabInstance,
    t: usize,
    x: &T,
    w: impl Fn(usize, usize, usize) -> f64,
) -> Result<f64> {
    if x.dims() != inst.dims() {
        return Err(Error::Shape(format!(
            "action tensor has dims {:?}, instance {:?}",
            x.dims(),
            inst.dims()
        )));
    }
    if t >= inst.horizon() {
        return Err(Error::InvalidArgument(format!(
            "period {t} beyond horizon {}",
            inst.horizon()
        )));
    }
    let d = inst.dims();
    let mut total = 0.0;
    for i in 0..d.clusters {
        for s in 0..d.states {
            for a in 0..d.actions {
                let v = x.value(i, s, a);
                if v != 0.0 {
                    total += w(i, s, a) * v;
                }
            }
        }
    }
    Ok(total)
}

/// Undiscounted reward `Σ R_t(i,s,a) x(i,s,a)` collected in period `t`.
pub fn step_reward<T: ActionTensor + ?Sized>(inst: &RmabInstance, t: usize, x: &T) -> Result<f64> {
    weighted_sum(inst, t, x, |i, s, a| inst.reward(t, i, s, a))
}

/// Budget consumed in period `t`.
pub fn step_cost<T: ActionTensor + ?Sized>(inst: &RmabInstance, t: usize, x: &T) -> Result<f64> {
    weighted_sum(inst, t, x, |i, s, a| inst.cost(t, i, s, a))
}
