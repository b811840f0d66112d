//! Whittle indices of two-action arms.
//!
//! The passive action is action 0; it receives a per-period subsidy `λ`.
//! The Q-gap `g(s, λ) = Q(s, active) - Q(s, passive)` is computed by value
//! iteration (discounted), relative value iteration (average reward) or
//! backward induction (finite horizon). A state's index is the root of
//! `g(s, ·)`, found by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::RmabInstance;

const VI_TOL: f64 = 1e-10;
const VI_MAX_ITERS: usize = 1_000_000;
/// Gaps above this count as "active strictly preferred".
const GAP_TOL: f64 = 1e-9;
/// Aperiodicity transform weight used by relative value iteration.
const RVI_TAU: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum IndexMode {
    Discounted { gamma: f64 },
    Average,
    /// `horizon` periods remaining, rewards discounted by `gamma`.
    Finite { horizon: usize, gamma: f64 },
}

impl IndexMode {
    /// Discounted when the instance discounts, average reward otherwise.
    pub fn infinite_for(inst: &RmabInstance) -> Self {
        if inst.discount() < 1.0 {
            IndexMode::Discounted {
                gamma: inst.discount(),
            }
        } else {
            IndexMode::Average
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ArmSlice {
    // [a][s][s'], a in {0, 1}
    p: Vec<f64>,
    // [s][a]
    r: Vec<f64>,
}

/// Transition and reward data of one two-action arm, possibly time-varying.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    states: usize,
    slices: Vec<ArmSlice>,
}

impl ArmModel {
    /// Stationary arm from passive/active transition matrices and rewards.
    pub fn new(
        passive: &[Vec<f64>],
        active: &[Vec<f64>],
        reward_passive: &[f64],
        reward_active: &[f64],
    ) -> Result<Self> {
        let n = passive.len();
        if active.len() != n
            || reward_passive.len() != n
            || reward_active.len() != n
            || passive.iter().chain(active).any(|row| row.len() != n)
        {
            return Err(Error::Shape("arm matrices must all be square of one size".into()));
        }
        let mut p = Vec::with_capacity(2 * n * n);
        for m in [passive, active] {
            for row in m {
                p.extend_from_slice(row);
            }
        }
        let r = (0..n)
            .flat_map(|s| [reward_passive[s], reward_active[s]])
            .collect();
        Ok(ArmModel {
            states: n,
            slices: vec![ArmSlice { p, r }],
        })
    }

    /// The arm of cluster `i`, with slices for periods `from..horizon`.
    pub fn from_instance(inst: &RmabInstance, cluster: usize, from: usize) -> Result<Self> {
        if inst.num_actions() != 2 {
            return Err(Error::InvalidArgument(format!(
                "Whittle indices need two actions, instance has {}",
                inst.num_actions()
            )));
        }
        let n = inst.num_states();
        let periods: Vec<usize> = if inst.is_stationary() {
            vec![0]
        } else {
            (from..inst.horizon()).collect()
        };
        let mut slices = Vec::with_capacity(periods.len());
        for &t in &periods {
            for s in 0..n {
                if inst.zero_cost_action(t, cluster, s) != 0 {
                    return Err(Error::InvalidArgument(format!(
                        "Whittle indices take action 0 as passive, but cluster {cluster} state {s} declares action {} as zero-cost",
                        inst.zero_cost_action(t, cluster, s)
                    )));
                }
            }
            let mut p = Vec::with_capacity(2 * n * n);
            for a in 0..2 {
                for s in 0..n {
                    p.extend_from_slice(inst.transition_row(t, cluster, s, a));
                }
            }
            let r = (0..n)
                .flat_map(|s| [inst.reward(t, cluster, s, 0), inst.reward(t, cluster, s, 1)])
                .collect();
            slices.push(ArmSlice { p, r });
        }
        Ok(ArmModel { states: n, slices })
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn r_max(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|sl| sl.r.iter())
            .fold(0.0f64, |m, &r| m.max(r.abs()))
    }

    fn slice(&self, k: usize) -> &ArmSlice {
        &self.slices[k.min(self.slices.len() - 1)]
    }

    fn q_pair(&self, k: usize, s: usize, lambda: f64, v: &[f64], gamma: f64) -> (f64, f64) {
        let n = self.states;
        let sl = self.slice(k);
        let ev = |a: usize| -> f64 {
            let row = &sl.p[(a * n + s) * n..(a * n + s + 1) * n];
            row.iter().zip(v).map(|(p, x)| p * x).sum()
        };
        (
            sl.r[2 * s] + lambda + gamma * ev(0),
            sl.r[2 * s + 1] + gamma * ev(1),
        )
    }

    /// Q-gap of every state at subsidy `lambda`.
    pub fn q_gap(&self, lambda: f64, mode: IndexMode) -> Result<Vec<f64>> {
        match mode {
            IndexMode::Discounted { gamma } => self.gap_discounted(lambda, gamma),
            IndexMode::Average => self.gap_average(lambda),
            IndexMode::Finite { horizon, gamma } => Ok(self.gap_finite(lambda, horizon, gamma)),
        }
    }

    /// Discounted optimal values of every state at subsidy `lambda`.
    pub fn discounted_values(&self, lambda: f64, gamma: f64) -> Result<Vec<f64>> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "discounted index needs 0 <= gamma < 1, got {gamma}"
            )));
        }
        let n = self.states;
        let mut v = vec![0.0; n];
        let mut next = vec![0.0; n];
        for _ in 0..VI_MAX_ITERS {
            let mut resid = 0.0f64;
            for s in 0..n {
                let (q0, q1) = self.q_pair(0, s, lambda, &v, gamma);
                next[s] = q0.max(q1);
                resid = resid.max((next[s] - v[s]).abs());
            }
            std::mem::swap(&mut v, &mut next);
            if resid <= VI_TOL {
                return Ok(v);
            }
        }
        Err(Error::Numerical("value iteration did not converge".into()))
    }

    fn gap_discounted(&self, lambda: f64, gamma: f64) -> Result<Vec<f64>> {
        let v = self.discounted_values(lambda, gamma)?;
        Ok((0..self.states)
            .map(|s| {
                let (q0, q1) = self.q_pair(0, s, lambda, &v, gamma);
                q1 - q0
            })
            .collect())
    }

    fn gap_average(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.states;
        let mut h = vec![0.0; n];
        let mut next = vec![0.0; n];
        for _ in 0..VI_MAX_ITERS {
            for s in 0..n {
                let (q0, q1) = self.q_pair(0, s, lambda, &h, 1.0);
                next[s] = RVI_TAU * q0.max(q1) + (1.0 - RVI_TAU) * h[s];
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for s in 0..n {
                let d = next[s] - h[s];
                lo = lo.min(d);
                hi = hi.max(d);
            }
            let base = next[0];
            for s in 0..n {
                h[s] = next[s] - base;
            }
            if hi - lo <= VI_TOL {
                return Ok((0..n)
                    .map(|s| {
                        let (q0, q1) = self.q_pair(0, s, lambda, &h, 1.0);
                        q1 - q0
                    })
                    .collect());
            }
        }
        Err(Error::Numerical("relative value iteration did not converge".into()))
    }

    fn gap_finite(&self, lambda: f64, horizon: usize, gamma: f64) -> Vec<f64> {
        let n = self.states;
        if horizon == 0 {
            return vec![0.0; n];
        }
        let mut v = vec![0.0; n];
        for k in (1..horizon).rev() {
            v = (0..n)
                .map(|s| {
                    let (q0, q1) = self.q_pair(k, s, lambda, &v, gamma);
                    q0.max(q1)
                })
                .collect();
        }
        (0..n)
            .map(|s| {
                let (q0, q1) = self.q_pair(0, s, lambda, &v, gamma);
                q1 - q0
            })
            .collect()
    }

    /// Subsidy range covered by the default indexability scan.
    pub fn default_scan_range(&self, mode: IndexMode) -> (f64, f64) {
        let r = self.r_max().max(1e-12);
        let half = match mode {
            IndexMode::Discounted { gamma } => 1.1 * r / (1.0 - gamma),
            IndexMode::Average => 1.1 * r,
            IndexMode::Finite { horizon, .. } => 1.1 * r * horizon.max(1) as f64,
        };
        (-half, half)
    }
}

/// Whittle index of `state`: the smallest subsidy at which the passive action
/// becomes (weakly) preferred.
pub fn whittle_index(model: &ArmModel, state: usize, mode: IndexMode) -> Result<f64> {
    if state >= model.num_states() {
        return Err(Error::InvalidArgument(format!("state {state} out of range")));
    }
    let g = |lambda: f64| -> Result<f64> { Ok(model.q_gap(lambda, mode)?[state]) };
    let r = model.r_max();
    let (mut lo, mut hi) = (-r - 1.0, r + 1.0);
    let mut width = hi - lo;
    while g(lo)? <= GAP_TOL {
        lo -= width;
        width *= 2.0;
        if lo < -1e9 {
            return Err(Error::NotIndexable {
                cluster: 0,
                state,
                reason: "passive action preferred at every subsidy".into(),
            });
        }
    }
    let mut width = hi - lo;
    while g(hi)? > GAP_TOL {
        hi += width;
        width *= 2.0;
        if hi > 1e9 {
            return Err(Error::NotIndexable {
                cluster: 0,
                state,
                reason: "active action preferred at every subsidy".into(),
            });
        }
    }
    while hi - lo > 1e-11 * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > GAP_TOL {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Exactly one sign change of the Q-gap, from positive to non-positive.
    Indexable,
    /// More than one sign change, or a change in the wrong direction.
    NotIndexable,
    /// The gap keeps one sign on the whole grid.
    Inconclusive,
    /// No scan was run.
    Unchecked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateScan {
    pub state: usize,
    pub verdict: Verdict,
    pub crossings: usize,
    /// Grid subsidies at which the gap changes sign.
    pub crossing_at: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub lambdas: Vec<f64>,
    /// `gaps[k][s]` is the Q-gap of state `s` at `lambdas[k]`.
    pub gaps: Vec<Vec<f64>>,
    pub states: Vec<StateScan>,
}

/// Evaluate the Q-gap of every state on an even grid of `points` subsidies
/// over `range` (default: `±1.1 r_max/(1-γ)` discounted, `±1.1 r_max`
/// average) and classify each state by its sign changes.
pub fn indexability_scan(
    model: &ArmModel,
    mode: IndexMode,
    range: Option<(f64, f64)>,
    points: usize,
) -> Result<ScanReport> {
    if points < 2 {
        return Err(Error::InvalidArgument("scan needs at least two points".into()));
    }
    let (lo, hi) = range.unwrap_or_else(|| model.default_scan_range(mode));
    let lambdas: Vec<f64> = (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect();
    let gaps = lambdas
        .iter()
        .map(|&l| model.q_gap(l, mode))
        .collect::<Result<Vec<_>>>()?;
    let states = (0..model.num_states())
        .map(|s| {
            let mut crossing_at = Vec::new();
            let mut wrong_way = false;
            for k in 1..points {
                let before = gaps[k - 1][s] > GAP_TOL;
                let after = gaps[k][s] > GAP_TOL;
                if before != after {
                    crossing_at.push(lambdas[k]);
                    if after {
                        wrong_way = true;
                    }
                }
            }
            let verdict = match (crossing_at.len(), wrong_way) {
                (0, _) => Verdict::Inconclusive,
                (1, false) => Verdict::Indexable,
                _ => Verdict::NotIndexable,
            };
            StateScan {
                state: s,
                verdict,
                crossings: crossing_at.len(),
                crossing_at,
            }
        })
        .collect();
    Ok(ScanReport {
        lambdas,
        gaps,
        states,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub cluster: usize,
    pub state: usize,
    /// `None` when no root of the gap exists.
    pub index: Option<f64>,
    pub verdict: Verdict,
    pub crossings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexTable {
    pub mode: IndexMode,
    pub states: usize,
    /// `entries[i * states + s]`.
    pub entries: Vec<IndexEntry>,
}

impl IndexTable {
    pub fn get(&self, cluster: usize, state: usize) -> &IndexEntry {
        &self.entries[cluster * self.states + state]
    }

    /// Index used for ranking; states without an index rank last.
    pub fn priority(&self, cluster: usize, state: usize) -> f64 {
        self.get(cluster, state).index.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug)]
pub struct IndexOptions {
    /// Run the indexability scan before computing indices.
    pub scan: bool,
    pub scan_points: usize,
    /// Keep going when a scanned state is not indexable.
    pub allow_non_indexable: bool,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            scan: false,
            scan_points: 2001,
            allow_non_indexable: false,
        }
    }
}

/// Indices for every `(cluster, state)` of an instance, using the parameters
/// of period `from` onwards.
pub fn build_index_table(
    inst: &RmabInstance,
    from: usize,
    mode: IndexMode,
    opts: &IndexOptions,
) -> Result<IndexTable> {
    let n = inst.num_states();
    let mut entries = Vec::with_capacity(inst.num_clusters() * n);
    for i in 0..inst.num_clusters() {
        let model = ArmModel::from_instance(inst, i, from)?;
        let scan = if opts.scan {
            Some(indexability_scan(&model, mode, None, opts.scan_points)?)
        } else {
            None
        };
        for s in 0..n {
            let (verdict, crossings) = scan
                .as_ref()
                .map_or((Verdict::Unchecked, 0), |r| (r.states[s].verdict, r.states[s].crossings));
            if verdict == Verdict::NotIndexable && !opts.allow_non_indexable {
                return Err(Error::NotIndexable {
                    cluster: i,
                    state: s,
                    reason: format!("Q-gap changes sign {crossings} times on the scan grid"),
                });
            }
            let index = match whittle_index(&model, s, mode) {
                Ok(v) => Some(v),
                Err(Error::NotIndexable { .. }) => None,
                Err(e) => return Err(e),
            };
            entries.push(IndexEntry {
                cluster: i,
                state: s,
                index,
                verdict,
                crossings,
            });
        }
    }
    Ok(IndexTable {
        mode,
        states: n,
        entries,
    })
}
