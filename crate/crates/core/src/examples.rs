//! Instance generators: the worked examples and a synthetic clustered family.
//!
//! Every generator uses action 0 as the passive, zero-cost action and
//! action 1 (and higher, for synthetic instances) with unit cost.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::counts::StateCount;
use crate::error::{Error, Result};
use crate::instance::{ensure_valid, Dims, RmabInstance};

/// An instance together with its initial state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub instance: RmabInstance,
    pub start: StateCount,
}

fn unit_active_costs(inst: &mut RmabInstance) {
    let d = inst.dims();
    for t in inst.slices() {
        for i in 0..d.clusters {
            for s in 0..d.states {
                for a in 1..d.actions {
                    inst.set_cost(t, i, s, a, 1.0);
                }
            }
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")))
    }
}

/// Two clusters of `n` arms: cluster 0 ("reliable") keeps engaging while
/// played and pays `1 - epsilon` per engaged period; cluster 1 ("greedy")
/// pays 1 once and then drops out. States: 0 start, 1 engaged, 2 dropout.
/// Budget `n` per period, all arms start in state 0.
pub fn example1(n: u64, epsilon: f64, gamma: f64, horizon: usize) -> Result<Scenario> {
    check_unit("epsilon", epsilon)?;
    let mut inst = RmabInstance::zeros(Dims::new(2, 3, 2), horizon, gamma, vec![n, n], true)?;
    inst.set_state_labels(vec!["start", "engaged", "dropout"])?;
    for i in 0..2 {
        for s in 0..3 {
            inst.set_prob(0, i, s, 0, 2, 1.0);
        }
        inst.set_prob(0, i, 0, 1, 1, 1.0);
        inst.set_prob(0, i, 2, 1, 2, 1.0);
    }
    inst.set_prob(0, 0, 1, 1, 1, 1.0);
    inst.set_prob(0, 1, 1, 1, 2, 1.0);
    for a in 0..2 {
        inst.set_reward(0, 0, 1, a, 1.0 - epsilon);
        inst.set_reward(0, 1, 1, a, 1.0);
    }
    unit_active_costs(&mut inst);
    inst.set_all_budgets(n as f64);
    ensure_valid(&inst)?;
    let start = StateCount::from_nested(&[vec![n, 0, 0], vec![n, 0, 0]])?;
    Ok(Scenario {
        instance: inst,
        start,
    })
}

/// Parameters of the single-cluster variants of the two-type example.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngagementParams {
    pub n: u64,
    pub epsilon: f64,
    pub gamma: f64,
    pub horizon: usize,
    /// Probability that a passive start-state arm engages anyway.
    pub eta_s: f64,
    /// Probability that a played reliable engaged arm drops out.
    pub eta_r: f64,
    /// Probability (per type) that a dropped-out arm returns to a start state.
    pub eta_d: f64,
    /// Start every arm in an extra state that splits evenly between the two
    /// start states.
    pub dummy_start: bool,
}

impl Default for EngagementParams {
    fn default() -> Self {
        EngagementParams {
            n: 100,
            epsilon: 0.01,
            gamma: 0.95,
            horizon: 100,
            eta_s: 0.05,
            eta_r: 0.1,
            eta_d: 0.1,
            dummy_start: false,
        }
    }
}

pub const RS: usize = 0;
pub const RE: usize = 1;
pub const GS: usize = 2;
pub const GE: usize = 3;
pub const DROPOUT: usize = 4;

/// Both arm types in one cluster. States: 0 reliable-start, 1
/// reliable-engaged, 2 greedy-start, 3 greedy-engaged, 4 dropout (and 5 the
/// optional shared start). With all `eta` zero this is the first example
/// folded into a single cluster; the general case adds spontaneous
/// engagement, dropout of played reliable arms and re-entry from dropout.
pub fn engagement(p: &EngagementParams) -> Result<Scenario> {
    for (name, v) in [
        ("epsilon", p.epsilon),
        ("eta_s", p.eta_s),
        ("eta_r", p.eta_r),
        ("eta_d", p.eta_d),
    ] {
        check_unit(name, v)?;
    }
    if 2.0 * p.eta_d > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "eta_d = {} leaves a negative self-loop at dropout",
            p.eta_d
        )));
    }
    let states = if p.dummy_start { 6 } else { 5 };
    let n2 = 2 * p.n;
    let mut inst = RmabInstance::zeros(Dims::new(1, states, 2), p.horizon, p.gamma, vec![n2], true)?;
    let mut labels = vec!["reliable-start", "reliable-engaged", "greedy-start", "greedy-engaged", "dropout"];
    if p.dummy_start {
        labels.push("arrival");
    }
    inst.set_state_labels(labels)?;
    // Passive.
    inst.set_transition_row(0, 0, RS, 0, &row(states, &[(RE, p.eta_s), (DROPOUT, 1.0 - p.eta_s)]));
    inst.set_transition_row(0, 0, RE, 0, &row(states, &[(DROPOUT, 1.0)]));
    inst.set_transition_row(0, 0, GS, 0, &row(states, &[(GE, p.eta_s), (DROPOUT, 1.0 - p.eta_s)]));
    inst.set_transition_row(0, 0, GE, 0, &row(states, &[(DROPOUT, 1.0)]));
    // Active.
    inst.set_transition_row(0, 0, RS, 1, &row(states, &[(RE, 1.0)]));
    inst.set_transition_row(0, 0, RE, 1, &row(states, &[(RE, 1.0 - p.eta_r), (DROPOUT, p.eta_r)]));
    inst.set_transition_row(0, 0, GS, 1, &row(states, &[(GE, 1.0)]));
    inst.set_transition_row(0, 0, GE, 1, &row(states, &[(DROPOUT, 1.0)]));
    for a in 0..2 {
        let back = row(states, &[(GS, p.eta_d), (RS, p.eta_d), (DROPOUT, 1.0 - 2.0 * p.eta_d)]);
        inst.set_transition_row(0, 0, DROPOUT, a, &back);
        if p.dummy_start {
            inst.set_transition_row(0, 0, 5, a, &row(states, &[(RS, 0.5), (GS, 0.5)]));
        }
        inst.set_reward(0, 0, RE, a, 1.0 - p.epsilon);
        inst.set_reward(0, 0, GE, a, 1.0);
    }
    unit_active_costs(&mut inst);
    inst.set_all_budgets(p.n as f64);
    ensure_valid(&inst)?;
    let mut start = StateCount::zeros(1, states);
    if p.dummy_start {
        start.set(0, 5, n2);
    } else {
        start.set(0, RS, p.n);
        start.set(0, GS, p.n);
    }
    Ok(Scenario {
        instance: inst,
        start,
    })
}

/// Single-cluster version of [`example1`]: `eta_s = eta_r = eta_d = 0`.
pub fn example2(n: u64, epsilon: f64, gamma: f64, horizon: usize, dummy_start: bool) -> Result<Scenario> {
    engagement(&EngagementParams {
        n,
        epsilon,
        gamma,
        horizon,
        eta_s: 0.0,
        eta_r: 0.0,
        eta_d: 0.0,
        dummy_start,
    })
}

/// The stochastic single-cluster example with spontaneous engagement,
/// dropout and re-entry.
pub fn example3(
    eta_s: f64,
    eta_r: f64,
    eta_d: f64,
    epsilon: f64,
    gamma: f64,
    horizon: usize,
    n: u64,
) -> Result<Scenario> {
    engagement(&EngagementParams {
        n,
        epsilon,
        gamma,
        horizon,
        eta_s,
        eta_r,
        eta_d,
        dummy_start: false,
    })
}

fn row(states: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut r = vec![0.0; states];
    for &(s, p) in entries {
        r[s] += p;
    }
    r
}

/// Labels of the eight states of [`lowerbound_example`], `s1`..`s8`.
pub const LB_STATES: [&str; 8] = ["s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"];

/// The eight-state instance on which re-solving the mean-field LP loses
/// `Θ(T sqrt(n))` against a priority policy.
///
/// `2n` arms start in `s1`, `n` in `s7`; budget `n`; no discounting. Arms
/// reach the rewarding state `s6` through a coin flip at `s2`/`s3`, while
/// `s7 -> s8` pays `1 - ε` with `ε = (2 + delta/n)/(T - 1)` for sure.
/// Unlisted moves go to the absorbing state `s5`.
pub fn lowerbound_example(n: u64, horizon: usize, delta: f64) -> Result<Scenario> {
    if horizon < 4 {
        return Err(Error::InvalidArgument(format!(
            "the lower-bound example needs at least 4 periods, got {horizon}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let eps = (2.0 + delta / n as f64) / (horizon as f64 - 1.0);
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "epsilon = {eps} outside [0, 1]; increase the horizon or reduce delta"
        )));
    }
    let (s1, s2, s3, s4, s5, s6, s7, s8) = (0, 1, 2, 3, 4, 5, 6, 7);
    let mut inst = RmabInstance::zeros(Dims::new(1, 8, 2), horizon, 1.0, vec![3 * n], true)?;
    inst.set_state_labels(LB_STATES.to_vec())?;
    let mut set = |s: usize, a: usize, entries: &[(usize, f64)]| {
        inst.set_transition_row(0, 0, s, a, &row(8, entries));
    };
    set(s1, 1, &[(s2, 1.0)]);
    set(s1, 0, &[(s3, 1.0)]);
    set(s2, 0, &[(s4, 0.5), (s5, 0.5)]);
    set(s2, 1, &[(s5, 1.0)]);
    set(s3, 1, &[(s4, 0.5), (s5, 0.5)]);
    set(s3, 0, &[(s5, 1.0)]);
    set(s4, 1, &[(s6, 1.0)]);
    set(s4, 0, &[(s5, 1.0)]);
    set(s5, 0, &[(s5, 1.0)]);
    set(s5, 1, &[(s5, 1.0)]);
    set(s6, 1, &[(s6, 1.0)]);
    set(s6, 0, &[(s5, 1.0)]);
    set(s7, 1, &[(s8, 1.0)]);
    set(s7, 0, &[(s5, 1.0)]);
    set(s8, 1, &[(s8, 1.0)]);
    set(s8, 0, &[(s5, 1.0)]);
    for a in 0..2 {
        inst.set_reward(0, 0, s6, a, 1.0);
        inst.set_reward(0, 0, s8, a, 1.0 - eps);
    }
    unit_active_costs(&mut inst);
    inst.set_all_budgets(n as f64);
    ensure_valid(&inst)?;
    let mut start = StateCount::zeros(1, 8);
    start.set(0, s1, 2 * n);
    start.set(0, s7, n);
    Ok(Scenario {
        instance: inst,
        start,
    })
}

/// Random clustered instance.
///
/// Transition rows are flat-Dirichlet draws, rewards uniform on `[0, 1]`
/// per `(state, action)` (with two states: reward 1 in state 1 and 0 in
/// state 0 regardless of action), action 0 free and other actions unit cost,
/// budget `0.1 N`. The parameters depend on `seed` only, not on `arms`, so
/// instances of different sizes share their dynamics. Arms are split evenly
/// across clusters and, within a cluster, across states.
pub fn synthetic_clustered(
    clusters: usize,
    states: usize,
    actions: usize,
    arms: u64,
    horizon: usize,
    seed: u64,
    gamma: f64,
) -> Result<Scenario> {
    if clusters == 0 || states == 0 || actions < 2 {
        return Err(Error::InvalidArgument(
            "synthetic instances need at least one cluster, one state and two actions".into(),
        ));
    }
    if arms < clusters as u64 {
        return Err(Error::InvalidArgument(format!(
            "{arms} arms cannot fill {clusters} clusters"
        )));
    }
    let k = clusters as u64;
    let sizes: Vec<u64> = (0..k).map(|i| arms / k + u64::from(i < arms % k)).collect();
    let mut inst = RmabInstance::zeros(Dims::new(clusters, states, actions), horizon, gamma, sizes.clone(), true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..clusters {
        for s in 0..states {
            for a in 0..actions {
                let draws: Vec<f64> = (0..states).map(|_| Exp1.sample(&mut rng)).collect();
                let total: f64 = draws.iter().sum();
                let r: Vec<f64> = draws.iter().map(|x| x / total).collect();
                inst.set_transition_row(0, i, s, a, &r);
            }
        }
        for s in 0..states {
            for a in 0..actions {
                let r = if states == 2 { s as f64 } else { rng.random::<f64>() };
                inst.set_reward(0, i, s, a, r);
            }
        }
    }
    inst.renormalize_rows(1e-6);
    unit_active_costs(&mut inst);
    inst.set_all_budgets(0.1 * arms as f64);
    ensure_valid(&inst)?;
    let mut start = StateCount::zeros(clusters, states);
    for (i, &n) in sizes.iter().enumerate() {
        let m = states as u64;
        for s in 0..states {
            start.set(i, s, n / m + u64::from((s as u64) < n % m));
        }
    }
    Ok(Scenario {
        instance: inst,
        start,
    })
}

/// A generator selected by name with numeric parameters, as used in
/// configuration files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl GeneratorSpec {
    pub fn new(name: impl Into<String>) -> Self {
        GeneratorSpec {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Names of the generators understood by [`GeneratorSpec::build`].
    pub fn known() -> &'static [&'static str] {
        &["example1", "example2", "example3", "lowerbound", "synthetic"]
    }

    pub fn build(&self) -> Result<Scenario> {
        let allowed: &[&str] = match self.name.as_str() {
            "example1" => &["n", "epsilon", "gamma", "horizon"],
            "example2" => &["n", "epsilon", "gamma", "horizon", "dummy"],
            "example3" => &["n", "epsilon", "gamma", "horizon", "dummy", "eta_s", "eta_r", "eta_d"],
            "lowerbound" => &["n", "horizon", "delta"],
            "synthetic" => &["clusters", "states", "actions", "arms", "horizon", "seed", "gamma"],
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown generator '{other}'; expected one of {:?}",
                    Self::known()
                )))
            }
        };
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidArgument(format!(
                "generator '{}' has no parameter '{k}' (accepted: {allowed:?})",
                self.name
            )));
        }
        let f = |k: &str, d: f64| self.params.get(k).copied().unwrap_or(d);
        let u = |k: &str, d: u64| -> Result<u64> {
            let v = f(k, d as f64);
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::InvalidArgument(format!("{k} = {v} must be a non-negative integer")));
            }
            Ok(v as u64)
        };
        match self.name.as_str() {
            "example1" => example1(u("n", 100)?, f("epsilon", 0.01), f("gamma", 0.95), u("horizon", 100)? as usize),
            "example2" => example2(
                u("n", 100)?,
                f("epsilon", 0.01),
                f("gamma", 0.95),
                u("horizon", 100)? as usize,
                f("dummy", 0.0) != 0.0,
            ),
            "example3" => {
                let d = EngagementParams::default();
                engagement(&EngagementParams {
                    n: u("n", d.n)?,
                    epsilon: f("epsilon", d.epsilon),
                    gamma: f("gamma", d.gamma),
                    horizon: u("horizon", d.horizon as u64)? as usize,
                    eta_s: f("eta_s", d.eta_s),
                    eta_r: f("eta_r", d.eta_r),
                    eta_d: f("eta_d", d.eta_d),
                    dummy_start: f("dummy", 0.0) != 0.0,
                })
            }
            "lowerbound" => lowerbound_example(u("n", 600)?, u("horizon", 13)? as usize, f("delta", 1.0)),
            "synthetic" => synthetic_clustered(
                u("clusters", 2)? as usize,
                u("states", 3)? as usize,
                u("actions", 2)? as usize,
                u("arms", 100)?,
                u("horizon", 10)? as usize,
                u("seed", 0)?,
                f("gamma", 1.0),
            ),
            _ => unreachable!(),
        }
    }
}
