//! Monte-Carlo simulation of policies on the count process.
//!
//! Randomness is drawn from ChaCha streams keyed by `(seed, t, i, s, a)`, so
//! a trajectory depends only on its seed, never on thread scheduling or on
//! the order in which cells are visited.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts::{step_cost, step_reward, ActionCount, FractionalAction, FractionalState, StateCount};
use crate::error::{Error, Result};
use crate::instance::RmabInstance;
use crate::policy::{MfpPolicy, Policy, Rounding};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5DEE_CE66_D1CE_u64, |h, &p| splitmix(h ^ splitmix(p)))
}

/// Generator for the transition draws of cell `(i, s, a)` in period `t`.
pub fn cell_rng(seed: u64, t: usize, i: usize, s: usize, a: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed));
    rng.set_stream(stream_key(&[t as u64, i as u64, s as u64, a as u64]));
    rng
}

/// Generator handed to the policy in period `t`.
pub fn policy_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed));
    rng.set_stream(stream_key(&[t as u64, u64::MAX]));
    rng
}

/// Multinomial draw by sequential conditional binomials; `probs` should sum
/// to one (the last category absorbs roundoff).
pub fn sample_multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0f64;
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k == last {
            out[k] = left;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let x = if q >= 1.0 {
            left
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        out[k] = x;
        left -= x;
        mass -= p;
        if mass <= 0.0 {
            break;
        }
    }
    out
}

/// Next state count after playing `action` in period `t`.
pub fn sample_next_state(inst: &RmabInstance, t: usize, action: &ActionCount, seed: u64) -> StateCount {
    let d = inst.dims();
    let mut next = StateCount::zeros(d.clusters, d.states);
    for i in 0..d.clusters {
        for s in 0..d.states {
            for a in 0..d.actions {
                let n = action.get(i, s, a);
                if n == 0 {
                    continue;
                }
                let mut rng = cell_rng(seed, t, i, s, a);
                let draw = sample_multinomial(n, inst.transition_row(t, i, s, a), &mut rng);
                for (s2, &x) in draw.iter().enumerate() {
                    if x > 0 {
                        next.add(i, s2, x);
                    }
                }
            }
        }
    }
    next
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: StateCount,
    pub action: ActionCount,
    /// Undiscounted reward of the period.
    pub reward: f64,
    pub cost: f64,
    pub budget: f64,
    pub fluid_action: Option<FractionalAction>,
    pub predicted_next: Option<FractionalState>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub policy: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub final_state: StateCount,
    /// `Σ_t discount^t · reward_t`.
    pub total_reward: f64,
    /// Periods whose cost exceeded the budget.
    pub budget_violations: usize,
    /// Largest amount by which any period exceeded its budget.
    pub max_excess: f64,
}

fn check_action(inst: &RmabInstance, t: usize, mu: &StateCount, action: &ActionCount) -> Result<()> {
    if action.dims() != inst.dims() {
        return Err(Error::InfeasibleAction {
            t,
            detail: format!("action has dims {:?}", action.dims()),
        });
    }
    for i in 0..inst.num_clusters() {
        for s in 0..inst.num_states() {
            if action.cell_total(i, s) != mu.get(i, s) {
                return Err(Error::InfeasibleAction {
                    t,
                    detail: format!(
                        "cluster {i} state {s}: {} arms assigned, {} present",
                        action.cell_total(i, s),
                        mu.get(i, s)
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Run one trajectory of `policy` from `start`.
pub fn simulate_trajectory(
    inst: &RmabInstance,
    policy: &dyn Policy,
    start: &StateCount,
    seed: u64,
) -> Result<SimulationRecord> {
    start.check_against(inst)?;
    let mut episode = policy.start_episode(inst, start)?;
    let mut mu = start.clone();
    let mut steps = Vec::with_capacity(inst.horizon());
    let mut total = 0.0;
    let mut violations = 0;
    let mut max_excess = 0.0f64;
    for t in 0..inst.horizon() {
        let mut prng = policy_rng(seed, t);
        let decision = episode.act(t, &mu, &mut prng)?;
        check_action(inst, t, &mu, &decision.action)?;
        let reward = step_reward(inst, t, &decision.action)?;
        let cost = step_cost(inst, t, &decision.action)?;
        let budget = inst.budget(t);
        if cost > budget + 1e-9 {
            if !decision.may_exceed_budget {
                return Err(Error::InfeasibleAction {
                    t,
                    detail: format!("cost {cost} exceeds budget {budget}"),
                });
            }
            violations += 1;
            max_excess = max_excess.max(cost - budget);
        }
        total += inst.weight(t) * reward;
        let next = if t + 1 < inst.horizon() {
            Some(sample_next_state(inst, t, &decision.action, seed))
        } else {
            None
        };
        steps.push(StepRecord {
            t,
            state: mu.clone(),
            action: decision.action,
            reward,
            cost,
            budget,
            fluid_action: decision.fluid_action,
            predicted_next: decision.predicted_next,
        });
        if let Some(n) = next {
            mu = n;
        }
    }
    Ok(SimulationRecord {
        policy: policy.name(),
        seed,
        steps,
        final_state: mu,
        total_reward: total,
        budget_violations: violations,
        max_excess,
    })
}

/// Replications `r = 0..reps` use seeds `base_seed + r` and run in parallel;
/// the result is ordered by replication.
pub fn run_replications(
    inst: &RmabInstance,
    policy: &dyn Policy,
    start: &StateCount,
    reps: usize,
    base_seed: u64,
) -> Result<Vec<SimulationRecord>> {
    (0..reps)
        .into_par_iter()
        .map(|r| simulate_trajectory(inst, policy, start, base_seed.wrapping_add(r as u64)))
        .collect()
}

/// Column names of [`write_records_csv`].
pub const RECORD_CSV_HEADER: &str = "policy,seed,t,cluster,state,count,action,action_count,reward,cost";

/// One row per period, cluster, occupied state and action. `reward` and
/// `cost` are the undiscounted contributions of the `action_count` arms.
pub fn write_records_csv<W: std::io::Write>(
    out: &mut W,
    inst: &RmabInstance,
    records: &[SimulationRecord],
) -> std::io::Result<()> {
    writeln!(out, "{RECORD_CSV_HEADER}")?;
    for rec in records {
        for step in &rec.steps {
            for i in 0..inst.num_clusters() {
                for s in 0..inst.num_states() {
                    let count = step.state.get(i, s);
                    if count == 0 {
                        continue;
                    }
                    for a in 0..inst.num_actions() {
                        let n = step.action.get(i, s, a);
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{},{},{},{}",
                            rec.policy,
                            rec.seed,
                            step.t,
                            i,
                            s,
                            count,
                            a,
                            n,
                            n as f64 * inst.reward(step.t, i, s, a),
                            n as f64 * inst.cost(step.t, i, s, a),
                        )?;
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub policy: String,
    pub replications: usize,
    pub mean: f64,
    /// Sample standard deviation (zero with a single replication).
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_step_cost: f64,
    pub budget_violations: usize,
}

impl EvalSummary {
    pub fn std_error(&self) -> f64 {
        if self.replications == 0 {
            0.0
        } else {
            self.sd / (self.replications as f64).sqrt()
        }
    }
}

/// Mean with a 95% normal confidence interval over per-replication totals.
pub fn summarize(policy: &str, records: &[SimulationRecord]) -> EvalSummary {
    let r = records.len();
    let totals: Vec<f64> = records.iter().map(|x| x.total_reward).collect();
    let mean = if r == 0 { 0.0 } else { totals.iter().sum::<f64>() / r as f64 };
    let sd = if r < 2 {
        0.0
    } else {
        (totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64).sqrt()
    };
    let half = if r == 0 { 0.0 } else { 1.96 * sd / (r as f64).sqrt() };
    let (cost_sum, cost_n) = records.iter().flat_map(|x| x.steps.iter()).fold((0.0, 0usize), |(c, n), s| (c + s.cost, n + 1));
    EvalSummary {
        policy: policy.to_string(),
        replications: r,
        mean,
        sd,
        ci_low: mean - half,
        ci_high: mean + half,
        mean_step_cost: if cost_n == 0 { 0.0 } else { cost_sum / cost_n as f64 },
        budget_violations: records.iter().map(|x| x.budget_violations).sum(),
    }
}

pub fn evaluate_policy(
    inst: &RmabInstance,
    policy: &dyn Policy,
    start: &StateCount,
    reps: usize,
    base_seed: u64,
) -> Result<EvalSummary> {
    let records = run_replications(inst, policy, start, reps, base_seed)?;
    Ok(summarize(&policy.name(), &records))
}

/// Categorical distributions of the independent draws in
/// [`check_multinomial_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CategoricalFamily {
    /// Every draw uniform over the `k` categories.
    Uniform,
    /// Every draw lands in category 0.
    Degenerate,
    /// Every draw uses the same probability vector.
    Fixed(Vec<f64>),
    /// Draw `j` uses row `j` (length `n`).
    PerDraw(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultinomialCheck {
    pub k: usize,
    pub n: u64,
    pub delta: f64,
    /// `sqrt(2 ln2 k n + 2 n ln(1/delta))`, natural logarithms.
    pub epsilon: f64,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub mean_l1: f64,
    pub sqrt_kn: f64,
}

/// Empirical check of the L1 concentration of a sum of `n` independent
/// categorical draws around its mean.
pub fn check_multinomial_bound(
    k: usize,
    n: u64,
    family: &CategoricalFamily,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<MultinomialCheck> {
    if k == 0 || !(delta > 0.0 && delta < 1.0) || trials == 0 {
        return Err(Error::InvalidArgument(
            "need k >= 1, 0 < delta < 1 and at least one trial".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = match family {
        CategoricalFamily::Uniform => vec![vec![1.0 / k as f64; k]],
        CategoricalFamily::Degenerate => {
            let mut p = vec![0.0; k];
            p[0] = 1.0;
            vec![p]
        }
        CategoricalFamily::Fixed(p) => vec![p.clone()],
        CategoricalFamily::PerDraw(rows) => {
            if rows.len() as u64 != n {
                return Err(Error::Shape(format!("{} rows for {n} draws", rows.len())));
            }
            rows.clone()
        }
    };
    for p in &rows {
        if p.len() != k || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidArgument("each distribution needs k non-negative entries summing to one".into()));
        }
    }
    let mut mean = vec![0.0; k];
    if rows.len() == 1 {
        mean.iter_mut().zip(&rows[0]).for_each(|(m, p)| *m = n as f64 * p);
    } else {
        for p in &rows {
            mean.iter_mut().zip(p).for_each(|(m, q)| *m += q);
        }
    }
    let epsilon = (2.0 * std::f64::consts::LN_2 * (k as f64) * n as f64 + 2.0 * n as f64 * (1.0 / delta).ln()).sqrt();
    let dists: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = cell_rng(seed, trial, 0, 0, 0);
            let counts = if rows.len() == 1 {
                sample_multinomial(n, &rows[0], &mut rng)
            } else {
                let mut c = vec![0u64; k];
                for p in &rows {
                    let draw = sample_multinomial(1, p, &mut rng);
                    c.iter_mut().zip(draw).for_each(|(a, b)| *a += b);
                }
                c
            };
            counts.iter().zip(&mean).map(|(&c, m)| (c as f64 - m).abs()).sum()
        })
        .collect();
    let failures = dists.iter().filter(|&&d| d > epsilon).count();
    Ok(MultinomialCheck {
        k,
        n,
        delta,
        epsilon,
        trials,
        failures,
        failure_rate: failures as f64 / trials as f64,
        mean_l1: dists.iter().sum::<f64>() / trials as f64,
        sqrt_kn: ((k as u64 * n) as f64).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub arms: u64,
    pub replications: usize,
    pub delta: f64,
    /// Mean over replications of the one-step prediction gap, per period.
    pub per_step_mean: Vec<f64>,
    /// Mean over all replications and periods.
    pub mean_gap: f64,
    /// Empirical `1 - delta` quantile over all replications and periods.
    pub quantile_gap: f64,
    /// `sqrt(K|S|N) + K|S||A|`.
    pub bound_mean: f64,
    /// `sqrt(2 ln2 K|S|N + 2N ln(1/delta)) + K|S||A|`.
    pub bound_quantile: f64,
}

impl DriftReport {
    pub fn within_bounds(&self) -> bool {
        self.per_step_mean.iter().all(|&m| m <= self.bound_mean) && self.quantile_gap <= self.bound_quantile
    }
}

/// L1 distance between the realized next state under re-solving with floor
/// rounding and the fluid plan's prediction of it.
pub fn check_drift_bound(
    inst: &RmabInstance,
    start: &StateCount,
    replications: usize,
    delta: f64,
    seed: u64,
) -> Result<DriftReport> {
    check_drift_with(inst, start, replications, delta, seed, &MfpPolicy::new(Rounding::Floor))
}

pub fn check_drift_with(
    inst: &RmabInstance,
    start: &StateCount,
    replications: usize,
    delta: f64,
    seed: u64,
    policy: &dyn Policy,
) -> Result<DriftReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta {delta} outside (0, 1)")));
    }
    let records = run_replications(inst, policy, start, replications, seed)?;
    let periods = inst.horizon().saturating_sub(1);
    let mut per_step = vec![0.0; periods];
    let mut all = Vec::with_capacity(periods * replications);
    for rec in &records {
        for t in 0..periods {
            let predicted = rec.steps[t].predicted_next.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!("policy {} does not report fluid predictions", rec.policy))
            })?;
            let gap = predicted.l1_to_counts(&rec.steps[t + 1].state);
            per_step[t] += gap / replications as f64;
            all.push(gap);
        }
    }
    all.sort_by(f64::total_cmp);
    let quantile = if all.is_empty() {
        0.0
    } else {
        let idx = ((1.0 - delta) * all.len() as f64).ceil() as usize;
        all[idx.clamp(1, all.len()) - 1]
    };
    let n = inst.total_arms() as f64;
    let ks = (inst.num_clusters() * inst.num_states()) as f64;
    let ksa = ks * inst.num_actions() as f64;
    Ok(DriftReport {
        arms: inst.total_arms(),
        replications,
        delta,
        mean_gap: if all.is_empty() { 0.0 } else { all.iter().sum::<f64>() / all.len() as f64 },
        per_step_mean: per_step,
        quantile_gap: quantile,
        bound_mean: (ks * n).sqrt() + ksa,
        bound_quantile: (2.0 * std::f64::consts::LN_2 * ks * n + 2.0 * n * (1.0 / delta).ln()).sqrt() + ksa,
    })
}
