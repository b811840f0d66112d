//! Policies mapping the current state count to an action count.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::counts::{ActionCount, FractionalAction, FractionalState, StateCount};
use crate::error::{Error, Result};
use crate::instance::RmabInstance;
use crate::lp::{DenseSimplex, LpSolver};
use crate::meanfield::{solve_mean_field, FluidPlan};
use crate::rounding::{bucket_action, enforce_budget, floor_action, INTEGRALITY_TOL};
use crate::whittle::{build_index_table, IndexMode, IndexOptions, IndexTable};

/// What a policy decided in one period.
#[derive(Clone, Debug)]
pub struct Decision {
    pub action: ActionCount,
    /// Fluid action the integral action was derived from, if any.
    pub fluid_action: Option<FractionalAction>,
    /// Fluid prediction of the next period's state, if any.
    pub predicted_next: Option<FractionalState>,
    /// The action is allowed to exceed the budget (randomized rounding).
    pub may_exceed_budget: bool,
}

impl Decision {
    fn plain(action: ActionCount) -> Self {
        Decision {
            action,
            fluid_action: None,
            predicted_next: None,
            may_exceed_budget: false,
        }
    }
}

/// A stateful run of a policy over one trajectory.
pub trait Episode {
    fn act(&mut self, t: usize, mu: &StateCount, rng: &mut dyn RngCore) -> Result<Decision>;
}

pub trait Policy: Send + Sync {
    fn name(&self) -> String;

    fn start_episode<'a>(
        &'a self,
        inst: &'a RmabInstance,
        start: &StateCount,
    ) -> Result<Box<dyn Episode + 'a>>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    #[default]
    Floor,
    Bucket,
}

impl FromStr for Rounding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "floor" => Ok(Rounding::Floor),
            "bucket" => Ok(Rounding::Bucket),
            other => Err(Error::InvalidArgument(format!(
                "unknown rounding '{other}' (expected floor or bucket)"
            ))),
        }
    }
}

type PlanKey = (usize, StateCount);

/// Memo of fluid plans keyed by `(period, state count)`. Plans depend only
/// on the instance and that key, so repeated states across replications
/// reuse one LP solve. The memo clears itself when used with a different
/// instance.
#[derive(Default)]
pub struct PlanCache {
    inner: Mutex<(Option<RmabInstance>, HashMap<PlanKey, Arc<FluidPlan>>)>,
}

impl PlanCache {
    fn get_or_solve(
        &self,
        inst: &RmabInstance,
        t: usize,
        mu: &StateCount,
        solve: impl FnOnce() -> Result<FluidPlan>,
    ) -> Result<Arc<FluidPlan>> {
        let key = (t, mu.clone());
        {
            let mut g = self.inner.lock().expect("plan cache poisoned");
            if g.0.as_ref() != Some(inst) {
                g.0 = Some(inst.clone());
                g.1.clear();
            }
            if let Some(p) = g.1.get(&key) {
                return Ok(Arc::clone(p));
            }
        }
        let plan = Arc::new(solve()?);
        let mut g = self.inner.lock().expect("plan cache poisoned");
        if g.0.as_ref() == Some(inst) {
            g.1.insert(key, Arc::clone(&plan));
        }
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("plan cache poisoned").1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Re-solve the mean-field LP from the observed state every period and play
/// the rounded first-period fluid action.
pub struct MfpPolicy {
    pub rounding: Rounding,
    solver: Arc<dyn LpSolver>,
    cache: Option<Arc<PlanCache>>,
}

impl MfpPolicy {
    pub fn new(rounding: Rounding) -> Self {
        MfpPolicy {
            rounding,
            solver: Arc::new(DenseSimplex::default()),
            cache: None,
        }
    }

    pub fn with_solver(mut self, solver: Arc<dyn LpSolver>) -> Self {
        self.solver = solver;
        self
    }

    /// Share fluid plans between replications.
    pub fn with_cache(mut self, cache: Arc<PlanCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn plan(&self, inst: &RmabInstance, t: usize, mu: &StateCount) -> Result<Arc<FluidPlan>> {
        let solve = || solve_mean_field(inst, &mu.to_fractional(), t, self.solver.as_ref());
        match &self.cache {
            Some(c) => c.get_or_solve(inst, t, mu, solve),
            None => Ok(Arc::new(solve()?)),
        }
    }
}

struct MfpEpisode<'a> {
    policy: &'a MfpPolicy,
    inst: &'a RmabInstance,
}

impl Episode for MfpEpisode<'_> {
    fn act(&mut self, t: usize, mu: &StateCount, rng: &mut dyn RngCore) -> Result<Decision> {
        let plan = self.policy.plan(self.inst, t, mu)?;
        let fluid = plan.action_at(t).clone();
        let (action, relaxed) = match self.policy.rounding {
            Rounding::Floor => {
                let mut a = floor_action(self.inst, t, mu, &fluid);
                enforce_budget(self.inst, t, &mut a)?;
                (a, false)
            }
            Rounding::Bucket => (bucket_action(self.inst, mu, &fluid, rng)?, true),
        };
        Ok(Decision {
            action,
            predicted_next: (t + 1 < self.inst.horizon()).then(|| plan.state_at(t + 1).clone()),
            fluid_action: Some(fluid),
            may_exceed_budget: relaxed,
        })
    }
}

impl Policy for MfpPolicy {
    fn name(&self) -> String {
        match self.rounding {
            Rounding::Floor => "mfp".into(),
            Rounding::Bucket => "mfp-bucket".into(),
        }
    }

    fn start_episode<'a>(
        &'a self,
        inst: &'a RmabInstance,
        start: &StateCount,
    ) -> Result<Box<dyn Episode + 'a>> {
        start.check_against(inst)?;
        Ok(Box::new(MfpEpisode { policy: self, inst }))
    }
}

/// Solve the mean-field LP once at the start and follow its fluid actions,
/// scaled down in cells where fewer arms are present than planned.
pub struct OneShotPolicy {
    solver: Arc<dyn LpSolver>,
}

impl Default for OneShotPolicy {
    fn default() -> Self {
        OneShotPolicy {
            solver: Arc::new(DenseSimplex::default()),
        }
    }
}

struct OneShotEpisode<'a> {
    inst: &'a RmabInstance,
    plan: FluidPlan,
}

/// Integral action that plays `floor(alpha * min(mu_plan, mu) / mu_plan)`
/// of each fluid action and sends the rest to the zero-cost action.
pub fn one_shot_action(
    inst: &RmabInstance,
    t: usize,
    mu: &StateCount,
    planned_state: &FractionalState,
    planned_action: &FractionalAction,
) -> ActionCount {
    let d = inst.dims();
    let mut scaled = FractionalAction::zeros(d);
    for i in 0..d.clusters {
        for s in 0..d.states {
            let plan_mu = planned_state.get(i, s);
            let ratio = if plan_mu > INTEGRALITY_TOL {
                (mu.get(i, s) as f64).min(plan_mu) / plan_mu
            } else {
                0.0
            };
            for a in 0..d.actions {
                scaled.set(i, s, a, planned_action.get(i, s, a) * ratio);
            }
        }
    }
    floor_action(inst, t, mu, &scaled)
}

impl Episode for OneShotEpisode<'_> {
    fn act(&mut self, t: usize, mu: &StateCount, _rng: &mut dyn RngCore) -> Result<Decision> {
        let fluid = self.plan.action_at(t);
        let mut action = one_shot_action(self.inst, t, mu, self.plan.state_at(t), fluid);
        enforce_budget(self.inst, t, &mut action)?;
        Ok(Decision {
            action,
            fluid_action: Some(fluid.clone()),
            predicted_next: (t + 1 < self.inst.horizon()).then(|| self.plan.state_at(t + 1).clone()),
            may_exceed_budget: false,
        })
    }
}

impl Policy for OneShotPolicy {
    fn name(&self) -> String {
        "mfp-oneshot".into()
    }

    fn start_episode<'a>(
        &'a self,
        inst: &'a RmabInstance,
        start: &StateCount,
    ) -> Result<Box<dyn Episode + 'a>> {
        start.check_against(inst)?;
        let plan = solve_mean_field(inst, &start.to_fractional(), 0, self.solver.as_ref())?;
        Ok(Box::new(OneShotEpisode { inst, plan }))
    }
}

/// Fill the budget cell by cell in the given order with the non-zero-cost
/// action of two-action arms. The first cell that does not fit entirely gets
/// as many arms as the remaining budget pays for; later cells may still be
/// served if they are cheaper.
pub fn priority_action(
    inst: &RmabInstance,
    t: usize,
    mu: &StateCount,
    order: &[(usize, usize)],
) -> Result<ActionCount> {
    if inst.num_actions() != 2 {
        return Err(Error::InvalidArgument(format!(
            "priority policies need two actions, instance has {}",
            inst.num_actions()
        )));
    }
    let mut out = ActionCount::all_zero_cost(inst, t, mu);
    let mut remaining = inst.budget(t);
    for &(i, s) in order {
        let have = mu.get(i, s);
        if have == 0 {
            continue;
        }
        let passive = inst.zero_cost_action(t, i, s);
        let active = 1 - passive;
        let c = inst.cost(t, i, s, active);
        let n = if c > 0.0 {
            have.min(((remaining / c) + 1e-9).floor().max(0.0) as u64)
        } else {
            have
        };
        if n > 0 {
            out.set(i, s, passive, have - n);
            out.set(i, s, active, n);
            remaining -= n as f64 * c;
        }
    }
    Ok(out)
}

/// Cells sorted by decreasing index, ties broken by `(cluster, state)`.
pub fn index_order(table: &IndexTable, clusters: usize) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize)> = (0..clusters)
        .flat_map(|i| (0..table.states).map(move |s| (i, s)))
        .collect();
    cells.sort_by(|a, b| {
        table
            .priority(b.0, b.1)
            .total_cmp(&table.priority(a.0, a.1))
            .then(a.cmp(b))
    });
    cells
}

/// One period of the Whittle index policy.
pub fn whittle_policy_step(
    inst: &RmabInstance,
    t: usize,
    mu: &StateCount,
    table: &IndexTable,
) -> Result<ActionCount> {
    priority_action(inst, t, mu, &index_order(table, inst.num_clusters()))
}

/// A fixed priority order over `(cluster, state)` cells.
#[derive(Clone, Debug)]
pub struct PriorityPolicy {
    pub label: String,
    pub order: Vec<(usize, usize)>,
}

impl PriorityPolicy {
    pub fn new(label: impl Into<String>, order: Vec<(usize, usize)>) -> Self {
        PriorityPolicy {
            label: label.into(),
            order,
        }
    }
}

struct PriorityEpisode<'a> {
    inst: &'a RmabInstance,
    order: &'a [(usize, usize)],
}

impl Episode for PriorityEpisode<'_> {
    fn act(&mut self, t: usize, mu: &StateCount, _rng: &mut dyn RngCore) -> Result<Decision> {
        Ok(Decision::plain(priority_action(self.inst, t, mu, self.order)?))
    }
}

impl Policy for PriorityPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn start_episode<'a>(
        &'a self,
        inst: &'a RmabInstance,
        start: &StateCount,
    ) -> Result<Box<dyn Episode + 'a>> {
        start.check_against(inst)?;
        Ok(Box::new(PriorityEpisode {
            inst,
            order: &self.order,
        }))
    }
}

/// Whittle index policy with indices of the infinite-horizon problem
/// (discounted, or average reward when the instance does not discount).
pub struct WhittlePolicy {
    pub table: IndexTable,
    order: Vec<(usize, usize)>,
}

impl WhittlePolicy {
    pub fn new(inst: &RmabInstance, opts: &IndexOptions) -> Result<Self> {
        Self::with_mode(inst, IndexMode::infinite_for(inst), opts)
    }

    pub fn with_mode(inst: &RmabInstance, mode: IndexMode, opts: &IndexOptions) -> Result<Self> {
        let table = build_index_table(inst, 0, mode, opts)?;
        let order = index_order(&table, inst.num_clusters());
        Ok(WhittlePolicy { table, order })
    }
}

impl Policy for WhittlePolicy {
    fn name(&self) -> String {
        "whittle".into()
    }

    fn start_episode<'a>(
        &'a self,
        inst: &'a RmabInstance,
        start: &StateCount,
    ) -> Result<Box<dyn Episode + 'a>> {
        start.check_against(inst)?;
        Ok(Box::new(PriorityEpisode {
            inst,
            order: &self.order,
        }))
    }
}

/// Whittle index policy whose indices are recomputed every period for the
/// remaining horizon.
pub struct FiniteWhittlePolicy {
    pub tables: Vec<IndexTable>,
    orders: Vec<Vec<(usize, usize)>>,
}

impl FiniteWhittlePolicy {
    pub fn new(inst: &RmabInstance, opts: &IndexOptions) -> Result<Self> {
        let t_max = inst.horizon();
        let mut tables = Vec::with_capacity(t_max);
        let mut orders = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let mode = IndexMode::Finite {
                horizon: t_max - t,
                gamma: inst.discount(),
            };
            let table = build_index_table(inst, t, mode, opts)?;
            orders.push(index_order(&table, inst.num_clusters()));
            tables.push(table);
        }
        Ok(FiniteWhittlePolicy { tables, orders })
    }
}

struct FiniteWhittleEpisode<'a> {
    inst: &'a RmabInstance,
    orders: &'a [Vec<(usize, usize)>],
}

impl Episode for FiniteWhittleEpisode<'_> {
    fn act(&mut self, t: usize, mu: &StateCount, _rng: &mut dyn RngCore) -> Result<Decision> {
        Ok(Decision::plain(priority_action(self.inst, t, mu, &self.orders[t])?))
    }
}

impl Policy for FiniteWhittlePolicy {
    fn name(&self) -> String {
        "whittle-finite".into()
    }

    fn start_episode<'a>(
        &'a self,
        inst: &'a RmabInstance,
        start: &StateCount,
    ) -> Result<Box<dyn Episode + 'a>> {
        start.check_against(inst)?;
        if self.orders.len() != inst.horizon() {
            return Err(Error::InvalidArgument(
                "finite-horizon indices were built for a different horizon".into(),
            ));
        }
        Ok(Box::new(FiniteWhittleEpisode {
            inst,
            orders: &self.orders,
        }))
    }
}

/// Each arm picks a uniformly random action; arms whose pick no longer fits
/// in the budget take the zero-cost action. Arms are visited in random order.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

struct RandomEpisode<'a> {
    inst: &'a RmabInstance,
}

impl Episode for RandomEpisode<'_> {
    fn act(&mut self, t: usize, mu: &StateCount, rng: &mut dyn RngCore) -> Result<Decision> {
        let d = self.inst.dims();
        let mut arms: Vec<(usize, usize)> = Vec::with_capacity(mu.total() as usize);
        for i in 0..d.clusters {
            for s in 0..d.states {
                arms.extend(std::iter::repeat_n((i, s), mu.get(i, s) as usize));
            }
        }
        arms.shuffle(rng);
        let mut out = ActionCount::zeros(d);
        let mut remaining = self.inst.budget(t);
        for (i, s) in arms {
            let a = rng.random_range(0..d.actions);
            let c = self.inst.cost(t, i, s, a);
            if c <= remaining + 1e-9 {
                remaining -= c;
                out.add(i, s, a, 1);
            } else {
                out.add(i, s, self.inst.zero_cost_action(t, i, s), 1);
            }
        }
        Ok(Decision::plain(out))
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn start_episode<'a>(
        &'a self,
        inst: &'a RmabInstance,
        start: &StateCount,
    ) -> Result<Box<dyn Episode + 'a>> {
        start.check_against(inst)?;
        Ok(Box::new(RandomEpisode { inst }))
    }
}

/// Every arm takes the zero-cost action.
#[derive(Clone, Copy, Debug, Default)]
pub struct NobodyPolicy;

struct NobodyEpisode<'a> {
    inst: &'a RmabInstance,
}

impl Episode for NobodyEpisode<'_> {
    fn act(&mut self, t: usize, mu: &StateCount, _rng: &mut dyn RngCore) -> Result<Decision> {
        Ok(Decision::plain(ActionCount::all_zero_cost(self.inst, t, mu)))
    }
}

impl Policy for NobodyPolicy {
    fn name(&self) -> String {
        "nobody".into()
    }

    fn start_episode<'a>(
        &'a self,
        inst: &'a RmabInstance,
        start: &StateCount,
    ) -> Result<Box<dyn Episode + 'a>> {
        start.check_against(inst)?;
        Ok(Box::new(NobodyEpisode { inst }))
    }
}
