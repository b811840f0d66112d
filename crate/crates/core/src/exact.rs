//! Exact optimal value of tiny instances by backward induction over count
//! states. The state of the count process is the vector of per-cluster
//! occupation counts, so the state space grows polynomially in `N` but
//! exponentially in `K|S|`; the solver refuses instances above its caps.

use std::collections::HashMap;

use crate::counts::StateCount;
use crate::error::{Error, Result};
use crate::instance::RmabInstance;

#[derive(Clone, Debug)]
pub struct ExactOptions {
    /// Most `(period, state)` pairs evaluated.
    pub max_states: usize,
    /// Most budget-feasible action counts enumerated in one state.
    pub max_actions: usize,
    pub max_horizon: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            max_states: 200_000,
            max_actions: 200_000,
            max_horizon: 8,
        }
    }
}

type Dist = Vec<(Vec<u64>, f64)>;

struct Solver<'a> {
    inst: &'a RmabInstance,
    opts: &'a ExactOptions,
    memo: HashMap<(usize, Vec<u64>), f64>,
    pmf: HashMap<(usize, usize, usize, usize, u64), Dist>,
}

fn compositions(n: u64, parts: usize, out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>) {
    if parts == 1 {
        cur.push(n);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for x in 0..=n {
        cur.push(x);
        compositions(n - x, parts - 1, out, cur);
        cur.pop();
    }
}

fn ln_factorial(n: u64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

impl Solver<'_> {
    fn multinomial(&mut self, t: usize, i: usize, s: usize, a: usize, n: u64) -> &Dist {
        let inst = self.inst;
        let key = (if inst.is_stationary() { 0 } else { t }, i, s, a, n);
        self.pmf.entry(key).or_insert_with(|| {
            let p = inst.transition_row(t, i, s, a);
            let mut comps = Vec::new();
            compositions(n, p.len(), &mut comps, &mut Vec::new());
            let lnf = ln_factorial(n);
            comps
                .into_iter()
                .filter_map(|x| {
                    let mut lp = lnf;
                    for (&k, &q) in x.iter().zip(p) {
                        if k > 0 {
                            if q <= 0.0 {
                                return None;
                            }
                            lp += k as f64 * q.ln() - ln_factorial(k);
                        }
                    }
                    Some((x, lp.exp()))
                })
                .collect()
        })
    }

    /// Distribution of the next full state given an action `[i][s][a]`.
    fn next_dist(&mut self, t: usize, action: &[u64]) -> Dist {
        let d = self.inst.dims();
        let mut full: Dist = vec![(Vec::new(), 1.0)];
        for i in 0..d.clusters {
            let mut cluster: HashMap<Vec<u64>, f64> = HashMap::new();
            cluster.insert(vec![0; d.states], 1.0);
            for s in 0..d.states {
                for a in 0..d.actions {
                    let n = action[(i * d.states + s) * d.actions + a];
                    if n == 0 {
                        continue;
                    }
                    let pmf = self.multinomial(t, i, s, a, n).clone();
                    let mut merged: HashMap<Vec<u64>, f64> = HashMap::new();
                    for (base, pb) in &cluster {
                        for (x, px) in &pmf {
                            let v: Vec<u64> = base.iter().zip(x).map(|(u, w)| u + w).collect();
                            *merged.entry(v).or_insert(0.0) += pb * px;
                        }
                    }
                    cluster = merged;
                }
            }
            let mut cl: Dist = cluster.into_iter().collect();
            cl.sort_by(|a, b| a.0.cmp(&b.0));
            let mut next = Vec::with_capacity(full.len() * cl.len());
            for (prefix, pp) in &full {
                for (x, px) in &cl {
                    let mut v = prefix.clone();
                    v.extend_from_slice(x);
                    next.push((v, pp * px));
                }
            }
            full = next;
        }
        full
    }

    fn actions(&self, t: usize, mu: &[u64]) -> Result<Vec<Vec<u64>>> {
        let d = self.inst.dims();
        let cells = d.cells();
        let mut per_cell: Vec<Vec<Vec<u64>>> = Vec::with_capacity(cells);
        for c in 0..cells {
            let mut comps = Vec::new();
            compositions(mu[c], d.actions, &mut comps, &mut Vec::new());
            per_cell.push(comps);
        }
        let mut out = Vec::new();
        let mut cur = vec![0u64; d.action_cells()];
        let budget = self.inst.budget(t) + 1e-9;
        self.dfs(t, 0, 0.0, budget, &per_cell, &mut cur, &mut out)?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        t: usize,
        cell: usize,
        cost: f64,
        budget: f64,
        per_cell: &[Vec<Vec<u64>>],
        cur: &mut Vec<u64>,
        out: &mut Vec<Vec<u64>>,
    ) -> Result<()> {
        let d = self.inst.dims();
        if cell == per_cell.len() {
            if out.len() >= self.opts.max_actions {
                return Err(Error::TooLarge(format!(
                    "more than {} feasible actions in one state",
                    self.opts.max_actions
                )));
            }
            out.push(cur.clone());
            return Ok(());
        }
        let (i, s) = (cell / d.states, cell % d.states);
        for comp in &per_cell[cell] {
            let c: f64 = comp
                .iter()
                .enumerate()
                .map(|(a, &n)| n as f64 * self.inst.cost(t, i, s, a))
                .sum();
            if cost + c > budget {
                continue;
            }
            cur[cell * d.actions..(cell + 1) * d.actions].copy_from_slice(comp);
            self.dfs(t, cell + 1, cost + c, budget, per_cell, cur, out)?;
        }
        Ok(())
    }

    fn value(&mut self, t: usize, mu: Vec<u64>) -> Result<f64> {
        if t == self.inst.horizon() {
            return Ok(0.0);
        }
        if let Some(&v) = self.memo.get(&(t, mu.clone())) {
            return Ok(v);
        }
        if self.memo.len() >= self.opts.max_states {
            return Err(Error::TooLarge(format!(
                "more than {} reachable (period, state) pairs",
                self.opts.max_states
            )));
        }
        let d = self.inst.dims();
        let w = self.inst.weight(t);
        let mut best = f64::NEG_INFINITY;
        for action in self.actions(t, &mu)? {
            let mut v = 0.0;
            for i in 0..d.clusters {
                for s in 0..d.states {
                    for a in 0..d.actions {
                        let n = action[(i * d.states + s) * d.actions + a];
                        if n > 0 {
                            v += w * n as f64 * self.inst.reward(t, i, s, a);
                        }
                    }
                }
            }
            if t + 1 < self.inst.horizon() {
                for (next, p) in self.next_dist(t, &action) {
                    v += p * self.value(t + 1, next)?;
                }
            }
            best = best.max(v);
        }
        self.memo.insert((t, mu), best);
        Ok(best)
    }
}

/// Optimal expected total (discounted) reward from `start` at period 0, over
/// all policies that respect the budget in every period.
pub fn exact_optimal_value(inst: &RmabInstance, start: &StateCount, opts: &ExactOptions) -> Result<f64> {
    start.check_against(inst)?;
    if inst.horizon() > opts.max_horizon {
        return Err(Error::TooLarge(format!(
            "horizon {} above the cap of {}",
            inst.horizon(),
            opts.max_horizon
        )));
    }
    let mut solver = Solver {
        inst,
        opts,
        memo: HashMap::new(),
        pmf: HashMap::new(),
    };
    solver.value(0, start.as_slice().to_vec())
}
