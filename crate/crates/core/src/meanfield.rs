//! Mean-field (fluid) plans obtained from the LP relaxation.

use serde::{Deserialize, Serialize};

use crate::counts::{FractionalAction, FractionalState};
use crate::error::{Error, Result};
use crate::instance::RmabInstance;
use crate::lp::{build_lp, DenseSimplex, LpSolver, SolveStats};

/// Optimal fluid trajectory from period `t0` to the horizon.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluidPlan {
    pub t0: usize,
    /// LP optimum; rewards of period `t` carry weight `discount^t`.
    pub value: f64,
    /// `actions[k]` is the fluid action of period `t0 + k`.
    pub actions: Vec<FractionalAction>,
    /// `states[k]` is the fluid state of period `t0 + k`.
    pub states: Vec<FractionalState>,
    pub stats: SolveStats,
}

impl FluidPlan {
    pub fn action_at(&self, t: usize) -> &FractionalAction {
        &self.actions[t - self.t0]
    }

    pub fn state_at(&self, t: usize) -> &FractionalState {
        &self.states[t - self.t0]
    }

    /// Largest distance of any fluid action entry from the nearest integer.
    pub fn max_fractionality(&self) -> f64 {
        self.actions
            .iter()
            .flat_map(|a| a.as_slice().iter())
            .map(|v| (v - v.round()).abs())
            .fold(0.0, f64::max)
    }
}

/// Solve the mean-field LP from `start` at period `t0` with the default
/// simplex, warm-started from the all-zero-cost basis.
pub fn mean_field_value(inst: &RmabInstance, start: &FractionalState, t0: usize) -> Result<FluidPlan> {
    solve_mean_field(inst, start, t0, &DenseSimplex::default())
}

/// Like [`mean_field_value`] with a caller-chosen LP solver.
pub fn solve_mean_field(
    inst: &RmabInstance,
    start: &FractionalState,
    t0: usize,
    solver: &dyn LpSolver,
) -> Result<FluidPlan> {
    let m = build_lp(inst, start, t0)?;
    let sol = solver.solve_from_basis(&m.lp, &m.crash_basis)?;
    let (actions, states) = m.unpack(&sol.x);
    Ok(FluidPlan {
        t0,
        value: sol.objective,
        actions,
        states,
        stats: sol.stats,
    })
}

/// Horizon at which a discounted instance can be truncated without hurting
/// the order of the approximation guarantee.
///
/// Without `delta` this is `ceil(2 sqrt(N / (K|S|)) + 1)`; with a confidence
/// level `delta` it is `ceil(sqrt(2N / (ln 2 K|S| + ln(1/delta))) + 1)`.
/// Undiscounted instances have no truncation horizon.
pub fn truncation_horizon(inst: &RmabInstance, delta: Option<f64>) -> Result<usize> {
    if inst.discount() >= 1.0 {
        return Err(Error::InvalidArgument(
            "truncation horizon is undefined without discounting".into(),
        ));
    }
    let n = inst.total_arms() as f64;
    let ks = (inst.num_clusters() * inst.num_states()) as f64;
    let raw = match delta {
        None => 2.0 * (n / ks).sqrt() + 1.0,
        Some(d) => {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidArgument(format!("delta {d} outside (0, 1)")));
            }
            (2.0 * n / (std::f64::consts::LN_2 * ks + (1.0 / d).ln())).sqrt() + 1.0
        }
    };
    Ok((raw - 1e-9).ceil() as usize)
}
