//! Closed-form performance bounds for re-solving the mean-field LP.
//!
//! Logarithms are natural throughout.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::RmabInstance;

/// The instance sizes every bound depends on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub arms: f64,
    pub clusters: f64,
    pub states: f64,
    pub actions: f64,
    pub horizon: f64,
    pub discount: f64,
    pub r_max: f64,
    /// Failure probability for the high-probability forms.
    pub delta: Option<f64>,
}

impl BoundInputs {
    pub fn of(inst: &RmabInstance, delta: Option<f64>) -> Self {
        BoundInputs {
            arms: inst.total_arms() as f64,
            clusters: inst.num_clusters() as f64,
            states: inst.num_states() as f64,
            actions: inst.num_actions() as f64,
            horizon: inst.horizon() as f64,
            discount: inst.discount(),
            r_max: inst.r_max(),
            delta,
        }
    }

    fn ks(&self) -> f64 {
        self.clusters * self.states
    }

    fn ksa(&self) -> f64 {
        self.clusters * self.states * self.actions
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub inputs: BoundInputs,
    pub value: f64,
    /// The measured quantity the bound should dominate (or be dominated by,
    /// for the lower bound), if one was supplied.
    pub measured: Option<f64>,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta {delta} outside (0, 1]")))
    }
}

/// Finite-horizon gap between the optimal expected reward and the re-solving
/// policy: `(T² R_max / 4)(sqrt(K|S|N) + 5K|S||A|)`, or with `delta` the
/// high-probability form `(T² R_max / 4)(sqrt(2 ln2 K|S|N + 2N ln(T/δ)) + 5K|S||A|)`.
pub fn finite_horizon_gap(b: &BoundInputs) -> Result<f64> {
    let spread = match b.delta {
        None => (b.ks() * b.arms).sqrt(),
        Some(d) => {
            check_delta(d)?;
            (2.0 * LN_2 * b.ks() * b.arms + 2.0 * b.arms * (b.horizon / d).ln()).sqrt()
        }
    };
    Ok(b.horizon * b.horizon * b.r_max / 4.0 * (spread + 5.0 * b.ksa()))
}

/// Discounted infinite-horizon gap
/// `R_max((2-γ)K|S||A| + γ sqrt(K|S|N)) / (2(1-γ)²)`; with `delta` the
/// square root becomes `sqrt(2 ln2 K|S|N + 2N ln(N/δ))`.
pub fn discounted_gap(b: &BoundInputs) -> Result<f64> {
    let g = b.discount;
    if !(0.0..1.0).contains(&g) {
        return Err(Error::InvalidArgument(format!(
            "discounted gap needs 0 <= gamma < 1, got {g}"
        )));
    }
    let spread = match b.delta {
        None => (b.ks() * b.arms).sqrt(),
        Some(d) => {
            check_delta(d)?;
            (2.0 * LN_2 * b.ks() * b.arms + 2.0 * b.arms * (b.arms / d).ln()).sqrt()
        }
    };
    Ok(b.r_max * ((2.0 - g) * b.ksa() + g * spread) / (2.0 * (1.0 - g).powi(2)))
}

/// Shortfall of the re-solving policy on the eight-state lower-bound
/// instance: `(T-3) sqrt(n/(6π)) - δ`.
pub fn lower_bound_gap(n: u64, horizon: usize, delta: f64) -> Result<f64> {
    if horizon < 4 {
        return Err(Error::InvalidArgument(format!(
            "lower bound needs T >= 4, got {horizon}"
        )));
    }
    Ok((horizon as f64 - 3.0) * (n as f64 / (6.0 * PI)).sqrt() - delta)
}

/// Upper bound on the expected number of arms that reach the rewarding
/// state of the lower-bound instance under re-solving: `n - sqrt(n/(6π))`.
pub fn lower_bound_reach(n: u64) -> f64 {
    n as f64 - (n as f64 / (6.0 * PI)).sqrt()
}

/// Change of the LP value when the start state moves by `l1` in L1 norm,
/// with `periods` periods remaining: `periods · R_max · l1 / 2`.
pub fn lipschitz_bound(periods: usize, r_max: f64, l1: f64) -> f64 {
    periods as f64 * r_max * l1 / 2.0
}

/// Total reward lost to flooring over a run: `T K|S||A| R_max`.
pub fn rounding_slack_bound(inst: &RmabInstance) -> f64 {
    let d = inst.dims();
    inst.horizon() as f64 * d.action_cells() as f64 * inst.r_max()
}

/// L1 radius of a sum of `n` independent categorical draws over `k`
/// categories: `sqrt(2 ln2 k n + 2 n ln(1/δ))`.
pub fn concentration_radius(k: usize, n: u64, delta: f64) -> f64 {
    let (k, n) = (k as f64, n as f64);
    (2.0 * LN_2 * k * n + 2.0 * n * (1.0 / delta).ln()).sqrt()
}

/// Expected one-step drift of the realized state from its fluid prediction:
/// `sqrt(K|S|N) + K|S||A|`.
pub fn drift_mean_bound(b: &BoundInputs) -> f64 {
    (b.ks() * b.arms).sqrt() + b.ksa()
}

/// High-probability drift: `sqrt(2 ln2 K|S|N + 2N ln(1/δ)) + K|S||A|`.
pub fn drift_quantile_bound(b: &BoundInputs, delta: f64) -> f64 {
    (2.0 * LN_2 * b.ks() * b.arms + 2.0 * b.arms * (1.0 / delta).ln()).sqrt() + b.ksa()
}

/// Reward that can still be collected after the horizon of a discounted
/// instance: `N R_max γ^T / (1-γ)`.
pub fn tail_bound(inst: &RmabInstance) -> Result<f64> {
    let g = inst.discount();
    if g >= 1.0 {
        return Err(Error::InvalidArgument("tail bound needs gamma < 1".into()));
    }
    Ok(inst.total_arms() as f64 * inst.r_max() * g.powi(inst.horizon() as i32) / (1.0 - g))
}

/// Every bound that applies to the instance.
pub fn bound_reports(inst: &RmabInstance, delta: Option<f64>) -> Result<Vec<BoundReport>> {
    let b = BoundInputs::of(inst, delta);
    let mut out = vec![BoundReport {
        name: "finite_horizon_gap".into(),
        inputs: b,
        value: finite_horizon_gap(&b)?,
        measured: None,
    }];
    if inst.discount() < 1.0 {
        out.push(BoundReport {
            name: "discounted_gap".into(),
            inputs: b,
            value: discounted_gap(&b)?,
            measured: None,
        });
        out.push(BoundReport {
            name: "tail".into(),
            inputs: b,
            value: tail_bound(inst)?,
            measured: None,
        });
    }
    out.push(BoundReport {
        name: "rounding_slack".into(),
        inputs: b,
        value: rounding_slack_bound(inst),
        measured: None,
    });
    out.push(BoundReport {
        name: "drift_mean".into(),
        inputs: b,
        value: drift_mean_bound(&b),
        measured: None,
    });
    if let Some(d) = delta {
        out.push(BoundReport {
            name: "drift_quantile".into(),
            inputs: b,
            value: drift_quantile_bound(&b, d),
            measured: None,
        });
    }
    Ok(out)
}
