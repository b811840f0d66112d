//! Policy selection by name.

use std::sync::Arc;

use rmab::policy::{
    FiniteWhittlePolicy, MfpPolicy, NobodyPolicy, OneShotPolicy, PlanCache, Policy, PriorityPolicy, RandomPolicy,
    Rounding,
};
use rmab::whittle::IndexOptions;
use rmab::RmabInstance;

use crate::config::config_err;

pub const NAMES: &[&str] = &["mfp", "mfp-bucket", "mfp-oneshot", "whittle", "whittle-finite", "random", "nobody", "priority:<order>"];

/// Split a comma-separated policy list.
pub fn split_list(list: &str) -> Vec<String> {
    list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// `priority:a>b>c` with entries `[cluster/]state`, where a state is an index
/// or a state label.
fn parse_order(inst: &RmabInstance, spec: &str) -> anyhow::Result<Vec<(usize, usize)>> {
    let state_of = |s: &str| -> anyhow::Result<usize> {
        if let Ok(k) = s.parse::<usize>() {
            if k < inst.num_states() {
                return Ok(k);
            }
        }
        inst.state_labels()
            .iter()
            .position(|l| l == s)
            .ok_or_else(|| config_err(format!("priority order: unknown state '{s}'")))
    };
    spec.split('>')
        .map(|entry| {
            let entry = entry.trim();
            let (c, s) = match entry.split_once('/') {
                Some((c, s)) => {
                    let c: usize = c
                        .parse()
                        .map_err(|_| config_err(format!("priority order: bad cluster in '{entry}'")))?;
                    (c, s)
                }
                None => (0, entry),
            };
            if c >= inst.num_clusters() {
                return Err(config_err(format!("priority order: cluster {c} out of range")));
            }
            Ok((c, state_of(s)?))
        })
        .collect()
}

pub fn build(
    name: &str,
    inst: &RmabInstance,
    rounding: Rounding,
    cache: &Arc<PlanCache>,
) -> anyhow::Result<Box<dyn Policy>> {
    let opts = IndexOptions::default();
    Ok(match name {
        "mfp" => Box::new(MfpPolicy::new(rounding).with_cache(cache.clone())),
        "mfp-bucket" => Box::new(MfpPolicy::new(Rounding::Bucket).with_cache(cache.clone())),
        "mfp-oneshot" => Box::new(OneShotPolicy::default()),
        "whittle" => Box::new(rmab::policy::WhittlePolicy::new(inst, &opts)?),
        "whittle-finite" => Box::new(FiniteWhittlePolicy::new(inst, &opts)?),
        "random" => Box::new(RandomPolicy),
        "nobody" => Box::new(NobodyPolicy),
        other => match other.strip_prefix("priority:") {
            Some(spec) => Box::new(PriorityPolicy::new(other, parse_order(inst, spec)?)),
            None => {
                return Err(config_err(format!(
                    "unknown policy '{other}'; expected one of {}",
                    NAMES.join(", ")
                )))
            }
        },
    })
}
