//! Scenario configuration: where the instance comes from and what to run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use rmab::examples::{GeneratorSpec, Scenario};
use rmab::policy::Rounding;
use rmab::{Dims, RmabInstance, StateCount};

/// Problems with the user's input. Exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Budget given once for every period or per period.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum BudgetConfig {
    Constant(f64),
    PerPeriod(Vec<f64>),
}

/// An instance written out in full. Transitions are indexed
/// `[t][cluster][action][state][next]`, rewards and costs
/// `[t][cluster][state][action]`; with `stationary: true` the outer `t`
/// dimension has length one.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineInstance {
    pub horizon: usize,
    pub discount: f64,
    pub cluster_sizes: Vec<u64>,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub stationary: bool,
    pub transitions: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    pub rewards: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub costs: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `[t][cluster][state]`, default action 0 everywhere.
    #[serde(default)]
    pub zero_cost_action: Option<Vec<Vec<Vec<usize>>>>,
    #[serde(default)]
    pub state_labels: Option<Vec<String>>,
    /// Start counts `[cluster][state]`.
    pub start: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write every trajectory to `records.csv`.
    #[serde(default)]
    pub records: bool,
    #[serde(default = "yes")]
    pub bounds: bool,
    /// Write Q-gap curves of the indexability scan.
    #[serde(default)]
    pub index_curves: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            records: false,
            bounds: true,
            index_curves: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub instance: Option<InlineInstance>,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub discount: Option<f64>,
    #[serde(default)]
    pub rounding: Rounding,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_policies() -> Vec<String> {
    vec!["mfp".into(), "whittle".into(), "random".into()]
}

fn default_reps() -> usize {
    100
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> anyhow::Result<()> {
        match (&self.generator, &self.instance) {
            (Some(_), Some(_)) => return Err(config_err("give either `generator` or `instance`, not both")),
            (None, None) => return Err(config_err("missing `generator` or `instance`")),
            _ => {}
        }
        if self.replications == 0 {
            return Err(config_err("`replications` must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(config_err("`policies` is empty"));
        }
        Ok(())
    }

    pub fn scenario(&self) -> anyhow::Result<Scenario> {
        let sc = match (&self.generator, &self.instance) {
            (Some(g), _) => {
                let mut spec = GeneratorSpec::new(g.name.clone());
                spec.params = g.params.clone();
                build_generated(spec, self.horizon, self.discount)?
            }
            (_, Some(inline)) => apply_overrides(inline.build()?, self.horizon, self.discount)?,
            _ => unreachable!("checked on load"),
        };
        Ok(sc)
    }
}

/// Parse repeated `key=value` flags.
pub fn parse_params(pairs: &[String]) -> anyhow::Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| config_err(format!("--param '{p}' is not of the form key=value")))?;
        let v: f64 = match v.trim() {
            "true" => 1.0,
            "false" => 0.0,
            s => s
                .parse()
                .map_err(|_| config_err(format!("--param {k}: '{v}' is not a number")))?,
        };
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Build a generator, passing horizon and discount overrides as parameters
/// when the generator takes them.
pub fn build_generated(
    mut spec: GeneratorSpec,
    horizon: Option<usize>,
    discount: Option<f64>,
) -> anyhow::Result<Scenario> {
    if let Some(h) = horizon {
        spec.params.insert("horizon".into(), h as f64);
    }
    let takes_gamma = spec.name != "lowerbound";
    if let (Some(g), true) = (discount, takes_gamma) {
        spec.params.insert("gamma".into(), g);
    }
    let sc = spec.build()?;
    if takes_gamma {
        Ok(sc)
    } else {
        apply_overrides(sc, None, discount)
    }
}

fn apply_overrides(mut sc: Scenario, horizon: Option<usize>, discount: Option<f64>) -> anyhow::Result<Scenario> {
    if let Some(h) = horizon {
        sc.instance = sc.instance.with_horizon(h)?;
    }
    if let Some(g) = discount {
        sc.instance = sc.instance.with_discount(g)?;
    }
    Ok(sc)
}

fn shape(what: &str, ok: bool) -> anyhow::Result<()> {
    if ok {
        Ok(())
    } else {
        Err(config_err(format!("instance: `{what}` has the wrong shape")))
    }
}

impl InlineInstance {
    pub fn build(&self) -> anyhow::Result<Scenario> {
        let slices = if self.stationary { 1 } else { self.horizon };
        let k = self.cluster_sizes.len();
        let first = self
            .transitions
            .first()
            .and_then(|t| t.first())
            .ok_or_else(|| config_err("instance: `transitions` is empty"))?;
        let a = first.len();
        let s = first.first().map_or(0, |m| m.len());
        shape(
            "transitions",
            self.transitions.len() == slices
                && self.transitions.iter().all(|t| {
                    t.len() == k
                        && t.iter().all(|i| {
                            i.len() == a && i.iter().all(|m| m.len() == s && m.iter().all(|row| row.len() == s))
                        })
                }),
        )?;
        let sa_shape = |x: &Vec<Vec<Vec<Vec<f64>>>>| {
            x.len() == slices
                && x
                    .iter()
                    .all(|t| t.len() == k && t.iter().all(|i| i.len() == s && i.iter().all(|r| r.len() == a)))
        };
        shape("rewards", sa_shape(&self.rewards))?;
        if let Some(c) = &self.costs {
            shape("costs", sa_shape(c))?;
        }
        if let Some(z) = &self.zero_cost_action {
            shape(
                "zero_cost_action",
                z.len() == slices && z.iter().all(|t| t.len() == k && t.iter().all(|i| i.len() == s)),
            )?;
        }
        let mut inst = RmabInstance::zeros(
            Dims::new(k, s, a),
            self.horizon,
            self.discount,
            self.cluster_sizes.clone(),
            self.stationary,
        )?;
        for t in 0..slices {
            for i in 0..k {
                for st in 0..s {
                    for act in 0..a {
                        inst.set_transition_row(t, i, st, act, &self.transitions[t][i][act][st]);
                        inst.set_reward(t, i, st, act, self.rewards[t][i][st][act]);
                        let c = match &self.costs {
                            Some(c) => c[t][i][st][act],
                            None => (act != 0) as u8 as f64,
                        };
                        inst.set_cost(t, i, st, act, c);
                    }
                    if let Some(z) = &self.zero_cost_action {
                        inst.set_zero_cost_action(t, i, st, z[t][i][st]);
                    }
                }
            }
        }
        match &self.budget {
            BudgetConfig::Constant(b) => inst.set_all_budgets(*b),
            BudgetConfig::PerPeriod(bs) => {
                shape("budget", bs.len() == self.horizon)?;
                for (t, b) in bs.iter().enumerate() {
                    inst.set_budget(t, *b);
                }
            }
        }
        if let Some(labels) = &self.state_labels {
            inst.set_state_labels(labels.clone())?;
        }
        rmab::ensure_valid(&inst)?;
        let start = StateCount::from_nested(&self.start)?;
        start.check_against(&inst)?;
        Ok(Scenario { instance: inst, start })
    }
}
