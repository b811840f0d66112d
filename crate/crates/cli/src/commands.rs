//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rmab::bounds::bound_reports;
use rmab::examples::{example1, example3, GeneratorSpec, Scenario, DROPOUT, GE, GS, RE, RS};
use rmab::lp::build_lp;
use rmab::meanfield::mean_field_value;
use rmab::policy::{FiniteWhittlePolicy, PlanCache, Policy, PriorityPolicy, Rounding, WhittlePolicy};
use rmab::sim::{run_replications, summarize, write_records_csv, EvalSummary, SimulationRecord};
use rmab::whittle::{build_index_table, indexability_scan, ArmModel, IndexMode, IndexOptions};
use rmab::RmabInstance;

use crate::config::{build_generated, config_err, parse_params, OutputConfig, ScenarioConfig};
use crate::output::{header_block, num, opt, Sink, Table};
use crate::policies;

/// Instance source and overrides shared by every subcommand.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Source {
    /// JSON scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in generator: example1, example2, example3, lowerbound, synthetic.
    #[arg(long)]
    pub example: Option<String>,
    /// Generator parameter, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Override the discount factor.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Override the horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Clone, Debug, Default, clap::Args)]
pub struct RunOpts {
    /// Comma-separated policy names.
    #[arg(long)]
    pub policies: Option<String>,
    /// Replications per policy (default 100)
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed; replication r uses seed + r
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rounding of fluid actions for mfp: floor or bucket
    #[arg(long)]
    pub rounding: Option<Rounding>,
}

/// Everything a run needs once flags and config are merged.
pub struct Settings {
    pub scenario: Scenario,
    pub policies: Vec<String>,
    pub reps: usize,
    pub seed: u64,
    pub rounding: Rounding,
    pub delta: Option<f64>,
    pub outputs: OutputConfig,
    pub out_dir: Option<PathBuf>,
}

pub fn resolve(src: &Source, run: &RunOpts, out: Option<&Path>) -> anyhow::Result<Settings> {
    let cfg = src.config.as_deref().map(ScenarioConfig::load).transpose()?;
    let scenario = match (&cfg, &src.example) {
        (Some(_), Some(_)) => return Err(config_err("give either --config or --example, not both")),
        (Some(c), None) => {
            let mut c = c.clone();
            c.horizon = src.horizon.or(c.horizon);
            c.discount = src.gamma.or(c.discount);
            if !src.params.is_empty() {
                return Err(config_err("--param applies to --example only"));
            }
            c.scenario()?
        }
        (None, Some(name)) => {
            let mut spec = GeneratorSpec::new(name.clone());
            spec.params = parse_params(&src.params)?;
            build_generated(spec, src.horizon, src.gamma)?
        }
        (None, None) => return Err(config_err("give --config <file> or --example <name>")),
    };
    let policies = match (&run.policies, &cfg) {
        (Some(p), _) => policies::split_list(p),
        (None, Some(c)) => c.policies.clone(),
        (None, None) => vec!["mfp".into(), "whittle".into(), "random".into()],
    };
    let reps = run.reps.or(cfg.as_ref().map(|c| c.replications)).unwrap_or(100);
    if reps == 0 {
        return Err(config_err("--reps must be at least 1"));
    }
    Ok(Settings {
        scenario,
        policies,
        reps,
        seed: run.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0),
        rounding: run.rounding.or(cfg.as_ref().map(|c| c.rounding)).unwrap_or_default(),
        delta: cfg.as_ref().and_then(|c| c.delta),
        outputs: cfg.as_ref().map(|c| c.outputs.clone()).unwrap_or_default(),
        out_dir: out
            .map(Path::to_path_buf)
            .or_else(|| cfg.as_ref().and_then(|c| c.out_dir.clone().map(PathBuf::from))),
    })
}

pub fn solve(src: &Source, out: Option<&Path>, t0: usize, dump_lp: bool) -> anyhow::Result<()> {
    let s = resolve(src, &RunOpts::default(), out)?;
    let inst = &s.scenario.instance;
    let start = s.scenario.start.to_fractional();
    let plan = mean_field_value(inst, &start, t0)?;
    let header = header_block(
        "solve",
        None,
        &[
            ("objective", num(plan.value)),
            ("pivots", plan.stats.pivots.to_string()),
            ("max_violation", num(plan.stats.max_violation)),
        ],
    );
    let mut sink = Sink::new(s.out_dir.as_deref(), header)?;
    let mut table = Table::new("plan", &["t", "cluster", "state", "mu", "action", "alpha"]);
    for (k, (alpha, mu)) in plan.actions.iter().zip(&plan.states).enumerate() {
        for i in 0..inst.num_clusters() {
            for st in 0..inst.num_states() {
                for a in 0..inst.num_actions() {
                    table.push(vec![
                        (t0 + k).to_string(),
                        i.to_string(),
                        st.to_string(),
                        num(mu.get(i, st)),
                        a.to_string(),
                        num(alpha.get(i, st, a)),
                    ]);
                }
            }
        }
    }
    sink.table(&table)?;
    if dump_lp {
        let lp = build_lp(inst, &start, t0)?;
        if let Some(d) = &s.out_dir {
            std::fs::write(d.join("model.lp"), lp.lp.dump())?;
        } else {
            print!("\n{}", lp.lp.dump());
        }
    }
    Ok(())
}

struct Evaluated {
    summary: EvalSummary,
    records: Vec<SimulationRecord>,
}

fn evaluate_all(s: &Settings) -> anyhow::Result<Vec<Evaluated>> {
    let inst = &s.scenario.instance;
    let cache = Arc::new(PlanCache::default());
    let mut out = Vec::new();
    for name in &s.policies {
        let policy = policies::build(name, inst, s.rounding, &cache)?;
        log::info!("running {} x {}", policy.name(), s.reps);
        let records = run_replications(inst, policy.as_ref(), &s.scenario.start, s.reps, s.seed)?;
        out.push(Evaluated {
            summary: summarize(&policy.name(), &records),
            records,
        });
    }
    Ok(out)
}

const SUMMARY_COLUMNS: &[&str] = &[
    "policy",
    "replications",
    "mean",
    "sd",
    "ci_low",
    "ci_high",
    "per_arm_mean",
    "mean_step_cost",
    "budget_violations",
    "delta_vs_random",
];

fn summary_table(inst: &RmabInstance, results: &[Evaluated]) -> Table {
    let random = results.iter().find(|e| e.summary.policy == "random").map(|e| e.summary.mean);
    let arms = inst.total_arms() as f64;
    let mut t = Table::new("summary", SUMMARY_COLUMNS);
    for e in results {
        let s = &e.summary;
        t.push(vec![
            s.policy.clone(),
            s.replications.to_string(),
            num(s.mean),
            num(s.sd),
            num(s.ci_low),
            num(s.ci_high),
            num(s.mean / arms),
            num(s.mean_step_cost),
            s.budget_violations.to_string(),
            opt(random.map(|r| s.mean - r)),
        ]);
    }
    t
}

fn records_bytes(inst: &RmabInstance, results: &[Evaluated]) -> anyhow::Result<Vec<u8>> {
    let all: Vec<SimulationRecord> = results.iter().flat_map(|e| e.records.iter().cloned()).collect();
    let mut buf = Vec::new();
    write_records_csv(&mut buf, inst, &all)?;
    Ok(buf)
}

fn bounds_table(inst: &RmabInstance, delta: Option<f64>) -> anyhow::Result<Table> {
    let mut t = Table::new(
        "bounds",
        &["name", "value", "arms", "clusters", "states", "actions", "horizon", "discount", "r_max", "delta"],
    );
    for r in bound_reports(inst, delta)? {
        let b = &r.inputs;
        t.push(vec![
            r.name,
            num(r.value),
            num(b.arms),
            num(b.clusters),
            num(b.states),
            num(b.actions),
            num(b.horizon),
            num(b.discount),
            num(b.r_max),
            opt(b.delta),
        ]);
    }
    Ok(t)
}

fn run_header(command: &str, s: &Settings) -> String {
    header_block(
        command,
        Some(s.seed),
        &[
            ("replications", s.reps.to_string()),
            ("rounding", format!("{:?}", s.rounding).to_lowercase()),
        ],
    )
}

/// Simulate one or more policies; `records` also writes every trajectory.
pub fn compare(src: &Source, run: &RunOpts, out: Option<&Path>, records: bool, command: &str) -> anyhow::Result<()> {
    let mut s = resolve(src, run, out)?;
    s.outputs.records |= records;
    let results = evaluate_all(&s)?;
    let inst = &s.scenario.instance;
    let mut sink = Sink::new(s.out_dir.as_deref(), run_header(command, &s))?;
    sink.table(&summary_table(inst, &results))?;
    if s.outputs.records {
        if s.out_dir.is_none() {
            return Err(config_err("trajectory records need an output directory (--out)"));
        }
        sink.file("records.csv", &records_bytes(inst, &results)?)?;
    }
    Ok(())
}

/// Everything a config asks for: summary, bounds, records and index curves.
pub fn run_config(config: &Path, run: &RunOpts, out: Option<&Path>) -> anyhow::Result<()> {
    let src = Source {
        config: Some(config.to_path_buf()),
        ..Default::default()
    };
    let s = resolve(&src, run, out)?;
    let results = evaluate_all(&s)?;
    let inst = &s.scenario.instance;
    let mut sink = Sink::new(s.out_dir.as_deref(), run_header("run", &s))?;
    sink.table(&summary_table(inst, &results))?;
    if s.outputs.bounds {
        sink.table(&bounds_table(inst, s.delta)?)?;
    }
    if s.outputs.records {
        if s.out_dir.is_none() {
            return Err(config_err("trajectory records need `out_dir` or --out"));
        }
        sink.file("records.csv", &records_bytes(inst, &results)?)?;
    }
    if s.outputs.index_curves {
        let mode = IndexMode::infinite_for(inst);
        sink.table(&curves_table(inst, mode, 2001)?)?;
    }
    Ok(())
}

fn parse_mode(inst: &RmabInstance, mode: Option<&str>) -> anyhow::Result<IndexMode> {
    Ok(match mode {
        None => IndexMode::infinite_for(inst),
        Some("discounted") => IndexMode::Discounted { gamma: inst.discount() },
        Some("average") => IndexMode::Average,
        Some("finite") => IndexMode::Finite {
            horizon: inst.horizon(),
            gamma: inst.discount(),
        },
        Some(other) => {
            return Err(config_err(format!(
                "unknown index mode '{other}' (expected discounted, average or finite)"
            )))
        }
    })
}

fn mode_label(mode: IndexMode) -> String {
    match mode {
        IndexMode::Discounted { gamma } => format!("discounted gamma={gamma}"),
        IndexMode::Average => "average reward".into(),
        IndexMode::Finite { horizon, gamma } => format!("finite horizon={horizon} gamma={gamma}"),
    }
}

fn curves_table(inst: &RmabInstance, mode: IndexMode, points: usize) -> anyhow::Result<Table> {
    let mut t = Table::new("index_curves", &["cluster", "state", "lambda", "q_gap"]);
    for i in 0..inst.num_clusters() {
        let arm = ArmModel::from_instance(inst, i, 0)?;
        let scan = indexability_scan(&arm, mode, None, points)?;
        for s in 0..inst.num_states() {
            for (lambda, gaps) in scan.lambdas.iter().zip(&scan.gaps) {
                t.push(vec![i.to_string(), s.to_string(), num(*lambda), num(gaps[s])]);
            }
        }
    }
    Ok(t)
}

pub fn index(src: &Source, out: Option<&Path>, mode: Option<&str>, scan: bool, points: usize) -> anyhow::Result<()> {
    let s = resolve(src, &RunOpts::default(), out)?;
    let inst = &s.scenario.instance;
    let mode = parse_mode(inst, mode)?;
    let opts = IndexOptions {
        scan,
        scan_points: points,
        allow_non_indexable: true,
    };
    let table = build_index_table(inst, 0, mode, &opts)?;
    let mut sink = Sink::new(s.out_dir.as_deref(), header_block("index", None, &[("mode", mode_label(mode))]))?;
    let mut t = Table::new("indices", &["cluster", "state", "label", "index", "verdict", "crossings"]);
    for e in &table.entries {
        t.push(vec![
            e.cluster.to_string(),
            e.state.to_string(),
            inst.state_label(e.state).to_string(),
            opt(e.index),
            format!("{:?}", e.verdict).to_lowercase(),
            e.crossings.to_string(),
        ]);
    }
    sink.table(&t)?;
    if scan {
        sink.table(&curves_table(inst, mode, points)?)?;
    }
    Ok(())
}

pub fn bounds(src: &Source, out: Option<&Path>, delta: Option<f64>) -> anyhow::Result<()> {
    let s = resolve(src, &RunOpts::default(), out)?;
    let mut sink = Sink::new(s.out_dir.as_deref(), header_block("bounds", None, &[]))?;
    sink.table(&bounds_table(&s.scenario.instance, delta.or(s.delta))?)?;
    Ok(())
}

/// Published entries of the two-type transition table: every passive action
/// drops out; active moves start to engaged, keeps reliable arms engaged and
/// drops greedy arms out.
fn published_transition(i: usize, s: usize, a: usize, next: usize) -> f64 {
    let (start, engaged, dropout) = (0, 1, 2);
    let target = match (a, i, s) {
        (0, _, _) => dropout,
        (_, _, x) if x == start => engaged,
        (_, 0, x) if x == engaged => engaged,
        _ => dropout,
    };
    (next == target) as u8 as f64
}

fn reproduce_table2(sink: &mut Sink) -> anyhow::Result<()> {
    let sc = example1(1, 0.1, 0.9, 10)?;
    let inst = &sc.instance;
    let mut t = Table::new(
        "table2",
        &["cluster", "state", "action", "next_state", "probability", "published", "deviation"],
    );
    for i in 0..2 {
        for s in 0..3 {
            for a in 0..2 {
                for n in 0..3 {
                    let p = inst.prob(0, i, s, a, n);
                    let want = published_transition(i, s, a, n);
                    t.push(vec![
                        i.to_string(),
                        inst.state_label(s).to_string(),
                        a.to_string(),
                        inst.state_label(n).to_string(),
                        num(p),
                        num(want),
                        num(p - want),
                    ]);
                }
            }
        }
    }
    sink.table(&t)?;
    let mut idx = Table::new(
        "table2_indices",
        &["cluster", "state", "gamma", "epsilon", "index", "published", "deviation"],
    );
    for gamma in [0.5, 0.8, 0.9, 0.99] {
        for eps in [0.01, 0.1, 0.5] {
            let sc = example1(1, eps, gamma, 10)?;
            let table = build_index_table(&sc.instance, 0, IndexMode::Discounted { gamma }, &IndexOptions::default())?;
            for e in &table.entries {
                let want = match (e.cluster, e.state) {
                    (0, 0) | (0, 1) => gamma * (1.0 - eps),
                    (1, 0) => gamma,
                    _ => 0.0,
                };
                let got = e.index.unwrap_or(f64::NAN);
                idx.push(vec![
                    e.cluster.to_string(),
                    sc.instance.state_label(e.state).to_string(),
                    num(gamma),
                    num(eps),
                    num(got),
                    num(want),
                    num(got - want),
                ]);
            }
        }
    }
    sink.table(&idx)
}

/// Alternate order of the recurrent engagement example.
pub fn alternate_order() -> Vec<(usize, usize)> {
    vec![(0, RE), (0, RS), (0, GS), (0, DROPOUT), (0, GE)]
}

fn reproduce_table3(sink: &mut Sink, reps: usize, seed: u64) -> anyhow::Result<()> {
    let (eta_s, eta_r, eta_d, eps, n) = (0.05, 0.1, 0.1, 0.01, 100u64);
    let settings: [(&str, f64, Option<usize>, f64, f64); 3] = [
        ("discounted gamma=0.95", 0.95, None, 7.33, 8.65),
        ("discounted gamma=0.8", 0.8, None, 1.17, 1.86),
        ("finite horizon T=20", 1.0, Some(20), 7.41, 9.11),
    ];
    let mut t = Table::new(
        "table3",
        &[
            "setting",
            "policy",
            "horizon",
            "replications",
            "mean",
            "per_arm",
            "ci_low",
            "ci_high",
            "published",
            "published_is_lower_bound",
            "deviation",
        ],
    );
    let alternate = PriorityPolicy::new("alternate", alternate_order());
    for (label, gamma, finite, pub_w, pub_a) in settings {
        // discounted settings are truncated once the per-arm tail is below 1e-4
        let horizon = finite.unwrap_or_else(|| ((1e-4 * (1.0 - gamma)).ln() / gamma.ln()).ceil() as usize);
        let sc = example3(eta_s, eta_r, eta_d, eps, gamma, horizon, n)?;
        let whittle: Box<dyn Policy> = if finite.is_some() {
            Box::new(FiniteWhittlePolicy::new(&sc.instance, &IndexOptions::default())?)
        } else {
            Box::new(WhittlePolicy::new(&sc.instance, &IndexOptions::default())?)
        };
        let arms = sc.instance.total_arms() as f64;
        for (policy, published, lower) in [(whittle.as_ref(), pub_w, false), (&alternate as &dyn Policy, pub_a, true)] {
            let recs = run_replications(&sc.instance, policy, &sc.start, reps, seed)?;
            let s = summarize(&policy.name(), &recs);
            t.push(vec![
                label.to_string(),
                s.policy.clone(),
                horizon.to_string(),
                reps.to_string(),
                num(s.mean),
                num(s.mean / arms),
                num(s.ci_low / arms),
                num(s.ci_high / arms),
                num(published),
                lower.to_string(),
                num(s.mean / arms - published),
            ]);
        }
    }
    sink.table(&t)
}

fn reproduce_figure4(sink: &mut Sink) -> anyhow::Result<()> {
    let sc = example3(0.05, 0.1, 0.1, 0.01, 1.0, 10, 1)?;
    let inst = &sc.instance;
    let arm = ArmModel::from_instance(inst, 0, 0)?;
    let scan = indexability_scan(&arm, IndexMode::Average, None, 2001)?;
    let mut curves = Table::new("figure4", &["cluster", "state", "lambda", "q_gap"]);
    for s in 0..inst.num_states() {
        for (lambda, gaps) in scan.lambdas.iter().zip(&scan.gaps) {
            curves.push(vec!["0".into(), s.to_string(), num(*lambda), num(gaps[s])]);
        }
    }
    sink.table(&curves)?;
    let table = build_index_table(inst, 0, IndexMode::Average, &IndexOptions::default())?;
    let mut states = Table::new("figure4_states", &["state", "label", "crossings", "verdict", "index"]);
    for st in &scan.states {
        states.push(vec![
            st.state.to_string(),
            inst.state_label(st.state).to_string(),
            st.crossings.to_string(),
            format!("{:?}", st.verdict).to_lowercase(),
            opt(table.get(0, st.state).index),
        ]);
    }
    sink.table(&states)
}

pub fn reproduce(
    out: Option<&Path>,
    table: Option<u8>,
    figure: Option<u8>,
    reps: usize,
    seed: u64,
) -> anyhow::Result<()> {
    let header = header_block("reproduce", Some(seed), &[("replications", reps.to_string())]);
    let mut sink = Sink::new(out, header)?;
    match (table, figure) {
        (Some(2), None) => reproduce_table2(&mut sink),
        (Some(3), None) => reproduce_table3(&mut sink, reps, seed),
        (None, Some(4)) => reproduce_figure4(&mut sink),
        (None, None) => Err(config_err("give --table 2, --table 3 or --figure 4")),
        _ => Err(config_err("reproducible artifacts are --table 2, --table 3 and --figure 4")),
    }
}
