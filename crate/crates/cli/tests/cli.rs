use std::path::Path;
use std::process::{Command, Output};

fn rmab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmab"))
        .args(args)
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rmab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows of the first table in a CSV document, keyed by column name.
fn rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let body: String = text
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .take_while(|l| !l.is_empty())
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            headers.iter().map(String::from).zip(r.iter().map(String::from)).collect()
        })
        .collect()
}

fn f(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn index_of_example1() {
    let out = ok(&["index", "--example", "example1", "--gamma", "0.9", "--param", "epsilon=0.1"]);
    assert!(out.starts_with("# rmab "));
    let r = rows(&out);
    assert_eq!(r.len(), 6);
    let idx = |c: &str, s: &str| {
        f(r.iter().find(|x| x["cluster"] == c && x["state"] == s).unwrap(), "index")
    };
    assert!((idx("1", "0") - 0.9).abs() < 1e-6);
    assert!((idx("0", "0") - 0.81).abs() < 1e-6);
    assert!(idx("0", "2").abs() < 1e-6);
}

#[test]
fn solve_zero_reward_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "zero.json",
        r#"{"instance": {"horizon": 3, "discount": 1.0, "cluster_sizes": [2], "budget": 1,
            "stationary": true,
            "transitions": [[[[[0.5, 0.5], [0.5, 0.5]], [[1, 0], [0, 1]]]]],
            "rewards": [[[[0, 0], [0, 0]]]],
            "start": [[1, 1]]}}"#,
    );
    let out = ok(&["solve", "--config", &cfg]);
    assert!(out.contains("# objective: 0\n"), "{out}");
    assert_eq!(rows(&out).len(), 3 * 2 * 2);
}

#[test]
fn figure4_has_one_crossing_per_state() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&["reproduce", "--figure", "4", "--out", d]);
    let states = rows(&std::fs::read_to_string(dir.path().join("figure4_states.csv")).unwrap());
    assert_eq!(states.len(), 5);
    for s in &states {
        assert_eq!(s["crossings"], "1");
        assert_eq!(s["verdict"], "indexable");
    }
    let idx = |label: &str| f(states.iter().find(|s| s["label"] == label).unwrap(), "index");
    assert!(idx("greedy-start") > idx("reliable-start"));
    let curves = rows(&std::fs::read_to_string(dir.path().join("figure4.csv")).unwrap());
    assert_eq!(curves.len(), 5 * 2001);
    for state in 0..5 {
        let gaps: Vec<f64> = curves
            .iter()
            .filter(|c| c["state"] == state.to_string())
            .map(|c| f(c, "q_gap"))
            .collect();
        let changes = gaps.windows(2).filter(|w| (w[0] > 1e-9) != (w[1] > 1e-9)).count();
        assert_eq!(changes, 1, "state {state}");
    }
}

#[test]
fn mfp_beats_whittle_on_example1() {
    let out = ok(&["run", "--config", "scenarios/example1.json", "--reps", "10"]);
    let r = rows(&out);
    let mean = |p: &str| f(r.iter().find(|x| x["policy"] == p).unwrap(), "mean");
    assert!(mean("mfp") > mean("whittle"));
    let random = r.iter().find(|x| x["policy"] == "random").unwrap();
    assert_eq!(f(random, "delta_vs_random"), 0.0);
    // bounds table follows the summary
    assert!(out.contains("finite_horizon_gap"));
}

#[test]
fn single_deterministic_replication() {
    let out = ok(&[
        "compare", "--example", "example1", "--param", "n=4", "--policies", "whittle", "--reps", "1",
    ]);
    let r = rows(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(f(&r[0], "sd"), 0.0);
    assert_eq!(r[0]["delta_vs_random"], "");
}

#[test]
fn table3_scenario_orders_the_policies() {
    let out = ok(&["run", "--config", "scenarios/table3_gamma095.json", "--reps", "30"]);
    let r = rows(&out);
    assert_eq!(r.len(), 2);
    assert!(f(&r[1], "ci_low") > f(&r[0], "ci_high"));
    let per_arm = f(&r[0], "per_arm_mean");
    assert!(per_arm > 6.5 && per_arm < 7.8, "{per_arm}");
}

#[test]
fn table3_reproduction_reports_published_values() {
    let out = ok(&["reproduce", "--table", "3", "--reps", "10"]);
    let r = rows(&out);
    assert_eq!(r.len(), 6);
    for pair in r.chunks(2) {
        assert!(f(&pair[1], "per_arm") > f(&pair[0], "per_arm"));
        assert_eq!(pair[1]["published_is_lower_bound"], "true");
    }
}

#[test]
fn table2_reproduction_matches() {
    let out = ok(&["reproduce", "--table", "2"]);
    for row in rows(&out) {
        assert_eq!(f(&row, "deviation"), 0.0);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&[
            "run",
            "--config",
            "scenarios/inline_two_state.json",
            "--reps",
            "30",
            "--out",
            d.path().to_str().unwrap(),
        ]);
    }
    for name in ["summary.csv", "bounds.csv", "records.csv", "index_curves.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
    let records = std::fs::read_to_string(a.path().join("records.csv")).unwrap();
    assert!(records.contains("# seed: 7\n"));
    assert!(records.contains("\npolicy,seed,t,cluster,state,count,action,action_count,reward,cost\n"));
}

#[test]
fn thread_count_does_not_change_results() {
    let one = ok(&["--jobs", "1", "compare", "--example", "synthetic", "--param", "arms=50", "--reps", "12"]);
    let two = ok(&["compare", "--jobs", "2", "--example", "synthetic", "--param", "arms=50", "--reps", "12"]);
    assert_eq!(one, two);
}

#[test]
fn bucket_rounding_flag() {
    let out = ok(&[
        "simulate", "--example", "synthetic", "--param", "arms=40", "--rounding", "bucket", "--reps", "5",
    ]);
    assert!(out.contains("# rounding: bucket"));
    assert_eq!(rows(&out)[0]["policy"], "mfp-bucket");
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown_field.json", r#"{"generator": {"name": "example1"}, "replicas": 3}"#, "replicas"),
        ("zero_reps.json", r#"{"generator": {"name": "example1"}, "replications": 0}"#, "replications"),
        ("both.json", r#"{"generator": {"name": "example1"}, "instance": null, "policies": []}"#, "policies"),
        (
            "bad_shape.json",
            r#"{"instance": {"horizon": 2, "discount": 1.0, "cluster_sizes": [1], "budget": 1,
                "stationary": true, "transitions": [[[[[1.0]]]]], "rewards": [[[[0, 0]]]],
                "start": [[1]]}}"#,
            "rewards",
        ),
        (
            "bad_probs.json",
            r#"{"instance": {"horizon": 2, "discount": 1.0, "cluster_sizes": [1], "budget": 1,
                "stationary": true, "transitions": [[[[[0.5, 0.2], [0, 1]], [[1, 0], [0, 1]]]]],
                "rewards": [[[[0, 0], [0, 0]]]], "start": [[1, 0]]}}"#,
            "sum",
        ),
    ];
    for (name, body, needle) in cases {
        let p = write(dir.path(), name, body);
        let out = rmab(&["run", "--config", &p]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{name}: {err}");
    }
    assert_eq!(rmab(&["compare", "--example", "example1", "--policies", "oracle"]).status.code(), Some(2));
    assert_eq!(rmab(&["reproduce", "--table", "9"]).status.code(), Some(2));
    assert_eq!(rmab(&["frobnicate"]).status.code(), Some(2));
}
