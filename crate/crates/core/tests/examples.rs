use rmab::examples::*;
use rmab::policy::PriorityPolicy;
use rmab::sim::evaluate_policy;
use rmab::validate_instance;

fn reachable_everywhere(p: &dyn Fn(usize, usize) -> f64, n: usize) -> bool {
    (0..n).all(|from| {
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(s) = stack.pop() {
            for t in 0..n {
                if !seen[t] && p(s, t) > 0.0 {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen.iter().all(|&x| x)
    })
}

#[test]
fn example2_is_one_cluster_with_both_types() {
    let sc = example2(4, 0.1, 0.9, 6, false).unwrap();
    assert_eq!(sc.instance.num_clusters(), 1);
    assert_eq!(sc.instance.num_states(), 5);
    assert_eq!(sc.start.as_slice(), &[4, 0, 4, 0, 0]);
    assert_eq!(sc.instance.budget(0), 4.0);
    assert!(validate_instance(&sc.instance).is_empty());
}

#[test]
fn dummy_start_splits_evenly_whatever_the_action() {
    let sc = example2(4, 0.1, 0.9, 6, true).unwrap();
    let inst = &sc.instance;
    assert_eq!(inst.num_states(), 6);
    for a in 0..2 {
        assert_eq!(inst.transition_row(0, 0, 5, a), &[0.5, 0.0, 0.5, 0.0, 0.0, 0.0]);
    }
    assert_eq!(sc.start.get(0, 5), 8);
}

#[test]
fn example3_transitions() {
    let sc = example3(0.05, 0.1, 0.1, 0.01, 0.95, 10, 5).unwrap();
    let inst = &sc.instance;
    assert_eq!(inst.prob(0, 0, GS, 0, GE), 0.05);
    assert_eq!(inst.prob(0, 0, GS, 0, DROPOUT), 0.95);
    assert_eq!(inst.prob(0, 0, RS, 0, RE), 0.05);
    assert_eq!(inst.prob(0, 0, RE, 1, DROPOUT), 0.1);
    assert_eq!(inst.prob(0, 0, RE, 1, RE), 0.9);
    assert_eq!(inst.prob(0, 0, RE, 0, DROPOUT), 1.0);
    for a in 0..2 {
        assert_eq!(inst.prob(0, 0, DROPOUT, a, GS), 0.1);
        assert_eq!(inst.prob(0, 0, DROPOUT, a, RS), 0.1);
        assert!((inst.prob(0, 0, DROPOUT, a, DROPOUT) - 0.8).abs() < 1e-15);
    }
    assert!((inst.reward(0, 0, RE, 1) - 0.99).abs() < 1e-15);
}

#[test]
fn example3_chain_is_irreducible_under_every_deterministic_policy() {
    let sc = example3(0.05, 0.1, 0.1, 0.01, 0.95, 10, 5).unwrap();
    let inst = &sc.instance;
    for mask in 0u32..32 {
        let p = |s: usize, t: usize| inst.prob(0, 0, s, ((mask >> s) & 1) as usize, t);
        assert!(reachable_everywhere(&p, 5), "policy {mask:05b}");
    }
}

#[test]
fn example3_rejects_rows_outside_unit_interval() {
    assert!(example3(1.5, 0.1, 0.1, 0.01, 0.9, 5, 2).is_err());
    assert!(example3(0.05, 0.1, 0.6, 0.01, 0.9, 5, 2).is_err());
}

#[test]
fn lowerbound_alternate_policy_reward() {
    let (n, t, delta) = (7u64, 9usize, 0.5);
    let sc = lowerbound_example(n, t, delta).unwrap();
    let eps = (2.0 + delta / n as f64) / (t as f64 - 1.0);
    let alt = PriorityPolicy::new("s7-first", vec![(0, 6), (0, 7)]);
    let s = evaluate_policy(&sc.instance, &alt, &sc.start, 3, 0).unwrap();
    let want = (t as f64 - 1.0) * n as f64 * (1.0 - eps);
    assert!((s.mean - want).abs() < 1e-9);
    assert!((want - ((t as f64 - 3.0) * n as f64 - delta)).abs() < 1e-9);
    assert_eq!(s.sd, 0.0);
}

#[test]
fn lowerbound_structure() {
    let sc = lowerbound_example(3, 6, 1.0).unwrap();
    let inst = &sc.instance;
    assert_eq!(inst.state_labels()[0], "s1");
    assert_eq!(inst.prob(0, 0, 1, 0, 3), 0.5);
    assert_eq!(inst.prob(0, 0, 2, 1, 3), 0.5);
    assert_eq!(inst.prob(0, 0, 2, 1, 4), 0.5);
    assert_eq!(inst.reward(0, 0, 5, 1), 1.0);
    assert_eq!(inst.discount(), 1.0);
    assert_eq!(sc.start.as_slice(), &[6, 0, 0, 0, 0, 0, 3, 0]);
    assert!(lowerbound_example(3, 3, 1.0).is_err());
}

#[test]
fn generator_spec_dispatch() {
    let sc = GeneratorSpec::new("example1").with("n", 2.0).with("gamma", 0.5).with("horizon", 4.0).build().unwrap();
    assert_eq!(sc.instance.total_arms(), 4);
    assert_eq!(sc.instance.discount(), 0.5);
    assert!(GeneratorSpec::new("nope").build().is_err());
    assert!(GeneratorSpec::new("example1").with("eta_s", 0.1).build().is_err());
    assert!(GeneratorSpec::new("example1").with("n", 2.5).build().is_err());
    for name in GeneratorSpec::known() {
        let sc = GeneratorSpec::new(*name).with("horizon", 6.0).build().unwrap();
        assert!(validate_instance(&sc.instance).is_empty(), "{name}");
    }
}
