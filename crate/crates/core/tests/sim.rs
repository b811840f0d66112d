mod common;

use std::sync::Arc;

use rmab::examples::{example1, synthetic_clustered};
use rmab::exact::{exact_optimal_value, ExactOptions};
use rmab::meanfield::mean_field_value;
use rmab::policy::{MfpPolicy, NobodyPolicy, PlanCache, PriorityPolicy, RandomPolicy, Rounding, WhittlePolicy};
use rmab::sim::{
    check_drift_bound, check_multinomial_bound, evaluate_policy, run_replications, sample_multinomial,
    simulate_trajectory, CategoricalFamily,
};
use rmab::whittle::IndexOptions;
use rmab::{Dims, RmabInstance, StateCount};

fn reliable_first(n: u64, eps: f64, gamma: f64, horizon: usize) -> (rmab::examples::Scenario, PriorityPolicy) {
    let sc = example1(n, eps, gamma, horizon).unwrap();
    let order = vec![(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (1, 2)];
    (sc, PriorityPolicy::new("reliable-first", order))
}

#[test]
fn deterministic_dynamics_ignore_the_seed() {
    let (sc, policy) = reliable_first(5, 0.1, 1.0, 10);
    let a = simulate_trajectory(&sc.instance, &policy, &sc.start, 1).unwrap();
    let b = simulate_trajectory(&sc.instance, &policy, &sc.start, 999).unwrap();
    assert_eq!(a.total_reward, b.total_reward);
    assert_eq!(a.final_state, b.final_state);
    // the reliable arms earn 1 - eps for nine periods
    assert!((a.total_reward - 9.0 * 5.0 * 0.9).abs() < 1e-9);
    assert_eq!(a.steps.len(), 10);
}

#[test]
fn binomial_split_of_the_fluid_fragment() {
    let mut inst = RmabInstance::zeros(Dims::new(1, 2, 1), 2, 1.0, vec![5], true).unwrap();
    inst.set_transition_row(0, 0, 0, 0, &[0.3, 0.7]);
    inst.set_transition_row(0, 0, 1, 0, &[0.0, 1.0]);
    let start = StateCount::from_nested(&[vec![5, 0]]).unwrap();
    let reps = 20_000;
    let recs = run_replications(&inst, &NobodyPolicy, &start, reps, 3).unwrap();
    let mean = recs.iter().map(|r| r.steps[1].state.get(0, 0) as f64).sum::<f64>() / reps as f64;
    let se = (5.0f64 * 0.3 * 0.7 / reps as f64).sqrt();
    assert!((mean - 1.5).abs() < 4.0 * se, "{mean}");
}

#[test]
fn multinomial_draws_conserve_trials() {
    let mut rng = rmab::sim::cell_rng(5, 0, 0, 0, 0);
    for n in [0u64, 1, 7, 1000] {
        let c = sample_multinomial(n, &[0.2, 0.0, 0.5, 0.3], &mut rng);
        assert_eq!(c.iter().sum::<u64>(), n);
        assert_eq!(c[1], 0);
    }
}

#[test]
fn evaluation_summaries() {
    let (sc, policy) = reliable_first(3, 0.1, 1.0, 6);
    let s = evaluate_policy(&sc.instance, &policy, &sc.start, 8, 0).unwrap();
    assert_eq!(s.sd, 0.0);
    assert_eq!(s.ci_low, s.ci_high);
    assert_eq!(s.budget_violations, 0);

    let gamma = 0.9;
    let sc = example1(7, 0.1, gamma, 60).unwrap();
    let whittle = WhittlePolicy::new(&sc.instance, &IndexOptions::default()).unwrap();
    let s = evaluate_policy(&sc.instance, &whittle, &sc.start, 4, 0).unwrap();
    assert!((s.mean - 7.0 * gamma).abs() < 1e-9, "{}", s.mean);

    for seed in 0..10 {
        let sc = common::tiny(seed);
        let s = evaluate_policy(&sc.instance, &NobodyPolicy, &sc.start, 5, seed).unwrap();
        assert!(s.mean >= 0.0);
        let s = evaluate_policy(&sc.instance, &RandomPolicy, &sc.start, 20, seed).unwrap();
        assert_eq!(s.budget_violations, 0);
        let half = s.ci_high - s.mean;
        assert!((half - 1.96 * s.sd / 20f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn mfp_is_sandwiched_by_the_exact_optimum() {
    let cache = Arc::new(PlanCache::default());
    for seed in 0..12 {
        let sc = common::tiny(seed);
        let mfp = MfpPolicy::new(Rounding::Floor).with_cache(cache.clone());
        let s = evaluate_policy(&sc.instance, &mfp, &sc.start, 200, seed).unwrap();
        let exact = exact_optimal_value(&sc.instance, &sc.start, &ExactOptions::default()).unwrap();
        let lp = mean_field_value(&sc.instance, &sc.start.to_fractional(), 0).unwrap().value;
        let half = s.ci_high - s.mean;
        assert!(s.mean <= exact + 3.0 * half + 1e-9, "seed {seed}: {} > {exact}", s.mean);
        assert!(exact <= lp + 1e-6);
    }
}

#[test]
fn multinomial_concentration() {
    let c = check_multinomial_bound(2, 100, &CategoricalFamily::Uniform, 0.1, 2000, 1).unwrap();
    assert!((c.epsilon - 27.16).abs() < 0.01, "{}", c.epsilon);
    assert!(c.failure_rate <= 0.1);
    assert!(c.mean_l1 <= c.sqrt_kn);

    let d = check_multinomial_bound(3, 50, &CategoricalFamily::Degenerate, 0.1, 200, 1).unwrap();
    assert_eq!(d.mean_l1, 0.0);
    assert_eq!(d.failures, 0);

    let rows: Vec<Vec<f64>> = (0..40)
        .map(|j| {
            let p = (j as f64 + 0.5) / 40.0;
            vec![p, 1.0 - p]
        })
        .collect();
    let h = check_multinomial_bound(2, 40, &CategoricalFamily::PerDraw(rows), 0.05, 1000, 2).unwrap();
    assert!(h.failure_rate <= 0.05);
    assert!(check_multinomial_bound(2, 40, &CategoricalFamily::Uniform, 1.5, 10, 0).is_err());
}

#[test]
fn drift_vanishes_without_randomness() {
    let (sc, _) = reliable_first(4, 0.1, 1.0, 6);
    let r = check_drift_bound(&sc.instance, &sc.start, 3, 0.1, 0).unwrap();
    assert!(r.mean_gap < 1e-7, "{}", r.mean_gap);
}

#[test]
fn drift_stays_within_its_bounds() {
    let sc = synthetic_clustered(1, 2, 2, 400, 6, 17, 0.95).unwrap();
    let r = check_drift_bound(&sc.instance, &sc.start, 40, 0.1, 5).unwrap();
    assert!((r.bound_mean - (800f64.sqrt() + 4.0)).abs() < 1e-9);
    assert!(r.within_bounds(), "{r:?}");
}

#[test]
fn replications_are_deterministic_and_conserve_arms() {
    let sc = synthetic_clustered(2, 3, 2, 60, 5, 4, 0.9).unwrap();
    let policy = MfpPolicy::new(Rounding::Floor);
    let a = run_replications(&sc.instance, &policy, &sc.start, 6, 100).unwrap();
    let b = run_replications(&sc.instance, &policy, &sc.start, 6, 100).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(format!("{x:?}"), format!("{y:?}"));
        for step in &x.steps {
            for i in 0..2 {
                assert_eq!(step.state.cluster_total(i), sc.start.cluster_total(i));
            }
            assert_eq!(step.action.state_marginal(), step.state);
        }
    }
    assert_ne!(a[0].total_reward, a[1].total_reward);
    assert_eq!(a[3].seed, 103);
}

#[test]
fn mismatched_start_is_rejected() {
    let (sc, policy) = reliable_first(2, 0.1, 1.0, 4);
    let bad = StateCount::from_nested(&[vec![1, 0, 0], vec![2, 0, 0]]).unwrap();
    assert!(simulate_trajectory(&sc.instance, &policy, &bad, 0).is_err());
}
