mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmab::bounds::lipschitz_bound;
use rmab::examples::example1;
use rmab::exact::{exact_optimal_value, ExactOptions};
use rmab::lp::{build_lp, solve_lp, DenseSimplex, LinearProgram, LpSolver, Relation};
use rmab::meanfield::{mean_field_value, truncation_horizon};
use rmab::{Dims, FractionalState, RmabInstance, StateCount};

fn two_by_two(t: usize, gamma: f64) -> RmabInstance {
    let mut inst = RmabInstance::zeros(Dims::new(1, 2, 2), t, gamma, vec![3], true).unwrap();
    for s in 0..2 {
        inst.set_transition_row(0, 0, s, 0, &[1.0, 0.0]);
        inst.set_transition_row(0, 0, s, 1, &[0.2, 0.8]);
        inst.set_cost(0, 0, s, 1, 1.0);
    }
    inst.set_reward(0, 0, 1, 0, 1.0);
    inst.set_reward(0, 0, 1, 1, 1.0);
    inst.set_all_budgets(1.0);
    inst
}

#[test]
fn lp_dimensions() {
    let inst = two_by_two(3, 0.9);
    let start = FractionalState::from_values(1, 2, vec![3.0, 0.0]).unwrap();
    let m = build_lp(&inst, &start, 0).unwrap();
    // 3 periods x (2 states + 2x2 state-actions)
    assert_eq!(m.lp.num_vars(), 18);
    // 2 init + 2x2 flow + 3 budget + 3x2 consistency
    assert_eq!(m.lp.num_constraints(), 15);
}

#[test]
fn last_period_lp_has_no_flow_rows() {
    let inst = two_by_two(3, 0.9);
    let start = FractionalState::from_values(1, 2, vec![1.0, 2.0]).unwrap();
    let m = build_lp(&inst, &start, 2).unwrap();
    assert_eq!(m.lp.num_vars(), 6);
    assert!(m.lp.constraints.iter().all(|c| !c.name.starts_with("flow")));
    assert_eq!(m.lp.constraints.iter().filter(|c| c.name.starts_with("budget")).count(), 1);
    assert!(build_lp(&inst, &start, 3).is_err());
    let wrong = FractionalState::zeros(1, 3);
    assert!(build_lp(&inst, &wrong, 0).is_err());
}

#[test]
fn objective_weights_use_absolute_time() {
    let start = FractionalState::from_values(1, 2, vec![3.0, 0.0]).unwrap();
    let flat = build_lp(&two_by_two(3, 1.0), &start, 0).unwrap();
    let w = |m: &rmab::lp::MeanFieldLp, t| m.lp.objective[m.alpha_var(t, 0, 1, 0)];
    assert_eq!(w(&flat, 0), w(&flat, 2));
    let disc = build_lp(&two_by_two(3, 0.5), &start, 1).unwrap();
    assert_eq!(w(&disc, 1), 0.5);
    assert_eq!(w(&disc, 2), 0.25);
}

#[test]
fn single_variable_lp() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 1.0);
    lp.add_constraint("cap", vec![(x, 1.0)], Relation::Le, 5.0);
    assert_eq!(solve_lp(&lp).unwrap().objective, 5.0);
}

#[test]
fn zero_reward_instance_has_zero_value() {
    let mut inst = two_by_two(3, 0.9);
    inst.set_reward(0, 0, 1, 0, 0.0);
    inst.set_reward(0, 0, 1, 1, 0.0);
    let start = FractionalState::from_values(1, 2, vec![2.0, 1.0]).unwrap();
    assert_eq!(mean_field_value(&inst, &start, 0).unwrap().value, 0.0);
}

#[test]
fn fluid_step_is_the_expected_next_state() {
    // 5 arms in state 0 move to state 0 w.p. 0.3 and to state 1 w.p. 0.7.
    let mut inst = RmabInstance::zeros(Dims::new(1, 2, 1), 2, 1.0, vec![5], true).unwrap();
    inst.set_transition_row(0, 0, 0, 0, &[0.3, 0.7]);
    inst.set_transition_row(0, 0, 1, 0, &[0.0, 1.0]);
    let start = FractionalState::from_values(1, 2, vec![5.0, 0.0]).unwrap();
    let plan = mean_field_value(&inst, &start, 0).unwrap();
    let next = plan.state_at(1);
    assert!((next.get(0, 0) - 1.5).abs() < 1e-12);
    assert!((next.get(0, 1) - 3.5).abs() < 1e-12);
}

#[test]
fn forced_chain_value() {
    let mut inst = RmabInstance::zeros(Dims::new(1, 3, 1), 3, 1.0, vec![1], true).unwrap();
    inst.set_transition_row(0, 0, 0, 0, &[0.0, 1.0, 0.0]);
    inst.set_transition_row(0, 0, 1, 0, &[0.0, 0.0, 1.0]);
    inst.set_transition_row(0, 0, 2, 0, &[0.0, 0.0, 1.0]);
    inst.set_reward(0, 0, 1, 0, 1.0);
    inst.set_reward(0, 0, 2, 0, 2.0);
    let start = FractionalState::from_values(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
    assert!((mean_field_value(&inst, &start, 0).unwrap().value - 3.0).abs() < 1e-12);
}

#[test]
fn example1_lp_dominates_playing_the_reliable_arm() {
    let (eps, gamma) = (0.1, 0.99);
    let sc = example1(1, eps, gamma, 50).unwrap();
    let plan = mean_field_value(&sc.instance, &sc.start.to_fractional(), 0).unwrap();
    let reliable: f64 = (1..50).map(|t| (1.0 - eps) * gamma.powi(t)).sum();
    assert!(plan.value >= reliable - 1e-9, "{} < {}", plan.value, reliable);
    assert!(plan.stats.max_violation < 1e-7);
}

#[test]
fn warm_and_cold_starts_agree() {
    for seed in 0..30 {
        let sc = common::tiny(seed);
        let m = build_lp(&sc.instance, &sc.start.to_fractional(), 0).unwrap();
        let cold = DenseSimplex::default().solve(&m.lp).unwrap();
        let warm = DenseSimplex::default().solve_from_basis(&m.lp, &m.crash_basis).unwrap();
        assert!(warm.stats.warm_started);
        assert_eq!(warm.stats.phase_one_pivots, 0);
        assert!((cold.objective - warm.objective).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn scaling_arms_and_budget_scales_the_value() {
    for seed in 0..20 {
        let sc = common::tiny(seed);
        let base = mean_field_value(&sc.instance, &sc.start.to_fractional(), 0).unwrap().value;
        let m = 3u64;
        let mut big = sc.instance.clone();
        big.set_cluster_sizes(sc.instance.cluster_sizes().iter().map(|n| n * m).collect()).unwrap();
        for t in 0..big.horizon() {
            big.set_budget(t, sc.instance.budget(t) * m as f64);
        }
        let start: Vec<f64> = sc.start.as_slice().iter().map(|&c| (c * m) as f64).collect();
        let start = FractionalState::from_values(sc.start.num_clusters(), sc.start.num_states(), start).unwrap();
        let scaled = mean_field_value(&big, &start, 0).unwrap().value;
        assert!((scaled - m as f64 * base).abs() < 1e-8 * (1.0 + scaled.abs()), "seed {seed}");
    }
}

#[test]
fn fluid_mass_is_conserved() {
    for seed in 0..20 {
        let sc = common::tiny(seed);
        let plan = mean_field_value(&sc.instance, &sc.start.to_fractional(), 0).unwrap();
        for i in 0..sc.instance.num_clusters() {
            let n = sc.instance.cluster_size(i) as f64;
            for st in &plan.states {
                let mass: f64 = (0..sc.instance.num_states()).map(|s| st.get(i, s)).sum();
                assert!((mass - n).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn exact_value_of_example1_single_pair() {
    let (eps, g) = (0.1, 0.9);
    let sc = example1(1, eps, g, 5).unwrap();
    let v = exact_optimal_value(&sc.instance, &sc.start, &ExactOptions::default()).unwrap();
    let want = (1.0 - eps) * (g + g * g + g.powi(3) + g.powi(4));
    assert!((v - want).abs() < 1e-12, "{v} vs {want}");
}

#[test]
fn exact_value_with_one_arm_is_single_mdp_dp() {
    // one arm, two states: plain backward induction as the oracle
    let inst = {
        let mut i = two_by_two(4, 0.8);
        i.set_cluster_sizes(vec![1]).unwrap();
        i
    };
    let mut v = [0.0f64; 2];
    for t in (0..4).rev() {
        let w = 0.8f64.powi(t);
        let q = |s: usize, a: usize, v: &[f64; 2]| {
            w * inst.reward(0, 0, s, a) + (0..2).map(|n| inst.prob(0, 0, s, a, n) * v[n]).sum::<f64>()
        };
        v = [q(0, 0, &v).max(q(0, 1, &v)), q(1, 0, &v).max(q(1, 1, &v))];
    }
    let start = StateCount::from_nested(&[vec![1, 0]]).unwrap();
    let exact = exact_optimal_value(&inst, &start, &ExactOptions::default()).unwrap();
    assert!((exact - v[0]).abs() < 1e-12);
}

#[test]
fn exact_solver_refuses_large_inputs() {
    let sc = example1(1, 0.1, 0.9, 9).unwrap();
    assert!(exact_optimal_value(&sc.instance, &sc.start, &ExactOptions::default()).is_err());
    let sc = example1(30, 0.1, 0.9, 4).unwrap();
    let opts = ExactOptions {
        max_states: 50,
        ..Default::default()
    };
    assert!(matches!(
        exact_optimal_value(&sc.instance, &sc.start, &opts),
        Err(rmab::Error::TooLarge(_))
    ));
}

#[test]
fn truncation_horizon_rules() {
    let mut inst = RmabInstance::zeros(Dims::new(1, 2, 2), 5, 0.9, vec![100], true).unwrap();
    assert_eq!(truncation_horizon(&inst, None).unwrap(), 16);
    inst.set_cluster_sizes(vec![2]).unwrap();
    assert_eq!(truncation_horizon(&inst, None).unwrap(), 3);
    let big = RmabInstance::zeros(Dims::new(4, 2, 2), 5, 0.9, vec![250; 4], true).unwrap();
    let want = ((2.0 * 1000.0f64).sqrt() / (2f64.ln() * 8.0 + (1.0f64 / 0.05).ln()).sqrt() + 1.0).ceil();
    assert_eq!(truncation_horizon(&big, Some(0.05)).unwrap() as f64, want);
    let undiscounted = RmabInstance::zeros(Dims::new(1, 2, 2), 5, 1.0, vec![4], true).unwrap();
    assert!(truncation_horizon(&undiscounted, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lp_value_dominates_exact_optimum(seed in 0u64..10_000) {
        let sc = common::tiny(seed);
        let lp = mean_field_value(&sc.instance, &sc.start.to_fractional(), 0).unwrap().value;
        let exact = exact_optimal_value(&sc.instance, &sc.start, &ExactOptions::default()).unwrap();
        prop_assert!(exact <= lp + 1e-6, "exact {} > lp {}", exact, lp);
    }

    #[test]
    fn lp_value_is_lipschitz_in_the_start(seed in 0u64..10_000, t0 in 0usize..3) {
        let sc = common::tiny(seed);
        let t0 = t0.min(sc.instance.horizon() - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let other = common::reshuffle(&sc.start, &mut rng);
        let a = mean_field_value(&sc.instance, &sc.start.to_fractional(), t0).unwrap().value;
        let b = mean_field_value(&sc.instance, &other.to_fractional(), t0).unwrap().value;
        let l1 = sc.start.to_fractional().l1_to_counts(&other);
        let bound = lipschitz_bound(sc.instance.horizon() - t0, sc.instance.r_max(), l1);
        prop_assert!((a - b).abs() <= bound + 1e-9, "|{} - {}| > {}", a, b, bound);
    }
}
