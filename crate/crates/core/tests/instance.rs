use rmab::examples::{example1, synthetic_clustered};
use rmab::instance::Violation;
use rmab::{
    ensure_valid, step_cost, step_reward, validate_instance, ActionCount, Dims, Error, FractionalAction,
    RmabInstance, StateCount,
};

fn two_state() -> RmabInstance {
    let mut inst = RmabInstance::zeros(Dims::new(1, 2, 2), 3, 1.0, vec![4], true).unwrap();
    for a in 0..2 {
        inst.set_transition_row(0, 0, 0, a, &[0.5, 0.5]);
        inst.set_transition_row(0, 0, 1, a, &[0.0, 1.0]);
        inst.set_reward(0, 0, 1, a, 2.0);
    }
    inst.set_cost(0, 0, 0, 1, 1.0);
    inst.set_cost(0, 0, 1, 1, 1.0);
    inst.set_all_budgets(2.0);
    inst
}

#[test]
fn valid_instance_has_no_violations() {
    assert!(validate_instance(&two_state()).is_empty());
}

#[test]
fn short_row_is_reported_with_coordinates() {
    let mut inst = two_state();
    inst.set_transition_row(0, 0, 1, 0, &[0.0, 0.9]);
    let v = validate_instance(&inst);
    assert_eq!(v.len(), 1);
    match &v[0] {
        Violation::RowSum { cluster, state, action, sum, .. } => {
            assert_eq!((*cluster, *state, *action), (0, 1, 0));
            assert!((sum - 0.9).abs() < 1e-12);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(ensure_valid(&inst), Err(Error::InvalidInstance(_))));
}

#[test]
fn zero_cost_action_must_be_free() {
    let mut inst = two_state();
    inst.set_zero_cost_action(0, 0, 0, 1);
    let v = validate_instance(&inst);
    assert!(matches!(v[..], [Violation::ZeroCostActionHasCost { action: 1, .. }]));
}

#[test]
fn negative_entries_are_reported() {
    let mut inst = two_state();
    inst.set_reward(0, 0, 0, 0, -1.0);
    inst.set_cost(0, 0, 1, 1, -2.0);
    inst.set_budget(1, -1.0);
    let v = validate_instance(&inst);
    assert_eq!(v.len(), 3);
}

#[test]
fn renormalization_only_within_tolerance() {
    let mut inst = two_state();
    inst.set_transition_row(0, 0, 0, 0, &[0.5, 0.5 + 1e-8]);
    inst.set_transition_row(0, 0, 0, 1, &[0.5, 0.4]);
    inst.renormalize_rows(1e-6);
    let v = validate_instance(&inst);
    assert_eq!(v.len(), 1, "{v:?}");
    assert!((inst.transition_row(0, 0, 0, 0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

#[test]
fn shapes_are_checked() {
    assert!(RmabInstance::zeros(Dims::new(2, 2, 2), 3, 1.0, vec![1], true).is_err());
    assert!(RmabInstance::zeros(Dims::new(1, 0, 2), 3, 1.0, vec![1], true).is_err());
    assert!(RmabInstance::zeros(Dims::new(1, 2, 2), 0, 1.0, vec![1], true).is_err());
    assert!(RmabInstance::zeros(Dims::new(1, 2, 2), 3, 1.5, vec![1], true).is_err());
    let inst = two_state();
    let bad = StateCount::from_nested(&[vec![1, 2]]).unwrap();
    assert!(bad.check_against(&inst).is_err());
    let wrong = FractionalAction::zeros(Dims::new(1, 3, 2));
    assert!(matches!(step_reward(&inst, 0, &wrong), Err(Error::Shape(_))));
}

#[test]
fn non_stationary_slices_are_independent() {
    let mut inst = RmabInstance::zeros(Dims::new(1, 1, 1), 2, 0.5, vec![1], false).unwrap();
    inst.set_prob(0, 0, 0, 0, 0, 1.0);
    inst.set_prob(1, 0, 0, 0, 0, 1.0);
    inst.set_reward(0, 0, 0, 0, 1.0);
    inst.set_reward(1, 0, 0, 0, 3.0);
    inst.set_all_budgets(0.0);
    assert!(validate_instance(&inst).is_empty());
    assert_eq!(inst.reward(1, 0, 0, 0), 3.0);
    assert_eq!(inst.r_max(), 3.0);
    let tail = inst.tail_from(1).unwrap();
    assert_eq!(tail.horizon(), 1);
    assert_eq!(tail.reward(0, 0, 0, 0), 3.0);
    assert!(inst.with_horizon(3).is_err());
}

#[test]
fn step_reward_and_cost_accept_both_tensor_kinds() {
    let inst = two_state();
    let mut a = ActionCount::zeros(inst.dims());
    a.set(0, 0, 1, 2);
    a.set(0, 1, 0, 1);
    a.set(0, 1, 1, 1);
    assert_eq!(step_reward(&inst, 0, &a).unwrap(), 4.0);
    assert_eq!(step_cost(&inst, 0, &a).unwrap(), 3.0);
    let f = a.to_fractional();
    assert_eq!(step_reward(&inst, 0, &f).unwrap(), 4.0);
    assert_eq!(a.state_marginal().as_slice(), &[2, 2]);
}

#[test]
fn example1_matches_transition_table() {
    let sc = example1(3, 0.2, 0.9, 5).unwrap();
    let inst = &sc.instance;
    // (cluster, state, action) -> next state with probability one
    let table = [
        ((0, 0, 0), 2),
        ((0, 0, 1), 1),
        ((0, 1, 0), 2),
        ((0, 1, 1), 1),
        ((0, 2, 0), 2),
        ((0, 2, 1), 2),
        ((1, 0, 0), 2),
        ((1, 0, 1), 1),
        ((1, 1, 0), 2),
        ((1, 1, 1), 2),
        ((1, 2, 0), 2),
        ((1, 2, 1), 2),
    ];
    for ((i, s, a), next) in table {
        for s2 in 0..3 {
            let want = if s2 == next { 1.0 } else { 0.0 };
            assert_eq!(inst.prob(0, i, s, a, s2), want, "cluster {i} {s} -{a}-> {s2}");
        }
    }
    assert!((inst.reward(0, 0, 1, 1) - 0.8).abs() < 1e-15);
    assert_eq!(inst.reward(0, 1, 1, 0), 1.0);
    assert_eq!(inst.total_arms(), 6);
    assert_eq!(inst.budget(4), 3.0);
    assert_eq!(sc.start.as_slice(), &[3, 0, 0, 3, 0, 0]);
}

#[test]
fn synthetic_instances_validate_and_are_seed_deterministic() {
    for seed in 0..100 {
        let sc = synthetic_clustered(3, 4, 3, 50, 5, seed, 0.9).unwrap();
        assert!(validate_instance(&sc.instance).is_empty(), "seed {seed}");
        sc.start.check_against(&sc.instance).unwrap();
    }
    let a = synthetic_clustered(2, 3, 2, 40, 4, 11, 1.0).unwrap();
    let b = synthetic_clustered(2, 3, 2, 40, 4, 11, 1.0).unwrap();
    assert_eq!(a.instance, b.instance);
    // dynamics do not depend on the number of arms
    let c = synthetic_clustered(2, 3, 2, 4000, 4, 11, 1.0).unwrap();
    assert_eq!(a.instance.transition_row(0, 1, 2, 1), c.instance.transition_row(0, 1, 2, 1));
    assert_eq!(c.instance.budget(0), 400.0);
}

#[test]
fn two_state_synthetic_uses_engagement_rewards() {
    let sc = synthetic_clustered(1, 2, 2, 10, 3, 5, 1.0).unwrap();
    for a in 0..2 {
        assert_eq!(sc.instance.reward(0, 0, 0, a), 0.0);
        assert_eq!(sc.instance.reward(0, 0, 1, a), 1.0);
    }
}
