#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmab::examples::Scenario;
use rmab::{Dims, RmabInstance, StateCount};

/// Small random instance: N <= 5, |S| <= 3, |A| = 2, T <= 4, K <= 2, budget
/// of one or two unit-cost actions.
pub fn tiny(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=2usize);
    let s = rng.random_range(2..=3usize);
    let t = rng.random_range(2..=4usize);
    let gamma = if rng.random_bool(0.5) { 1.0 } else { 0.9 };
    let total = rng.random_range(k as u64..=5);
    let mut sizes = vec![1u64; k];
    for _ in k as u64..total {
        let i = rng.random_range(0..k);
        sizes[i] += 1;
    }
    let mut inst = RmabInstance::zeros(Dims::new(k, s, 2), t, gamma, sizes.clone(), true).unwrap();
    for i in 0..k {
        for st in 0..s {
            for a in 0..2 {
                let mut row: Vec<f64> = (0..s)
                    .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
                    .collect();
                if row.iter().sum::<f64>() == 0.0 {
                    row[rng.random_range(0..s)] = 1.0;
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                inst.set_transition_row(0, i, st, a, &row);
                inst.set_reward(0, i, st, a, (rng.random::<f64>() * 4.0).round() / 4.0);
            }
            inst.set_cost(0, i, st, 1, 1.0);
        }
    }
    inst.set_all_budgets(rng.random_range(1..=2u32) as f64);
    let mut start = StateCount::zeros(k, s);
    for (i, &n) in sizes.iter().enumerate() {
        for _ in 0..n {
            start.add(i, rng.random_range(0..s), 1);
        }
    }
    Scenario {
        instance: inst,
        start,
    }
}

/// Random start with the same cluster totals as `start`.
pub fn reshuffle(start: &StateCount, rng: &mut impl Rng) -> StateCount {
    let mut out = StateCount::zeros(start.num_clusters(), start.num_states());
    for i in 0..start.num_clusters() {
        for _ in 0..start.cluster_total(i) {
            out.add(i, rng.random_range(0..start.num_states()), 1);
        }
    }
    out
}
