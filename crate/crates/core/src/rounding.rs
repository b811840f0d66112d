//! Turning fractional counts into integral ones.

use rand::Rng;

use crate::counts::{step_cost, ActionCount, FractionalAction, StateCount};
use crate::error::{Error, Result};
use crate::instance::RmabInstance;

/// Values this close to an integer are treated as that integer.
pub const INTEGRALITY_TOL: f64 = 1e-7;

fn snapped_floor(x: f64) -> f64 {
    (x + INTEGRALITY_TOL).floor()
}

/// Round non-negative reals summing to the integer `m` to integers summing to
/// `m`, each equal to the floor or the ceiling of its input.
///
/// Fractional parts are settled pairwise: the smallest fractional part is
/// pushed into the largest one until at most one fractional value remains.
pub fn round_counts(x: &[f64], m: u64) -> Result<Vec<u64>> {
    if let Some(v) = x.iter().find(|v| !(**v >= -INTEGRALITY_TOL)) {
        return Err(Error::InvalidArgument(format!("negative entry {v}")));
    }
    let sum: f64 = x.iter().sum();
    if (sum - m as f64).abs() > INTEGRALITY_TOL * (1.0 + m as f64) {
        return Err(Error::InvalidArgument(format!(
            "entries sum to {sum}, expected the integer {m}"
        )));
    }
    let mut base: Vec<f64> = x.iter().map(|&v| snapped_floor(v.max(0.0))).collect();
    let mut frac: Vec<f64> = x
        .iter()
        .zip(&base)
        .map(|(&v, &f)| (v.max(0.0) - f).max(0.0))
        .collect();
    loop {
        let open: Vec<usize> = (0..frac.len())
            .filter(|&k| frac[k] > INTEGRALITY_TOL && frac[k] < 1.0 - INTEGRALITY_TOL)
            .collect();
        if open.len() < 2 {
            break;
        }
        let lo = *open
            .iter()
            .min_by(|&&a, &&b| frac[a].total_cmp(&frac[b]))
            .unwrap();
        let hi = *open
            .iter()
            .filter(|&&k| k != lo)
            .max_by(|&&a, &&b| frac[a].total_cmp(&frac[b]).then(b.cmp(&a)))
            .unwrap();
        let moved = frac[lo].min(1.0 - frac[hi]);
        frac[lo] -= moved;
        frac[hi] += moved;
        if frac[lo] <= INTEGRALITY_TOL {
            frac[lo] = 0.0;
        }
        if frac[hi] >= 1.0 - INTEGRALITY_TOL {
            frac[hi] = 0.0;
            base[hi] += 1.0;
        }
    }
    // A single leftover fractional value can only be roundoff of the total.
    let mut out: Vec<u64> = base.iter().map(|&v| v as u64).collect();
    for (k, f) in frac.iter().enumerate() {
        if *f >= 1.0 - INTEGRALITY_TOL {
            out[k] += 1;
        }
    }
    let total: u64 = out.iter().sum();
    if total != m {
        // Distribute any roundoff shortfall to the largest leftover fractions.
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
        let mut total = total;
        for &k in order.iter().cycle().take(x.len() * 2) {
            if total == m {
                break;
            }
            if total < m && frac[k] > 0.0 {
                out[k] += 1;
                frac[k] = 0.0;
                total += 1;
            }
        }
        if total != m {
            return Err(Error::Numerical(format!(
                "rounding produced total {total}, expected {m}"
            )));
        }
    }
    Ok(out)
}

/// Systematic sampling: select exactly `Σx` indices so that index `k` is
/// selected with probability `x[k]`.
///
/// Points `ℓ - 1 + u` for `ℓ = 1..=Σx` are dropped on the cumulative sums;
/// index `k` is selected when a point falls in `[Σ_{j<k} x_j, Σ_{j≤k} x_j)`.
/// `u` should be uniform on `[0, 1)`.
pub fn bucket_sample(x: &[f64], u: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!("offset {u} outside [0, 1)")));
    }
    if let Some(v) = x
        .iter()
        .find(|&&v| !(v >= -INTEGRALITY_TOL && v <= 1.0 + INTEGRALITY_TOL))
    {
        return Err(Error::InvalidArgument(format!("entry {v} outside [0, 1]")));
    }
    let sum: f64 = x.iter().sum();
    let k = sum.round();
    if (sum - k).abs() > INTEGRALITY_TOL * (1.0 + k) {
        return Err(Error::InvalidArgument(format!(
            "entries sum to {sum}, which is not an integer"
        )));
    }
    let k = k as usize;
    let mut selected = Vec::with_capacity(k);
    let mut lo = 0.0;
    let mut point = 0usize;
    for (idx, &v) in x.iter().enumerate() {
        let hi = if idx + 1 == x.len() {
            k as f64
        } else {
            lo + v.clamp(0.0, 1.0)
        };
        while point < k && (point as f64 + u) < hi {
            if point as f64 + u >= lo {
                selected.push(idx);
            }
            point += 1;
        }
        lo = hi;
    }
    selected.dedup();
    if selected.len() != k {
        return Err(Error::Numerical(format!(
            "systematic sampling selected {} of {k} items",
            selected.len()
        )));
    }
    Ok(selected)
}

/// Floor every fractional action count; arms left over in a cell take the
/// zero-cost action.
pub fn floor_action(
    inst: &RmabInstance,
    t: usize,
    mu: &StateCount,
    alpha: &FractionalAction,
) -> ActionCount {
    let d = inst.dims();
    let mut out = ActionCount::zeros(d);
    for i in 0..d.clusters {
        for s in 0..d.states {
            let z = inst.zero_cost_action(t, i, s);
            let have = mu.get(i, s);
            let mut used = 0u64;
            for a in (0..d.actions).filter(|&a| a != z) {
                let want = snapped_floor(alpha.get(i, s, a).max(0.0)) as u64;
                let n = want.min(have - used);
                out.set(i, s, a, n);
                used += n;
            }
            out.set(i, s, z, have - used);
        }
    }
    out
}

/// Floor every fractional count, then hand out the arms left in each cell by
/// systematic sampling on the fractional parts. The result always matches
/// `mu` cell by cell but may exceed the budget.
pub fn bucket_action<R: Rng + ?Sized>(
    inst: &RmabInstance,
    mu: &StateCount,
    alpha: &FractionalAction,
    rng: &mut R,
) -> Result<ActionCount> {
    let d = inst.dims();
    let mut out = ActionCount::zeros(d);
    for i in 0..d.clusters {
        for s in 0..d.states {
            let have = mu.get(i, s);
            let cell = alpha.cell(i, s);
            let floors: Vec<u64> = cell.iter().map(|&v| snapped_floor(v.max(0.0)) as u64).collect();
            let mut fracs: Vec<f64> = cell
                .iter()
                .zip(&floors)
                .map(|(&v, &f)| (v.max(0.0) - f as f64).clamp(0.0, 1.0))
                .map(|f| if f < INTEGRALITY_TOL { 0.0 } else { f })
                .collect();
            let floor_total: u64 = floors.iter().sum();
            if floor_total > have {
                return Err(Error::InvalidArgument(format!(
                    "fluid action at cluster {i}, state {s} holds more than {have} arms"
                )));
            }
            let left = have - floor_total;
            for (a, &f) in floors.iter().enumerate() {
                out.set(i, s, a, f);
            }
            if left == 0 {
                continue;
            }
            // Match the fractional parts to the integral leftover exactly.
            let fsum: f64 = fracs.iter().sum();
            if (fsum - left as f64).abs() > 1e-6 * (1.0 + left as f64) {
                return Err(Error::InvalidArgument(format!(
                    "fluid action at cluster {i}, state {s} sums to {} but {have} arms are present",
                    floor_total as f64 + fsum
                )));
            }
            if fsum > 0.0 {
                let scale = left as f64 / fsum;
                fracs.iter_mut().for_each(|f| *f = (*f * scale).min(1.0));
                let fix = left as f64 - fracs.iter().sum::<f64>();
                if fix.abs() > 0.0 {
                    if let Some(k) = (0..fracs.len()).max_by(|&a, &b| fracs[a].total_cmp(&fracs[b])) {
                        fracs[k] = (fracs[k] + fix).clamp(0.0, 1.0);
                    }
                }
            }
            let u: f64 = rng.random();
            for a in bucket_sample(&fracs, u)? {
                out.add(i, s, a, 1);
            }
        }
    }
    Ok(out)
}

/// Move arms to the zero-cost action, most expensive cells first, until the
/// action fits in the period's budget.
pub fn enforce_budget(inst: &RmabInstance, t: usize, action: &mut ActionCount) -> Result<()> {
    let budget = inst.budget(t);
    let mut cost = step_cost(inst, t, action)?;
    if cost <= budget + 1e-9 {
        return Ok(());
    }
    let d = inst.dims();
    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..d.clusters {
        for s in 0..d.states {
            for a in 0..d.actions {
                if inst.cost(t, i, s, a) > 0.0 && action.get(i, s, a) > 0 {
                    cells.push((i, s, a));
                }
            }
        }
    }
    cells.sort_by(|x, y| {
        inst.cost(t, y.0, y.1, y.2)
            .total_cmp(&inst.cost(t, x.0, x.1, x.2))
            .then(y.cmp(x))
    });
    for (i, s, a) in cells {
        if cost <= budget + 1e-9 {
            break;
        }
        let c = inst.cost(t, i, s, a);
        let need = ((cost - budget) / c - 1e-9).ceil().max(1.0) as u64;
        let n = need.min(action.get(i, s, a));
        action.set(i, s, a, action.get(i, s, a) - n);
        action.add(i, s, inst.zero_cost_action(t, i, s), n);
        cost -= n as f64 * c;
    }
    Ok(())
}
