//! Feasible points near a bang-bang iterate of a linear objective.
//!
//! When every collision curve is linear the inner minimizer jumps between
//! the bounds of each fraction, so the dual iterates never produce a feasible
//! primal point by themselves. The helpers here work on a flat list of
//! fractions ("slots") and are shared by the frame-level and ergodic problems.

use super::dual::PRICE_FLOOR;
use super::DualVars;

/// One time fraction of a linear problem.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Slot {
    pub upper: f64,
    /// Collision price per unit fraction, compared against `value`.
    pub price: f64,
    /// Marginal Lagrangian value of the fraction at the current multipliers.
    pub value: f64,
    /// Objective per unit fraction, in the units of the constraint rows.
    pub cost: f64,
    /// Contribution to `[R1/W, R2/W, source power, relay power]` per unit fraction.
    pub unit: [f64; 4],
}

fn rows(slots: &[Slot], theta: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (s, t) in slots.iter().zip(theta) {
        for (o, u) in out.iter_mut().zip(&s.unit) {
            *o += t * u;
        }
    }
    out
}

/// Candidate fractions: the iterate scaled uniformly onto the rate target,
/// tie resolutions at increasing tolerances, and a greedy fill by value per
/// unit collision. `target` is `[rho, rho, P_s, P_r]`.
pub(crate) fn linear_candidates(slots: &[Slot], bang: &[f64], nu: &DualVars, target: [f64; 4]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let rho = target[0];

    let got = rows(slots, bang);
    let weakest = got[0].min(got[1]);
    if weakest > 0.0 {
        let c = rho / weakest;
        if bang.iter().zip(slots).all(|(t, s)| c * t <= s.upper * (1.0 + 1e-12)) {
            out.push(bang.iter().zip(slots).map(|(t, s)| (c * t).min(s.upper)).collect());
        }
    }

    out.extend(tie_candidates(slots, nu, target));

    let mut order: Vec<(usize, f64)> = slots
        .iter()
        .enumerate()
        .filter(|(_, s)| s.upper > 0.0 && (s.unit[0] > 0.0 || s.unit[1] > 0.0))
        .map(|(j, s)| {
            let worth = (nu.zeta * s.unit[0] + nu.sigma * s.unit[1] + 1e-12 * (s.unit[0] + s.unit[1]))
                / s.cost.max(f64::MIN_POSITIVE);
            (j, worth)
        })
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut theta = vec![0.0; slots.len()];
    let (mut got1, mut got2) = (0.0, 0.0);
    for (j, _) in order {
        let u = &slots[j].unit;
        let need1 = if u[0] > 0.0 { (rho - got1).max(0.0) / u[0] } else { 0.0 };
        let need2 = if u[1] > 0.0 { (rho - got2).max(0.0) / u[1] } else { 0.0 };
        let t = need1.max(need2).min(slots[j].upper);
        if t <= 0.0 {
            continue;
        }
        theta[j] = t;
        got1 += t * u[0];
        got2 += t * u[1];
        if got1 >= rho && got2 >= rho {
            break;
        }
    }
    out.push(theta);
    out
}

/// Fractions whose value is within a relative `tol` of their price are
/// undetermined by the inner problem. Those are fixed by making the rows with
/// a positive multiplier hold with equality (minimum-norm solution), the
/// others being set to their bang-bang value.
fn tie_candidates(slots: &[Slot], nu: &DualVars, target: [f64; 4]) -> Vec<Vec<f64>> {
    let nu_arr = nu.to_array();
    let active: Vec<usize> = (0..4).filter(|&i| nu_arr[i] > 1e3 * PRICE_FLOOR).collect();
    let mut out = Vec::new();
    if active.is_empty() {
        return out;
    }
    let mut last_free: Option<Vec<usize>> = None;
    for tol in [1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
        let mut theta = vec![0.0; slots.len()];
        let mut free = Vec::new();
        for (j, s) in slots.iter().enumerate() {
            if s.upper <= 0.0 {
                continue;
            }
            if s.value > s.price * (1.0 + tol) {
                theta[j] = s.upper;
            } else if s.value >= s.price * (1.0 - tol) {
                free.push(j);
            }
        }
        if free.is_empty() || last_free.as_ref() == Some(&free) {
            continue;
        }
        let fixed = rows(slots, &theta);
        let a = nalgebra::DMatrix::from_fn(active.len(), free.len(), |i, j| slots[free[j]].unit[active[i]]);
        let b = nalgebra::DVector::from_fn(active.len(), |i, _| target[active[i]] - fixed[active[i]]);
        let Ok(x) = a.svd(true, true).solve(&b, 1e-12) else {
            continue;
        };
        for (k, &j) in free.iter().enumerate() {
            theta[j] = x[k].clamp(0.0, slots[j].upper);
        }
        out.push(theta);
        last_free = Some(free);
    }
    out
}
