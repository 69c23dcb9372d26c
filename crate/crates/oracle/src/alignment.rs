//! Brute-force check that giving the sub-channels of one band different
//! fractions and intervals does not reduce the collision time.

use rayon::prelude::*;

use crate::placement::interval_collision;

/// One band with two sub-channels, frame units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoChannelBand {
    pub g_sr: [f64; 2],
    pub g_sd: [f64; 2],
    pub g_rd: [f64; 2],
    pub x_active: bool,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub delta: f64,
    pub rho: f64,
    pub ps_max: f64,
    pub pr_max: f64,
}

fn persp(theta: f64, e: f64) -> f64 {
    if theta <= 0.0 {
        0.0
    } else {
        theta * (e / theta).ln_1p() / std::f64::consts::LN_2
    }
}

/// Expected active time in the union of `[a1, b1]` and `[a2, b2]`.
fn union_collision(s1: (f64, f64), s2: (f64, f64), active: bool, lambda: f64, mu: f64) -> f64 {
    let c = |a: f64, b: f64| interval_collision(a, b, 0.0, active, lambda, mu);
    let overlap = (s1.1.min(s2.1) - s1.0.max(s2.0)).max(0.0);
    let mid = if overlap > 0.0 { c(s1.0.max(s2.0), s1.1.min(s2.1)) } else { 0.0 };
    c(s1.0, s1.1) + c(s2.0, s2.1) - mid
}

/// Smallest collision time over a coarse grid of unaligned schedules that
/// meet the rate target within the budgets, or `None` when none does.
///
/// Each sub-channel gets its own fraction in each phase (`levels` values per
/// window), its own interval start (`starts` positions), and the budgets are
/// split over the four source slots and the two relay slots in quarters.
pub fn best_unaligned(band: &TwoChannelBand, levels: usize, starts: usize) -> Option<f64> {
    let w1 = (band.delta, band.alpha);
    let w2 = (band.alpha, 1.0);
    let frac = |w: (f64, f64), i: usize| (w.1 - w.0) * i as f64 / (levels - 1) as f64;
    let spans = |w: (f64, f64), len: f64| -> Vec<(f64, f64)> {
        (0..starts)
            .map(|j| {
                let s = w.0 + (w.1 - w.0 - len) * j as f64 / (starts - 1).max(1) as f64;
                (s, s + len)
            })
            .collect()
    };
    let quarters: Vec<[f64; 4]> = {
        let mut v = Vec::new();
        for a in 0..=4 {
            for b in 0..=4 - a {
                for c in 0..=4 - a - b {
                    let d = 4 - a - b - c;
                    v.push([a as f64 / 4.0, b as f64 / 4.0, c as f64 / 4.0, d as f64 / 4.0]);
                }
            }
        }
        v
    };
    let relay: Vec<[f64; 2]> = (0..=4).map(|a| [a as f64 / 4.0, 1.0 - a as f64 / 4.0]).collect();
    let combos: Vec<[usize; 4]> = (0..levels.pow(4))
        .map(|i| [i % levels, i / levels % levels, i / levels.pow(2) % levels, i / levels.pow(3)])
        .collect();
    combos
        .par_iter()
        .filter_map(|&[i1a, i1b, i2a, i2b]| {
            let th = [frac(w1, i1a), frac(w1, i1b), frac(w2, i2a), frac(w2, i2b)];
            // Best achievable min(R1, R2) for these fractions over the power grid.
            let mut rate: f64 = 0.0;
            for q in &quarters {
                for r in &relay {
                    let (mut r1, mut r2) = (0.0, 0.0);
                    for k in 0..2 {
                        let (p1, p2, pr) = (q[k] * band.ps_max, q[2 + k] * band.ps_max, r[k] * band.pr_max);
                        let (g, h) = (band.g_sd[k], band.g_rd[k]);
                        let a = band.g_sr[k].max(g);
                        r1 += persp(th[k], a * p1) + persp(th[2 + k], g * p2);
                        r2 += persp(th[k], g * p1) + persp(th[2 + k], g * p2 + h * pr);
                    }
                    rate = rate.max(r1.min(r2));
                }
            }
            if rate < band.rho {
                return None;
            }
            let mut best = f64::INFINITY;
            for s1a in spans(w1, th[0]) {
                for s1b in spans(w1, th[1]) {
                    let c1 = union_collision(s1a, s1b, band.x_active, band.lambda, band.mu);
                    for s2a in spans(w2, th[2]) {
                        for s2b in spans(w2, th[3]) {
                            let c2 = union_collision(s2a, s2b, band.x_active, band.lambda, band.mu);
                            best = best.min(c1 + c2);
                        }
                    }
                }
            }
            Some(best)
        })
        .reduce_with(f64::min)
}
