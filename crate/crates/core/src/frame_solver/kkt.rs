//! Optimality diagnostics for a primal-dual pair.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::dual::{relative_violation, DualProblem};
use super::{band_value_phase1, band_value_phase2, DualVars, FrameProblem, InnerPoint};
use crate::traffic::CollisionCurve;

/// Components of the KKT residual.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// Largest violation of the inner stationarity conditions, including the
    /// sign conditions at clamped fractions and zero ratios.
    pub stationarity: f64,
    /// Largest `|nu_i h_i|`.
    pub complementarity: f64,
    /// Largest relative constraint violation.
    pub feasibility: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.feasibility)
    }
}

/// Residual of a one-sided condition `d = 0` when `at_zero` is false, `d <= 0` otherwise.
fn one_sided(d: f64, at_zero: bool) -> f64 {
    if at_zero {
        d.max(0.0)
    } else {
        d.abs()
    }
}

/// `phi'(theta) - V`, which must vanish inside the box, be `>= 0` at 0 and `<= 0` at the bound.
pub(crate) fn theta_residual(curve: &CollisionCurve, theta: f64, value: f64) -> f64 {
    let d = curve.slope(theta) - value;
    let upper = curve.upper();
    if upper <= 0.0 {
        return 0.0;
    }
    if theta <= 0.0 {
        (-d).max(0.0)
    } else if theta >= upper {
        d.max(0.0)
    } else {
        d.abs()
    }
}

pub(crate) fn stationarity(nu: &DualVars, point: &InnerPoint, problem: &FrameProblem<'_>) -> f64 {
    let (nsi, cfg, curves) = (problem.nsi, problem.cfg, &problem.curves);
    let r = &point.ratios;
    let mut worst: f64 = 0.0;
    for k in 0..nsi.g_sd.len() {
        let (g, h) = (nsi.g_sd[k], nsi.g_rd[k]);
        let a = nsi.g_sr[k].max(g);
        let (p1, p2, q) = (r.p1[k], r.p2[k], r.q[k]);
        let d1 = nu.zeta * a / ((1.0 + a * p1) * LN_2) + nu.sigma * g / ((1.0 + g * p1) * LN_2) - nu.epsilon;
        let snr2 = 1.0 + g * p2 + h * q;
        let d2 = nu.zeta * g / ((1.0 + g * p2) * LN_2) + nu.sigma * g / (snr2 * LN_2) - nu.epsilon;
        let dq = nu.sigma * h / (snr2 * LN_2) - nu.eta;
        worst = worst
            .max(one_sided(d1, p1 == 0.0))
            .max(one_sided(d2, p2 == 0.0))
            .max(one_sided(dq, q == 0.0));
    }
    for (m, band) in cfg.band_map.iter().enumerate() {
        let v1 = band_value_phase1(nu, r, nsi, band);
        let v2 = band_value_phase2(nu, r, nsi, band);
        worst = worst
            .max(theta_residual(&curves.phase1[m], point.theta1[m], v1))
            .max(theta_residual(&curves.phase2[m], point.theta2[m], v2));
    }
    worst
}

/// KKT residuals of `point` as a solution of `problem` with multipliers `nu`.
pub fn residuals(problem: &FrameProblem<'_>, nu: &DualVars, point: &InnerPoint) -> KktResidual {
    let rho = problem.cfg.r_min / problem.cfg.bandwidth;
    let slack = point.slack(rho, problem.cfg);
    let complementarity = nu
        .to_array()
        .iter()
        .zip(&slack)
        .map(|(v, h)| (v * h).abs())
        .fold(0.0, f64::max);
    KktResidual {
        stationarity: stationarity(nu, point, problem),
        complementarity,
        feasibility: relative_violation(&slack, &problem.scales()),
    }
}
