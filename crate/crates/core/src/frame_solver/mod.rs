//! Frame-level spectrum sharing: closed-form inner minimization of the
//! Lagrangian and dual ascent on the four multipliers.
//!
//! The inner problem separates. For each sub-channel the optimal power to
//! time ratios depend only on the multipliers and gains; for each band the
//! optimal time fraction then minimizes `phi(theta) - V theta`, where the band
//! value `V` collects the marginal rate gain of its sub-channels.

pub mod dual;
pub mod kkt;
pub(crate) mod recovery;

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::access::place;
use crate::error::{Error, Result};
use crate::netmodel::{rate_r1, rate_r2, Allocation, Nsi, SystemConfig};
use crate::traffic::{CollisionCurve, Occupancy};

pub use dual::{
    maximize_dual, DualEval, DualOutcome, DualProblem, InfeasibilityReason, Recovered, SolveStatus, SolverOptions,
    StepRule, PRICE_FLOOR,
};
pub use kkt::KktResidual;

/// Multipliers of the two rate rows and the two power budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualVars {
    pub zeta: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl DualVars {
    pub const ZERO: Self = Self {
        zeta: 0.0,
        sigma: 0.0,
        epsilon: 0.0,
        eta: 0.0,
    };
    pub const ONES: Self = Self {
        zeta: 1.0,
        sigma: 1.0,
        epsilon: 1.0,
        eta: 1.0,
    };

    pub fn new(zeta: f64, sigma: f64, epsilon: f64, eta: f64) -> Result<Self> {
        let nu = Self {
            zeta,
            sigma,
            epsilon,
            eta,
        };
        if nu.to_array().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig(format!("multipliers must be finite and nonnegative: {nu:?}")));
        }
        Ok(nu)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.zeta, self.sigma, self.epsilon, self.eta]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            zeta: v[0],
            sigma: v[1],
            epsilon: v[2],
            eta: v[3],
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Optimal power-to-time ratios per sub-channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRatios {
    /// Phase-1 source power over the Phase-1 fraction.
    pub p1: Vec<f64>,
    /// Phase-2 source power over the Phase-2 fraction.
    pub p2: Vec<f64>,
    /// Relay power over the Phase-2 fraction.
    pub q: Vec<f64>,
}

/// `log2(1 + x) - x / ((1 + x) ln 2)`: the marginal rate of time at a fixed
/// power-to-time ratio.
pub fn f_aux(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::OutOfRange {
            what: "x",
            value: x,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(f_unchecked(x))
}

pub(crate) fn f_unchecked(x: f64) -> f64 {
    if x < 1e-4 {
        // Series: x^2/2 - 2x^3/3 + 3x^4/4, divided by ln 2.
        x * x * (0.5 - x * (2.0 / 3.0 - 0.75 * x)) / LN_2
    } else {
        (x.ln_1p() - x / (1.0 + x)) / LN_2
    }
}

/// Phase-1 power ratio: the positive root of
/// `zeta a / (1 + a x) + sigma g / (1 + g x) = epsilon ln 2` with
/// `a = max(g_sr, g_sd)` and `g = g_sd`, or 0 when there is none.
pub fn ratio_phase1(nu: &DualVars, g_sr: f64, g_sd: f64) -> Result<f64> {
    let a = g_sr.max(g_sd);
    let g = g_sd;
    let (wa, wg) = (nu.zeta * a, nu.sigma * g);
    let c = nu.epsilon * LN_2;
    if wa + wg <= c {
        return Ok(0.0);
    }
    if c <= 0.0 {
        return Err(Error::Unbounded("phase-1 source"));
    }
    if wg == 0.0 {
        return Ok(nu.zeta / c - 1.0 / a);
    }
    if wa == 0.0 {
        return Ok(nu.sigma / c - 1.0 / g);
    }
    // c a g x^2 + [c (a + g) - (zeta + sigma) a g] x + (c - zeta a - sigma g) = 0
    let qa = c * a * g;
    let qb = c * (a + g) - (nu.zeta + nu.sigma) * a * g;
    let qc = c - wa - wg;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    let x = if qb > 0.0 {
        -2.0 * qc / (qb + disc)
    } else {
        (-qb + disc) / (2.0 * qa)
    };
    Ok(x.max(0.0))
}

/// Phase-2 ratios `(p2, q)` maximizing
/// `zeta log2(1 + g p) + sigma log2(1 + g p + h q) - epsilon p - eta q`.
pub fn ratios_phase2(nu: &DualVars, g_sd: f64, g_rd: f64) -> Result<(f64, f64)> {
    let (g, h) = (g_sd, g_rd);
    let DualVars {
        zeta,
        sigma,
        epsilon,
        eta,
    } = *nu;
    let water = |weight: f64, price: f64, gain: f64, what: &'static str| -> Result<f64> {
        if weight * gain <= price * LN_2 {
            return Ok(0.0);
        }
        if price <= 0.0 {
            return Err(Error::Unbounded(what));
        }
        Ok((weight / (price * LN_2) - 1.0 / gain).max(0.0))
    };
    if g == 0.0 {
        return Ok((0.0, water(sigma, eta, h, "relay")?));
    }
    if h == 0.0 || sigma == 0.0 {
        return Ok((water(zeta + sigma, epsilon, g, "phase-2 source")?, 0.0));
    }
    if eta <= 0.0 {
        return Err(Error::Unbounded("relay"));
    }
    if epsilon <= 0.0 && zeta + sigma > 0.0 {
        return Err(Error::Unbounded("phase-2 source"));
    }

    // Relay on.
    let denom = epsilon - eta * g / h;
    if denom > 0.0 {
        let p = if zeta > 0.0 {
            (zeta / (denom * LN_2) - 1.0 / g).max(0.0)
        } else {
            0.0
        };
        let q = sigma / (eta * LN_2) - 1.0 / h - g / h * p;
        if q > 0.0 {
            return Ok((p, q));
        }
    }
    // Relay off.
    let p = water(zeta + sigma, epsilon, g, "phase-2 source")?;
    if sigma * h / ((1.0 + g * p) * LN_2) <= eta {
        return Ok((p, 0.0));
    }
    Ok(phase2_bisection(nu, g, h))
}

/// Nested bisection on the phase-2 stationarity conditions; the outer
/// derivative in `q` is monotone because the inner maximum is concave in `q`.
fn phase2_bisection(nu: &DualVars, g: f64, h: f64) -> (f64, f64) {
    let best_p = |q: f64| -> f64 {
        let d = |p: f64| {
            nu.zeta * g / ((1.0 + g * p) * LN_2) + nu.sigma * g / ((1.0 + g * p + h * q) * LN_2) - nu.epsilon
        };
        if d(0.0) <= 0.0 {
            return 0.0;
        }
        let mut hi = (nu.zeta + nu.sigma) / (nu.epsilon * LN_2);
        let mut lo = 0.0;
        while d(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if d(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let dq = |q: f64| nu.sigma * h / ((1.0 + g * best_p(q) + h * q) * LN_2) - nu.eta;
    if dq(0.0) <= 0.0 {
        return (best_p(0.0), 0.0);
    }
    let (mut lo, mut hi) = (0.0, nu.sigma / (nu.eta * LN_2));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dq(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    (best_p(q), q)
}

/// Ratios of every sub-channel.
pub fn compute_ratios(nu: &DualVars, nsi: &Nsi) -> Result<PowerRatios> {
    let n = nsi.g_sd.len();
    let mut r = PowerRatios {
        p1: Vec::with_capacity(n),
        p2: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
    };
    for k in 0..n {
        r.p1.push(ratio_phase1(nu, nsi.g_sr[k], nsi.g_sd[k])?);
        let (p2, q) = ratios_phase2(nu, nsi.g_sd[k], nsi.g_rd[k])?;
        r.p2.push(p2);
        r.q.push(q);
    }
    Ok(r)
}

/// Marginal value of Phase-1 time on band `m`.
pub fn band_value_phase1(nu: &DualVars, ratios: &PowerRatios, nsi: &Nsi, band: &[usize]) -> f64 {
    band.iter()
        .map(|&k| {
            let a = nsi.g_sr[k].max(nsi.g_sd[k]);
            nu.zeta * f_unchecked(a * ratios.p1[k]) + nu.sigma * f_unchecked(nsi.g_sd[k] * ratios.p1[k])
        })
        .sum()
}

/// Marginal value of Phase-2 time on band `m`.
pub fn band_value_phase2(nu: &DualVars, ratios: &PowerRatios, nsi: &Nsi, band: &[usize]) -> f64 {
    band.iter()
        .map(|&k| {
            let direct = nsi.g_sd[k] * ratios.p2[k];
            nu.zeta * f_unchecked(direct) + nu.sigma * f_unchecked(direct + nsi.g_rd[k] * ratios.q[k])
        })
        .sum()
}

/// Optimal Phase-1 fraction of band `band` given the sensing outcome `x`.
pub fn theta_phase1(
    nu: &DualVars,
    ratios: &PowerRatios,
    nsi: &Nsi,
    x: Occupancy,
    band: usize,
    cfg: &SystemConfig,
) -> f64 {
    let curve = CollisionCurve::phase1(&cfg.traffic[band], x, &cfg.timing());
    curve.best_fraction(band_value_phase1(nu, ratios, nsi, &cfg.band_map[band]))
}

/// Optimal Phase-2 fraction of band `band` when Phase 2 relies on the frame-start sensing.
pub fn theta_phase2_frame(
    nu: &DualVars,
    ratios: &PowerRatios,
    nsi: &Nsi,
    x: Occupancy,
    band: usize,
    cfg: &SystemConfig,
) -> f64 {
    let curve = CollisionCurve::phase2_frame(&cfg.traffic[band], x, &cfg.timing());
    curve.best_fraction(band_value_phase2(nu, ratios, nsi, &cfg.band_map[band]))
}

/// Collision curves of every band for both phases; they fix both the cost
/// and the interval placement of a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub phase1: Vec<CollisionCurve>,
    pub phase2: Vec<CollisionCurve>,
}

impl CurveSet {
    /// Frame-level strategy: both phases conditioned on `x`.
    pub fn frame(cfg: &SystemConfig, x: &[Occupancy]) -> Self {
        let t = cfg.timing();
        Self {
            phase1: (0..cfg.n_bands()).map(|m| CollisionCurve::phase1(&cfg.traffic[m], x[m], &t)).collect(),
            phase2: (0..cfg.n_bands())
                .map(|m| CollisionCurve::phase2_frame(&cfg.traffic[m], x[m], &t))
                .collect(),
        }
    }

    /// Two sensings: Phase 2 conditioned on `y` sensed at `alpha T_f`.
    pub fn two_sensing(cfg: &SystemConfig, x: &[Occupancy], y: &[Occupancy]) -> Self {
        let t = cfg.timing();
        Self {
            phase1: (0..cfg.n_bands()).map(|m| CollisionCurve::phase1(&cfg.traffic[m], x[m], &t)).collect(),
            phase2: (0..cfg.n_bands())
                .map(|m| CollisionCurve::phase2_ergodic(&cfg.traffic[m], y[m], &t))
                .collect(),
        }
    }

    /// No sensing: stationary collision rate, intervals start right after
    /// the control delay in Phase 1 and at `alpha T_f` in Phase 2.
    pub fn sensing_free(cfg: &SystemConfig) -> Self {
        let t = cfg.timing();
        Self {
            phase1: cfg
                .traffic
                .iter()
                .map(|tp| CollisionCurve::stationary(tp, t.delta, t.phase1_max()))
                .collect(),
            phase2: cfg
                .traffic
                .iter()
                .map(|tp| CollisionCurve::stationary(tp, t.alpha, t.phase2_frame_max()))
                .collect(),
        }
    }

    pub fn is_linear(&self) -> bool {
        self.phase1.iter().chain(&self.phase2).all(|c| c.is_linear())
    }

    /// Objective with every fraction at its bound.
    pub fn ceiling(&self) -> f64 {
        self.phase1.iter().chain(&self.phase2).map(|c| c.value(c.upper())).sum()
    }
}

/// Minimizer of the Lagrangian for one frame, in ratio form.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerPoint {
    pub ratios: PowerRatios,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    /// Collision objective in frame units.
    pub objective: f64,
    /// `R1 / W` and `R2 / W`.
    pub r1: f64,
    pub r2: f64,
    pub source_power: f64,
    pub relay_power: f64,
}

/// Per-band rate and power contributions per unit of time fraction, for
/// fixed ratios. Rates and powers are linear in the fractions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct UnitContribution {
    pub r1: f64,
    pub r2: f64,
    pub source: f64,
    pub relay: f64,
}

pub(crate) fn unit_contributions(ratios: &PowerRatios, nsi: &Nsi, cfg: &SystemConfig) -> (Vec<UnitContribution>, Vec<UnitContribution>) {
    let mut c1 = vec![UnitContribution::default(); cfg.n_bands()];
    let mut c2 = vec![UnitContribution::default(); cfg.n_bands()];
    for (m, band) in cfg.band_map.iter().enumerate() {
        for &k in band {
            let (gsd, grd) = (nsi.g_sd[k], nsi.g_rd[k]);
            let a = nsi.g_sr[k].max(gsd);
            let (p1, p2, q) = (ratios.p1[k], ratios.p2[k], ratios.q[k]);
            c1[m].r1 += (a * p1).ln_1p() / LN_2;
            c1[m].r2 += (gsd * p1).ln_1p() / LN_2;
            c1[m].source += p1;
            c2[m].r1 += (gsd * p2).ln_1p() / LN_2;
            c2[m].r2 += (gsd * p2 + grd * q).ln_1p() / LN_2;
            c2[m].source += p2;
            c2[m].relay += q;
        }
    }
    (c1, c2)
}

impl InnerPoint {
    /// Assembles the point for given ratios and fractions.
    pub(crate) fn from_parts(
        ratios: PowerRatios,
        theta1: Vec<f64>,
        theta2: Vec<f64>,
        curves: &CurveSet,
        nsi: &Nsi,
        cfg: &SystemConfig,
    ) -> Self {
        let (c1, c2) = unit_contributions(&ratios, nsi, cfg);
        let mut p = Self {
            ratios,
            theta1,
            theta2,
            objective: 0.0,
            r1: 0.0,
            r2: 0.0,
            source_power: 0.0,
            relay_power: 0.0,
        };
        for m in 0..cfg.n_bands() {
            let (t1, t2) = (p.theta1[m], p.theta2[m]);
            p.objective += curves.phase1[m].value(t1) + curves.phase2[m].value(t2);
            p.r1 += t1 * c1[m].r1 + t2 * c2[m].r1;
            p.r2 += t1 * c1[m].r2 + t2 * c2[m].r2;
            p.source_power += t1 * c1[m].source + t2 * c2[m].source;
            p.relay_power += t2 * c2[m].relay;
        }
        p
    }

    /// Constraint slacks `h` for rate target `rho = R_min / W`.
    pub fn slack(&self, rho: f64, cfg: &SystemConfig) -> [f64; 4] {
        [
            rho - self.r1,
            rho - self.r2,
            self.source_power - cfg.p_s_max,
            self.relay_power - cfg.p_r_max,
        ]
    }

    /// Powers, fractions and placed intervals.
    pub fn to_allocation(&self, curves: &CurveSet, cfg: &SystemConfig) -> Allocation {
        let band = cfg.band_of();
        let n = cfg.n_subchannels;
        let t_f = cfg.frame_duration;
        Allocation {
            p_s1: (0..n).map(|k| self.ratios.p1[k] * self.theta1[band[k]]).collect(),
            p_s2: (0..n).map(|k| self.ratios.p2[k] * self.theta2[band[k]]).collect(),
            p_r: (0..n).map(|k| self.ratios.q[k] * self.theta2[band[k]]).collect(),
            theta1_hat: self.theta1.clone(),
            theta2_hat: self.theta2.clone(),
            intervals1: (0..cfg.n_bands()).map(|m| place(&curves.phase1[m], self.theta1[m], t_f)).collect(),
            intervals2: (0..cfg.n_bands()).map(|m| place(&curves.phase2[m], self.theta2[m], t_f)).collect(),
        }
    }
}

/// Minimizes the Lagrangian at `nu` for the given collision curves.
pub fn inner_point(nu: &DualVars, nsi: &Nsi, cfg: &SystemConfig, curves: &CurveSet) -> Result<InnerPoint> {
    let ratios = compute_ratios(nu, nsi)?;
    let mut theta1 = Vec::with_capacity(cfg.n_bands());
    let mut theta2 = Vec::with_capacity(cfg.n_bands());
    for (m, band) in cfg.band_map.iter().enumerate() {
        theta1.push(curves.phase1[m].best_fraction(band_value_phase1(nu, &ratios, nsi, band)));
        theta2.push(curves.phase2[m].best_fraction(band_value_phase2(nu, &ratios, nsi, band)));
    }
    Ok(InnerPoint::from_parts(ratios, theta1, theta2, curves, nsi, cfg))
}

/// Minimizer of the frame-level Lagrangian at `nu`.
pub fn inner_solution(nu: &DualVars, nsi: &Nsi, cfg: &SystemConfig) -> Result<Allocation> {
    let curves = CurveSet::frame(cfg, &nsi.x);
    Ok(inner_point(nu, nsi, cfg, &curves)?.to_allocation(&curves, cfg))
}

/// Subgradient of the dual function at the point that produced `alloc`.
pub fn subgradient(_nu: &DualVars, alloc: &Allocation, nsi: &Nsi, cfg: &SystemConfig) -> [f64; 4] {
    let w = cfg.bandwidth;
    [
        (cfg.r_min - rate_r1(alloc, nsi, cfg)) / w,
        (cfg.r_min - rate_r2(alloc, nsi, cfg)) / w,
        alloc.source_power() - cfg.p_s_max,
        alloc.relay_power() - cfg.p_r_max,
    ]
}

fn lagrangian(objective: f64, nu: &DualVars, slack: &[f64; 4]) -> f64 {
    objective + nu.to_array().iter().zip(slack).map(|(v, h)| v * h).sum::<f64>()
}

/// Frame-level problem for one NSI under a fixed set of collision curves.
pub struct FrameProblem<'a> {
    pub nsi: &'a Nsi,
    pub cfg: &'a SystemConfig,
    pub curves: CurveSet,
}

impl<'a> FrameProblem<'a> {
    pub fn new(nsi: &'a Nsi, cfg: &'a SystemConfig, curves: CurveSet) -> Self {
        Self { nsi, cfg, curves }
    }

    fn rho(&self) -> f64 {
        self.cfg.r_min / self.cfg.bandwidth
    }

    fn recovered(&self, ratios: &PowerRatios, theta1: Vec<f64>, theta2: Vec<f64>) -> Recovered<InnerPoint> {
        let p = InnerPoint::from_parts(ratios.clone(), theta1, theta2, &self.curves, self.nsi, self.cfg);
        Recovered {
            objective: p.objective,
            slack: p.slack(self.rho(), self.cfg),
            primal: p,
        }
    }
}

impl DualProblem for FrameProblem<'_> {
    type Primal = InnerPoint;

    fn evaluate(&self, nu: &DualVars) -> Result<DualEval<InnerPoint>> {
        let p = inner_point(nu, self.nsi, self.cfg, &self.curves)?;
        let slack = p.slack(self.rho(), self.cfg);
        Ok(DualEval {
            value: lagrangian(p.objective, nu, &slack),
            objective: p.objective,
            slack,
            primal: p,
        })
    }

    fn scales(&self) -> [f64; 4] {
        let rho = self.rho().max(f64::MIN_POSITIVE);
        [rho, rho, self.cfg.p_s_max, self.cfg.p_r_max]
    }

    fn objective_ceiling(&self) -> f64 {
        self.curves.ceiling()
    }

    fn recover(&self, nu: &DualVars, eval: &DualEval<InnerPoint>) -> Vec<Recovered<InnerPoint>> {
        if !self.curves.is_linear() {
            return Vec::new();
        }
        linear_recovery(self, nu, &eval.primal)
    }
}

/// Feasible points near a bang-bang iterate of the linear objective.
fn linear_recovery(problem: &FrameProblem<'_>, nu: &DualVars, point: &InnerPoint) -> Vec<Recovered<InnerPoint>> {
    let (cfg, nsi, curves) = (problem.cfg, problem.nsi, &problem.curves);
    let rho = problem.rho();
    let r = &point.ratios;
    let (c1, c2) = unit_contributions(r, nsi, cfg);
    let mut slots = Vec::with_capacity(2 * cfg.n_bands());
    let mut bang = Vec::with_capacity(2 * cfg.n_bands());
    for (m, band) in cfg.band_map.iter().enumerate() {
        slots.push(linear_slot(&curves.phase1[m], &c1[m], band_value_phase1(nu, r, nsi, band), 1.0));
        slots.push(linear_slot(&curves.phase2[m], &c2[m], band_value_phase2(nu, r, nsi, band), 1.0));
        bang.push(point.theta1[m]);
        bang.push(point.theta2[m]);
    }
    recovery::linear_candidates(&slots, &bang, nu, [rho, rho, cfg.p_s_max, cfg.p_r_max])
        .into_iter()
        .map(|theta| {
            let theta2 = theta.iter().skip(1).step_by(2).copied().collect();
            let theta1 = theta.into_iter().step_by(2).collect();
            problem.recovered(r, theta1, theta2)
        })
        .collect()
}

/// Recovery slot of one fraction; `weight` scales its cost and row contributions.
pub(crate) fn linear_slot(curve: &CollisionCurve, unit: &UnitContribution, value: f64, weight: f64) -> recovery::Slot {
    recovery::Slot {
        upper: curve.upper(),
        price: curve.slope(0.0),
        value,
        cost: weight * curve.slope(0.0),
        unit: [weight * unit.r1, weight * unit.r2, weight * unit.source, weight * unit.relay],
    }
}

/// Result of a frame-level solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub allocation: Allocation,
    pub duals: DualVars,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub kkt: KktResidual,
    pub status: SolveStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasibility: Option<InfeasibilityReason>,
    /// Collision objective `I / T_f`.
    pub objective: f64,
    /// Largest dual value seen (a lower bound on the optimal objective).
    pub dual_bound: f64,
    /// `R1` and `R2`, bits/s.
    pub rate_r1: f64,
    pub rate_r2: f64,
}

impl SolverReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn duality_gap(&self) -> f64 {
        self.objective - self.dual_bound
    }

    pub fn rate(&self) -> f64 {
        self.rate_r1.min(self.rate_r2)
    }
}

/// Solves a frame problem with the given curves and packages the result.
pub fn solve_with_curves(nsi: &Nsi, cfg: &SystemConfig, curves: CurveSet, opts: &SolverOptions) -> Result<SolverReport> {
    cfg.validate()?;
    nsi.validate(cfg)?;
    let problem = FrameProblem::new(nsi, cfg, curves);
    let out = maximize_dual(&problem, opts)?;
    let (duals, point) = match &out.best {
        Some((nu, rec)) if out.status != SolveStatus::Infeasible => (*nu, rec.primal.clone()),
        _ => (out.last.0, out.last.1.primal.clone()),
    };
    let kkt = kkt::residuals(&problem, &duals, &point);
    let allocation = point.to_allocation(&problem.curves, cfg);
    Ok(SolverReport {
        rate_r1: point.r1 * cfg.bandwidth,
        rate_r2: point.r2 * cfg.bandwidth,
        objective: point.objective,
        dual_bound: out.best_dual_value,
        allocation,
        duals,
        iterations: out.iterations,
        kkt_residual: kkt.max(),
        kkt,
        status: out.status,
        infeasibility: out.infeasibility,
    })
}

/// Minimizes the expected collision time of one frame subject to the rate
/// target and the power budgets.
pub fn solve_frame(nsi: &Nsi, cfg: &SystemConfig, opts: &SolverOptions) -> Result<SolverReport> {
    solve_with_curves(nsi, cfg, CurveSet::frame(cfg, &nsi.x), opts)
}

/// Direct transmission only: the relay links are removed.
pub fn solve_relay_free(nsi: &Nsi, cfg: &SystemConfig, opts: &SolverOptions) -> Result<SolverReport> {
    solve_frame(&nsi.without_relay(), cfg, opts)
}

/// Ignores sensing: the objective is the stationary collision rate times
/// the transmission time. `nsi.x` is not read.
pub fn solve_sensing_free(nsi: &Nsi, cfg: &SystemConfig, opts: &SolverOptions) -> Result<SolverReport> {
    solve_with_curves(nsi, cfg, CurveSet::sensing_free(cfg), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nu(z: f64, s: f64, e: f64, h: f64) -> DualVars {
        DualVars::new(z, s, e, h).unwrap()
    }

    #[test]
    fn f_aux_reference_values() {
        assert_eq!(f_aux(0.0).unwrap(), 0.0);
        assert!((f_aux(1.0).unwrap() - (1.0 - 1.0 / (2.0 * LN_2))).abs() < 1e-15);
        assert!((f_aux(1.0).unwrap() - 0.278_652_4).abs() < 1e-7);
        assert!(f_aux(-1e-3).is_err());
        // Series branch joins the closed form smoothly.
        let x: f64 = 1e-4;
        let closed = (x.ln_1p() - x / (1.0 + x)) / LN_2;
        assert!((f_unchecked(x * (1.0 - 1e-12)) - closed).abs() < 1e-15);
    }

    #[test]
    fn ratio_phase1_reference_values() {
        assert_eq!(ratio_phase1(&nu(0.0, 0.0, 1.0, 1.0), 1.0, 1.0).unwrap(), 0.0);
        let x = ratio_phase1(&nu(1.0, 0.0, 1.0, 1.0), 2.0, 0.5).unwrap();
        assert!((x - (1.0 / LN_2 - 0.5)).abs() < 1e-14);
        assert!((x - 0.942_695).abs() < 1e-6);
        let x = ratio_phase1(&nu(1.0, 1.0, 1.0, 1.0), 1.0, 1.0).unwrap();
        assert!((x - (2.0 / LN_2 - 1.0)).abs() < 1e-14);
        assert!((x - 1.885_390).abs() < 1e-6);
        assert_eq!(
            ratio_phase1(&nu(1.0, 0.0, 0.0, 1.0), 1.0, 1.0),
            Err(Error::Unbounded("phase-1 source"))
        );
    }

    #[test]
    fn ratios_phase2_special_cases() {
        assert_eq!(ratios_phase2(&nu(0.0, 0.0, 1.0, 1.0), 0.4, 1.3).unwrap(), (0.0, 0.0));
        let (p, q) = ratios_phase2(&nu(2.0, 0.0, 1.0, 1.0), 0.4, 1.3).unwrap();
        assert_eq!(q, 0.0);
        assert!((p - (2.0 / LN_2 - 1.0 / 0.4)).abs() < 1e-14);
        assert!(ratios_phase2(&nu(1.0, 1.0, 1.0, 0.0), 0.4, 1.3).is_err());
    }

    #[test]
    fn zero_duals_give_zero_allocation() {
        let cfg = SystemConfig::frame_example(0.3);
        let a = inner_solution(&DualVars::ZERO, &Nsi::frame_example(), &cfg).unwrap();
        assert_eq!(a, Allocation::zero(&cfg));
        let h = subgradient(&DualVars::ZERO, &a, &Nsi::frame_example(), &cfg);
        assert_eq!(h, [0.6, 0.6, -1.0, -1.0]);
    }

    #[test]
    fn idle_band_gets_more_time() {
        let cfg = SystemConfig::frame_example(0.3);
        let mut nsi = Nsi::frame_example();
        nsi.g_sd = vec![0.5, 0.5];
        nsi.g_sr = vec![1.4, 1.4];
        nsi.g_rd = vec![1.4, 1.4];
        let rep = solve_frame(&nsi, &cfg, &SolverOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        let a = rep.allocation;
        assert!(a.theta1_hat[0] > a.theta1_hat[1], "{a:?}");
        assert!(a.theta2_hat[0] >= a.theta2_hat[1], "{a:?}");
    }

    #[test]
    fn low_target_uses_one_subchannel() {
        let cfg = SystemConfig::frame_example(0.3);
        let rep = solve_frame(&Nsi::frame_example(), &cfg, &SolverOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
        assert_eq!(rep.allocation.theta1_hat[1], 0.0);
        assert_eq!(rep.allocation.theta2_hat[1], 0.0);
        assert!(rep.kkt_residual <= 1e-6, "{:?}", rep.kkt);
    }

    #[test]
    fn unattainable_target_is_infeasible() {
        let cfg = SystemConfig::frame_example(5.0);
        let rep = solve_frame(&Nsi::frame_example(), &cfg, &SolverOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible);
    }

    #[test]
    fn sensing_free_ignores_x_and_reports_linear_objective() {
        let cfg = SystemConfig::frame_example(0.3);
        let mut nsi = Nsi::frame_example();
        let a = solve_sensing_free(&nsi, &cfg, &SolverOptions::default()).unwrap();
        nsi.x = vec![Occupancy::Active, Occupancy::Idle];
        let b = solve_sensing_free(&nsi, &cfg, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
        let sum: f64 = a.allocation.theta1_hat.iter().chain(&a.allocation.theta2_hat).sum();
        assert_eq!(a.objective, 0.5 * sum);
    }

    #[test]
    fn relay_free_matches_when_relay_absent() {
        let cfg = SystemConfig::frame_example(0.2);
        let nsi = Nsi::frame_example().without_relay();
        let opts = SolverOptions::default();
        let a = solve_frame(&nsi, &cfg, &opts).unwrap();
        let b = solve_relay_free(&nsi, &cfg, &opts).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn ratio_phase1_solves_its_equation(z in 0.0f64..3.0, s in 0.0f64..3.0, e in 0.05f64..3.0, gsr in 0.0f64..3.0, gsd in 0.0f64..3.0) {
            let nu = nu(z, s, e, 1.0);
            let x = ratio_phase1(&nu, gsr, gsd).unwrap();
            let a = gsr.max(gsd);
            let lhs = |x: f64| z * a / (1.0 + a * x) + s * gsd / (1.0 + gsd * x);
            if x > 0.0 {
                prop_assert!((lhs(x) - e * LN_2).abs() <= 1e-10 * (1.0 + e));
            } else {
                prop_assert!(lhs(0.0) <= e * LN_2 * (1.0 + 1e-12));
            }
        }

        #[test]
        fn ratios_phase2_are_stationary(z in 0.1f64..3.0, s in 0.1f64..3.0, e in 0.1f64..3.0, h in 0.1f64..3.0, g in 0.0f64..3.0, r in 0.0f64..3.0) {
            let nu = nu(z, s, e, h);
            let (p, q) = ratios_phase2(&nu, g, r).unwrap();
            let dp = z * g / ((1.0 + g * p) * LN_2) + s * g / ((1.0 + g * p + r * q) * LN_2) - e;
            let dq = s * r / ((1.0 + g * p + r * q) * LN_2) - h;
            if p > 0.0 { prop_assert!(dp.abs() <= 1e-9); } else { prop_assert!(dp <= 1e-9); }
            if q > 0.0 { prop_assert!(dq.abs() <= 1e-9); } else { prop_assert!(dq <= 1e-9); }
        }

        #[test]
        fn f_aux_is_increasing(x in 0.0f64..50.0) {
            prop_assert!(f_unchecked(x + 1e-3) > f_unchecked(x));
            prop_assert!(f_unchecked(x) >= 0.0);
        }
    }
}
