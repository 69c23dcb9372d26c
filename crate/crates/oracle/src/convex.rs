//! Generic solver for the frame-level program in energy form: minimize the
//! expected collision time over fractions `theta` and energies `P = p theta`,
//! subject to both rate rows and both budgets. Log-barrier interior point
//! with damped Newton steps and a phase-one search for a strictly feasible
//! start.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::phi::{Timing, Window};

/// What a band's fraction is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    Idle,
    Active,
    /// No sensing: stationary occupancy everywhere.
    Stationary,
}

/// A frame-level instance in plain numbers (frame units, `T_f = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInstance {
    pub g_sr: Vec<f64>,
    pub g_sd: Vec<f64>,
    pub g_rd: Vec<f64>,
    pub band_of: Vec<usize>,
    /// Observation conditioning each band.
    pub obs: Vec<Observation>,
    /// `(lambda, mu)` per band, in units of `1 / T_f`.
    pub rates: Vec<(f64, f64)>,
    pub timing: Timing,
    /// Rate target `R_min / W`.
    pub rho: f64,
    pub ps_max: f64,
    pub pr_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSolution {
    /// Whether a strictly feasible point was found.
    pub feasible: bool,
    pub objective: f64,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub pr: Vec<f64>,
    /// Bound on `objective - optimum` from the barrier parameter.
    pub gap_bound: f64,
}

/// Value, gradient and Hessian of a smooth function.
struct Taylor {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Taylor {
    fn zero(dim: usize) -> Self {
        Self {
            value: 0.0,
            grad: DVector::zeros(dim),
            hess: DMatrix::zeros(dim, dim),
        }
    }
}

fn occupancy(u: f64, obs: Observation, lambda: f64, mu: f64) -> (f64, f64) {
    let r = lambda + mu;
    let pi = lambda / r;
    let e = (-r * u).exp();
    match obs {
        Observation::Idle => (pi - pi * e, pi * r * e),
        Observation::Active => (pi + (1.0 - pi) * e, -(1.0 - pi) * r * e),
        Observation::Stationary => (pi, 0.0),
    }
}

/// Adds `theta log2(1 + sum_j c_j z_j / theta)` to `acc`, where `theta = z[t]`.
fn add_perspective(acc: &mut Taylor, z: &DVector<f64>, t: usize, energy: &[(usize, f64)]) {
    let th = z[t];
    let e: f64 = energy.iter().map(|(j, c)| c * z[*j]).sum();
    let x = e / th;
    acc.value += th * x.ln_1p() / LN_2;
    acc.grad[t] += (x.ln_1p() - x / (1.0 + x)) / LN_2;
    let de = 1.0 / ((1.0 + x) * LN_2);
    let k = 1.0 / (th * (1.0 + x) * (1.0 + x) * LN_2);
    acc.hess[(t, t)] -= k * x * x;
    for &(j, c) in energy {
        acc.grad[j] += de * c;
        acc.hess[(t, j)] += k * x * c;
        acc.hess[(j, t)] += k * x * c;
        for &(l, d) in energy {
            acc.hess[(j, l)] -= k * c * d;
        }
    }
}

impl FrameInstance {
    fn n(&self) -> usize {
        self.g_sd.len()
    }

    fn m(&self) -> usize {
        self.obs.len()
    }

    fn upper(&self) -> Vec<f64> {
        let t = &self.timing;
        let mut u = vec![t.alpha - t.delta; self.m()];
        u.extend(vec![1.0 - t.alpha; self.m()]);
        u.extend(vec![self.ps_max; 2 * self.n()]);
        u.extend(vec![self.pr_max; self.n()]);
        u
    }

    /// Expected collision of one band and phase with its first two derivatives.
    fn band_cost(&self, m: usize, phase2: bool, theta: f64) -> (f64, f64, f64) {
        let (lambda, mu) = self.rates[m];
        let obs = self.obs[m];
        let t = &self.timing;
        if obs == Observation::Stationary {
            let pi = lambda / (lambda + mu);
            return (pi * theta, pi, 0.0);
        }
        let w = if phase2 { Window::Phase2Frame } else { Window::Phase1 };
        let active = obs == Observation::Active;
        let (a, b) = w.reference_interval(theta, active, t);
        let origin = w.origin(t);
        let value = crate::placement::interval_collision(a, b, origin, active, lambda, mu);
        // The moving end is the start of the interval after ACTIVE, the end after IDLE.
        let (p, dp) = occupancy(if active { a } else { b } - origin, obs, lambda, mu);
        (value, p, if active { -dp } else { dp })
    }

    fn objective(&self, z: &DVector<f64>) -> Taylor {
        let m = self.m();
        let mut out = Taylor::zero(z.len());
        for b in 0..m {
            for (i, phase2) in [(b, false), (m + b, true)] {
                let (v, d1, d2) = self.band_cost(b, phase2, z[i]);
                out.value += v;
                out.grad[i] = d1;
                out.hess[(i, i)] = d2;
            }
        }
        out
    }

    /// Constraint rows `g_i(z) <= 0`, each divided by its scale.
    fn constraints(&self, z: &DVector<f64>) -> Vec<Taylor> {
        let (n, m) = (self.n(), self.m());
        let dim = z.len();
        let mut r1 = Taylor::zero(dim);
        let mut r2 = Taylor::zero(dim);
        let mut ps = Taylor::zero(dim);
        let mut pr = Taylor::zero(dim);
        for k in 0..n {
            let b = self.band_of[k];
            let (i1, i2) = (b, m + b);
            let (ip1, ip2, ipr) = (2 * m + k, 2 * m + n + k, 2 * m + 2 * n + k);
            let (g, h) = (self.g_sd[k], self.g_rd[k]);
            let a = self.g_sr[k].max(g);
            add_perspective(&mut r1, z, i1, &[(ip1, a)]);
            add_perspective(&mut r1, z, i2, &[(ip2, g)]);
            add_perspective(&mut r2, z, i1, &[(ip1, g)]);
            add_perspective(&mut r2, z, i2, &[(ip2, g), (ipr, h)]);
            ps.value += z[ip1] + z[ip2];
            ps.grad[ip1] = 1.0;
            ps.grad[ip2] = 1.0;
            pr.value += z[ipr];
            pr.grad[ipr] = 1.0;
        }
        let rho = self.rho.max(1e-12);
        let rate_row = |r: Taylor| Taylor {
            value: (self.rho - r.value) / rho,
            grad: -r.grad / rho,
            hess: -r.hess / rho,
        };
        ps.value -= self.ps_max;
        pr.value -= self.pr_max;
        let scale = |mut t: Taylor, s: f64| {
            t.value /= s;
            t.grad /= s;
            t
        };
        vec![rate_row(r1), rate_row(r2), scale(ps, self.ps_max), scale(pr, self.pr_max)]
    }

    fn start(&self) -> DVector<f64> {
        let (n, m) = (self.n(), self.m());
        let mut z = DVector::from_vec(self.upper().iter().map(|u| 0.5 * u).collect());
        for k in 0..n {
            z[2 * m + k] = 0.25 * self.ps_max / n as f64;
            z[2 * m + n + k] = 0.25 * self.ps_max / n as f64;
            z[2 * m + 2 * n + k] = 0.5 * self.pr_max / n as f64;
        }
        z
    }
}

/// A program `min f(w)` subject to `g_i(w) <= 0` and `lo <= w <= hi`.
trait Program {
    fn objective(&self, w: &DVector<f64>) -> Taylor;
    fn constraints(&self, w: &DVector<f64>) -> Vec<Taylor>;
    fn bounds(&self) -> Vec<(f64, f64)>;
}

impl Program for FrameInstance {
    fn objective(&self, w: &DVector<f64>) -> Taylor {
        FrameInstance::objective(self, w)
    }

    fn constraints(&self, w: &DVector<f64>) -> Vec<Taylor> {
        FrameInstance::constraints(self, w)
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.upper().into_iter().map(|u| (0.0, u)).collect()
    }
}

/// Phase one: minimize the largest constraint value `s` over `(z, s)`.
struct PhaseOne<'a>(&'a FrameInstance);

impl Program for PhaseOne<'_> {
    fn objective(&self, w: &DVector<f64>) -> Taylor {
        let mut t = Taylor::zero(w.len());
        t.value = w[w.len() - 1];
        t.grad[w.len() - 1] = 1.0;
        t
    }

    fn constraints(&self, w: &DVector<f64>) -> Vec<Taylor> {
        let d = w.len() - 1;
        let z = w.rows(0, d).into_owned();
        self.0
            .constraints(&z)
            .into_iter()
            .map(|c| {
                let mut t = Taylor::zero(d + 1);
                t.value = c.value - w[d];
                t.grad.rows_mut(0, d).copy_from(&c.grad);
                t.grad[d] = -1.0;
                t.hess.view_mut((0, 0), (d, d)).copy_from(&c.hess);
                t
            })
            .collect()
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = self.0.bounds();
        b.push((f64::NEG_INFINITY, f64::INFINITY));
        b
    }
}

/// `t f - sum log(-g_i) - sum log` of the finite bound distances, or `None`
/// outside the strict interior.
fn barrier(p: &dyn Program, w: &DVector<f64>, t: f64, with_derivatives: bool) -> Option<Taylor> {
    let dim = w.len();
    let mut out = Taylor::zero(dim);
    for (i, (lo, hi)) in p.bounds().into_iter().enumerate() {
        for (dist, sign) in [(w[i] - lo, 1.0), (hi - w[i], -1.0)] {
            if dist.is_infinite() {
                continue;
            }
            if dist <= 0.0 {
                return None;
            }
            out.value -= dist.ln();
            out.grad[i] -= sign / dist;
            out.hess[(i, i)] += 1.0 / (dist * dist);
        }
    }
    for c in p.constraints(w) {
        if !(c.value < 0.0) {
            return None;
        }
        let s = -c.value;
        out.value -= s.ln();
        if with_derivatives {
            out.grad += &c.grad / s;
            out.hess += &c.hess / s + (&c.grad * c.grad.transpose()) / (s * s);
        }
    }
    let f = p.objective(w);
    if !f.value.is_finite() {
        return None;
    }
    out.value += t * f.value;
    out.grad += t * f.grad;
    out.hess += t * f.hess;
    Some(out)
}

/// Damped Newton on the barrier function; `stop` ends the search early.
fn centering(p: &dyn Program, w: &mut DVector<f64>, t: f64, stop: &dyn Fn(&DVector<f64>) -> bool) {
    for _ in 0..200 {
        let Some(b) = barrier(p, w, t, true) else {
            return;
        };
        let hess = b.hess.clone();
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&(-&b.grad)),
            None => {
                let shift = 1e-10 * hess.diagonal().amax().max(1.0);
                match (hess + DMatrix::identity(w.len(), w.len()) * shift).cholesky() {
                    Some(ch) => ch.solve(&(-&b.grad)),
                    None => -b.grad.clone(),
                }
            }
        };
        let decrement = -b.grad.dot(&step);
        if decrement / 2.0 <= 1e-14 {
            return;
        }
        let mut s = 1.0;
        loop {
            let trial = &*w + s * &step;
            if let Some(v) = barrier(p, &trial, t, false) {
                if v.value <= b.value - 0.25 * s * decrement {
                    *w = trial;
                    break;
                }
            }
            s *= 0.5;
            if s < 1e-16 {
                return;
            }
        }
        if stop(w) {
            return;
        }
    }
}

/// Barrier path from `t = 1` until the duality bound `rows / t` is below `gap`.
fn path(p: &dyn Program, w: &mut DVector<f64>, gap: f64, stop: &dyn Fn(&DVector<f64>) -> bool) -> f64 {
    let rows = (p.constraints(w).len() + 2 * p.bounds().iter().filter(|(l, h)| l.is_finite() && h.is_finite()).count()) as f64;
    let mut t = 1.0;
    loop {
        centering(p, w, t, stop);
        if stop(w) || rows / t <= gap {
            return rows / t;
        }
        t *= 8.0;
    }
}

/// Solves the instance to an absolute objective accuracy of about `1e-11`.
pub fn solve(inst: &FrameInstance) -> ConvexSolution {
    let (n, m) = (inst.n(), inst.m());
    let z0 = inst.start();
    let worst = inst.constraints(&z0).iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let mut z = if worst < 0.0 {
        z0
    } else {
        let mut w = z0.clone().insert_row(z0.len(), worst + 1.0);
        let d = z0.len();
        let phase = PhaseOne(inst);
        path(&phase, &mut w, 1e-9, &|w: &DVector<f64>| w[d] < -1e-6);
        w.rows(0, d).into_owned()
    };
    let feasible = inst.constraints(&z).iter().all(|c| c.value < 0.0);
    let gap_bound = if feasible { path(inst, &mut z, 1e-11, &|_: &DVector<f64>| false) } else { f64::INFINITY };
    ConvexSolution {
        feasible,
        objective: inst.objective(&z).value,
        theta1: z.as_slice()[..m].to_vec(),
        theta2: z.as_slice()[m..2 * m].to_vec(),
        p1: z.as_slice()[2 * m..2 * m + n].to_vec(),
        p2: z.as_slice()[2 * m + n..2 * m + 2 * n].to_vec(),
        pr: z.as_slice()[2 * m + 2 * n..].to_vec(),
        gap_bound,
    }
}

/// The instance for a core configuration and network state, Phase 2
/// conditioned on the frame-start sensing (or on nothing when `sensing_free`).
pub fn from_core(
    nsi: &crn_share::netmodel::Nsi,
    cfg: &crn_share::netmodel::SystemConfig,
    sensing_free: bool,
) -> FrameInstance {
    let t_f = cfg.frame_duration;
    FrameInstance {
        g_sr: nsi.g_sr.clone(),
        g_sd: nsi.g_sd.clone(),
        g_rd: nsi.g_rd.clone(),
        band_of: cfg.band_of(),
        obs: nsi
            .x
            .iter()
            .map(|x| {
                if sensing_free {
                    Observation::Stationary
                } else if x.is_active() {
                    Observation::Active
                } else {
                    Observation::Idle
                }
            })
            .collect(),
        rates: cfg.traffic.iter().map(|tp| (tp.lambda() * t_f, tp.mu() * t_f)).collect(),
        timing: Timing {
            alpha: cfg.alpha,
            delta: cfg.delta,
        },
        rho: cfg.r_min / cfg.bandwidth,
        ps_max: cfg.p_s_max,
        pr_max: cfg.p_r_max,
    }
}
