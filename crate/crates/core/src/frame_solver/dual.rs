//! Projected dual ascent shared by the frame-level and ergodic problems.

use serde::{Deserialize, Serialize};

use super::DualVars;
use crate::error::Result;

/// Floor applied to the power prices so the inner problem stays bounded.
pub const PRICE_FLOOR: f64 = 1e-12;

/// One evaluation of the dual function.
#[derive(Debug, Clone)]
pub struct DualEval<P> {
    /// Lagrangian minimized over the primal variables.
    pub value: f64,
    /// Primal objective (collision time in frame units) at the minimizer.
    pub objective: f64,
    /// Constraint slacks `h`; the dual function's (sub)gradient.
    pub slack: [f64; 4],
    pub primal: P,
}

/// A feasible point built from an iterate when the minimizer itself is not feasible.
#[derive(Debug, Clone)]
pub struct Recovered<P> {
    pub objective: f64,
    pub slack: [f64; 4],
    pub primal: P,
}

/// Problems of the form `min objective s.t. two rate rows >= target and two
/// power rows <= budget`, solved through their dual.
pub trait DualProblem: Sync {
    type Primal: Clone + Send;

    fn evaluate(&self, nu: &DualVars) -> Result<DualEval<Self::Primal>>;

    /// Positive normalizers of the four slack rows, used for relative feasibility.
    fn scales(&self) -> [f64; 4];

    /// Objective with every fraction at its bound. No feasible point costs
    /// more, so a dual value above it certifies infeasibility.
    fn objective_ceiling(&self) -> f64;

    /// Primal recovery hook for problems whose minimizer jumps (linear objectives).
    fn recover(&self, _nu: &DualVars, _eval: &DualEval<Self::Primal>) -> Vec<Recovered<Self::Primal>> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// `s_k = s0 / sqrt(k)`.
    Diminishing { s0: f64 },
    /// `s_k = gamma (UB - q_k) / |h_k|^2`, with `UB` the best feasible objective.
    Polyak { gamma: f64 },
    /// One sweep of exact coordinate maximizations (bisection on each
    /// partial derivative, which is monotone in its own coordinate) followed
    /// by a damped projected Newton step with a finite-difference Hessian.
    CoordinateNewton,
    /// Central-cut ellipsoid method started from a ball of the given radius
    /// around the initial multipliers. Insensitive to kinks and to poor
    /// scaling; stops once its upper bound meets the best dual value.
    Ellipsoid { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub step_rule: StepRule,
    pub max_iter: usize,
    /// Stop when `|nu_{k+1} - nu_k| <= tol`.
    pub tol: f64,
    /// Relative constraint violation accepted as feasible.
    pub feasibility_tol: f64,
    pub initial_duals: DualVars,
    /// Declare infeasibility once `|nu|` exceeds this.
    pub dual_norm_limit: f64,
    /// Declare infeasibility after this many consecutive iterations with a
    /// positive rate slack.
    pub stall_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            step_rule: StepRule::Ellipsoid { radius: 1e3 },
            max_iter: 6_000,
            tol: 1e-14,
            feasibility_tol: 1e-8,
            initial_duals: DualVars::ONES,
            dual_norm_limit: 1e6,
            stall_limit: 10_000,
        }
    }
}

impl SolverOptions {
    /// Plain projected subgradient ascent with steps of length `s0 / sqrt(k)`
    /// along the normalized subgradient.
    pub fn diminishing(s0: f64, max_iter: usize) -> Self {
        Self {
            step_rule: StepRule::Diminishing { s0 },
            max_iter,
            tol: 1e-9,
            ..Self::default()
        }
    }

    /// Polyak steps towards the best feasible objective.
    pub fn polyak(gamma: f64, max_iter: usize) -> Self {
        Self {
            step_rule: StepRule::Polyak { gamma },
            max_iter,
            tol: 1e-9,
            ..Self::default()
        }
    }

    /// Coordinate-Newton iterations alone, which converge fast on smooth duals.
    pub fn coordinate_newton(max_iter: usize) -> Self {
        Self {
            step_rule: StepRule::CoordinateNewton,
            max_iter,
            tol: 1e-10,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Why infeasibility was declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibilityReason {
    /// Dual value above the largest attainable objective.
    DualBound,
    DualNormLimit,
    RateSlackStall,
}

#[derive(Debug, Clone)]
pub struct DualOutcome<P> {
    pub status: SolveStatus,
    pub infeasibility: Option<InfeasibilityReason>,
    /// Best feasible primal found, with the iterate that produced it.
    pub best: Option<(DualVars, Recovered<P>)>,
    /// The last iterate and its evaluation.
    pub last: (DualVars, DualEval<P>),
    /// Largest dual value seen; a lower bound on the optimum.
    pub best_dual_value: f64,
    pub iterations: usize,
}

impl<P> DualOutcome<P> {
    pub fn duality_gap(&self) -> Option<f64> {
        self.best.as_ref().map(|(_, r)| r.objective - self.best_dual_value)
    }
}

pub(crate) fn relative_violation(slack: &[f64; 4], scales: &[f64; 4]) -> f64 {
    slack
        .iter()
        .zip(scales)
        .map(|(h, s)| (h / s).max(0.0))
        .fold(0.0, f64::max)
}

fn project(v: [f64; 4]) -> DualVars {
    DualVars {
        zeta: v[0].max(0.0),
        sigma: v[1].max(0.0),
        epsilon: v[2].max(PRICE_FLOOR),
        eta: v[3].max(PRICE_FLOOR),
    }
}

fn dist(a: &DualVars, b: &DualVars) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Tracker<'a, Q: DualProblem + ?Sized> {
    problem: &'a Q,
    opts: &'a SolverOptions,
    scales: [f64; 4],
    best: Option<(DualVars, Recovered<Q::Primal>)>,
    best_exact: Option<(DualVars, Recovered<Q::Primal>)>,
    best_dual_value: f64,
    stall: usize,
}

/// Of two points feasible within `tol`, the exactly feasible one unless the
/// other is better by more than the tolerance itself; otherwise the cheaper.
fn preferred<P>(a: (DualVars, Recovered<P>), b: (DualVars, Recovered<P>), scales: &[f64; 4], tol: f64) -> (DualVars, Recovered<P>) {
    let exact = |r: &Recovered<P>| relative_violation(&r.slack, scales) <= EXACT;
    let margin = |r: &Recovered<P>| tol * (1.0 + r.objective.abs());
    let (ea, eb) = (exact(&a.1), exact(&b.1));
    if ea && !eb && b.1.objective >= a.1.objective - margin(&a.1) {
        a
    } else if eb && !ea && a.1.objective >= b.1.objective - margin(&b.1) {
        b
    } else if a.1.objective <= b.1.objective {
        a
    } else {
        b
    }
}

/// Relative violation treated as exact feasibility.
const EXACT: f64 = 1e-10;

impl<Q: DualProblem + ?Sized> Tracker<'_, Q> {
    fn offer(&mut self, nu: &DualVars, cand: Recovered<Q::Primal>) {
        let violation = relative_violation(&cand.slack, &self.scales);
        if violation > self.opts.feasibility_tol {
            return;
        }
        let slot = if violation <= EXACT { &mut self.best_exact } else { &mut self.best };
        if slot.as_ref().is_none_or(|(_, b)| cand.objective < b.objective) {
            *slot = Some((*nu, cand));
        }
    }

    fn chosen(&self) -> Option<(DualVars, Recovered<Q::Primal>)> {
        match (&self.best_exact, &self.best) {
            (Some(e), Some(t)) => Some(preferred(e.clone(), t.clone(), &self.scales, self.opts.feasibility_tol)),
            (e, t) => e.clone().or_else(|| t.clone()),
        }
    }

    fn observe(&mut self, nu: &DualVars, eval: &DualEval<Q::Primal>) -> Option<InfeasibilityReason> {
        self.best_dual_value = self.best_dual_value.max(eval.value);
        self.offer(
            nu,
            Recovered {
                objective: eval.objective,
                slack: eval.slack,
                primal: eval.primal.clone(),
            },
        );
        for cand in self.problem.recover(nu, eval) {
            self.offer(nu, cand);
        }
        if eval.slack[0] > 0.0 || eval.slack[1] > 0.0 {
            self.stall += 1;
        } else {
            self.stall = 0;
        }
        let ceiling = self.problem.objective_ceiling();
        if eval.value > ceiling + 1e-9 * (1.0 + ceiling.abs()) {
            Some(InfeasibilityReason::DualBound)
        } else if nu.norm() > self.opts.dual_norm_limit {
            Some(InfeasibilityReason::DualNormLimit)
        } else if self.stall >= self.opts.stall_limit {
            Some(InfeasibilityReason::RateSlackStall)
        } else {
            None
        }
    }
}

/// Maximizes the dual function of `problem` from `opts.initial_duals`.
pub fn maximize_dual<Q: DualProblem + ?Sized>(problem: &Q, opts: &SolverOptions) -> Result<DualOutcome<Q::Primal>> {
    if let StepRule::Ellipsoid { radius } = opts.step_rule {
        return ellipsoid_then_newton(problem, opts, radius);
    }
    let mut tracker = Tracker {
        problem,
        opts,
        scales: problem.scales(),
        best: None,
        best_exact: None,
        best_dual_value: f64::NEG_INFINITY,
        stall: 0,
    };
    let mut nu = project(opts.initial_duals.to_array());
    let mut eval = problem.evaluate(&nu)?;
    let mut lm = 1e-8;
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIterations;
    let mut infeasibility = tracker.observe(&nu, &eval);
    if infeasibility.is_some() {
        status = SolveStatus::Infeasible;
    }

    while status == SolveStatus::MaxIterations && iterations < opts.max_iter {
        iterations += 1;
        let (next, next_eval) = match opts.step_rule {
            StepRule::Diminishing { s0 } => {
                let len = norm(&eval.slack);
                let s = if len > 0.0 { s0 / (iterations as f64).sqrt() / len } else { 0.0 };
                let n = project(add_scaled(&nu.to_array(), &eval.slack, s));
                let e = problem.evaluate(&n)?;
                (n, e)
            }
            StepRule::Polyak { gamma } => {
                let h2: f64 = eval.slack.iter().map(|h| h * h).sum();
                let target = match &tracker.chosen() {
                    Some((_, b)) => b.objective,
                    None => problem.objective_ceiling(),
                };
                let gap = (target - eval.value).max(0.0);
                // Fall back to a diminishing step once the bound is reached.
                let s = if h2 > 0.0 && gap > 0.0 {
                    gamma * gap / h2
                } else {
                    1.0 / (iterations as f64).sqrt()
                };
                let n = project(add_scaled(&nu.to_array(), &eval.slack, s));
                let e = problem.evaluate(&n)?;
                (n, e)
            }
            StepRule::CoordinateNewton => {
                let (n, e) = coordinate_sweep(problem, &nu, eval)?;
                newton_step(problem, &n, &e, &mut lm)?
            }
            StepRule::Ellipsoid { .. } => unreachable!("handled above"),
        };
        let moved = dist(&nu, &next);
        nu = next;
        eval = next_eval;
        if let Some(reason) = tracker.observe(&nu, &eval) {
            status = SolveStatus::Infeasible;
            infeasibility = Some(reason);
        } else if moved <= opts.tol {
            status = SolveStatus::Optimal;
        }
    }

    let mut out = DualOutcome {
        status,
        infeasibility,
        best: tracker.chosen(),
        last: (nu, eval),
        best_dual_value: tracker.best_dual_value,
        iterations,
    };
    if out.status == SolveStatus::Optimal && !closes_gap(&out) {
        // The iterates stopped moving (typically on a kink of the dual)
        // without a primal point that certifies it. Do not claim optimality.
        out.status = SolveStatus::MaxIterations;
    }
    Ok(out)
}

/// Relative duality gap below which a recovered point is accepted as optimal.
const GAP_TOL: f64 = 1e-7;

fn closes_gap<P>(out: &DualOutcome<P>) -> bool {
    out.duality_gap().is_some_and(|g| g <= GAP_TOL * (1.0 + out.best_dual_value.abs()))
}

fn closes_gap_exactly<P>(out: &DualOutcome<P>, scales: &[f64; 4]) -> bool {
    closes_gap(out) && out.best.as_ref().is_some_and(|(_, r)| relative_violation(&r.slack, scales) <= EXACT)
}

/// The ellipsoid phase locates the multipliers; when its best recovered
/// point does not close the gap (smooth objectives, whose minimizers only
/// approach feasibility), coordinate-Newton iterations finish from the
/// best centre.
fn ellipsoid_then_newton<Q: DualProblem + ?Sized>(problem: &Q, opts: &SolverOptions, radius: f64) -> Result<DualOutcome<Q::Primal>> {
    let mut first = ellipsoid(problem, opts, radius)?;
    if first.status == SolveStatus::Infeasible {
        return Ok(first);
    }
    if closes_gap_exactly(&first, &problem.scales()) {
        first.status = SolveStatus::Optimal;
        return Ok(first);
    }
    let polish = SolverOptions {
        step_rule: StepRule::CoordinateNewton,
        initial_duals: first.last.0,
        max_iter: opts.max_iter.saturating_sub(first.iterations).max(1),
        ..*opts
    };
    let mut second = maximize_dual(problem, &polish)?;
    second.iterations += first.iterations;
    second.best_dual_value = second.best_dual_value.max(first.best_dual_value);
    let scales = problem.scales();
    second.best = match (first.best, second.best.take()) {
        (Some(a), Some(b)) => Some(preferred(a, b, &scales, opts.feasibility_tol)),
        (a, b) => a.or(b),
    };
    if second.status != SolveStatus::Infeasible && closes_gap(&second) {
        second.status = SolveStatus::Optimal;
    }
    Ok(second)
}

fn ellipsoid<Q: DualProblem + ?Sized>(problem: &Q, opts: &SolverOptions, radius: f64) -> Result<DualOutcome<Q::Primal>> {
    const N: f64 = 4.0;
    let mut tracker = Tracker {
        problem,
        opts,
        scales: problem.scales(),
        best: None,
        best_exact: None,
        best_dual_value: f64::NEG_INFINITY,
        stall: 0,
    };
    let mut c = opts.initial_duals.to_array();
    let mut b = [[0.0; 4]; 4];
    for (i, row) in b.iter_mut().enumerate() {
        row[i] = radius;
    }
    let mut best_eval: Option<(DualVars, DualEval<Q::Primal>)> = None;
    let mut upper = f64::INFINITY;
    let mut status = SolveStatus::MaxIterations;
    let mut infeasibility = None;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        // Cut direction: the supergradient at a feasible centre, otherwise
        // the violated bound.
        let g = match (0..4).find(|&i| c[i] < FLOORS[i]) {
            Some(i) => {
                let mut e = [0.0; 4];
                e[i] = 1.0;
                e
            }
            None => {
                let nu = DualVars::from_array(c);
                let eval = problem.evaluate(&nu)?;
                if let Some(reason) = tracker.observe(&nu, &eval) {
                    status = SolveStatus::Infeasible;
                    infeasibility = Some(reason);
                    best_eval = Some((nu, eval));
                    break;
                }
                let g = eval.slack;
                let bg = mat_t_vec(&b, &g);
                upper = upper.min(eval.value + dot(&bg, &bg).sqrt());
                if best_eval.as_ref().is_none_or(|(_, b)| eval.value > b.value) {
                    best_eval = Some((nu, eval));
                }
                g
            }
        };
        let lower = tracker.best_dual_value;
        if upper - lower <= opts.tol * (1.0 + lower.abs()) {
            status = SolveStatus::Optimal;
            break;
        }
        // P = B B^T is kept in factored form so it stays positive semidefinite.
        let bg = mat_t_vec(&b, &g);
        let len = dot(&bg, &bg).sqrt();
        if !(len > 0.0) || !len.is_finite() {
            status = SolveStatus::Optimal;
            break;
        }
        let u = bg.map(|x| x / len);
        let step = mat_vec(&b, &u);
        for i in 0..4 {
            c[i] += step[i] / (N + 1.0);
        }
        let scale = N / (N * N - 1.0).sqrt();
        let shrink = 1.0 - ((N - 1.0) / (N + 1.0)).sqrt();
        for row in b.iter_mut() {
            let ru = dot(row, &u);
            for j in 0..4 {
                row[j] = scale * (row[j] - shrink * ru * u[j]);
            }
        }
    }

    if status == SolveStatus::Optimal && tracker.chosen().is_none() {
        status = SolveStatus::MaxIterations;
    }
    let last = match best_eval {
        Some(x) => x,
        None => {
            let nu = project(c);
            let eval = problem.evaluate(&nu)?;
            (nu, eval)
        }
    };
    Ok(DualOutcome {
        status,
        infeasibility,
        best: tracker.chosen(),
        last,
        best_dual_value: tracker.best_dual_value,
        iterations,
    })
}

fn mat_vec(a: &[[f64; 4]; 4], v: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = dot(&a[i], v);
    }
    out
}

fn mat_t_vec(a: &[[f64; 4]; 4], v: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (row, x) in a.iter().zip(v) {
        for j in 0..4 {
            out[j] += row[j] * x;
        }
    }
    out
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const FLOORS: [f64; 4] = [0.0, 0.0, PRICE_FLOOR, PRICE_FLOOR];

/// Maximizes the dual along each coordinate in turn. The partial derivative
/// `h_i` is nonincreasing in `nu_i`, so its sign change is bracketed and bisected.
fn coordinate_sweep<Q: DualProblem + ?Sized>(
    problem: &Q,
    nu: &DualVars,
    eval: DualEval<Q::Primal>,
) -> Result<(DualVars, DualEval<Q::Primal>)> {
    let mut v = nu.to_array();
    let mut current = eval;
    // Prices first: with the rate multipliers at zero nothing is transmitted
    // and the prices would collapse to their floor.
    for i in [2, 3, 0, 1] {
        let at = |v: &[f64; 4], x: f64| {
            let mut w = *v;
            w[i] = x;
            DualVars::from_array(w)
        };
        let h_i = current.slack[i];
        let (mut lo, mut hi);
        if h_i > 0.0 {
            lo = v[i];
            hi = (2.0 * v[i]).max(1e-6);
            let mut e = problem.evaluate(&at(&v, hi))?;
            let mut grow = 0;
            while e.slack[i] > 0.0 && grow < 60 {
                lo = hi;
                hi *= 4.0;
                e = problem.evaluate(&at(&v, hi))?;
                grow += 1;
            }
            if e.slack[i] > 0.0 {
                // Unbounded ascent direction; leave it to the infeasibility test.
                v[i] = hi;
                current = e;
                continue;
            }
        } else if h_i < 0.0 && v[i] > FLOORS[i] {
            hi = v[i];
            let floor_eval = problem.evaluate(&at(&v, FLOORS[i]))?;
            if floor_eval.slack[i] <= 0.0 {
                v[i] = FLOORS[i];
                current = floor_eval;
                continue;
            }
            lo = FLOORS[i];
        } else {
            continue;
        }
        // Invariant: h_i(lo) > 0 >= h_i(hi).
        for _ in 0..200 {
            let mid = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
                break;
            }
            if problem.evaluate(&at(&v, mid))?.slack[i] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // The dual is maximized anywhere in [lo, hi]; keep the better end.
        let e_lo = problem.evaluate(&at(&v, lo))?;
        let e_hi = problem.evaluate(&at(&v, hi))?;
        let (x, e) = if e_lo.value > e_hi.value { (lo, e_lo) } else { (hi, e_hi) };
        if e.value >= current.value {
            v[i] = x;
            current = e;
        }
    }
    Ok((DualVars::from_array(v), current))
}

fn add_scaled(a: &[f64; 4], d: &[f64; 4], s: f64) -> [f64; 4] {
    [a[0] + s * d[0], a[1] + s * d[1], a[2] + s * d[2], a[3] + s * d[3]]
}

/// Solves the symmetric positive (semi)definite system `A x = b` of size
/// `n <= 4` by Cholesky; `None` when `A` is not numerically positive definite.
fn cholesky_solve(a: &[[f64; 4]; 4], b: &[f64; 4], n: usize) -> Option<[f64; 4]> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0; 4];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = [0.0; 4];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

fn newton_step<Q: DualProblem + ?Sized>(
    problem: &Q,
    nu: &DualVars,
    eval: &DualEval<Q::Primal>,
    lm: &mut f64,
) -> Result<(DualVars, DualEval<Q::Primal>)> {
    let v = nu.to_array();
    let h = eval.slack;
    // Coordinates pinned at their lower bound with a descent slope stay put.
    let free: Vec<usize> = (0..4).filter(|&i| v[i] > FLOORS[i] || h[i] > 0.0).collect();
    if free.is_empty() {
        return Ok((*nu, eval.clone()));
    }

    // Finite-difference Hessian of the dual (negative semidefinite).
    let mut neg_hess = [[0.0; 4]; 4];
    for (c, &j) in free.iter().enumerate() {
        let step = 1e-7 * v[j].abs() + 1e-12;
        let mut w = v;
        w[j] += step;
        let hj = problem.evaluate(&DualVars::from_array(w))?.slack;
        for (r, &i) in free.iter().enumerate() {
            neg_hess[r][c] = -(hj[i] - h[i]) / step;
        }
    }
    let n = free.len();
    for r in 0..n {
        for c in 0..r {
            let s = 0.5 * (neg_hess[r][c] + neg_hess[c][r]);
            neg_hess[r][c] = s;
            neg_hess[c][r] = s;
        }
    }
    let mut g = [0.0; 4];
    for (r, &i) in free.iter().enumerate() {
        g[r] = h[i];
    }
    let scale = (0..n).map(|r| neg_hess[r][r].abs()).fold(0.0, f64::max).max(1e-12);
    let diag: Vec<f64> = (0..n).map(|r| neg_hess[r][r].abs().max(1e-12 * scale)).collect();

    for _ in 0..40 {
        let mut a = neg_hess;
        for (r, row) in a.iter_mut().enumerate().take(n) {
            // Marquardt damping: the diagonal spans many orders of magnitude.
            row[r] += *lm * (diag[r] + 1e-12 * scale) + 1e-300;
        }
        let Some(d) = cholesky_solve(&a, &g, n) else {
            *lm = (*lm * 10.0).max(1e-8);
            continue;
        };
        let mut w = v;
        for (r, &i) in free.iter().enumerate() {
            w[i] += d[r];
        }
        let cand = project(w);
        let cand_eval = problem.evaluate(&cand)?;
        let moved: [f64; 4] = {
            let c = cand.to_array();
            [c[0] - v[0], c[1] - v[1], c[2] - v[2], c[3] - v[3]]
        };
        let predicted: f64 = moved.iter().zip(&h).map(|(m, hh)| m * hh).sum();
        if norm(&moved) == 0.0 {
            return Ok((cand, cand_eval));
        }
        // Sufficient increase of the (concave) dual value.
        let gain = cand_eval.value - eval.value;
        let tiny = 1e-15 * (1.0 + eval.value.abs());
        if gain >= 1e-4 * predicted.max(0.0) - tiny {
            *lm = (*lm * 0.3).max(1e-12);
            return Ok((cand, cand_eval));
        }
        *lm = (*lm * 10.0).max(1e-8);
    }
    Ok((*nu, eval.clone()))
}
