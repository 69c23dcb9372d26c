//! Expected collision time of a transmission interval, by quadrature of the
//! conditional occupancy probability and by direct path simulation. Frame
//! units throughout (`T_f = 1`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::ctmc::active_prob;
use crate::quad::adaptive_simpson;

/// Absolute tolerance of every quadrature in this crate.
pub const QUAD_TOL: f64 = 1e-10;

/// Frame timing in frame units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub alpha: f64,
    pub delta: f64,
}

/// Which transmission window and which observation an interval relates to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// `[delta, alpha]`, frame-start observation.
    Phase1,
    /// `[alpha, 1]`, frame-start observation.
    Phase2Frame,
    /// `[alpha + delta, 1]`, observation at `alpha`.
    Phase2Ergodic,
}

impl Window {
    pub const ALL: [Window; 3] = [Window::Phase1, Window::Phase2Frame, Window::Phase2Ergodic];

    /// Time of the conditioning observation.
    pub fn origin(self, t: &Timing) -> f64 {
        match self {
            Window::Phase2Ergodic => t.alpha,
            _ => 0.0,
        }
    }

    pub fn span(self, t: &Timing) -> (f64, f64) {
        match self {
            Window::Phase1 => (t.delta, t.alpha),
            Window::Phase2Frame => (t.alpha, 1.0),
            Window::Phase2Ergodic => (t.alpha + t.delta, 1.0),
        }
    }

    /// Interval of length `theta` at the window start after an IDLE
    /// observation and at the window end after an ACTIVE one.
    pub fn reference_interval(self, theta: f64, active: bool, t: &Timing) -> (f64, f64) {
        let (lo, hi) = self.span(t);
        if active {
            (hi - theta, hi)
        } else {
            (lo, lo + theta)
        }
    }
}

/// `int_a^b Pr{X(s) = ACTIVE | X(origin) = obs} ds` by adaptive Simpson on
/// matrix-exponential transition probabilities.
pub fn collision_by_quadrature(a: f64, b: f64, origin: f64, active: bool, lambda: f64, mu: f64) -> f64 {
    adaptive_simpson(|s| active_prob(lambda, mu, s - origin, active), a, b, QUAD_TOL)
}

/// Quadrature value of the reference placement of length `theta`.
pub fn phi_by_quadrature(w: Window, theta: f64, active: bool, lambda: f64, mu: f64, t: &Timing) -> f64 {
    let (a, b) = w.reference_interval(theta, active, t);
    collision_by_quadrature(a, b, w.origin(t), active, lambda, mu)
}

/// Mean and standard error of a sample statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_sums(n: f64, sum: f64, sum_sq: f64) -> Self {
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Self {
            mean,
            se: (var / n).sqrt(),
        }
    }

    /// Whether `value` is within `k` standard errors (plus a rounding floor).
    pub fn agrees(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se + 1e-12
    }
}

/// Active time of one simulated path inside `[a, b]`, the path starting in
/// `active` at `origin` and running to `end`.
fn one_path<R: Rng>(rng: &mut R, a: f64, b: f64, origin: f64, end: f64, active: bool, leave_idle: &Exp<f64>, leave_active: &Exp<f64>) -> f64 {
    let mut t = origin;
    let mut on = active;
    let mut hit = 0.0;
    while t < end {
        let hold = if on { leave_active.sample(rng) } else { leave_idle.sample(rng) };
        let next = (t + hold).min(end);
        if on {
            hit += (next.min(b) - t.max(a)).max(0.0);
        }
        t = next;
        on = !on;
    }
    hit
}

/// Monte Carlo estimate of the active time in `[a, b]` over `paths` paths.
/// Paths are split into fixed chunks with their own streams, so the result
/// does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn collision_by_simulation(
    a: f64,
    b: f64,
    origin: f64,
    active: bool,
    lambda: f64,
    mu: f64,
    paths: u64,
    seed: u64,
) -> Estimate {
    const CHUNKS: u64 = 64;
    let leave_idle = Exp::new(lambda).expect("positive rate");
    let leave_active = Exp::new(mu).expect("positive rate");
    let sums: Vec<(f64, f64)> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = paths / CHUNKS + u64::from(c < paths % CHUNKS);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let v = one_path(&mut rng, a, b, origin, b, active, &leave_idle, &leave_active);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    Estimate::from_sums(paths as f64, s, s2)
}

/// Monte Carlo value of the reference placement of length `theta`.
pub fn phi_by_simulation(w: Window, theta: f64, active: bool, lambda: f64, mu: f64, t: &Timing, paths: u64, seed: u64) -> Estimate {
    let (a, b) = w.reference_interval(theta, active, t);
    collision_by_simulation(a, b, w.origin(t), active, lambda, mu, paths, seed)
}

/// Empirical `Pr{X(t) = ACTIVE | X(0) = from}`.
pub fn transition_by_simulation(lambda: f64, mu: f64, t: f64, from_active: bool, paths: u64, seed: u64) -> Estimate {
    let leave_idle = Exp::new(lambda).expect("positive rate");
    let leave_active = Exp::new(mu).expect("positive rate");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..paths {
        let mut s = 0.0;
        let mut on = from_active;
        loop {
            s += if on { leave_active.sample(&mut rng) } else { leave_idle.sample(&mut rng) };
            if s > t {
                break;
            }
            on = !on;
        }
        hits += u64::from(on);
    }
    let n = paths as f64;
    let p = hits as f64 / n;
    Estimate {
        mean: p,
        se: (p * (1.0 - p) / n).sqrt(),
    }
}
