//! Brute-force search over discretized schedules inside a transmission window.

use rayon::prelude::*;

use crate::phi::{Timing, Window};

/// `int_a^b Pr{X(s) = ACTIVE | X(origin) = obs} ds` from the textbook
/// two-state solution `p(u) = pi + (1{obs} - pi) e^{-(lambda + mu) u}`.
pub fn interval_collision(a: f64, b: f64, origin: f64, active: bool, lambda: f64, mu: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let r = lambda + mu;
    let pi = lambda / r;
    let x = if active { 1.0 } else { 0.0 };
    pi * (b - a) + (x - pi) * ((-r * (a - origin)).exp() - (-r * (b - origin)).exp()) / r
}

/// Outcome of a grid search for one `(window, theta, observation)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    /// Smallest expected collision among the candidates.
    pub best: f64,
    /// The best candidate as up to two `(start, end)` pieces.
    pub pieces: [(f64, f64); 2],
    pub candidates: usize,
}

/// Minimum expected collision over single intervals with `points` start
/// positions and two-piece schedules (split ratios `j / 10`, both starts on
/// `points`-point grids) of total length `theta` inside the window.
pub fn grid_search(w: Window, theta: f64, active: bool, lambda: f64, mu: f64, t: &Timing, points: usize) -> SearchResult {
    let (lo, hi) = w.span(t);
    let origin = w.origin(t);
    let room = hi - lo - theta;
    assert!(room >= -1e-12, "theta does not fit the window");
    let room = room.max(0.0);
    let cost = |a: f64, b: f64| interval_collision(a, b, origin, active, lambda, mu);
    let step = |i: usize, span: f64| span * i as f64 / (points - 1) as f64;

    let mut best = SearchResult {
        best: f64::INFINITY,
        pieces: [(0.0, 0.0); 2],
        candidates: 0,
    };
    for i in 0..points {
        let s = lo + step(i, room);
        let c = cost(s, s + theta);
        best.candidates += 1;
        if c < best.best {
            best.best = c;
            best.pieces = [(s, s + theta), (s + theta, s + theta)];
        }
    }
    let two: Vec<SearchResult> = (1..10)
        .into_par_iter()
        .map(|j| {
            let first = theta * j as f64 / 10.0;
            let second = theta - first;
            let mut local = SearchResult {
                best: f64::INFINITY,
                pieces: [(0.0, 0.0); 2],
                candidates: 0,
            };
            for i in 0..points {
                let s1 = lo + step(i, room);
                let left = room - (s1 - lo);
                for k in 0..points {
                    let s2 = s1 + first + step(k, left);
                    let c = cost(s1, s1 + first) + cost(s2, s2 + second);
                    local.candidates += 1;
                    if c < local.best {
                        local.best = c;
                        local.pieces = [(s1, s1 + first), (s2, s2 + second)];
                    }
                }
            }
            local
        })
        .collect();
    for r in two {
        best.candidates += r.candidates;
        if r.best < best.best {
            best.best = r.best;
            best.pieces = r.pieces;
        }
    }
    best
}
