//! Oracle checks of the production formulas and solvers.

use std::fmt;

use crn_oracle::alignment::{best_unaligned, TwoChannelBand};
use crn_oracle::convex;
use crn_oracle::phi::{phi_by_quadrature, phi_by_simulation, Timing, Window};
use crn_oracle::placement::grid_search;
use crn_share::frame_solver::{solve_frame, SolveStatus, SolverOptions};
use crn_share::netmodel::{BudgetMode, Nsi, SystemConfig};
use crn_share::rng::substream;
use crn_share::traffic::{phi1, phi2_ergodic, phi2_frame, Occupancy, TrafficParams};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Stream domain of the random validation instances.
const VALIDATION_DOMAIN: u64 = 0x41;

const FRAME_TIMING: Timing = Timing { alpha: 0.5, delta: 0.1 };
const ERGODIC_TIMING: Timing = Timing { alpha: 0.5, delta: 0.05 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    /// Paths per Monte Carlo comparison.
    pub mc_paths: u64,
    /// Start positions per placement search.
    pub grid_points: usize,
    /// Random frame instances compared with the convex oracle.
    pub random_instances: usize,
    pub seed: u64,
    /// Scales the traffic rate seen by the production formulas by
    /// `1 + 1e-3`; the checks must then fail.
    pub mutate_phi: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            mc_paths: 100_000,
            grid_points: 200,
            random_instances: 20,
            seed: 1,
            mutate_phi: false,
        }
    }
}

/// Outcome of one check: the worst observed value against its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub limit: f64,
    pub cases: usize,
}

impl Check {
    fn new(name: &str, worst: f64, limit: f64, cases: usize) -> Self {
        Self {
            name: name.into(),
            passed: worst <= limit,
            worst,
            limit,
            cases,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} worst {:.3e} limit {:.3e} over {} cases",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.limit,
            self.cases
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            Err(HarnessError::Validation(failed.join(", ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn occ(active: bool) -> Occupancy {
    if active {
        Occupancy::Active
    } else {
        Occupancy::Idle
    }
}

fn timing_of(w: Window) -> Timing {
    match w {
        Window::Phase2Ergodic => ERGODIC_TIMING,
        _ => FRAME_TIMING,
    }
}

/// Production value of the reference placement, frame units.
fn core_phi(w: Window, theta: f64, active: bool, lambda: f64, mu: f64, opts: &ValidateOptions) -> f64 {
    let scale = if opts.mutate_phi { 1.0 + 1e-3 } else { 1.0 };
    let tp = TrafficParams::new(lambda * scale, mu).expect("positive rates");
    let t = timing_of(w);
    match w {
        Window::Phase1 => phi1(theta, occ(active), &tp, 1.0, t.alpha, t.delta),
        Window::Phase2Frame => phi2_frame(theta, occ(active), &tp, 1.0, t.alpha),
        Window::Phase2Ergodic => phi2_ergodic(theta, occ(active), &tp, 1.0, t.alpha, t.delta),
    }
    .expect("theta inside the window")
}

/// Ten fractions spanning each window, both observations.
fn phi_grid() -> Vec<(Window, f64, bool)> {
    let mut out = Vec::new();
    for w in Window::ALL {
        let (lo, hi) = w.span(&timing_of(w));
        for i in 1..=10 {
            for active in [false, true] {
                out.push((w, (hi - lo) * i as f64 / 10.0, active));
            }
        }
    }
    out
}

/// Closed forms against adaptive quadrature of the occupancy probability.
pub fn phi_quadrature(opts: &ValidateOptions) -> Check {
    let rates = [(1.0, 1.0), (2.0, 0.5), (0.3, 4.0)];
    let cases: Vec<(Window, f64, bool, (f64, f64))> = phi_grid()
        .into_iter()
        .flat_map(|c| rates.iter().map(move |&r| (c.0, c.1, c.2, r)))
        .collect();
    let worst = cases
        .par_iter()
        .map(|&(w, theta, active, (lambda, mu))| {
            let q = phi_by_quadrature(w, theta, active, lambda, mu, &timing_of(w));
            (core_phi(w, theta, active, lambda, mu, opts) - q).abs()
        })
        .reduce(|| 0.0, f64::max);
    Check::new("phi_vs_quadrature", worst, 1e-9, cases.len())
}

/// Closed forms against path simulation; the worst deviation is reported in
/// standard errors.
pub fn phi_monte_carlo(opts: &ValidateOptions) -> Check {
    let cases = phi_grid();
    let worst = cases
        .iter()
        .enumerate()
        .map(|(i, &(w, theta, active))| {
            let seed = opts.seed.wrapping_mul(1000).wrapping_add(i as u64);
            let e = phi_by_simulation(w, theta, active, 1.0, 1.0, &timing_of(w), opts.mc_paths, seed);
            let dev = (e.mean - core_phi(w, theta, active, 1.0, 1.0, opts)).abs();
            if dev <= 1e-12 {
                0.0
            } else {
                dev / e.se
            }
        })
        .fold(0.0, f64::max);
    Check::new("phi_vs_monte_carlo_sigma", worst, 3.0, cases.len())
}

/// No single or two-piece schedule on the search grid beats the placement.
pub fn placement_grid(opts: &ValidateOptions) -> Check {
    let mut cases = 0;
    let mut worst = f64::NEG_INFINITY;
    for w in Window::ALL {
        for theta in [0.1, 0.2, 0.3] {
            for active in [false, true] {
                let r = grid_search(w, theta, active, 1.0, 1.0, &timing_of(w), opts.grid_points);
                worst = worst.max(core_phi(w, theta, active, 1.0, 1.0, opts) - r.best);
                cases += 1;
            }
        }
    }
    Check::new("placement_grid_advantage", worst, 1e-6, cases)
}

/// Random two-band instance around the reference setting.
pub fn random_frame_instance<R: Rng>(rng: &mut R) -> (Nsi, SystemConfig) {
    let t_f = 1e-3;
    let mut cfg = SystemConfig::frame_example(rng.random_range(0.05..0.6));
    cfg.traffic = (0..2)
        .map(|_| TrafficParams::new(rng.random_range(0.3..3.0) / t_f, rng.random_range(0.3..3.0) / t_f).expect("positive"))
        .collect();
    let nsi = Nsi {
        g_sr: (0..2).map(|_| rng.random_range(0.2..3.0)).collect(),
        g_sd: (0..2).map(|_| rng.random_range(0.2..1.5)).collect(),
        g_rd: (0..2).map(|_| rng.random_range(0.2..3.0)).collect(),
        x: (0..2).map(|_| occ(rng.random_bool(0.5))).collect(),
        y: None,
    };
    (nsi, cfg)
}

/// Frame solver against the convex oracle on the reference instance and on
/// `random_instances` feasible random ones. Returns the objective, KKT,
/// feasibility and infeasibility-agreement checks.
pub fn frame_solver_checks(opts: &ValidateOptions) -> Result<Vec<Check>> {
    let mut instances = vec![(Nsi::frame_example(), SystemConfig::frame_example(0.3))];
    let mut rng = substream(opts.seed, VALIDATION_DOMAIN, 0);
    let mut disagreements = 0;
    let mut infeasible = 0;
    let solver = SolverOptions::default();
    while instances.len() < opts.random_instances + 1 {
        let (nsi, cfg) = random_frame_instance(&mut rng);
        if solve_frame(&nsi, &cfg, &solver)?.status == SolveStatus::Infeasible {
            infeasible += 1;
            if convex::solve(&convex::from_core(&nsi, &cfg, false)).feasible {
                disagreements += 1;
            }
            continue;
        }
        instances.push((nsi, cfg));
    }
    let results: Vec<(f64, f64, f64)> = instances
        .par_iter()
        .map(|(nsi, cfg)| {
            let report = solve_frame(nsi, cfg, &solver)?;
            let reference = convex::solve(&convex::from_core(nsi, cfg, false));
            let rel = if reference.feasible {
                (report.objective - reference.objective).abs() / reference.objective.max(1e-12)
            } else {
                f64::INFINITY
            };
            let alloc = &report.allocation;
            let violation = [
                (cfg.r_min - report.rate()) / cfg.r_min.max(1e-300),
                alloc.source_power() / cfg.p_s_max - 1.0,
                alloc.relay_power() / cfg.p_r_max - 1.0,
            ]
            .into_iter()
            .fold(0.0, f64::max);
            Ok((rel, report.kkt_residual, violation))
        })
        .collect::<Result<_>>()?;
    let worst = |f: fn(&(f64, f64, f64)) -> f64| results.iter().map(f).fold(0.0, f64::max);
    Ok(vec![
        Check::new("frame_vs_convex_oracle_rel", worst(|r| r.0), 1e-4, results.len()),
        Check::new("frame_kkt_residual", worst(|r| r.1), 1e-6, results.len()),
        Check::new("frame_feasibility_rel", worst(|r| r.2), 1e-6, results.len()),
        Check::new("infeasibility_agreement", disagreements as f64, 0.0, infeasible),
    ])
}

/// Band-aligned solutions against brute force over per-sub-channel
/// fractions and interval starts, on a band of two sub-channels.
pub fn alignment_check() -> Result<Check> {
    let base = TwoChannelBand {
        g_sr: [1.3, 1.4],
        g_sd: [0.4, 0.5],
        g_rd: [1.3, 1.4],
        x_active: false,
        lambda: 1.0,
        mu: 1.0,
        alpha: 0.5,
        delta: 0.1,
        rho: 0.3,
        ps_max: 1.0,
        pr_max: 1.0,
    };
    let mut worst = f64::NEG_INFINITY;
    for x_active in [false, true] {
        let band = TwoChannelBand { x_active, ..base };
        let cfg = SystemConfig {
            n_subchannels: 2,
            band_map: vec![vec![0, 1]],
            bandwidth: 1e6,
            frame_duration: 1e-3,
            alpha: band.alpha,
            delta: band.delta,
            p_s_max: band.ps_max,
            p_r_max: band.pr_max,
            r_min: band.rho * 1e6,
            budget_mode: BudgetMode::PerFrame,
            traffic: vec![TrafficParams::new(1e3, 1e3)?],
        };
        let nsi = Nsi {
            g_sr: band.g_sr.to_vec(),
            g_sd: band.g_sd.to_vec(),
            g_rd: band.g_rd.to_vec(),
            x: vec![occ(x_active)],
            y: None,
        };
        let report = solve_frame(&nsi, &cfg, &SolverOptions::default())?;
        let brute = best_unaligned(&band, 6, 4).unwrap_or(f64::INFINITY);
        worst = worst.max(report.objective - brute);
    }
    Ok(Check::new("alignment_advantage", worst, 1e-9, 2))
}

/// Runs every check.
pub fn validate(opts: &ValidateOptions) -> Result<ValidationReport> {
    let mut checks = vec![phi_quadrature(opts), phi_monte_carlo(opts), placement_grid(opts)];
    checks.extend(frame_solver_checks(opts)?);
    checks.push(alignment_check()?);
    Ok(ValidationReport { checks })
}
