use crn_oracle::alignment::{best_unaligned, TwoChannelBand};
use crn_oracle::ctmc::{active_prob, transition_matrix};
use crn_oracle::phi::{self, phi_by_quadrature, phi_by_simulation, Timing, Window};
use crn_oracle::placement::{grid_search, interval_collision};
use crn_share::frame_solver::{solve_frame, SolveStatus, SolverOptions};
use crn_share::netmodel::{BudgetMode, Nsi, SystemConfig};
use crn_share::traffic::{phi1, phi2_ergodic, phi2_frame, transition_prob, Occupancy, TrafficParams};

const FRAME: Timing = Timing { alpha: 0.5, delta: 0.1 };

fn occ(active: bool) -> Occupancy {
    if active {
        Occupancy::Active
    } else {
        Occupancy::Idle
    }
}

/// Core value of the reference placement in frame units.
fn core_phi(w: Window, theta: f64, active: bool, lambda: f64, mu: f64, t: &Timing) -> f64 {
    let tp = TrafficParams::new(lambda, mu).unwrap();
    match w {
        Window::Phase1 => phi1(theta, occ(active), &tp, 1.0, t.alpha, t.delta),
        Window::Phase2Frame => phi2_frame(theta, occ(active), &tp, 1.0, t.alpha),
        Window::Phase2Ergodic => phi2_ergodic(theta, occ(active), &tp, 1.0, t.alpha, t.delta),
    }
    .unwrap()
}

#[test]
fn matrix_exponential_transition_probability() {
    let p = active_prob(1.0, 1.0, 1.0, false);
    assert!((p - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-14);
    assert!((p - 0.43233).abs() < 5e-6);
    let core = transition_prob(&TrafficParams::new(1.0, 1.0).unwrap(), 1.0, Occupancy::Idle, Occupancy::Active).unwrap();
    assert!((core - p).abs() < 1e-14);
    let m = transition_matrix(2.0, 0.5, 0.7);
    assert!((m[(0, 0)] + m[(0, 1)] - 1.0).abs() < 1e-14);
}

#[test]
fn simulated_transition_probability_agrees() {
    let e = phi::transition_by_simulation(1.0, 1.0, 1.0, false, 200_000, 5);
    assert!(e.agrees((1.0 - (-2.0f64).exp()) / 2.0, 3.0), "{e:?}");
}

#[test]
fn phase1_reference_value() {
    let q = phi_by_quadrature(Window::Phase1, 0.4, false, 1.0, 1.0, &FRAME);
    assert!((q - 0.08729).abs() < 5e-6, "{q}");
    assert!((core_phi(Window::Phase1, 0.4, false, 1.0, 1.0, &FRAME) - q).abs() < 1e-9);
}

#[test]
fn closed_forms_match_quadrature_on_a_grid() {
    let ergodic = Timing { alpha: 0.5, delta: 0.05 };
    for (w, t) in [(Window::Phase1, FRAME), (Window::Phase2Frame, FRAME), (Window::Phase2Ergodic, ergodic)] {
        let (lo, hi) = w.span(&t);
        for (lambda, mu) in [(1.0, 1.0), (2.0, 0.5), (0.3, 4.0)] {
            for i in 0..10 {
                let theta = (hi - lo) * i as f64 / 9.0;
                for active in [false, true] {
                    let q = phi_by_quadrature(w, theta, active, lambda, mu, &t);
                    let c = core_phi(w, theta, active, lambda, mu, &t);
                    assert!((q - c).abs() < 1e-9, "{w:?} theta {theta} active {active}: {q} vs {c}");
                    assert!((interval_collision_ref(w, theta, active, lambda, mu, &t) - q).abs() < 1e-9);
                }
            }
        }
    }
}

fn interval_collision_ref(w: Window, theta: f64, active: bool, lambda: f64, mu: f64, t: &Timing) -> f64 {
    let (a, b) = w.reference_interval(theta, active, t);
    interval_collision(a, b, w.origin(t), active, lambda, mu)
}

#[test]
fn closed_forms_match_path_simulation() {
    for (i, w) in Window::ALL.into_iter().enumerate() {
        let theta = 0.3;
        for active in [false, true] {
            let e = phi_by_simulation(w, theta, active, 1.0, 1.0, &FRAME, 100_000, 40 + i as u64);
            let c = core_phi(w, theta, active, 1.0, 1.0, &FRAME);
            assert!(e.agrees(c, 3.0), "{w:?} active {active}: {e:?} vs {c}");
        }
    }
}

#[test]
fn reference_placement_is_best_on_the_grid() {
    for w in Window::ALL {
        for theta in [0.1, 0.2, 0.3] {
            for active in [false, true] {
                let r = grid_search(w, theta, active, 1.0, 1.0, &FRAME, 50);
                let c = core_phi(w, theta, active, 1.0, 1.0, &FRAME);
                assert!(r.best >= c - 1e-6, "{w:?} {theta} {active}: grid {} < {c}", r.best);
            }
        }
    }
}

#[test]
fn unaligned_schedules_never_beat_the_aligned_solver() {
    let band = TwoChannelBand {
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
    for x_active in [false, true] {
        let band = TwoChannelBand { x_active, ..band };
        let tp = TrafficParams::new(1e3, 1e3).unwrap();
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
            traffic: vec![tp],
        };
        let nsi = Nsi {
            g_sr: band.g_sr.to_vec(),
            g_sd: band.g_sd.to_vec(),
            g_rd: band.g_rd.to_vec(),
            x: vec![occ(x_active)],
            y: None,
        };
        let report = solve_frame(&nsi, &cfg, &SolverOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        let brute = best_unaligned(&band, 6, 4).expect("grid contains a feasible schedule");
        assert!(brute >= report.objective - 1e-9, "brute {brute} < aligned {}", report.objective);
    }
}
