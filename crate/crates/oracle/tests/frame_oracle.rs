use crn_oracle::convex::{self, Observation};
use crn_share::frame_solver::{solve_frame, solve_sensing_free, SolveStatus, SolverOptions};
use crn_share::netmodel::{Nsi, SystemConfig};
use crn_share::traffic::{Occupancy, TrafficParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng) -> (Nsi, SystemConfig) {
    let t_f = 1e-3;
    let mut cfg = SystemConfig::frame_example(rng.random_range(0.05..0.6));
    cfg.traffic = (0..2)
        .map(|_| TrafficParams::new(rng.random_range(0.3..3.0) / t_f, rng.random_range(0.3..3.0) / t_f).unwrap())
        .collect();
    let nsi = Nsi {
        g_sr: (0..2).map(|_| rng.random_range(0.2..3.0)).collect(),
        g_sd: (0..2).map(|_| rng.random_range(0.2..1.5)).collect(),
        g_rd: (0..2).map(|_| rng.random_range(0.2..3.0)).collect(),
        x: (0..2).map(|_| if rng.random_bool(0.5) { Occupancy::Active } else { Occupancy::Idle }).collect(),
        y: None,
    };
    (nsi, cfg)
}

fn assert_matches(nsi: &Nsi, cfg: &SystemConfig) {
    let report = solve_frame(nsi, cfg, &SolverOptions::default()).unwrap();
    assert_eq!(report.status, SolveStatus::Optimal, "{nsi:?} {cfg:?}");
    let reference = convex::solve(&convex::from_core(nsi, cfg, false));
    assert!(reference.feasible && reference.gap_bound < 1e-9);
    let rel = (report.objective - reference.objective).abs() / reference.objective.max(1e-12);
    assert!(rel < 1e-4, "solver {} oracle {} rel {rel:e}", report.objective, reference.objective);
    assert!(report.kkt_residual <= 1e-6, "kkt {}", report.kkt_residual);
    let alloc = &report.allocation;
    assert!(report.rate() >= cfg.r_min * (1.0 - 1e-6));
    assert!(alloc.source_power() <= cfg.p_s_max * (1.0 + 1e-6));
    assert!(alloc.relay_power() <= cfg.p_r_max * (1.0 + 1e-6));
}

#[test]
fn reference_instance_matches_the_convex_oracle() {
    for eff in [0.1, 0.3, 0.42, 0.5] {
        assert_matches(&Nsi::frame_example(), &SystemConfig::frame_example(eff));
    }
}

#[test]
fn oracle_objective_at_the_reference_point() {
    let sol = convex::solve(&convex::from_core(&Nsi::frame_example(), &SystemConfig::frame_example(0.3), false));
    assert!((sol.objective - 0.055097060).abs() < 1e-6, "{}", sol.objective);
    assert!(sol.theta1[1] < 1e-6 && sol.theta2[1] < 1e-6);
}

#[test]
fn random_instances_match_the_convex_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 20 {
        let (nsi, cfg) = random_instance(&mut rng);
        let report = solve_frame(&nsi, &cfg, &SolverOptions::default()).unwrap();
        if report.status == SolveStatus::Infeasible {
            assert!(!convex::solve(&convex::from_core(&nsi, &cfg, false)).feasible, "{nsi:?} {cfg:?}");
            continue;
        }
        assert_matches(&nsi, &cfg);
        checked += 1;
    }
}

#[test]
fn sensing_free_matches_the_convex_oracle() {
    for eff in [0.1, 0.3, 0.5] {
        let cfg = SystemConfig::frame_example(eff);
        let report = solve_sensing_free(&Nsi::frame_example(), &cfg, &SolverOptions::default()).unwrap();
        let mut inst = convex::from_core(&Nsi::frame_example(), &cfg, true);
        assert!(inst.obs.iter().all(|o| *o == Observation::Stationary));
        let reference = convex::solve(&inst);
        let rel = (report.objective - reference.objective).abs() / reference.objective;
        assert!(rel < 1e-4, "eff {eff}: {} vs {}", report.objective, reference.objective);
        inst.rho *= 0.5;
        assert!(convex::solve(&inst).objective < reference.objective);
    }
}
