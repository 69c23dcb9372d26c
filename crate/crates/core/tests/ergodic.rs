use crn_share::access::frame_interference_ergodic;
use crn_share::ergodic_solver::*;
use crn_share::ergodic_solver::Strategy;
use crn_share::frame_solver::{
    compute_ratios, inner_solution, solve_with_curves, CurveSet, DualProblem, DualVars, SolveStatus, SolverOptions,
};
use crn_share::netmodel::{Allocation, ChannelGains, ChannelModel, Nsi, SystemConfig};
use crn_share::rng::substream;
use crn_share::traffic::{CollisionCurve, Occupancy};
use proptest::prelude::*;
use rand::Rng;

fn nu(z: f64, s: f64, e: f64, h: f64) -> DualVars {
    DualVars::new(z, s, e, h).unwrap()
}

fn random_nsi(cfg: &SystemConfig, seed: u64, i: u64) -> Nsi {
    training_samples(cfg, &ChannelModel::default(), seed, i as usize + 1).pop().unwrap()
}

fn random_duals(seed: u64, i: u64) -> DualVars {
    let mut rng = substream(seed, 0x77, i);
    nu(
        rng.random_range(0.0..0.05),
        rng.random_range(0.0..0.05),
        rng.random_range(1e-3..0.05),
        rng.random_range(1e-4..0.01),
    )
}

#[test]
fn zero_prices_give_no_phase2_time() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let nsi = random_nsi(&cfg, 3, 0);
    let zero = nu(0.0, 0.0, 1.0, 1.0);
    let ratios = compute_ratios(&zero, &nsi).unwrap();
    for m in 0..cfg.n_bands() {
        for y in [Occupancy::Idle, Occupancy::Active] {
            assert_eq!(theta_phase2_ergodic(&zero, &ratios, &nsi, y, m, &cfg), 0.0);
        }
    }
}

#[test]
fn zero_duals_give_zero_allocation() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let nsi = random_nsi(&cfg, 3, 1);
    assert_eq!(inner_solution_ergodic(&DualVars::ZERO, &nsi, &cfg).unwrap(), Allocation::zero(&cfg));
}

#[test]
fn interior_phase2_fraction_is_stationary() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let t = cfg.timing();
    let mut interior = 0;
    for i in 0..200 {
        let nsi = random_nsi(&cfg, 5, i);
        let nu = random_duals(5, i);
        let ratios = compute_ratios(&nu, &nsi).unwrap();
        for m in 0..cfg.n_bands() {
            let v = crn_share::frame_solver::band_value_phase2(&nu, &ratios, &nsi, &cfg.band_map[m]);
            for y in [Occupancy::Idle, Occupancy::Active] {
                let th = theta_phase2_ergodic(&nu, &ratios, &nsi, y, m, &cfg);
                let curve = CollisionCurve::phase2_ergodic(&cfg.traffic[m], y, &t);
                assert!((0.0..=t.phase2_ergodic_max()).contains(&th));
                if th > 0.0 && th < curve.upper() {
                    interior += 1;
                    // Derivative of the expected collision time minus the band value.
                    let h = 1e-6;
                    let slope = (curve.value(th + h) - curve.value(th - h)) / (2.0 * h);
                    assert!((curve.slope(th) - v).abs() <= 1e-9, "{} vs {v}", curve.slope(th));
                    assert!((slope - v).abs() <= 1e-6);
                }
            }
        }
    }
    assert!(interior > 20, "only {interior} interior fractions");
}

#[test]
fn active_second_sensing_shortens_phase2() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let mut strict = 0;
    for i in 0..100 {
        let nsi = random_nsi(&cfg, 9, i);
        let nu = random_duals(9, i);
        let ratios = compute_ratios(&nu, &nsi).unwrap();
        for m in 0..cfg.n_bands() {
            let idle = theta_phase2_ergodic(&nu, &ratios, &nsi, Occupancy::Idle, m, &cfg);
            let active = theta_phase2_ergodic(&nu, &ratios, &nsi, Occupancy::Active, m, &cfg);
            assert!(active <= idle);
            strict += usize::from(active < idle);
        }
    }
    assert!(strict > 0);
}

#[test]
fn phase1_matches_frame_solution_and_phase1_only_is_the_frame_rule() {
    let cfg = SystemConfig::ergodic_example(1.0);
    for i in 0..50 {
        let nsi = random_nsi(&cfg, 11, i);
        let nu = random_duals(11, i);
        let frame = inner_solution(&nu, &nsi, &cfg).unwrap();
        let two = inner_solution_ergodic(&nu, &nsi, &cfg).unwrap();
        assert_eq!(frame.p_s1, two.p_s1);
        assert_eq!(frame.theta1_hat, two.theta1_hat);
        assert_eq!(frame.intervals1, two.intervals1);
        let p1 = strategy_inner_solution(Strategy::Phase1Only, &nu, &nsi, &cfg).unwrap();
        assert_eq!(p1, frame);
    }
}

#[test]
fn zero_delay_and_repeated_sensing_place_phase2_like_the_frame_rule() {
    // With delta = 0 and y = x the two rules put an equal-length Phase-2
    // interval at the same spot.
    let cfg = SystemConfig::ergodic_example(1.0);
    let t = cfg.timing();
    for x in [Occupancy::Idle, Occupancy::Active] {
        for th in [0.1, 0.25, 0.5] {
            let a = crn_share::access::place_phase2_ergodic(th, x, &t).unwrap();
            let b = crn_share::access::place_phase2_frame(th, x, &t).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn per_frame_cost_uses_the_second_sensing_curve() {
    let cfg = SystemConfig::ergodic_example(1.7);
    for i in 0..50 {
        let nsi = random_nsi(&cfg, 13, i);
        let nu = random_duals(13, i);
        let (point, _) = strategy_inner_point(Strategy::TwoSensing, &nu, &nsi, &cfg).unwrap();
        let direct = frame_interference_ergodic(&point.theta1, &point.theta2, &nsi.x, nsi.y.as_ref().unwrap(), &cfg)
            .unwrap()
            / cfg.frame_duration;
        assert!((point.objective - direct).abs() <= 1e-15 * (1.0 + direct));
    }
}

#[test]
fn ergodic_objective_is_the_mean_of_frame_terms() {
    let cfg = SystemConfig::ergodic_example(1.7);
    let samples = training_samples(&cfg, &ChannelModel::default(), 21, 300);
    let problem = ErgodicProblem::new(&cfg, Strategy::TwoSensing, &samples).unwrap();
    let nu = random_duals(21, 0);
    let eval = problem.evaluate(&nu).unwrap();
    let mut total = 0.0;
    for s in &samples {
        let a = inner_solution_ergodic(&nu, s, &cfg).unwrap();
        total += frame_interference_ergodic(&a.theta1_hat, &a.theta2_hat, &s.x, s.y.as_ref().unwrap(), &cfg).unwrap();
    }
    let mean = total / samples.len() as f64 / cfg.frame_duration;
    assert!((eval.objective - mean).abs() <= 1e-12 * mean, "{} vs {mean}", eval.objective);
}

#[test]
fn single_sample_training_is_frame_training() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let nsi = random_nsi(&cfg, 17, 0);
    let opts = SolverOptions::default();
    let (duals, diag) = train_on_samples(&cfg, Strategy::TwoSensing, std::slice::from_ref(&nsi), &opts).unwrap();
    let curves = CurveSet::two_sensing(&cfg, &nsi.x, nsi.y.as_ref().unwrap());
    let frame = solve_with_curves(&nsi, &cfg, curves, &opts).unwrap();
    assert_eq!(duals, frame.duals);
    assert_eq!(diag.status, frame.status);
    assert_eq!(diag.point.objective, frame.objective);
}

#[test]
fn trained_policy_meets_the_expected_constraints_on_held_out_frames() {
    let cfg = SystemConfig::ergodic_example(1.7);
    let setup = TrainingSetup {
        seed: 4,
        ..TrainingSetup::default()
    };
    let policy = train_offline(&cfg, &setup, &SolverOptions::default()).unwrap();
    assert_eq!(policy.diagnostics.status, SolveStatus::Optimal);
    assert_eq!(policy.diagnostics.samples, 2000);
    // Both the trained point and the held-out estimate are sample means, so
    // the margin is three standard errors of their difference.
    let rows = |samples: &[Nsi]| -> Vec<[f64; 4]> {
        samples
            .iter()
            .map(|s| {
                let (p, _) = strategy_inner_point(policy.strategy, &policy.duals, s, &cfg).unwrap();
                [p.r1, p.r2, p.source_power, p.relay_power]
            })
            .collect()
    };
    let stats = |rows: &[[f64; 4]], i: usize| {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r[i]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / n)
    };
    let train = rows(&training_samples(&cfg, &setup.channel, setup.seed, setup.samples));
    let held = rows(&training_samples(&cfg, &setup.channel, 1_000_004, 2000));
    let rho = cfg.r_min / cfg.bandwidth;
    for (i, target) in [rho, rho, cfg.p_s_max, cfg.p_r_max].into_iter().enumerate() {
        let ((mean, v_held), (_, v_train)) = (stats(&held, i), stats(&train, i));
        let se = (v_held + v_train).sqrt();
        if i < 2 {
            assert!(mean >= target - 3.0 * se, "row {i}: {mean} vs {target} (se {se})");
        } else {
            assert!(mean <= target + 3.0 * se, "row {i}: {mean} vs {target} (se {se})");
        }
    }
}

#[test]
fn more_samples_give_less_variable_multipliers() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let spread = |k: usize| {
        let zetas: Vec<f64> = (0..6)
            .map(|seed| {
                let setup = TrainingSetup {
                    seed,
                    samples: k,
                    ..TrainingSetup::default()
                };
                let p = train_offline(&cfg, &setup, &SolverOptions::default()).unwrap();
                p.duals.zeta + p.duals.sigma
            })
            .collect();
        let mean = zetas.iter().sum::<f64>() / zetas.len() as f64;
        zetas.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (zetas.len() - 1) as f64
    };
    let (small, large) = (spread(50), spread(400));
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn training_is_reproducible_and_thread_count_independent() {
    let cfg = SystemConfig::ergodic_example(0.6);
    let setup = TrainingSetup {
        samples: 300,
        seed: 8,
        ..TrainingSetup::default()
    };
    let opts = SolverOptions::default();
    let a = train_offline(&cfg, &setup, &opts).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| train_offline(&cfg, &setup, &opts).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn policy_json_round_trips_and_checks_its_hash() {
    let cfg = SystemConfig::ergodic_example(0.6);
    let setup = TrainingSetup {
        samples: 50,
        ..TrainingSetup::default()
    };
    let p = train_offline(&cfg, &setup, &SolverOptions::default()).unwrap();
    assert_eq!(p.config_hash.len(), 64);
    let back = TrainedPolicy::from_json(&p.to_json()).unwrap();
    assert_eq!(back, p);
    let tampered = p.to_json().replace("\"alpha\": 0.5", "\"alpha\": 0.6");
    assert!(TrainedPolicy::from_json(&tampered).is_err());
}

#[test]
fn unattainable_average_rate_is_infeasible() {
    let cfg = SystemConfig::ergodic_example(2.8);
    let setup = TrainingSetup {
        strategy: Strategy::RelayFree,
        samples: 500,
        ..TrainingSetup::default()
    };
    let p = train_offline(&cfg, &setup, &SolverOptions::default()).unwrap();
    assert_eq!(p.diagnostics.status, SolveStatus::Infeasible);
    assert!(!p.is_feasible());
}

fn gains_of(nsi: &Nsi) -> ChannelGains {
    ChannelGains {
        g_sr: nsi.g_sr.clone(),
        g_sd: nsi.g_sd.clone(),
        g_rd: nsi.g_rd.clone(),
    }
}

#[test]
fn packet_has_the_signaled_size() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let nsi = random_nsi(&cfg, 1, 0);
    let p = build_packet_at(Strategy::TwoSensing, &random_duals(1, 0), &gains_of(&nsi), &cfg).unwrap();
    assert_eq!(p.parameter_count(), 56);
    assert_eq!(p.value_count(), 64);
    let bytes = p.to_bytes();
    assert_eq!(bytes.len(), 16 + 8 * 64);
    assert_eq!(&bytes[..4], b"CRNP");
    assert_eq!(bytes[4..8], 1u32.to_le_bytes());
    assert_eq!(bytes[8..12], 16u32.to_le_bytes());
    assert_eq!(bytes[12..16], 4u32.to_le_bytes());
    assert_eq!(bytes[16..24], p.p1[0].to_le_bytes());
    let back = ParameterPacket::from_bytes(&bytes, p.layout.clone()).unwrap();
    assert_eq!(back, p);
}

#[test]
fn malformed_packets_are_rejected() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let nsi = random_nsi(&cfg, 1, 0);
    let p = build_packet_at(Strategy::TwoSensing, &random_duals(1, 0), &gains_of(&nsi), &cfg).unwrap();
    let bytes = p.to_bytes();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(ParameterPacket::from_bytes(&bad, p.layout.clone()).is_err());
    assert!(ParameterPacket::from_bytes(&bytes[..bytes.len() - 8], p.layout.clone()).is_err());
    let mut neg = bytes.clone();
    neg[16..24].copy_from_slice(&(-1.0f64).to_le_bytes());
    assert!(ParameterPacket::from_bytes(&neg, p.layout.clone()).is_err());
    let mut big = bytes;
    let at = 16 + 8 * 48;
    big[at..at + 8].copy_from_slice(&0.9f64.to_le_bytes());
    assert!(ParameterPacket::from_bytes(&big, p.layout.clone()).is_err());
}

#[test]
fn zero_gain_subchannel_gets_zero_ratios() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let mut nsi = random_nsi(&cfg, 2, 0);
    nsi.g_sr[3] = 0.0;
    nsi.g_sd[3] = 0.0;
    nsi.g_rd[3] = 0.0;
    let p = build_packet_at(Strategy::TwoSensing, &random_duals(2, 0), &gains_of(&nsi), &cfg).unwrap();
    assert_eq!((p.p1[3], p.p2[3], p.q[3]), (0.0, 0.0, 0.0));
}

#[test]
fn candidates_match_direct_computation() {
    let cfg = SystemConfig::ergodic_example(1.0);
    for i in 0..50 {
        let nsi = random_nsi(&cfg, 6, i);
        let nu = random_duals(6, i);
        let p = build_packet_at(Strategy::TwoSensing, &nu, &gains_of(&nsi), &cfg).unwrap();
        let ratios = compute_ratios(&nu, &nsi).unwrap();
        for m in 0..cfg.n_bands() {
            for o in [Occupancy::Idle, Occupancy::Active] {
                let t1 = crn_share::frame_solver::theta_phase1(&nu, &ratios, &nsi, o, m, &cfg);
                assert_eq!(p.theta1[m][o.index()], t1);
                assert_eq!(p.theta2[m][o.index()], theta_phase2_ergodic(&nu, &ratios, &nsi, o, m, &cfg));
            }
        }
    }
}

#[test]
fn all_idle_sensing_selects_the_idle_candidates() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let nsi = random_nsi(&cfg, 7, 0);
    let p = build_packet_at(Strategy::TwoSensing, &random_duals(7, 0), &gains_of(&nsi), &cfg).unwrap();
    let idle = vec![Occupancy::Idle; 4];
    let a = online_update(&p, &idle, &idle).unwrap();
    for m in 0..4 {
        assert_eq!(a.theta1_hat[m], p.theta1[m][0]);
        assert_eq!(a.theta2_hat[m], p.theta2[m][0]);
    }
}

#[test]
fn online_update_reproduces_the_inner_solution_for_every_strategy() {
    let cfg = SystemConfig::ergodic_example(1.7);
    for strategy in Strategy::ALL {
        for i in 0..250 {
            let nsi = random_nsi(&cfg, 19, i);
            let nu = random_duals(19, i);
            // The packet is built from gains only; sensing enters afterwards.
            let packet = build_packet_at(strategy, &nu, &gains_of(&nsi), &cfg).unwrap();
            let online = online_update(&packet, &nsi.x, nsi.y.as_ref().unwrap()).unwrap();
            let direct = strategy_inner_solution(strategy, &nu, &nsi, &cfg).unwrap();
            assert_eq!(online, direct, "{strategy} frame {i}");
        }
    }
}

#[test]
fn strategy_names_round_trip() {
    for s in Strategy::ALL {
        assert_eq!(s.label().parse::<Strategy>().unwrap(), s);
        assert_eq!(s.label().replace('_', "-").parse::<Strategy>().unwrap(), s);
    }
    assert!("nope".parse::<Strategy>().is_err());
}

#[test]
fn second_sensing_is_required_when_used() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let mut nsi = random_nsi(&cfg, 1, 0);
    nsi.y = None;
    assert!(inner_solution_ergodic(&DualVars::ONES, &nsi, &cfg).is_err());
    assert!(strategy_inner_solution(Strategy::Phase1Only, &DualVars::ONES, &nsi, &cfg).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn packet_entries_are_valid(seed in 0u64..1000, z in 0.0f64..0.1, s in 0.0f64..0.1, e in 1e-4f64..0.1, h in 1e-5f64..0.1) {
        let cfg = SystemConfig::ergodic_example(1.0);
        let nsi = random_nsi(&cfg, seed, 0);
        for strategy in Strategy::ALL {
            let p = build_packet_at(strategy, &nu(z, s, e, h), &gains_of(&nsi), &cfg).unwrap();
            prop_assert!(p.validate().is_ok());
        }
    }

    #[test]
    fn trained_multipliers_are_nonnegative(seed in 0u64..50) {
        let cfg = SystemConfig::ergodic_example(1.0);
        let setup = TrainingSetup { seed, samples: 20, ..TrainingSetup::default() };
        let p = train_offline(&cfg, &setup, &SolverOptions::default()).unwrap();
        prop_assert!(p.duals.to_array().iter().all(|v| *v >= 0.0));
    }
}
