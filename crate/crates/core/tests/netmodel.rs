use std::f64::consts::LN_2;

use crn_share::access::IntervalSet;
use crn_share::netmodel::{
    rate_crn, rate_crn_per_subchannel, rate_r1, rate_r2, sample_channel, sample_sensing, Allocation, BudgetMode,
    ChannelModel, Nsi, SystemConfig,
};
use crn_share::traffic::{transition_prob, Occupancy, TrafficParams};
use proptest::prelude::*;

fn single(w: f64) -> SystemConfig {
    SystemConfig {
        n_subchannels: 1,
        band_map: vec![vec![0]],
        bandwidth: w,
        frame_duration: 1.0,
        alpha: 0.5,
        delta: 0.0,
        p_s_max: 1.0,
        p_r_max: 1.0,
        r_min: 0.0,
        budget_mode: BudgetMode::PerFrame,
        traffic: vec![TrafficParams::new(1.0, 1.0).unwrap()],
    }
}

fn alloc(t1: Vec<f64>, t2: Vec<f64>, p_s1: Vec<f64>, p_s2: Vec<f64>, p_r: Vec<f64>) -> Allocation {
    let m = t1.len();
    Allocation {
        p_s1,
        p_s2,
        p_r,
        theta1_hat: t1,
        theta2_hat: t2,
        intervals1: vec![IntervalSet::empty(); m],
        intervals2: vec![IntervalSet::empty(); m],
    }
}

fn nsi1(g_sr: f64, g_sd: f64, g_rd: f64) -> Nsi {
    Nsi {
        g_sr: vec![g_sr],
        g_sd: vec![g_sd],
        g_rd: vec![g_rd],
        x: vec![Occupancy::Idle],
        y: None,
    }
}

#[test]
fn rate_reference_values() {
    let a = alloc(vec![0.5], vec![0.0], vec![1.0], vec![0.0], vec![0.0]);
    let r = rate_r1(&a, &nsi1(1.0, 0.5, 0.0), &single(1e6));
    assert!((r - 0.5 * 3f64.log2() * 1e6).abs() < 1e-6);
    assert!((r / 1e6 - 0.79248).abs() < 5e-6);
    assert!((rate_r1(&a, &nsi1(1.0, 0.5, 0.0), &single(2e6)) - 2.0 * r).abs() < 1e-6);

    let b = alloc(vec![0.0], vec![0.5], vec![0.0], vec![1.0], vec![1.0]);
    let r2 = rate_r2(&b, &nsi1(1.3, 0.4, 1.3), &single(1e6));
    assert!((r2 - 1e6 * 0.5 * (1.0 + 1.7 / 0.5f64).log2()).abs() < 1e-6);

    let zero = alloc(vec![0.3], vec![0.3], vec![0.0], vec![0.0], vec![0.0]);
    assert_eq!(rate_crn(&zero, &nsi1(1.0, 1.0, 1.0), &single(1e6)), 0.0);
}

#[test]
fn relay_silent_and_weak_first_hop_gives_equal_rates() {
    let a = alloc(vec![0.3], vec![0.4], vec![0.7], vec![0.2], vec![0.0]);
    let nsi = nsi1(0.3, 0.9, 2.0);
    let cfg = single(1.0);
    assert!((rate_r1(&a, &nsi, &cfg) - rate_r2(&a, &nsi, &cfg)).abs() < 1e-15);
}

#[test]
fn channel_means_follow_the_link_budgets() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let model = ChannelModel::default();
    let (mut sd, mut sr, mut rd) = (0.0, 0.0, 0.0);
    let draws = 100_000 / cfg.n_subchannels as u64;
    for i in 0..draws {
        let g = sample_channel(&model, &cfg, 5, i);
        sd += g.g_sd.iter().sum::<f64>();
        sr += g.g_sr.iter().sum::<f64>();
        rd += g.g_rd.iter().sum::<f64>();
    }
    let n = (draws * cfg.n_subchannels as u64) as f64;
    let (sd, sr, rd) = (sd / n, sr / n, rd / n);
    assert!((sd / 10f64.powf(0.5) - 1.0).abs() < 0.02, "{sd}");
    assert!((sr / sd / 10f64.powf(1.2) - 1.0).abs() < 0.03, "{}", sr / sd);
    assert!((rd / sd / 10f64.powf(1.2) - 1.0).abs() < 0.03);
    assert_eq!(sample_channel(&model, &cfg, 5, 3), sample_channel(&model, &cfg, 5, 3));
}

#[test]
fn sensing_outcomes_follow_the_chain() {
    let cfg = SystemConfig::ergodic_example(1.0);
    let tp = TrafficParams::new(500.0, 1500.0).unwrap();
    let k = 200_000u64;
    let draws: Vec<(Occupancy, Occupancy)> = (0..k).map(|i| sample_sensing(&tp, &cfg, 8, i)).collect();
    let active = draws.iter().filter(|(x, _)| x.is_active()).count() as f64 / k as f64;
    let se = (0.25 * 0.75 / k as f64).sqrt();
    assert!((active - 0.25).abs() <= 3.0 * se, "{active}");

    let idle: Vec<_> = draws.iter().filter(|(x, _)| !x.is_active()).collect();
    let p = transition_prob(&tp, cfg.alpha * cfg.frame_duration, Occupancy::Idle, Occupancy::Active).unwrap();
    let hit = idle.iter().filter(|(_, y)| y.is_active()).count() as f64 / idle.len() as f64;
    assert!((hit - p).abs() <= 3.0 * (p * (1.0 - p) / idle.len() as f64).sqrt(), "{hit} vs {p}");
}

#[test]
fn no_elapsed_time_means_repeated_outcome() {
    let mut cfg = SystemConfig::ergodic_example(1.0);
    cfg.alpha = 1e-12;
    let tp = TrafficParams::new(1e3, 1e3).unwrap();
    assert!((0..1000).all(|i| {
        let (x, y) = sample_sensing(&tp, &cfg, 2, i);
        x == y
    }));
}

#[test]
fn config_json_round_trip_and_validation() {
    let cfg = SystemConfig::ergodic_example(1.7);
    assert_eq!(SystemConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    let mut bad = cfg.clone();
    bad.band_map[0].push(5);
    assert!(bad.validate().is_err());
    let mut bad = cfg;
    bad.delta = 0.6;
    assert!(bad.validate().is_err());
}

/// Two sub-channels in two bands, random gains.
fn two_band() -> (SystemConfig, Nsi) {
    let cfg = SystemConfig::frame_example(0.3);
    (cfg, Nsi::frame_example())
}

fn point() -> impl Strategy<Value = [f64; 10]> {
    proptest::array::uniform10(0.0f64..1.0)
}

fn to_alloc(v: &[f64; 10]) -> Allocation {
    alloc(
        vec![0.4 * v[0], 0.4 * v[1]],
        vec![0.5 * v[2], 0.5 * v[3]],
        vec![v[4], v[5]],
        vec![v[6], v[7]],
        vec![v[8], v[9]],
    )
}

proptest! {
    #[test]
    fn rate_is_jointly_concave(a in point(), b in point()) {
        let (cfg, nsi) = two_band();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let mid: [f64; 10] = mid.try_into().unwrap();
        let r = |v: &[f64; 10]| rate_crn(&to_alloc(v), &nsi, &cfg) / cfg.bandwidth;
        prop_assert!(r(&mid) >= 0.5 * r(&a) + 0.5 * r(&b) - 1e-9);
    }

    #[test]
    fn rates_are_nondecreasing(a in point(), i in 0usize..10, bump in 0.0f64..0.5) {
        let (cfg, nsi) = two_band();
        let mut b = a;
        b[i] = (b[i] + bump).min(1.0);
        let (lo, hi) = (to_alloc(&a), to_alloc(&b));
        prop_assert!(rate_r1(&hi, &nsi, &cfg) >= rate_r1(&lo, &nsi, &cfg) - 1e-9);
        prop_assert!(rate_r2(&hi, &nsi, &cfg) >= rate_r2(&lo, &nsi, &cfg) - 1e-9);
    }

    #[test]
    fn band_form_equals_per_subchannel_form(a in point()) {
        let (cfg, nsi) = two_band();
        let al = to_alloc(&a);
        let direct = rate_crn_per_subchannel(&al.theta1_hat, &al.theta2_hat, &al.p_s1, &al.p_s2, &al.p_r, &nsi, cfg.bandwidth);
        let band = rate_crn(&al, &nsi, &cfg);
        prop_assert!((direct - band).abs() <= 1e-12 * band.abs().max(1.0));
    }

    #[test]
    fn vanishing_fraction_vanishing_rate(ratio in 0.1f64..10.0, g in 0.1f64..5.0) {
        let cfg = single(1.0);
        let nsi = nsi1(g, g, g);
        let r = |eps: f64| rate_crn(&alloc(vec![eps], vec![eps], vec![ratio * eps], vec![ratio * eps], vec![0.0]), &nsi, &cfg);
        prop_assert!(r(1e-9) <= 1e-9 * (1.0 + ratio * g).log2() * 2.0 + 1e-15);
        prop_assert!((r(1e-9) - r(0.0)).abs() < 1e-8 / LN_2);
    }
}
