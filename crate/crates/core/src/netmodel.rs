//! Network configuration, per-frame network state, and the rate functions.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::access::IntervalSet;
use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::traffic::{stationary_active_prob, transition_prob, FrameTiming, Occupancy, TrafficParams};

/// Whether budgets and the rate target bind every frame or on average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    PerFrame,
    LongTermAverage,
}

/// Static network parameters. Sub-channel and band indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_subchannels: usize,
    /// `band_map[m]` lists the sub-channels overlapping ad-hoc band `m`.
    pub band_map: Vec<Vec<usize>>,
    /// Bandwidth of one sub-channel, Hz.
    pub bandwidth: f64,
    /// Frame duration, seconds.
    pub frame_duration: f64,
    pub alpha: f64,
    pub delta: f64,
    pub p_s_max: f64,
    pub p_r_max: f64,
    /// Required end-to-end rate, bits/s.
    pub r_min: f64,
    pub budget_mode: BudgetMode,
    /// Traffic rates of each band.
    pub traffic: Vec<TrafficParams>,
}

impl SystemConfig {
    pub fn n_bands(&self) -> usize {
        self.band_map.len()
    }

    pub fn timing(&self) -> FrameTiming {
        FrameTiming {
            frame_duration: self.frame_duration,
            alpha: self.alpha,
            delta: self.delta,
        }
    }

    /// Rate target in bits/s/Hz per sub-channel, `R_min / (N W)`.
    pub fn spectral_efficiency(&self) -> f64 {
        self.r_min / (self.n_subchannels as f64 * self.bandwidth)
    }

    pub fn with_spectral_efficiency(mut self, eff: f64) -> Self {
        self.r_min = eff * self.n_subchannels as f64 * self.bandwidth;
        self
    }

    /// Same traffic rates on every band.
    pub fn with_shared_traffic(mut self, tp: TrafficParams) -> Self {
        self.traffic = vec![tp; self.n_bands()];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_subchannels;
        if n == 0 || self.band_map.is_empty() {
            return Err(Error::InvalidConfig("need at least one sub-channel and one band".into()));
        }
        let mut seen = vec![false; n];
        for (m, band) in self.band_map.iter().enumerate() {
            if band.is_empty() {
                return Err(Error::InvalidConfig(format!("band {m} has no sub-channels")));
            }
            for &k in band {
                if k >= n {
                    return Err(Error::InvalidConfig(format!(
                        "band {m} lists sub-channel {k}, but there are only {n}"
                    )));
                }
                if std::mem::replace(&mut seen[k], true) {
                    return Err(Error::InvalidConfig(format!("sub-channel {k} is in two bands")));
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidConfig(format!("sub-channel {k} is in no band")));
        }
        self.timing().validate()?;
        for (name, v) in [
            ("bandwidth", self.bandwidth),
            ("p_s_max", self.p_s_max),
            ("p_r_max", self.p_r_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.r_min.is_finite() && self.r_min >= 0.0) {
            return Err(Error::InvalidConfig(format!("r_min must be nonnegative, got {}", self.r_min)));
        }
        if self.traffic.len() != self.n_bands() {
            return Err(Error::InvalidConfig(format!(
                "{} traffic entries for {} bands",
                self.traffic.len(),
                self.n_bands()
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Band index of every sub-channel.
    pub fn band_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_subchannels];
        for (m, band) in self.band_map.iter().enumerate() {
            for &k in band {
                out[k] = m;
            }
        }
        out
    }

    /// The two-sub-channel, two-band frame-level reference setting:
    /// `lambda T_f = mu T_f = 1`, unit budgets, `alpha = 0.5`, `delta = 0.1`,
    /// with `T_f = 1 ms` and `W = 1 MHz`.
    pub fn frame_example(spectral_efficiency: f64) -> Self {
        let t_f = 1e-3;
        let tp = TrafficParams::new(1.0 / t_f, 1.0 / t_f).expect("positive rates");
        Self {
            n_subchannels: 2,
            band_map: vec![vec![0], vec![1]],
            bandwidth: 1e6,
            frame_duration: t_f,
            alpha: 0.5,
            delta: 0.1,
            p_s_max: 1.0,
            p_r_max: 1.0,
            r_min: 0.0,
            budget_mode: BudgetMode::PerFrame,
            traffic: vec![tp; 2],
        }
        .with_spectral_efficiency(spectral_efficiency)
    }

    /// The ergodic reference setting: 16 sub-channels in four bands
    /// of four, `alpha = 0.5`, `delta = 0`, long-term budgets of 16 each, and
    /// `lambda T_f = mu T_f = 1`.
    pub fn ergodic_example(spectral_efficiency: f64) -> Self {
        let t_f = 1e-3;
        let tp = TrafficParams::new(1.0 / t_f, 1.0 / t_f).expect("positive rates");
        Self {
            n_subchannels: 16,
            band_map: (0..4).map(|m| (4 * m..4 * m + 4).collect()).collect(),
            bandwidth: 1e6,
            frame_duration: t_f,
            alpha: 0.5,
            delta: 0.0,
            p_s_max: 16.0,
            p_r_max: 16.0,
            r_min: 0.0,
            budget_mode: BudgetMode::LongTermAverage,
            traffic: vec![tp; 4],
        }
        .with_spectral_efficiency(spectral_efficiency)
    }
}

/// One frame's network state: normalized gains per sub-channel and sensing
/// outcomes per band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsi {
    pub g_sr: Vec<f64>,
    pub g_sd: Vec<f64>,
    pub g_rd: Vec<f64>,
    pub x: Vec<Occupancy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<Occupancy>>,
}

impl Nsi {
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        let n = cfg.n_subchannels;
        for (name, g) in [("g_sr", &self.g_sr), ("g_sd", &self.g_sd), ("g_rd", &self.g_rd)] {
            if g.len() != n {
                return Err(Error::Dimension(format!("{name} has {} entries, expected {n}", g.len())));
            }
            if let Some(v) = g.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::InvalidConfig(format!("{name} contains invalid gain {v}")));
            }
        }
        let m = cfg.n_bands();
        if self.x.len() != m || self.y.as_ref().is_some_and(|y| y.len() != m) {
            return Err(Error::Dimension(format!("sensing outcomes must have {m} entries")));
        }
        Ok(())
    }

    /// Copy with the relay links removed.
    pub fn without_relay(&self) -> Self {
        Self {
            g_sr: vec![0.0; self.g_sr.len()],
            g_rd: vec![0.0; self.g_rd.len()],
            ..self.clone()
        }
    }

    /// Gains and sensing outcomes of the frame-level reference instance.
    pub fn frame_example() -> Self {
        Self {
            g_sr: vec![1.3, 1.4],
            g_sd: vec![0.4, 0.5],
            g_rd: vec![1.3, 1.4],
            x: vec![Occupancy::Idle, Occupancy::Active],
            y: None,
        }
    }
}

/// Transmission decision of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub p_s1: Vec<f64>,
    pub p_s2: Vec<f64>,
    pub p_r: Vec<f64>,
    pub theta1_hat: Vec<f64>,
    pub theta2_hat: Vec<f64>,
    /// Placed Phase-1 intervals per band, seconds.
    pub intervals1: Vec<IntervalSet>,
    /// Placed Phase-2 intervals per band, seconds.
    pub intervals2: Vec<IntervalSet>,
}

impl Allocation {
    pub fn zero(cfg: &SystemConfig) -> Self {
        let (n, m) = (cfg.n_subchannels, cfg.n_bands());
        Self {
            p_s1: vec![0.0; n],
            p_s2: vec![0.0; n],
            p_r: vec![0.0; n],
            theta1_hat: vec![0.0; m],
            theta2_hat: vec![0.0; m],
            intervals1: vec![IntervalSet::empty(); m],
            intervals2: vec![IntervalSet::empty(); m],
        }
    }

    pub fn source_power(&self) -> f64 {
        self.p_s1.iter().chain(&self.p_s2).sum()
    }

    pub fn relay_power(&self) -> f64 {
        self.p_r.iter().sum()
    }
}

/// `theta * log2(1 + snr / theta)`, extended by continuity to 0 at `theta = 0`.
pub fn perspective_log2(theta: f64, snr: f64) -> f64 {
    if theta <= 0.0 {
        0.0
    } else {
        theta * (snr / theta).ln_1p() / std::f64::consts::LN_2
    }
}

fn strongest(nsi: &Nsi, k: usize) -> f64 {
    nsi.g_sr[k].max(nsi.g_sd[k])
}

/// Rate of the source-to-relay (or direct) hop, bits/s.
pub fn rate_r1(alloc: &Allocation, nsi: &Nsi, cfg: &SystemConfig) -> f64 {
    let band = cfg.band_of();
    let total: f64 = (0..cfg.n_subchannels)
        .map(|k| {
            let (t1, t2) = (alloc.theta1_hat[band[k]], alloc.theta2_hat[band[k]]);
            perspective_log2(t1, alloc.p_s1[k] * strongest(nsi, k))
                + perspective_log2(t2, alloc.p_s2[k] * nsi.g_sd[k])
        })
        .sum();
    cfg.bandwidth * total
}

/// Rate delivered at the destination over both phases, bits/s.
pub fn rate_r2(alloc: &Allocation, nsi: &Nsi, cfg: &SystemConfig) -> f64 {
    let band = cfg.band_of();
    let total: f64 = (0..cfg.n_subchannels)
        .map(|k| {
            let (t1, t2) = (alloc.theta1_hat[band[k]], alloc.theta2_hat[band[k]]);
            perspective_log2(t1, alloc.p_s1[k] * nsi.g_sd[k])
                + perspective_log2(t2, alloc.p_s2[k] * nsi.g_sd[k] + alloc.p_r[k] * nsi.g_rd[k])
        })
        .sum();
    cfg.bandwidth * total
}

/// Achievable end-to-end rate, `min(R1, R2)`.
pub fn rate_crn(alloc: &Allocation, nsi: &Nsi, cfg: &SystemConfig) -> f64 {
    rate_r1(alloc, nsi, cfg).min(rate_r2(alloc, nsi, cfg))
}

/// Per-sub-channel form of the rate, with its own time fractions per
/// sub-channel instead of band-level ones.
pub fn rate_crn_per_subchannel(
    theta1: &[f64],
    theta2: &[f64],
    p_s1: &[f64],
    p_s2: &[f64],
    p_r: &[f64],
    nsi: &Nsi,
    bandwidth: f64,
) -> f64 {
    let n = theta1.len();
    let (mut r1, mut r2) = (0.0, 0.0);
    for k in 0..n {
        r1 += perspective_log2(theta1[k], p_s1[k] * strongest(nsi, k))
            + perspective_log2(theta2[k], p_s2[k] * nsi.g_sd[k]);
        r2 += perspective_log2(theta1[k], p_s1[k] * nsi.g_sd[k])
            + perspective_log2(theta2[k], p_s2[k] * nsi.g_sd[k] + p_r[k] * nsi.g_rd[k]);
    }
    bandwidth * r1.min(r2)
}

/// Mean SINRs of the three links (dB) at full budget spread evenly over the
/// sub-channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub snr_sd_db: f64,
    pub snr_sr_db: f64,
    pub snr_rd_db: f64,
}

impl Default for ChannelModel {
    /// 5 dB direct link; relay at the midpoint with path-loss exponent 4
    /// gives 12 dB more on each hop.
    fn default() -> Self {
        Self {
            snr_sd_db: 5.0,
            snr_sr_db: 17.0,
            snr_rd_db: 17.0,
        }
    }
}

/// Channel gains of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub g_sr: Vec<f64>,
    pub g_sd: Vec<f64>,
    pub g_rd: Vec<f64>,
}

impl ChannelModel {
    /// Mean normalized gains `(g_sr, g_sd, g_rd)`. A link SINR is
    /// `P_max E[g] / N`, the budget spread over `N` sub-channels.
    pub fn mean_gains(&self, cfg: &SystemConfig) -> (f64, f64, f64) {
        let n = cfg.n_subchannels as f64;
        let lin = |db: f64| 10f64.powf(db / 10.0);
        (
            lin(self.snr_sr_db) * n / cfg.p_s_max,
            lin(self.snr_sd_db) * n / cfg.p_s_max,
            lin(self.snr_rd_db) * n / cfg.p_r_max,
        )
    }

    /// Rayleigh-faded gains: independent unit-mean exponentials scaled to the means.
    pub fn sample<R: Rng + ?Sized>(&self, cfg: &SystemConfig, rng: &mut R) -> ChannelGains {
        let (m_sr, m_sd, m_rd) = self.mean_gains(cfg);
        let n = cfg.n_subchannels;
        let mut draw = |mean: f64| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let e: f64 = Exp1.sample(rng);
                    mean * e
                })
                .collect()
        };
        let g_sd = draw(m_sd);
        let g_sr = draw(m_sr);
        let g_rd = draw(m_rd);
        ChannelGains { g_sr, g_sd, g_rd }
    }
}

/// Gains on the stream `(seed, index)`.
pub fn sample_channel(fading: &ChannelModel, cfg: &SystemConfig, seed: u64, index: u64) -> ChannelGains {
    let mut rng = substream(seed, domain::CHANNEL, index);
    fading.sample(cfg, &mut rng)
}

/// Stationary sensing outcomes of every band: `x` at the frame start and `y`
/// at `alpha T_f`, drawn through the transition matrix.
pub fn sense_bands<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> (Vec<Occupancy>, Vec<Occupancy>) {
    let elapsed = cfg.alpha * cfg.frame_duration;
    cfg.traffic
        .iter()
        .map(|tp| {
            let x = Occupancy::from(rng.random::<f64>() < stationary_active_prob(tp));
            let p_active = transition_prob(tp, elapsed, x, Occupancy::Active).expect("nonnegative time");
            let y = Occupancy::from(rng.random::<f64>() < p_active);
            (x, y)
        })
        .unzip()
}

/// [`sense_bands`] for a single band with its own parameters.
pub fn sample_sensing(tp: &TrafficParams, cfg: &SystemConfig, seed: u64, index: u64) -> (Occupancy, Occupancy) {
    let mut rng = substream(seed, domain::SENSING, index);
    let x = Occupancy::from(rng.random::<f64>() < stationary_active_prob(tp));
    let p_active = transition_prob(tp, cfg.alpha * cfg.frame_duration, x, Occupancy::Active)
        .expect("nonnegative time");
    (x, Occupancy::from(rng.random::<f64>() < p_active))
}
