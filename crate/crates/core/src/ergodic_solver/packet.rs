//! Per-frame signaling from the base station and the terminal-side update.
//!
//! The ratios depend on the frame's gains and the fractions depend on the
//! ratios, so both are rebuilt every frame. The fractions are sent for both
//! possible sensing outcomes of every band; a terminal then only looks up the
//! entries matching what it sensed.
//!
//! Binary record (little endian): the 4-byte magic `CRNP`, a `u32` version,
//! `u32` N and `u32` M, then `3N + 4M` `f64` values: `p1[0..N]`, `p2[0..N]`,
//! `q[0..N]`, and for each band `theta1[x=0]`, `theta1[x=1]`,
//! `theta2[0]`, `theta2[1]`.

use serde::{Deserialize, Serialize};

use super::Strategy;
use crate::access::place;
use crate::error::{Error, Result};
use crate::frame_solver::{band_value_phase1, band_value_phase2, compute_ratios, DualVars};
use crate::netmodel::{Allocation, ChannelGains, Nsi, SystemConfig};
use crate::traffic::{CollisionCurve, FrameTiming, Occupancy, TrafficParams};

use super::TrainedPolicy;

pub const PACKET_MAGIC: [u8; 4] = *b"CRNP";
pub const PACKET_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Static information a terminal holds before any packet arrives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketLayout {
    pub strategy: Strategy,
    pub timing: FrameTiming,
    /// Band index of every sub-channel.
    pub band_of: Vec<usize>,
}

impl PacketLayout {
    pub fn new(strategy: Strategy, cfg: &SystemConfig) -> Self {
        Self {
            strategy,
            timing: cfg.timing(),
            band_of: cfg.band_of(),
        }
    }

    fn n_bands(&self) -> usize {
        self.band_of.iter().max().map_or(0, |m| m + 1)
    }

    /// Upper bounds of the Phase-1 and Phase-2 fractions.
    fn bounds(&self) -> (f64, f64) {
        let t = &self.timing;
        let phase2 = if self.strategy.uses_second_sensing() {
            t.phase2_ergodic_max()
        } else {
            t.phase2_frame_max()
        };
        (t.phase1_max(), phase2)
    }
}

/// Curves of one band given the observations conditioning each phase.
pub(super) fn band_curves(
    strategy: Strategy,
    tp: &TrafficParams,
    x: Occupancy,
    y: Occupancy,
    t: &FrameTiming,
) -> (CollisionCurve, CollisionCurve) {
    match strategy {
        Strategy::TwoSensing | Strategy::RelayFree => (CollisionCurve::phase1(tp, x, t), CollisionCurve::phase2_ergodic(tp, y, t)),
        Strategy::Phase1Only => (CollisionCurve::phase1(tp, x, t), CollisionCurve::phase2_frame(tp, x, t)),
        Strategy::SensingFree => (
            CollisionCurve::stationary(tp, t.delta, t.phase1_max()),
            CollisionCurve::stationary(tp, t.alpha, t.phase2_frame_max()),
        ),
    }
}

/// One frame's signaling payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPacket {
    pub layout: PacketLayout,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub q: Vec<f64>,
    /// `theta1[m][x]`, indexed by the frame-start outcome.
    pub theta1: Vec<[f64; 2]>,
    /// `theta2[m][o]`, indexed by the outcome conditioning Phase 2: the
    /// second sensing for two-sensing strategies, the frame-start one otherwise.
    pub theta2: Vec<[f64; 2]>,
}

impl ParameterPacket {
    pub fn n_subchannels(&self) -> usize {
        self.p1.len()
    }

    pub fn n_bands(&self) -> usize {
        self.theta1.len()
    }

    /// Signaled parameters: three ratios per sub-channel and one candidate
    /// pair per band and phase, counted as `3N + 2M`.
    pub fn parameter_count(&self) -> usize {
        3 * self.n_subchannels() + 2 * self.n_bands()
    }

    /// Scalars in the binary record, `3N + 4M`.
    pub fn value_count(&self) -> usize {
        3 * self.n_subchannels() + 4 * self.n_bands()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layout.band_of.len();
        let m = self.layout.n_bands();
        if self.p1.len() != n || self.p2.len() != n || self.q.len() != n {
            return Err(Error::Packet(format!("expected {n} ratios per kind")));
        }
        if self.theta1.len() != m || self.theta2.len() != m {
            return Err(Error::Packet(format!("expected {m} candidate pairs per phase")));
        }
        if let Some(v) = self.p1.iter().chain(&self.p2).chain(&self.q).find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Packet(format!("invalid ratio {v}")));
        }
        let (u1, u2) = self.layout.bounds();
        for (pairs, upper) in [(&self.theta1, u1), (&self.theta2, u2)] {
            if let Some(v) = pairs.iter().flatten().find(|v| !(v.is_finite() && **v >= 0.0 && **v <= upper)) {
                return Err(Error::Packet(format!("fraction {v} outside [0, {upper}]")));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.value_count());
        out.extend_from_slice(&PACKET_MAGIC);
        out.extend_from_slice(&PACKET_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_subchannels() as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_bands() as u32).to_le_bytes());
        for v in self.p1.iter().chain(&self.p2).chain(&self.q) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for (a, b) in self.theta1.iter().zip(&self.theta2) {
            for v in a.iter().chain(b) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], layout: PacketLayout) -> Result<Self> {
        if bytes.len() < HEADER_LEN || bytes[..4] != PACKET_MAGIC {
            return Err(Error::Packet("missing header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        if word(4) != PACKET_VERSION {
            return Err(Error::Packet(format!("unsupported version {}", word(4))));
        }
        let (n, m) = (word(8) as usize, word(12) as usize);
        if n != layout.band_of.len() || m != layout.n_bands() {
            return Err(Error::Packet(format!("packet is for N = {n}, M = {m}")));
        }
        let count = 3 * n + 4 * m;
        if bytes.len() != HEADER_LEN + 8 * count {
            return Err(Error::Packet(format!("expected {count} values")));
        }
        let values: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let cand = &values[3 * n..];
        let packet = Self {
            layout,
            p1: values[..n].to_vec(),
            p2: values[n..2 * n].to_vec(),
            q: values[2 * n..3 * n].to_vec(),
            theta1: (0..m).map(|j| [cand[4 * j], cand[4 * j + 1]]).collect(),
            theta2: (0..m).map(|j| [cand[4 * j + 2], cand[4 * j + 3]]).collect(),
        };
        packet.validate()?;
        Ok(packet)
    }
}

/// Builds the packet for one frame from the trained multipliers and the
/// frame's gains.
pub fn build_packet(policy: &TrainedPolicy, gains: &ChannelGains) -> Result<ParameterPacket> {
    build_packet_at(policy.strategy, &policy.duals, gains, &policy.config)
}

/// [`build_packet`] for explicit multipliers.
pub fn build_packet_at(strategy: Strategy, nu: &DualVars, gains: &ChannelGains, cfg: &SystemConfig) -> Result<ParameterPacket> {
    let nsi = Nsi {
        g_sr: gains.g_sr.clone(),
        g_sd: gains.g_sd.clone(),
        g_rd: gains.g_rd.clone(),
        x: vec![Occupancy::Idle; cfg.n_bands()],
        y: None,
    };
    nsi.validate(cfg)?;
    let nsi = strategy.links(&nsi);
    let ratios = compute_ratios(nu, &nsi)?;
    let t = cfg.timing();
    let mut theta1 = Vec::with_capacity(cfg.n_bands());
    let mut theta2 = Vec::with_capacity(cfg.n_bands());
    for (m, band) in cfg.band_map.iter().enumerate() {
        let v1 = band_value_phase1(nu, &ratios, &nsi, band);
        let v2 = band_value_phase2(nu, &ratios, &nsi, band);
        let pick = |o: Occupancy| {
            let (c1, c2) = band_curves(strategy, &cfg.traffic[m], o, o, &t);
            (c1.best_fraction(v1), c2.best_fraction(v2))
        };
        let (a0, b0) = pick(Occupancy::Idle);
        let (a1, b1) = pick(Occupancy::Active);
        theta1.push([a0, a1]);
        theta2.push([b0, b1]);
    }
    Ok(ParameterPacket {
        layout: PacketLayout::new(strategy, cfg),
        p1: ratios.p1,
        p2: ratios.p2,
        q: ratios.q,
        theta1,
        theta2,
    })
}

/// Terminal-side allocation: selects the candidates matching the sensed
/// outcomes, multiplies by the ratios and places the intervals. Reads only the
/// packet and this frame's sensing; `y` is ignored by strategies without a
/// second sensing.
pub fn online_update(packet: &ParameterPacket, x: &[Occupancy], y: &[Occupancy]) -> Result<Allocation> {
    let m = packet.n_bands();
    let layout = &packet.layout;
    let second = layout.strategy.uses_second_sensing();
    if x.len() != m || (second && y.len() != m) {
        return Err(Error::Dimension(format!("sensing outcomes must have {m} entries")));
    }
    let unit = TrafficParams::new(1.0, 1.0).expect("valid");
    let t_f = layout.timing.frame_duration;
    let mut theta1_hat = Vec::with_capacity(m);
    let mut theta2_hat = Vec::with_capacity(m);
    let mut intervals1 = Vec::with_capacity(m);
    let mut intervals2 = Vec::with_capacity(m);
    for j in 0..m {
        let o2 = if second { y[j] } else { x[j] };
        let (t1, t2) = (packet.theta1[j][x[j].index()], packet.theta2[j][o2.index()]);
        let (c1, c2) = band_curves(layout.strategy, &unit, x[j], o2, &layout.timing);
        theta1_hat.push(t1);
        theta2_hat.push(t2);
        intervals1.push(place(&c1, t1, t_f));
        intervals2.push(place(&c2, t2, t_f));
    }
    let band = &layout.band_of;
    let n = band.len();
    Ok(Allocation {
        p_s1: (0..n).map(|k| packet.p1[k] * theta1_hat[band[k]]).collect(),
        p_s2: (0..n).map(|k| packet.p2[k] * theta2_hat[band[k]]).collect(),
        p_r: (0..n).map(|k| packet.q[k] * theta2_hat[band[k]]).collect(),
        theta1_hat,
        theta2_hat,
        intervals1,
        intervals2,
    })
}
