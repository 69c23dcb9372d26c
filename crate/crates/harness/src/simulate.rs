//! Frame-by-frame evaluation of a trained policy.
//!
//! Each evaluation frame draws fresh gains and one stationary traffic path
//! per band; the sensing outcomes are read off the path at `0` and
//! `alpha T_f`. Frame `f` uses only streams indexed by `f`, so results do not
//! depend on scheduling, and every policy evaluated with the same seed sees
//! the same frames.

use crn_share::ergodic_solver::{build_packet, online_update, TrainedPolicy};
use crn_share::netmodel::{rate_r1, rate_r2, Allocation, ChannelGains, Nsi, SystemConfig};
use crn_share::rng::{domain, substream};
use crn_share::traffic::{collision_time, sample_path, Occupancy, PathStart, SamplePath};
use crn_share::access::IntervalSet;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::MeanSe;

/// Outcome of one evaluation frame. Collision times are in frame units and
/// rates per unit bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTrace {
    /// Expected collision given the frame's sensing outcomes; absent under
    /// sensing errors.
    pub analytic: Option<f64>,
    /// Collision on the frame's traffic paths.
    pub realized: f64,
    pub r1: f64,
    pub r2: f64,
    pub source_power: f64,
    pub relay_power: f64,
}

/// Random inputs of one evaluation frame.
#[derive(Debug, Clone)]
pub struct EvalFrame {
    pub gains: ChannelGains,
    pub paths: Vec<SamplePath>,
    pub x: Vec<Occupancy>,
    pub y: Vec<Occupancy>,
}

impl EvalFrame {
    pub fn draw(policy: &TrainedPolicy, seed: u64, frame: u64) -> Self {
        let cfg = &policy.config;
        let gains = policy.channel.sample(cfg, &mut substream(seed, domain::EVAL_CHANNEL, frame));
        let m = cfg.n_bands() as u64;
        let t_f = cfg.frame_duration;
        let paths: Vec<SamplePath> = cfg
            .traffic
            .iter()
            .enumerate()
            .map(|(j, tp)| {
                let mut rng = substream(seed, domain::EVAL_TRAFFIC, frame * m + j as u64);
                sample_path(tp, PathStart::Stationary, t_f, &mut rng)
            })
            .collect();
        let x = paths.iter().map(|p| p.state_at(0.0)).collect();
        let y = paths.iter().map(|p| p.state_at(cfg.alpha * t_f)).collect();
        Self { gains, paths, x, y }
    }

    pub fn nsi(&self) -> Nsi {
        Nsi {
            g_sr: self.gains.g_sr.clone(),
            g_sd: self.gains.g_sd.clone(),
            g_rd: self.gains.g_rd.clone(),
            x: self.x.clone(),
            y: Some(self.y.clone()),
        }
    }
}

fn realized(paths: &[SamplePath], phase1: &[IntervalSet], phase2: &[IntervalSet], t_f: f64) -> Result<f64> {
    let mut total = 0.0;
    for (m, path) in paths.iter().enumerate() {
        total += collision_time(path, &phase1[m])? + collision_time(path, &phase2[m])?;
    }
    Ok(total / t_f)
}

fn trace(policy: &TrainedPolicy, frame: &EvalFrame, alloc: &Allocation, analytic: Option<f64>, collision: f64) -> FrameTrace {
    let cfg = &policy.config;
    let links = policy.strategy.links(&frame.nsi());
    FrameTrace {
        analytic,
        realized: collision,
        r1: rate_r1(alloc, &links, cfg) / cfg.bandwidth,
        r2: rate_r2(alloc, &links, cfg) / cfg.bandwidth,
        source_power: alloc.source_power(),
        relay_power: alloc.relay_power(),
    }
}

/// Expected collision of `alloc` under the strategy's own collision model.
fn analytic(policy: &TrainedPolicy, frame: &EvalFrame, alloc: &Allocation) -> f64 {
    let curves = policy.strategy.curves(&policy.config, &frame.x, &frame.y);
    (0..policy.config.n_bands())
        .map(|m| curves.phase1[m].value(alloc.theta1_hat[m]) + curves.phase2[m].value(alloc.theta2_hat[m]))
        .sum()
}

/// Error-free evaluation of one frame: packet from the predicted gains,
/// terminal update from the true sensing outcomes.
pub fn evaluate_frame(policy: &TrainedPolicy, frame: &EvalFrame) -> Result<FrameTrace> {
    let packet = build_packet(policy, &frame.gains)?;
    let alloc = online_update(&packet, &frame.x, &frame.y)?;
    let collision = realized(&frame.paths, &alloc.intervals1, &alloc.intervals2, policy.config.frame_duration)?;
    Ok(trace(policy, frame, &alloc, Some(analytic(policy, frame, &alloc)), collision))
}

/// Simulates `frames` error-free frames on the evaluation streams of `seed`.
pub fn simulate(policy: &TrainedPolicy, frames: usize, seed: u64) -> Result<Vec<FrameTrace>> {
    (0..frames as u64)
        .into_par_iter()
        .map(|f| evaluate_frame(policy, &EvalFrame::draw(policy, seed, f)))
        .collect()
}

fn flip(o: Occupancy, wrong: bool) -> Occupancy {
    if wrong {
        o.flipped()
    } else {
        o
    }
}

fn band_power(power: &[f64], band: &[usize]) -> f64 {
    band.iter().map(|&k| power[k]).sum()
}

/// One frame with sensing errors of probability `p`. The source misreads
/// each `x` and `y` independently and the relay misreads each `y`
/// independently of the source; the relay takes `x` from the source's
/// signaling. Each node selects its fractions from its own outcomes, and
/// Phase-2 collisions count the union of the intervals of the nodes that
/// transmit. The rates are those the source plans for.
pub fn evaluate_frame_with_errors(policy: &TrainedPolicy, frame: &EvalFrame, seed: u64, index: u64, p: f64) -> Result<FrameTrace> {
    let cfg: &SystemConfig = &policy.config;
    let mut src_rng = substream(seed, domain::EVAL_SOURCE_ERRORS, index);
    let mut relay_rng = substream(seed, domain::EVAL_RELAY_ERRORS, index);
    let m = cfg.n_bands();
    let mut sx = Vec::with_capacity(m);
    let mut sy = Vec::with_capacity(m);
    let mut ry = Vec::with_capacity(m);
    for j in 0..m {
        sx.push(flip(frame.x[j], src_rng.random::<f64>() < p));
        sy.push(flip(frame.y[j], src_rng.random::<f64>() < p));
        ry.push(flip(frame.y[j], relay_rng.random::<f64>() < p));
    }
    let packet = build_packet(policy, &frame.gains)?;
    let source = online_update(&packet, &sx, &sy)?;
    let relay = online_update(&packet, &sx, &ry)?;
    let phase2: Vec<IntervalSet> = cfg
        .band_map
        .iter()
        .enumerate()
        .map(|(j, band)| {
            let mut set = IntervalSet::empty();
            if band_power(&source.p_s2, band) > 0.0 {
                set = set.union(&source.intervals2[j]);
            }
            if band_power(&relay.p_r, band) > 0.0 {
                set = set.union(&relay.intervals2[j]);
            }
            set
        })
        .collect();
    let collision = realized(&frame.paths, &source.intervals1, &phase2, cfg.frame_duration)?;
    let expected = (p == 0.0).then(|| analytic(policy, frame, &source));
    Ok(trace(policy, frame, &source, expected, collision))
}

/// Simulates `frames` frames with sensing error probability `p`. The frames
/// and the error draws are shared across values of `p`.
pub fn simulate_with_errors(policy: &TrainedPolicy, frames: usize, seed: u64, p: f64) -> Result<Vec<FrameTrace>> {
    (0..frames as u64)
        .into_par_iter()
        .map(|f| evaluate_frame_with_errors(policy, &EvalFrame::draw(policy, seed, f), seed, f, p))
        .collect()
}

/// Aggregates over the frames of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub analytic: Option<MeanSe>,
    pub realized: MeanSe,
    /// `min(mean R1, mean R2) / N`, the long-term rate per sub-channel and Hz.
    pub rate: f64,
    pub source_power: f64,
    pub relay_power: f64,
}

pub fn summarize(traces: &[FrameTrace], n_subchannels: usize) -> Summary {
    let analytic = traces
        .iter()
        .map(|t| t.analytic)
        .collect::<Option<Vec<f64>>>()
        .filter(|v| !v.is_empty())
        .map(MeanSe::of);
    let mean = |f: fn(&FrameTrace) -> f64| MeanSe::of(traces.iter().map(f)).mean;
    Summary {
        analytic,
        realized: MeanSe::of(traces.iter().map(|t| t.realized)),
        rate: mean(|t| t.r1).min(mean(|t| t.r2)) / n_subchannels as f64,
        source_power: mean(|t| t.source_power),
        relay_power: mean(|t| t.relay_power),
    }
}
