//! Long-term average spectrum sharing.
//!
//! The rate target and power budgets bind on average over frames, so the
//! multipliers are shared by every frame. They are trained off-line on a
//! fixed sample of network states (sample-average approximation, common
//! random numbers across iterations). On-line, each frame's allocation is the
//! closed-form inner minimizer at the trained multipliers, which a terminal
//! can evaluate from a small [`ParameterPacket`] and its own sensing.

mod packet;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame_solver::{
    band_value_phase1, band_value_phase2, inner_point, linear_slot, maximize_dual, recovery, unit_contributions,
    CurveSet, DualEval, DualProblem, DualVars, InfeasibilityReason, InnerPoint, PowerRatios, Recovered, SolveStatus,
    SolverOptions,
};
use crate::netmodel::{Allocation, ChannelModel, Nsi, SystemConfig};
use crate::rng::{domain, substream};
use crate::traffic::{CollisionCurve, Occupancy};

pub use packet::{build_packet, build_packet_at, online_update, PacketLayout, ParameterPacket, PACKET_MAGIC, PACKET_VERSION};

/// How much sensing information a strategy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Sensing at the frame start and again at `alpha T_f`.
    TwoSensing,
    /// Frame-start sensing only; Phase 2 is placed from `x`.
    Phase1Only,
    /// No sensing; stationary collision rate.
    SensingFree,
    /// Two sensings, direct link only.
    RelayFree,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::TwoSensing,
        Strategy::Phase1Only,
        Strategy::SensingFree,
        Strategy::RelayFree,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::TwoSensing => "two_sensing",
            Strategy::Phase1Only => "phase1_only",
            Strategy::SensingFree => "sensing_free",
            Strategy::RelayFree => "relay_free",
        }
    }

    /// Whether Phase 2 is conditioned on the second sensing `y`.
    pub fn uses_second_sensing(self) -> bool {
        matches!(self, Strategy::TwoSensing | Strategy::RelayFree)
    }

    /// Collision curves of a frame with sensing outcomes `x` and `y`.
    pub fn curves(self, cfg: &SystemConfig, x: &[Occupancy], y: &[Occupancy]) -> CurveSet {
        let t = cfg.timing();
        let (phase1, phase2) = (0..cfg.n_bands())
            .map(|m| packet::band_curves(self, &cfg.traffic[m], x[m], y[m], &t))
            .unzip();
        CurveSet { phase1, phase2 }
    }

    /// Curves for `nsi`, which must carry `y` when the strategy reads it.
    pub fn curves_for(self, cfg: &SystemConfig, nsi: &Nsi) -> Result<CurveSet> {
        match (&nsi.y, self.uses_second_sensing()) {
            (Some(y), _) => Ok(self.curves(cfg, &nsi.x, y)),
            (None, false) => Ok(self.curves(cfg, &nsi.x, &nsi.x)),
            (None, true) => Err(Error::InvalidConfig(format!(
                "strategy {self} needs the second sensing outcome y"
            ))),
        }
    }

    /// The gains the strategy may use.
    pub fn links(self, nsi: &Nsi) -> Nsi {
        match self {
            Strategy::RelayFree => nsi.without_relay(),
            _ => nsi.clone(),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.label() == s || st.label().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

/// Optimal Phase-2 fraction of band `band` when Phase 2 follows a second
/// sensing with outcome `y`, bounded by `1 - alpha - delta`.
pub fn theta_phase2_ergodic(
    nu: &DualVars,
    ratios: &PowerRatios,
    nsi: &Nsi,
    y: Occupancy,
    band: usize,
    cfg: &SystemConfig,
) -> f64 {
    let curve = CollisionCurve::phase2_ergodic(&cfg.traffic[band], y, &cfg.timing());
    curve.best_fraction(band_value_phase2(nu, ratios, nsi, &cfg.band_map[band]))
}

/// Inner minimizer of one frame under `strategy`, with the curves it used.
pub fn strategy_inner_point(
    strategy: Strategy,
    nu: &DualVars,
    omega: &Nsi,
    cfg: &SystemConfig,
) -> Result<(InnerPoint, CurveSet)> {
    omega.validate(cfg)?;
    let curves = strategy.curves_for(cfg, omega)?;
    let point = inner_point(nu, &strategy.links(omega), cfg, &curves)?;
    Ok((point, curves))
}

/// Allocation of one frame under `strategy` at multipliers `nu`.
pub fn strategy_inner_solution(strategy: Strategy, nu: &DualVars, omega: &Nsi, cfg: &SystemConfig) -> Result<Allocation> {
    let (point, curves) = strategy_inner_point(strategy, nu, omega, cfg)?;
    Ok(point.to_allocation(&curves, cfg))
}

/// Two-sensing allocation of one frame at multipliers `nu`; `omega.y` is required.
pub fn inner_solution_ergodic(nu: &DualVars, omega: &Nsi, cfg: &SystemConfig) -> Result<Allocation> {
    strategy_inner_solution(Strategy::TwoSensing, nu, omega, cfg)
}

/// Sample means of the per-frame objective, rates and powers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErgodicPoint {
    /// Mean collision time in frame units.
    pub objective: f64,
    /// Mean `R1 / W` and `R2 / W`.
    pub r1: f64,
    pub r2: f64,
    pub source_power: f64,
    pub relay_power: f64,
}

impl ErgodicPoint {
    pub fn slack(&self, rho: f64, cfg: &SystemConfig) -> [f64; 4] {
        [
            rho - self.r1,
            rho - self.r2,
            self.source_power - cfg.p_s_max,
            self.relay_power - cfg.p_r_max,
        ]
    }
}

/// Sample-average approximation of the ergodic problem over a fixed set of
/// network states.
pub struct ErgodicProblem<'a> {
    cfg: &'a SystemConfig,
    samples: Vec<Nsi>,
    curves: Vec<CurveSet>,
}

impl<'a> ErgodicProblem<'a> {
    pub fn new(cfg: &'a SystemConfig, strategy: Strategy, samples: &[Nsi]) -> Result<Self> {
        cfg.validate()?;
        if samples.is_empty() {
            return Err(Error::InvalidConfig("need at least one training sample".into()));
        }
        let mut links = Vec::with_capacity(samples.len());
        let mut curves = Vec::with_capacity(samples.len());
        for s in samples {
            s.validate(cfg)?;
            curves.push(strategy.curves_for(cfg, s)?);
            links.push(strategy.links(s));
        }
        Ok(Self {
            cfg,
            samples: links,
            curves,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn rho(&self) -> f64 {
        self.cfg.r_min / self.cfg.bandwidth
    }

    fn points(&self, nu: &DualVars) -> Result<Vec<InnerPoint>> {
        (0..self.samples.len())
            .into_par_iter()
            .map(|k| inner_point(nu, &self.samples[k], self.cfg, &self.curves[k]))
            .collect()
    }

    fn recovered(&self, point: ErgodicPoint) -> Recovered<ErgodicPoint> {
        Recovered {
            objective: point.objective,
            slack: point.slack(self.rho(), self.cfg),
            primal: point,
        }
    }
}

impl DualProblem for ErgodicProblem<'_> {
    type Primal = ErgodicPoint;

    fn evaluate(&self, nu: &DualVars) -> Result<DualEval<ErgodicPoint>> {
        let points = self.points(nu)?;
        let mut sum = ErgodicPoint::default();
        for p in &points {
            sum.objective += p.objective;
            sum.r1 += p.r1;
            sum.r2 += p.r2;
            sum.source_power += p.source_power;
            sum.relay_power += p.relay_power;
        }
        let k = points.len() as f64;
        let mean = ErgodicPoint {
            objective: sum.objective / k,
            r1: sum.r1 / k,
            r2: sum.r2 / k,
            source_power: sum.source_power / k,
            relay_power: sum.relay_power / k,
        };
        let slack = mean.slack(self.rho(), self.cfg);
        Ok(DualEval {
            value: mean.objective + nu.to_array().iter().zip(&slack).map(|(v, h)| v * h).sum::<f64>(),
            objective: mean.objective,
            slack,
            primal: mean,
        })
    }

    fn scales(&self) -> [f64; 4] {
        let rho = self.rho().max(f64::MIN_POSITIVE);
        [rho, rho, self.cfg.p_s_max, self.cfg.p_r_max]
    }

    fn objective_ceiling(&self) -> f64 {
        self.curves.iter().map(CurveSet::ceiling).sum::<f64>() / self.curves.len() as f64
    }

    fn recover(&self, nu: &DualVars, _eval: &DualEval<ErgodicPoint>) -> Vec<Recovered<ErgodicPoint>> {
        if !self.curves.iter().all(CurveSet::is_linear) {
            return Vec::new();
        }
        let Ok(points) = self.points(nu) else {
            return Vec::new();
        };
        let (cfg, w) = (self.cfg, 1.0 / self.samples.len() as f64);
        let per_sample: Vec<(Vec<recovery::Slot>, Vec<f64>)> = (0..points.len())
            .into_par_iter()
            .map(|k| {
                let (nsi, curves, p) = (&self.samples[k], &self.curves[k], &points[k]);
                let (c1, c2) = unit_contributions(&p.ratios, nsi, cfg);
                let mut slots = Vec::with_capacity(2 * cfg.n_bands());
                let mut bang = Vec::with_capacity(2 * cfg.n_bands());
                for (m, band) in cfg.band_map.iter().enumerate() {
                    let v1 = band_value_phase1(nu, &p.ratios, nsi, band);
                    let v2 = band_value_phase2(nu, &p.ratios, nsi, band);
                    slots.push(linear_slot(&curves.phase1[m], &c1[m], v1, w));
                    slots.push(linear_slot(&curves.phase2[m], &c2[m], v2, w));
                    bang.push(p.theta1[m]);
                    bang.push(p.theta2[m]);
                }
                (slots, bang)
            })
            .collect();
        let (slots, bang): (Vec<Vec<_>>, Vec<Vec<_>>) = per_sample.into_iter().unzip();
        let slots: Vec<recovery::Slot> = slots.into_iter().flatten().collect();
        let bang: Vec<f64> = bang.into_iter().flatten().collect();
        let rho = self.rho();
        recovery::linear_candidates(&slots, &bang, nu, [rho, rho, cfg.p_s_max, cfg.p_r_max])
            .into_iter()
            .map(|theta| {
                let mut p = ErgodicPoint::default();
                for (s, t) in slots.iter().zip(&theta) {
                    p.objective += s.cost * t;
                    p.r1 += s.unit[0] * t;
                    p.r2 += s.unit[1] * t;
                    p.source_power += s.unit[2] * t;
                    p.relay_power += s.unit[3] * t;
                }
                self.recovered(p)
            })
            .collect()
    }
}

/// Draws `count` network states with both sensing outcomes from the
/// training streams of `seed`. Gains and sensing of sample `i` depend only on
/// `(seed, i)`.
pub fn training_samples(cfg: &SystemConfig, channel: &ChannelModel, seed: u64, count: usize) -> Vec<Nsi> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let gains = channel.sample(cfg, &mut substream(seed, domain::TRAINING_CHANNEL, i));
            let (x, y) = crate::netmodel::sense_bands(cfg, &mut substream(seed, domain::TRAINING_SENSING, i));
            Nsi {
                g_sr: gains.g_sr,
                g_sd: gains.g_sd,
                g_rd: gains.g_rd,
                x,
                y: Some(y),
            }
        })
        .collect()
}

/// What to train and on which sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSetup {
    pub strategy: Strategy,
    pub channel: ChannelModel,
    pub seed: u64,
    /// Number of network states `K` in the sample average.
    pub samples: usize,
}

impl Default for TrainingSetup {
    fn default() -> Self {
        Self {
            strategy: Strategy::TwoSensing,
            channel: ChannelModel::default(),
            seed: 0,
            samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDiagnostics {
    pub samples: usize,
    pub iterations: usize,
    pub status: SolveStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasibility: Option<InfeasibilityReason>,
    /// Norm of the sample-mean constraint slacks at the trained multipliers.
    pub final_subgradient_norm: f64,
    /// Best feasible sample-mean point found during training.
    pub point: ErgodicPoint,
    /// Largest dual value seen.
    pub dual_bound: f64,
}

/// Trained multipliers and what they were trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPolicy {
    pub strategy: Strategy,
    pub duals: DualVars,
    pub config: SystemConfig,
    pub channel: ChannelModel,
    /// SHA-256 of the configuration JSON.
    pub config_hash: String,
    pub seed: u64,
    pub diagnostics: TrainingDiagnostics,
}

impl TrainedPolicy {
    pub fn is_feasible(&self) -> bool {
        self.diagnostics.status != SolveStatus::Infeasible
    }

    /// Allocation of one frame at the trained multipliers.
    pub fn decide(&self, omega: &Nsi) -> Result<Allocation> {
        strategy_inner_solution(self.strategy, &self.duals, omega, &self.config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    /// Parses a policy and checks its hash against its configuration.
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        p.config.validate()?;
        if p.config_hash != config_hash(&p.config) {
            return Err(Error::InvalidConfig("policy hash does not match its configuration".into()));
        }
        DualVars::new(p.duals.zeta, p.duals.sigma, p.duals.epsilon, p.duals.eta)?;
        Ok(p)
    }
}

/// SHA-256 of the canonical configuration JSON, hex encoded.
pub fn config_hash(cfg: &SystemConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_json().as_bytes()))
}

/// Optimizes the shared multipliers on a given sample of network states.
pub fn train_on_samples(
    cfg: &SystemConfig,
    strategy: Strategy,
    samples: &[Nsi],
    opts: &SolverOptions,
) -> Result<(DualVars, TrainingDiagnostics)> {
    let problem = ErgodicProblem::new(cfg, strategy, samples)?;
    let out = maximize_dual(&problem, opts)?;
    let (duals, point) = match &out.best {
        Some((nu, rec)) if out.status != SolveStatus::Infeasible => (*nu, rec.primal),
        _ => (out.last.0, out.last.1.primal),
    };
    let at = problem.evaluate(&duals)?;
    let norm = at.slack.iter().map(|h| h * h).sum::<f64>().sqrt();
    Ok((
        duals,
        TrainingDiagnostics {
            samples: samples.len(),
            iterations: out.iterations,
            status: out.status,
            infeasibility: out.infeasibility,
            final_subgradient_norm: norm,
            point,
            dual_bound: out.best_dual_value,
        },
    ))
}

/// Off-line training: draws `setup.samples` network states from `setup.seed`
/// and maximizes the sample-average dual.
pub fn train_offline(cfg: &SystemConfig, setup: &TrainingSetup, opts: &SolverOptions) -> Result<TrainedPolicy> {
    cfg.validate()?;
    let samples = training_samples(cfg, &setup.channel, setup.seed, setup.samples);
    let (duals, diagnostics) = train_on_samples(cfg, setup.strategy, &samples, opts)?;
    Ok(TrainedPolicy {
        strategy: setup.strategy,
        duals,
        config: cfg.clone(),
        channel: setup.channel,
        config_hash: config_hash(cfg),
        seed: setup.seed,
        diagnostics,
    })
}
