//! Long-term average experiments: strategy comparison, traffic variation
//! rate and sensing errors.

use crn_share::ergodic_solver::{train_offline, Strategy, TrainedPolicy, TrainingSetup};
use crn_share::frame_solver::SolverOptions;
use crn_share::netmodel::SystemConfig;
use crn_share::traffic::TrafficParams;
use rayon::prelude::*;

use crate::error::Result;
use crate::row::ResultRow;
use crate::simulate::{simulate, simulate_with_errors, summarize, FrameTrace};
use crate::spec::{ExperimentKind, ExperimentSpec};

/// One trained strategy at one sweep point, with its evaluation frames.
#[derive(Debug, Clone)]
pub struct ErgodicRun {
    pub value: f64,
    pub efficiency: f64,
    pub varsigma: f64,
    pub p_error: f64,
    pub strategy: Strategy,
    pub policy: TrainedPolicy,
    /// Empty when the policy is infeasible.
    pub traces: Vec<FrameTrace>,
}

impl ErgodicRun {
    pub fn feasible(&self) -> bool {
        self.policy.is_feasible()
    }
}

/// Trains `strategy` on `spec.training_samples` states drawn from the
/// training streams of `spec.seed`.
pub fn train(spec: &ExperimentSpec, cfg: &SystemConfig, strategy: Strategy) -> Result<TrainedPolicy> {
    let setup = TrainingSetup {
        strategy,
        channel: spec.channel,
        seed: spec.seed,
        samples: spec.training_samples,
    };
    Ok(train_offline(cfg, &setup, &SolverOptions::default())?)
}

fn varsigma_of(cfg: &SystemConfig) -> f64 {
    cfg.traffic[0].varsigma(cfg.frame_duration)
}

/// Trains and evaluates every `(config, strategy)` job. Evaluation uses the
/// same frames for every job, so strategies are compared on paired samples.
fn run_jobs(spec: &ExperimentSpec, jobs: Vec<(f64, SystemConfig, Strategy)>) -> Result<Vec<ErgodicRun>> {
    jobs.into_par_iter()
        .map(|(value, cfg, strategy)| {
            let policy = train(spec, &cfg, strategy)?;
            let traces = if policy.is_feasible() {
                simulate(&policy, spec.frames, spec.seed)?
            } else {
                Vec::new()
            };
            Ok(ErgodicRun {
                value,
                efficiency: cfg.spectral_efficiency(),
                varsigma: varsigma_of(&cfg),
                p_error: 0.0,
                strategy,
                policy,
                traces,
            })
        })
        .collect()
}

/// Every strategy at every average rate target of the grid.
pub fn ergodic_runs(spec: &ExperimentSpec) -> Result<Vec<ErgodicRun>> {
    spec.validate()?;
    let jobs = spec
        .grid
        .iter()
        .flat_map(|&eff| {
            let cfg = spec.config.clone().with_spectral_efficiency(eff);
            spec.strategies.iter().map(move |&s| (eff, cfg.clone(), s))
        })
        .collect();
    run_jobs(spec, jobs)
}

/// Every strategy at every relative variation rate of the grid, with
/// `lambda = mu = 2 varsigma / T_f` on every band, for each efficiency.
pub fn varsigma_runs(spec: &ExperimentSpec) -> Result<Vec<ErgodicRun>> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &eff in &spec.efficiencies {
        for &vs in &spec.grid {
            let tp = TrafficParams::symmetric_from_varsigma(vs, spec.config.frame_duration)?;
            let cfg = spec.config.clone().with_shared_traffic(tp).with_spectral_efficiency(eff);
            jobs.extend(spec.strategies.iter().map(|&s| (vs, cfg.clone(), s)));
        }
    }
    run_jobs(spec, jobs)
}

/// Every strategy at every sensing error probability of the grid, for each
/// efficiency. Policies are trained once per efficiency and evaluated on the
/// same frames and error draws at every probability.
pub fn sensing_error_runs(spec: &ExperimentSpec) -> Result<Vec<ErgodicRun>> {
    spec.validate()?;
    let trained: Vec<(f64, TrainedPolicy)> = spec
        .efficiencies
        .iter()
        .flat_map(|&eff| spec.strategies.iter().map(move |&s| (eff, s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(eff, s)| Ok((eff, train(spec, &spec.config.clone().with_spectral_efficiency(eff), s)?)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(&TrainedPolicy, f64)> = trained
        .iter()
        .flat_map(|(_, policy)| spec.grid.iter().map(move |&p| (policy, p)))
        .collect();
    jobs.into_par_iter()
        .map(|(policy, p)| {
            let traces = if policy.is_feasible() {
                simulate_with_errors(policy, spec.frames, spec.seed, p)?
            } else {
                Vec::new()
            };
            Ok(ErgodicRun {
                value: p,
                efficiency: policy.config.spectral_efficiency(),
                varsigma: varsigma_of(&policy.config),
                p_error: p,
                strategy: policy.strategy,
                policy: policy.clone(),
                traces,
            })
        })
        .collect()
}

pub fn ergodic_rows(kind: ExperimentKind, runs: &[ErgodicRun]) -> Vec<ResultRow> {
    runs.iter()
        .map(|r| {
            let feasible = r.feasible() && !r.traces.is_empty();
            let s = feasible.then(|| summarize(&r.traces, r.policy.config.n_subchannels));
            ResultRow {
                experiment: kind.label().into(),
                sweep: kind.sweep_name().into(),
                value: r.value,
                strategy: r.strategy.label().into(),
                efficiency: r.efficiency,
                varsigma: r.varsigma,
                p_error: r.p_error,
                feasible: r.feasible(),
                collision: s.and_then(|s| s.analytic).map(|a| a.mean),
                collision_se: s.and_then(|s| s.analytic).map(|a| a.se),
                realized: s.map(|s| s.realized.mean),
                realized_se: s.map(|s| s.realized.se),
                rate: s.map(|s| s.rate),
                theta1: String::new(),
                theta2: String::new(),
                frames: r.traces.len(),
            }
        })
        .collect()
}

pub fn run_ergodic_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    Ok(ergodic_rows(spec.kind, &ergodic_runs(spec)?))
}

pub fn run_varsigma_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    Ok(ergodic_rows(spec.kind, &varsigma_runs(spec)?))
}

pub fn run_sensing_error_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    Ok(ergodic_rows(spec.kind, &sensing_error_runs(spec)?))
}
