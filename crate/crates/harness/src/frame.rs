//! Frame-level sweep over the rate target.

use crn_share::frame_solver::{solve_frame, solve_relay_free, solve_sensing_free, SolveStatus, SolverOptions, SolverReport};
use crn_share::netmodel::{Allocation, Nsi, SystemConfig};
use crn_share::rng::{domain, substream};
use crn_share::traffic::{collision_time, sample_path, PathStart, SamplePath};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::row::ResultRow;
use crate::spec::ExperimentSpec;
use crate::stats::MeanSe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStrategy {
    Proposed,
    RelayFree,
    SensingFree,
}

impl FrameStrategy {
    pub const ALL: [FrameStrategy; 3] = [FrameStrategy::Proposed, FrameStrategy::RelayFree, FrameStrategy::SensingFree];

    pub fn label(self) -> &'static str {
        match self {
            FrameStrategy::Proposed => "proposed",
            FrameStrategy::RelayFree => "relay_free",
            FrameStrategy::SensingFree => "sensing_free",
        }
    }

    pub fn solve(self, nsi: &Nsi, cfg: &SystemConfig, opts: &SolverOptions) -> Result<SolverReport> {
        Ok(match self {
            FrameStrategy::Proposed => solve_frame(nsi, cfg, opts)?,
            FrameStrategy::RelayFree => solve_relay_free(nsi, cfg, opts)?,
            FrameStrategy::SensingFree => solve_sensing_free(nsi, cfg, opts)?,
        })
    }
}

/// One solve of the sweep.
#[derive(Debug, Clone)]
pub struct FramePoint {
    pub efficiency: f64,
    pub strategy: FrameStrategy,
    pub report: SolverReport,
    /// Collision measured on simulated paths; absent when infeasible.
    pub realized: Option<MeanSe>,
}

impl FramePoint {
    pub fn feasible(&self) -> bool {
        self.report.status != SolveStatus::Infeasible
    }
}

/// Traffic paths of every band for `count` frames: started from the sensed
/// state (strategies that sense) or from the stationary law (sensing-free).
/// Path `i` of band `m` uses stream `i M + m`, shared across grid points.
fn paths(cfg: &SystemConfig, nsi: &Nsi, stationary: bool, count: usize, seed: u64) -> Vec<Vec<SamplePath>> {
    let m = cfg.n_bands();
    (0..count)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| {
                    let start = if stationary { PathStart::Stationary } else { PathStart::Fixed(nsi.x[j]) };
                    let mut rng = substream(seed, domain::TRAFFIC_PATH, (i * m + j) as u64);
                    sample_path(&cfg.traffic[j], start, cfg.frame_duration, &mut rng)
                })
                .collect()
        })
        .collect()
}

/// Mean collision of `alloc` over the paths, in frame units.
pub fn realized_collision(alloc: &Allocation, paths: &[Vec<SamplePath>], t_f: f64) -> Result<MeanSe> {
    let per_path: Vec<f64> = paths
        .par_iter()
        .map(|bands| {
            let mut total = 0.0;
            for (j, path) in bands.iter().enumerate() {
                total += collision_time(path, &alloc.intervals1[j])? + collision_time(path, &alloc.intervals2[j])?;
            }
            Ok(total / t_f)
        })
        .collect::<Result<_>>()?;
    Ok(MeanSe::of(per_path))
}

/// Solves every grid point with every frame strategy and measures the
/// collision of each feasible solution on `spec.frames` simulated paths.
/// Infeasible points are recorded, not fatal.
pub fn frame_points(spec: &ExperimentSpec) -> Result<Vec<FramePoint>> {
    spec.validate()?;
    let nsi = spec.nsi.clone().unwrap_or_else(Nsi::frame_example);
    nsi.validate(&spec.config)?;
    let sensed = paths(&spec.config, &nsi, false, spec.frames, spec.seed);
    let stationary = paths(&spec.config, &nsi, true, spec.frames, spec.seed);
    let opts = SolverOptions::default();
    let jobs: Vec<(f64, FrameStrategy)> = spec
        .grid
        .iter()
        .flat_map(|&e| FrameStrategy::ALL.into_iter().map(move |s| (e, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(efficiency, strategy)| {
            let cfg = spec.config.clone().with_spectral_efficiency(efficiency);
            let report = strategy.solve(&nsi, &cfg, &opts)?;
            let realized = if report.status == SolveStatus::Infeasible {
                None
            } else {
                let p = if strategy == FrameStrategy::SensingFree { &stationary } else { &sensed };
                Some(realized_collision(&report.allocation, p, cfg.frame_duration)?)
            };
            Ok(FramePoint {
                efficiency,
                strategy,
                report,
                realized,
            })
        })
        .collect()
}

pub fn frame_rows(spec: &ExperimentSpec, points: &[FramePoint]) -> Vec<ResultRow> {
    let cfg = &spec.config;
    let width = cfg.n_subchannels as f64 * cfg.bandwidth;
    points
        .iter()
        .map(|p| {
            let feasible = p.feasible();
            let alloc = &p.report.allocation;
            let (theta1, theta2) = if feasible {
                ResultRow::format_thetas(&alloc.theta1_hat, &alloc.theta2_hat)
            } else {
                (String::new(), String::new())
            };
            ResultRow {
                experiment: spec.kind.label().into(),
                sweep: spec.kind.sweep_name().into(),
                value: p.efficiency,
                strategy: p.strategy.label().into(),
                efficiency: p.efficiency,
                varsigma: cfg.traffic[0].varsigma(cfg.frame_duration),
                p_error: 0.0,
                feasible,
                collision: feasible.then_some(p.report.objective),
                collision_se: None,
                realized: p.realized.map(|r| r.mean),
                realized_se: p.realized.map(|r| r.se),
                rate: feasible.then(|| p.report.rate() / width),
                theta1,
                theta2,
                frames: spec.frames,
            }
        })
        .collect()
}

/// Frame-level results for every grid point and strategy.
pub fn run_frame_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    Ok(frame_rows(spec, &frame_points(spec)?))
}
