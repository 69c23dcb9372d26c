//! Experiment descriptions.

use std::path::PathBuf;
use std::str::FromStr;

use crn_share::ergodic_solver::Strategy;
use crn_share::netmodel::{ChannelModel, Nsi, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Frame-level solvers over a grid of rate targets.
    FrameSweep,
    /// Trained ergodic strategies over a grid of average rate targets.
    ErgodicSweep,
    /// Ergodic strategies over a grid of relative variation rates.
    VarsigmaSweep,
    /// Two-sensing strategy over a grid of sensing error probabilities.
    SensingErrorSweep,
    /// The oracle suites.
    Validate,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::FrameSweep => "frame",
            ExperimentKind::ErgodicSweep => "ergodic",
            ExperimentKind::VarsigmaSweep => "varsigma",
            ExperimentKind::SensingErrorSweep => "sensing-error",
            ExperimentKind::Validate => "validate",
        }
    }

    /// Name of the swept quantity.
    pub fn sweep_name(self) -> &'static str {
        match self {
            ExperimentKind::FrameSweep | ExperimentKind::ErgodicSweep => "efficiency",
            ExperimentKind::VarsigmaSweep => "varsigma",
            ExperimentKind::SensingErrorSweep => "p_error",
            ExperimentKind::Validate => "none",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frame" | "frame-sweep" => Ok(ExperimentKind::FrameSweep),
            "ergodic" | "ergodic-sweep" => Ok(ExperimentKind::ErgodicSweep),
            "varsigma" | "varsigma-sweep" => Ok(ExperimentKind::VarsigmaSweep),
            "sensing-error" | "sensing-error-sweep" => Ok(ExperimentKind::SensingErrorSweep),
            "validate" => Ok(ExperimentKind::Validate),
            other => Err(HarnessError::BadInput(format!("unknown experiment {other:?}"))),
        }
    }
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub config: SystemConfig,
    #[serde(default)]
    pub channel: ChannelModel,
    /// Values of the swept quantity.
    pub grid: Vec<f64>,
    /// Rate targets `R_min / (N W)` held fixed for the varsigma and sensing
    /// error sweeps; each gets its own block of rows.
    #[serde(default)]
    pub efficiencies: Vec<f64>,
    /// Strategies of the ergodic experiments.
    #[serde(default)]
    pub strategies: Vec<Strategy>,
    /// Evaluation frames (ergodic) or simulated paths (frame sweep) per point.
    pub frames: usize,
    /// Network states in the training sample.
    pub training_samples: usize,
    pub seed: u64,
    /// Network state of the frame sweep; the built-in reference state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nsi: Option<Nsi>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// `start, start + step, ..., end` without accumulated rounding.
pub fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((start + step * i as f64) * 1e9).round() / 1e9).collect()
}

impl ExperimentSpec {
    /// Default setting of each experiment.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let ergodic = |grid: Vec<f64>, efficiencies: Vec<f64>, strategies: Vec<Strategy>| Self {
            kind,
            config: SystemConfig::ergodic_example(1.7),
            channel: ChannelModel::default(),
            grid,
            efficiencies,
            strategies,
            frames: 500,
            training_samples: 2000,
            seed: 1,
            nsi: None,
            output: None,
        };
        match kind {
            ExperimentKind::FrameSweep | ExperimentKind::Validate => Self {
                kind,
                config: SystemConfig::frame_example(0.3),
                channel: ChannelModel::default(),
                grid: grid(0.01, 0.6, 0.01),
                efficiencies: Vec::new(),
                strategies: Vec::new(),
                frames: 10_000,
                training_samples: 0,
                seed: 1,
                nsi: None,
                output: None,
            },
            ExperimentKind::ErgodicSweep => ergodic(vec![0.6, 1.7, 2.8], Vec::new(), Strategy::ALL.to_vec()),
            ExperimentKind::VarsigmaSweep => ergodic(
                vec![0.25, 0.5, 1.0, 2.0, 4.0],
                vec![1.7],
                vec![Strategy::TwoSensing, Strategy::Phase1Only, Strategy::SensingFree],
            ),
            ExperimentKind::SensingErrorSweep => ergodic(
                vec![0.0, 0.01, 0.02, 0.05, 0.1],
                vec![0.6, 1.7],
                vec![Strategy::TwoSensing],
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.kind != ExperimentKind::Validate && self.grid.is_empty() {
            return Err(HarnessError::BadInput("the sweep grid is empty".into()));
        }
        if self.frames == 0 {
            return Err(HarnessError::BadInput("frames must be at least 1".into()));
        }
        if let Some(v) = self.grid.iter().chain(&self.efficiencies).find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(HarnessError::BadInput(format!("invalid grid value {v}")));
        }
        let ergodic = matches!(
            self.kind,
            ExperimentKind::ErgodicSweep | ExperimentKind::VarsigmaSweep | ExperimentKind::SensingErrorSweep
        );
        if ergodic && (self.strategies.is_empty() || self.training_samples == 0) {
            return Err(HarnessError::BadInput("ergodic experiments need strategies and training samples".into()));
        }
        if matches!(self.kind, ExperimentKind::VarsigmaSweep | ExperimentKind::SensingErrorSweep) && self.efficiencies.is_empty() {
            return Err(HarnessError::BadInput("this sweep needs at least one efficiency".into()));
        }
        if let Some(nsi) = &self.nsi {
            nsi.validate(&self.config)?;
        }
        if self.kind == ExperimentKind::SensingErrorSweep && self.grid.iter().any(|p| *p > 1.0) {
            return Err(HarnessError::BadInput("error probabilities must lie in [0, 1]".into()));
        }
        if self.kind == ExperimentKind::VarsigmaSweep && self.grid.iter().any(|v| *v <= 0.0) {
            return Err(HarnessError::BadInput("varsigma must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| HarnessError::BadInput(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_clean_values() {
        let g = grid(0.01, 0.6, 0.01);
        assert_eq!(g.len(), 60);
        assert_eq!(g[41], 0.42);
        assert_eq!(*g.last().unwrap(), 0.6);
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        for kind in [
            ExperimentKind::FrameSweep,
            ExperimentKind::ErgodicSweep,
            ExperimentKind::VarsigmaSweep,
            ExperimentKind::SensingErrorSweep,
            ExperimentKind::Validate,
        ] {
            let spec = ExperimentSpec::default_for(kind);
            spec.validate().unwrap();
            assert_eq!(ExperimentSpec::from_json(&spec.to_json()).unwrap(), spec);
            assert_eq!(kind.label().parse::<ExperimentKind>().unwrap(), kind);
        }
    }

    #[test]
    fn empty_grid_is_rejected() {
        let mut spec = ExperimentSpec::default_for(ExperimentKind::FrameSweep);
        spec.grid.clear();
        assert!(spec.validate().is_err());
    }
}
