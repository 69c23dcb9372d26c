//! Transmission-interval placement and the interference objective.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::netmodel::SystemConfig;
use crate::traffic::{CollisionCurve, FrameTiming, Occupancy};

/// Finite union of disjoint intervals on the time axis.
///
/// Stored half-open, `[a, b)`, sorted and coalesced, so measures and unions
/// are exact; [`IntervalSet::intervals`] reports them as closed pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct IntervalSet {
    spans: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for IntervalSet {
    type Error = Error;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        Self::from_intervals(v)
    }
}

impl From<IntervalSet> for Vec<(f64, f64)> {
    fn from(s: IntervalSet) -> Self {
        s.spans
    }
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self { spans: Vec::new() }
    }

    pub fn single(a: f64, b: f64) -> Result<Self> {
        Self::from_intervals([(a, b)])
    }

    /// Union of arbitrary (possibly overlapping) intervals.
    pub fn from_intervals(spans: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = Vec::new();
        for (a, b) in spans {
            if !(a.is_finite() && b.is_finite()) || a > b || a < 0.0 {
                return Err(Error::MalformedIntervals(format!("[{a}, {b}]")));
            }
            if a < b {
                v.push((a, b));
            }
        }
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
        Ok(Self::coalesce(v))
    }

    /// Caller guarantees sorted, disjoint, nonempty spans.
    pub(crate) fn from_sorted_unchecked(spans: Vec<(f64, f64)>) -> Self {
        Self::coalesce(spans)
    }

    fn coalesce(sorted: Vec<(f64, f64)>) -> Self {
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (a, b) in sorted {
            if a >= b {
                continue;
            }
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self { spans: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.spans.iter().map(|(a, b)| b - a).sum()
    }

    /// Right end of the last interval.
    pub fn sup(&self) -> Option<f64> {
        self.spans.last().map(|s| s.1)
    }

    pub fn contains(&self, t: f64) -> bool {
        let i = self.spans.partition_point(|s| s.1 <= t);
        self.spans.get(i).is_some_and(|s| s.0 <= t)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all: Vec<_> = self.spans.iter().chain(&other.spans).copied().collect();
        all.sort_by(|p, q| p.0.total_cmp(&q.0));
        Self::coalesce(all)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.spans.len() && j < other.spans.len() {
            let (a0, a1) = self.spans[i];
            let (b0, b1) = other.spans[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo < hi {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { spans: out }
    }

    pub fn intersection_measure(&self, other: &Self) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut total = 0.0;
        while i < self.spans.len() && j < other.spans.len() {
            let (a0, a1) = self.spans[i];
            let (b0, b1) = other.spans[j];
            total += (a1.min(b1) - a0.max(b0)).max(0.0);
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            spans: self.spans.iter().map(|&(a, b)| (a * factor, b * factor)).collect(),
        }
    }
}

/// Interval of length `theta T_f` assumed by `curve`, in seconds.
pub fn place(curve: &CollisionCurve, theta: f64, frame_duration: f64) -> IntervalSet {
    if theta <= 0.0 {
        return IntervalSet::empty();
    }
    let (a, b) = curve.placement(theta);
    IntervalSet::from_sorted_unchecked(vec![(a.max(0.0) * frame_duration, b * frame_duration)])
}

/// Phase-1 interval: right after the control delay when the band was idle,
/// flush against the end of Phase 1 when it was active.
pub fn place_phase1(theta_hat: f64, x: Occupancy, timing: &FrameTiming) -> Result<IntervalSet> {
    timing.validate()?;
    check_range("theta_hat", theta_hat, 0.0, timing.phase1_max())?;
    let curve = CollisionCurve::phase1(&unit_traffic(), x, timing);
    Ok(place(&curve, theta_hat, timing.frame_duration))
}

/// Phase-2 interval when only the frame-start sensing is known.
pub fn place_phase2_frame(theta_hat: f64, x: Occupancy, timing: &FrameTiming) -> Result<IntervalSet> {
    timing.validate()?;
    check_range("theta_hat", theta_hat, 0.0, timing.phase2_frame_max())?;
    let curve = CollisionCurve::phase2_frame(&unit_traffic(), x, timing);
    Ok(place(&curve, theta_hat, timing.frame_duration))
}

/// Phase-2 interval after a second sensing at `alpha T_f`.
pub fn place_phase2_ergodic(theta_hat: f64, y: Occupancy, timing: &FrameTiming) -> Result<IntervalSet> {
    timing.validate()?;
    check_range("theta_hat", theta_hat, 0.0, timing.phase2_ergodic_max())?;
    let curve = CollisionCurve::phase2_ergodic(&unit_traffic(), y, timing);
    Ok(place(&curve, theta_hat, timing.frame_duration))
}

// Placement does not depend on the traffic rates.
fn unit_traffic() -> crate::traffic::TrafficParams {
    crate::traffic::TrafficParams::new(1.0, 1.0).expect("valid")
}

fn check_lengths(cfg: &SystemConfig, parts: &[usize]) -> Result<()> {
    let m = cfg.n_bands();
    if parts.iter().any(|&l| l != m) {
        return Err(Error::Dimension(format!("expected {m} entries per band vector")));
    }
    Ok(())
}

/// Expected collision time (seconds) of a frame using the placements above,
/// Phase 2 conditioned on the frame-start sensing.
pub fn frame_interference(
    theta1_hat: &[f64],
    theta2_hat: &[f64],
    x: &[Occupancy],
    cfg: &SystemConfig,
) -> Result<f64> {
    check_lengths(cfg, &[theta1_hat.len(), theta2_hat.len(), x.len()])?;
    let timing = cfg.timing();
    let mut total = 0.0;
    for m in 0..cfg.n_bands() {
        check_range("theta1_hat", theta1_hat[m], 0.0, timing.phase1_max())?;
        check_range("theta2_hat", theta2_hat[m], 0.0, timing.phase2_frame_max())?;
        let tp = &cfg.traffic[m];
        total += CollisionCurve::phase1(tp, x[m], &timing).value(theta1_hat[m])
            + CollisionCurve::phase2_frame(tp, x[m], &timing).value(theta2_hat[m]);
    }
    Ok(total * cfg.frame_duration)
}

/// As [`frame_interference`], with Phase 2 conditioned on the second sensing `y`.
pub fn frame_interference_ergodic(
    theta1_hat: &[f64],
    theta2_hat: &[f64],
    x: &[Occupancy],
    y: &[Occupancy],
    cfg: &SystemConfig,
) -> Result<f64> {
    check_lengths(cfg, &[theta1_hat.len(), theta2_hat.len(), x.len(), y.len()])?;
    let timing = cfg.timing();
    let mut total = 0.0;
    for m in 0..cfg.n_bands() {
        check_range("theta1_hat", theta1_hat[m], 0.0, timing.phase1_max())?;
        check_range("theta2_hat", theta2_hat[m], 0.0, timing.phase2_ergodic_max())?;
        let tp = &cfg.traffic[m];
        total += CollisionCurve::phase1(tp, x[m], &timing).value(theta1_hat[m])
            + CollisionCurve::phase2_ergodic(tp, y[m], &timing).value(theta2_hat[m]);
    }
    Ok(total * cfg.frame_duration)
}

/// Band-level time fraction: the largest fraction among the band's sub-channels.
pub fn align_band(theta_per_subchannel: &[f64], band_map: &[Vec<usize>]) -> Result<Vec<f64>> {
    band_map
        .iter()
        .map(|band| {
            band.iter()
                .map(|&k| {
                    theta_per_subchannel
                        .get(k)
                        .copied()
                        .ok_or_else(|| Error::Dimension(format!("no fraction for sub-channel {k}")))
                })
                .try_fold(0.0f64, |acc, t| Ok(acc.max(t?)))
        })
        .collect()
}
