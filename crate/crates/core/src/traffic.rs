//! Binary CTMC model of the ad-hoc traffic in one band.
//!
//! The chain is IDLE (0) or ACTIVE (1); it leaves IDLE at rate `lambda` and
//! leaves ACTIVE at rate `mu`. Given the state observed by a spectrum sensing,
//! the expected time the band is ACTIVE over a transmission interval has a
//! closed form. Those closed forms are the `phi` functions used as the
//! interference objective: all of them are evaluated here in frame units
//! (`T_f = 1`) by [`CollisionCurve`] and rescaled to seconds only by the public
//! `phi*` wrappers.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::access::IntervalSet;
use crate::error::{check_range, Error, Result};
use crate::rng::{domain, substream};

/// Observed (or true) state of an ad-hoc band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Occupancy {
    Idle,
    Active,
}

impl Occupancy {
    pub fn is_active(self) -> bool {
        self == Occupancy::Active
    }

    pub fn flipped(self) -> Self {
        match self {
            Occupancy::Idle => Occupancy::Active,
            Occupancy::Active => Occupancy::Idle,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub const BOTH: [Occupancy; 2] = [Occupancy::Idle, Occupancy::Active];
}

impl From<Occupancy> for u8 {
    fn from(o: Occupancy) -> u8 {
        o as u8
    }
}

impl TryFrom<u8> for Occupancy {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Occupancy::Idle),
            1 => Ok(Occupancy::Active),
            other => Err(format!("occupancy must be 0 or 1, got {other}")),
        }
    }
}

impl From<bool> for Occupancy {
    fn from(active: bool) -> Self {
        if active {
            Occupancy::Active
        } else {
            Occupancy::Idle
        }
    }
}

/// Transition rates of one band's traffic, in 1/seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTraffic")]
pub struct TrafficParams {
    /// IDLE -> ACTIVE rate.
    lambda: f64,
    /// ACTIVE -> IDLE rate.
    mu: f64,
}

#[derive(Deserialize)]
struct RawTraffic {
    lambda: f64,
    mu: f64,
}

impl TryFrom<RawTraffic> for TrafficParams {
    type Error = Error;
    fn try_from(raw: RawTraffic) -> Result<Self> {
        TrafficParams::new(raw.lambda, raw.mu)
    }
}

impl TrafficParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0 && mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "traffic rates must be positive and finite (lambda = {lambda}, mu = {mu})"
            )));
        }
        Ok(Self { lambda, mu })
    }

    /// Symmetric traffic with relative variation rate `varsigma = T_f / (1/lambda + 1/mu)`.
    pub fn symmetric_from_varsigma(varsigma: f64, frame_duration: f64) -> Result<Self> {
        let rate = 2.0 * varsigma / frame_duration;
        Self::new(rate, rate)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn total_rate(&self) -> f64 {
        self.lambda + self.mu
    }

    pub fn varsigma(&self, frame_duration: f64) -> f64 {
        frame_duration / (1.0 / self.lambda + 1.0 / self.mu)
    }
}

/// Long-run probability that the band is ACTIVE, `lambda / (lambda + mu)`.
pub fn stationary_active_prob(tp: &TrafficParams) -> f64 {
    tp.lambda / (tp.lambda + tp.mu)
}

/// Entry `(from, to)` of the transition matrix `P(t)`.
pub fn transition_prob(tp: &TrafficParams, t: f64, from: Occupancy, to: Occupancy) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let s = tp.total_rate();
    let decay = (-s * t).exp();
    let pi = stationary_active_prob(tp);
    let to_active = match from {
        Occupancy::Idle => pi * (1.0 - decay),
        Occupancy::Active => pi + (1.0 - pi) * decay,
    };
    Ok(match to {
        Occupancy::Active => to_active,
        Occupancy::Idle => 1.0 - to_active,
    })
}

/// Timing of one frame: duration `T_f` and the fractions `alpha` (end of
/// Phase 1) and `delta` (control delay after each sensing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTiming {
    pub frame_duration: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl FrameTiming {
    pub fn new(frame_duration: f64, alpha: f64, delta: f64) -> Result<Self> {
        let t = Self {
            frame_duration,
            alpha,
            delta,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_duration.is_finite() && self.frame_duration > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "frame duration must be positive, got {}",
                self.frame_duration
            )));
        }
        if !(0.0 <= self.delta && self.delta < self.alpha && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= delta < alpha < 1 (alpha = {}, delta = {})",
                self.alpha, self.delta
            )));
        }
        Ok(())
    }

    pub fn phase1_max(&self) -> f64 {
        self.alpha - self.delta
    }

    pub fn phase2_frame_max(&self) -> f64 {
        1.0 - self.alpha
    }

    /// Phase-2 bound when a second sensing (and its delay) precedes Phase 2.
    pub fn phase2_ergodic_max(&self) -> f64 {
        (1.0 - self.alpha - self.delta).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    /// Interval starts `lag` frames after an IDLE observation.
    IdleStart { lag: f64 },
    /// Interval ends `horizon` frames after an ACTIVE observation.
    ActiveEnd { horizon: f64 },
    /// No observation: the stationary occupancy applies everywhere.
    Stationary,
}

/// Expected collision time, in frame units, of an optimally placed interval of
/// length `theta` as a function of `theta`, together with the closed-form
/// minimizer of `phi(theta) - gain * theta` over `[0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionCurve {
    shape: Shape,
    /// Frame time (in frame units) at which the conditioning sensing happens.
    origin: f64,
    upper: f64,
    active_prob: f64,
    /// `(lambda + mu) * T_f`.
    rate: f64,
}

impl CollisionCurve {
    fn new(shape: Shape, origin: f64, upper: f64, tp: &TrafficParams, frame_duration: f64) -> Self {
        Self {
            shape,
            origin,
            upper,
            active_prob: stationary_active_prob(tp),
            rate: tp.total_rate() * frame_duration,
        }
    }

    /// Phase-1 curve conditioned on the frame-start sensing `x`.
    pub fn phase1(tp: &TrafficParams, x: Occupancy, timing: &FrameTiming) -> Self {
        let shape = match x {
            Occupancy::Idle => Shape::IdleStart { lag: timing.delta },
            Occupancy::Active => Shape::ActiveEnd {
                horizon: timing.alpha,
            },
        };
        Self::new(shape, 0.0, timing.phase1_max(), tp, timing.frame_duration)
    }

    /// Phase-2 curve conditioned on the frame-start sensing `x` only.
    pub fn phase2_frame(tp: &TrafficParams, x: Occupancy, timing: &FrameTiming) -> Self {
        let shape = match x {
            Occupancy::Idle => Shape::IdleStart { lag: timing.alpha },
            Occupancy::Active => Shape::ActiveEnd { horizon: 1.0 },
        };
        Self::new(shape, 0.0, timing.phase2_frame_max(), tp, timing.frame_duration)
    }

    /// Phase-2 curve conditioned on a second sensing `y` at `alpha * T_f`.
    pub fn phase2_ergodic(tp: &TrafficParams, y: Occupancy, timing: &FrameTiming) -> Self {
        let shape = match y {
            Occupancy::Idle => Shape::IdleStart { lag: timing.delta },
            Occupancy::Active => Shape::ActiveEnd {
                horizon: 1.0 - timing.alpha,
            },
        };
        Self::new(shape, timing.alpha, timing.phase2_ergodic_max(), tp, timing.frame_duration)
    }

    /// Sensing-free curve `pi * theta`; the interval is placed at `start`.
    pub fn stationary(tp: &TrafficParams, start: f64, upper: f64) -> Self {
        Self::new(Shape::Stationary, start, upper, tp, 1.0)
    }

    /// The interval of length `theta` this curve assumes, in frame units.
    pub fn placement(&self, theta: f64) -> (f64, f64) {
        match self.shape {
            Shape::IdleStart { lag } => {
                let a = self.origin + lag;
                (a, a + theta)
            }
            Shape::ActiveEnd { horizon } => {
                let b = self.origin + horizon;
                (b - theta, b)
            }
            Shape::Stationary => (self.origin, self.origin + theta),
        }
    }

    pub fn active_prob(&self) -> f64 {
        self.active_prob
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.shape, Shape::Stationary)
    }

    pub fn value(&self, theta: f64) -> f64 {
        let (pi, s) = (self.active_prob, self.rate);
        match self.shape {
            Shape::IdleStart { lag } => pi * (theta + (-s * lag).exp() * (-s * theta).exp_m1() / s),
            Shape::ActiveEnd { horizon } => {
                pi * theta + (1.0 - pi) * (-s * horizon).exp() * (s * theta).exp_m1() / s
            }
            Shape::Stationary => pi * theta,
        }
    }

    pub fn slope(&self, theta: f64) -> f64 {
        let (pi, s) = (self.active_prob, self.rate);
        match self.shape {
            Shape::IdleStart { lag } => pi * (1.0 - (-s * (lag + theta)).exp()),
            Shape::ActiveEnd { horizon } => pi + (1.0 - pi) * (-s * (horizon - theta)).exp(),
            Shape::Stationary => pi,
        }
    }

    /// Minimizer of `phi(theta) - gain * theta` over `[0, upper]`.
    ///
    /// `ln` of a nonpositive argument is read as `-inf`, which lands on the
    /// corresponding bound. For the linear curve ties go to zero.
    pub fn best_fraction(&self, gain: f64) -> f64 {
        let (pi, s, upper) = (self.active_prob, self.rate, self.upper);
        if upper <= 0.0 {
            return 0.0;
        }
        let theta = match self.shape {
            Shape::IdleStart { lag } => {
                let arg = 1.0 - gain / pi;
                if arg <= 0.0 {
                    upper
                } else {
                    -(-gain / pi).ln_1p() / s - lag
                }
            }
            Shape::ActiveEnd { horizon } => {
                let arg = (gain - pi) / (1.0 - pi);
                if arg <= 0.0 {
                    0.0
                } else {
                    horizon + arg.ln() / s
                }
            }
            Shape::Stationary => {
                if gain > pi {
                    upper
                } else {
                    0.0
                }
            }
        };
        theta.clamp(0.0, upper)
    }
}

/// Expected Phase-1 collision time (seconds) of the optimal placement.
pub fn phi1(
    theta: f64,
    x: Occupancy,
    tp: &TrafficParams,
    t_f: f64,
    alpha: f64,
    delta: f64,
) -> Result<f64> {
    let timing = FrameTiming::new(t_f, alpha, delta)?;
    check_range("theta", theta, 0.0, timing.phase1_max())?;
    Ok(CollisionCurve::phase1(tp, x, &timing).value(theta) * t_f)
}

/// Expected Phase-2 collision time (seconds), conditioned on the frame-start sensing.
pub fn phi2_frame(theta: f64, x: Occupancy, tp: &TrafficParams, t_f: f64, alpha: f64) -> Result<f64> {
    let timing = FrameTiming::new(t_f, alpha, 0.0)?;
    check_range("theta", theta, 0.0, timing.phase2_frame_max())?;
    Ok(CollisionCurve::phase2_frame(tp, x, &timing).value(theta) * t_f)
}

/// Expected Phase-2 collision time (seconds), conditioned on the Phase-2 sensing `y`.
pub fn phi2_ergodic(
    theta: f64,
    y: Occupancy,
    tp: &TrafficParams,
    t_f: f64,
    alpha: f64,
    delta: f64,
) -> Result<f64> {
    let timing = FrameTiming::new(t_f, alpha, delta)?;
    check_range("theta", theta, 0.0, timing.phase2_ergodic_max())?;
    Ok(CollisionCurve::phase2_ergodic(tp, y, &timing).value(theta) * t_f)
}

/// How the initial state of a sample path is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStart {
    Fixed(Occupancy),
    Stationary,
}

/// One realized trajectory of a band over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    initial_state: Occupancy,
    transitions: Vec<f64>,
    horizon: f64,
}

impl SamplePath {
    pub fn new(initial_state: Occupancy, transitions: Vec<f64>, horizon: f64) -> Result<Self> {
        let mut prev = 0.0;
        for &t in &transitions {
            if !(t > prev && t <= horizon) {
                return Err(Error::InvalidConfig(format!(
                    "transition times must be strictly increasing within (0, {horizon}]"
                )));
            }
            prev = t;
        }
        Ok(Self {
            initial_state,
            transitions,
            horizon,
        })
    }

    pub fn initial_state(&self) -> Occupancy {
        self.initial_state
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn state_at(&self, t: f64) -> Occupancy {
        let flips = self.transitions.partition_point(|&s| s <= t);
        if flips % 2 == 0 {
            self.initial_state
        } else {
            self.initial_state.flipped()
        }
    }

    /// Times in `[0, horizon]` during which the band is ACTIVE.
    pub fn active_set(&self) -> IntervalSet {
        let mut spans = Vec::with_capacity(self.transitions.len() / 2 + 1);
        let mut start = if self.initial_state.is_active() { Some(0.0) } else { None };
        for &t in &self.transitions {
            match start.take() {
                Some(a) => spans.push((a, t)),
                None => start = Some(t),
            }
        }
        if let Some(a) = start {
            spans.push((a, self.horizon));
        }
        IntervalSet::from_sorted_unchecked(spans)
    }
}

/// Draws a trajectory with exponential holding times.
pub fn sample_path<R: Rng + ?Sized>(
    tp: &TrafficParams,
    start: PathStart,
    horizon: f64,
    rng: &mut R,
) -> SamplePath {
    let initial_state = match start {
        PathStart::Fixed(s) => s,
        PathStart::Stationary => Occupancy::from(rng.random::<f64>() < stationary_active_prob(tp)),
    };
    let leave_idle = Exp::new(tp.lambda).expect("positive rate");
    let leave_active = Exp::new(tp.mu).expect("positive rate");
    let mut transitions = Vec::new();
    let mut state = initial_state;
    let mut t = 0.0;
    loop {
        let hold = match state {
            Occupancy::Idle => leave_idle.sample(rng),
            Occupancy::Active => leave_active.sample(rng),
        };
        t += hold;
        if t > horizon {
            break;
        }
        if hold > 0.0 {
            transitions.push(t);
        }
        state = state.flipped();
    }
    SamplePath {
        initial_state,
        transitions,
        horizon,
    }
}

/// [`sample_path`] on its own substream, addressed by `seed` and `index`.
pub fn sample_path_seeded(
    tp: &TrafficParams,
    start: PathStart,
    horizon: f64,
    seed: u64,
    index: u64,
) -> SamplePath {
    let mut rng = substream(seed, domain::TRAFFIC_PATH, index);
    sample_path(tp, start, horizon, &mut rng)
}

/// Time within `intervals` during which the path is ACTIVE.
pub fn collision_time(path: &SamplePath, intervals: &IntervalSet) -> Result<f64> {
    if let Some(end) = intervals.sup() {
        if end > path.horizon * (1.0 + 1e-12) {
            return Err(Error::MalformedIntervals(format!(
                "interval set ends at {end}, beyond the path horizon {}",
                path.horizon
            )));
        }
    }
    Ok(path.active_set().intersection_measure(intervals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> TrafficParams {
        TrafficParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn transition_prob_trivial_values() {
        let tp = unit();
        assert_eq!(transition_prob(&tp, 0.0, Occupancy::Idle, Occupancy::Idle).unwrap(), 1.0);
        let far = transition_prob(&tp, 60.0, Occupancy::Idle, Occupancy::Active).unwrap();
        assert!((far - 0.5).abs() < 1e-15);
        let one = transition_prob(&tp, 1.0, Occupancy::Idle, Occupancy::Active).unwrap();
        assert!((one - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-15);
        assert!((one - 0.43233).abs() < 1e-5);
    }

    #[test]
    fn negative_time_is_rejected() {
        assert_eq!(
            transition_prob(&unit(), -1.0, Occupancy::Idle, Occupancy::Idle),
            Err(Error::NegativeTime(-1.0))
        );
    }

    #[test]
    fn stationary_probability() {
        assert_eq!(stationary_active_prob(&unit()), 0.5);
        let p = stationary_active_prob(&TrafficParams::new(2.0, 1.0).unwrap());
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        let tiny = stationary_active_prob(&TrafficParams::new(1e-12, 1.0).unwrap());
        assert!(tiny < 1e-11);
    }

    #[test]
    fn invalid_rates_rejected() {
        assert!(TrafficParams::new(0.0, 1.0).is_err());
        assert!(TrafficParams::new(1.0, f64::INFINITY).is_err());
        assert!(serde_json::from_str::<TrafficParams>(r#"{"lambda": -1, "mu": 1}"#).is_err());
    }

    #[test]
    fn phi_vanishes_at_zero_and_rejects_out_of_range() {
        let tp = unit();
        for x in Occupancy::BOTH {
            assert_eq!(phi1(0.0, x, &tp, 1.0, 0.5, 0.1).unwrap(), 0.0);
            assert_eq!(phi2_frame(0.0, x, &tp, 1.0, 0.5).unwrap(), 0.0);
            assert_eq!(phi2_ergodic(0.0, x, &tp, 1.0, 0.5, 0.0).unwrap(), 0.0);
        }
        assert!(phi1(0.41, Occupancy::Idle, &tp, 1.0, 0.5, 0.1).is_err());
        assert!(phi2_frame(0.6, Occupancy::Idle, &tp, 1.0, 0.5).is_err());
        assert!(phi2_ergodic(0.46, Occupancy::Idle, &tp, 1.0, 0.5, 0.05).is_err());
        assert!(phi1(-0.1, Occupancy::Idle, &tp, 1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn phi1_idle_reference_value() {
        // Quadrature of P01 over [0.1, 0.5] gives 0.0872875...
        let v = phi1(0.4, Occupancy::Idle, &unit(), 1.0, 0.5, 0.1).unwrap();
        assert!((v - 0.087_287_5).abs() < 1e-6, "{v}");
    }

    #[test]
    fn phi_rescales_with_frame_duration() {
        let tp = TrafficParams::new(1000.0, 1000.0).unwrap();
        let v = phi1(0.4, Occupancy::Idle, &tp, 1e-3, 0.5, 0.1).unwrap();
        let unit_v = phi1(0.4, Occupancy::Idle, &unit(), 1.0, 0.5, 0.1).unwrap();
        assert!((v / 1e-3 - unit_v).abs() < 1e-12);
    }

    #[test]
    fn best_fraction_hits_stationary_point() {
        let timing = FrameTiming::new(1.0, 0.5, 0.1).unwrap();
        let tp = unit();
        for x in Occupancy::BOTH {
            let curve = CollisionCurve::phase1(&tp, x, &timing);
            for theta in [0.05, 0.2, 0.35] {
                let gain = curve.slope(theta);
                let back = curve.best_fraction(gain);
                assert!((back - theta).abs() < 1e-12, "{x:?} {theta} {back}");
            }
            assert_eq!(curve.best_fraction(0.0), 0.0);
            assert_eq!(curve.best_fraction(10.0), timing.phase1_max());
        }
        let flat = CollisionCurve::stationary(&tp, 0.1, 0.4);
        assert_eq!(flat.best_fraction(0.5), 0.0);
        assert_eq!(flat.best_fraction(0.5 + 1e-12), 0.4);
    }

    #[test]
    fn degenerate_rate_gives_no_transitions() {
        let tp = TrafficParams::new(1e-12, 1.0).unwrap();
        let p = sample_path_seeded(&tp, PathStart::Fixed(Occupancy::Idle), 1.0, 3, 0);
        assert!(p.transitions().is_empty());
        assert_eq!(p.active_set().measure(), 0.0);
    }

    #[test]
    fn collision_time_of_known_path() {
        let path = SamplePath::new(Occupancy::Active, vec![0.25], 1.0).unwrap();
        let iv = IntervalSet::single(0.1, 0.3).unwrap();
        assert!((collision_time(&path, &iv).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(collision_time(&path, &IntervalSet::empty()).unwrap(), 0.0);
        let outside = IntervalSet::single(0.5, 1.5).unwrap();
        assert!(collision_time(&path, &outside).is_err());
    }

    #[test]
    fn path_state_lookup() {
        let path = SamplePath::new(Occupancy::Idle, vec![0.2, 0.7], 1.0).unwrap();
        assert_eq!(path.state_at(0.1), Occupancy::Idle);
        assert_eq!(path.state_at(0.5), Occupancy::Active);
        assert_eq!(path.state_at(0.9), Occupancy::Idle);
        assert!(SamplePath::new(Occupancy::Idle, vec![0.7, 0.2], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn transition_rows_are_stochastic(lambda in 0.01f64..20.0, mu in 0.01f64..20.0, t in 0.0f64..5.0) {
            let tp = TrafficParams::new(lambda, mu).unwrap();
            for from in Occupancy::BOTH {
                let a = transition_prob(&tp, t, from, Occupancy::Idle).unwrap();
                let b = transition_prob(&tp, t, from, Occupancy::Active).unwrap();
                prop_assert!((a + b - 1.0).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            }
        }

        #[test]
        fn chapman_kolmogorov(lambda in 0.01f64..20.0, mu in 0.01f64..20.0, us in 0.0f64..1.0, ut in 0.0f64..1.0) {
            let tp = TrafficParams::new(lambda, mu).unwrap();
            let span = 10.0 / tp.total_rate();
            let (s, t) = (us * span, ut * span);
            for i in Occupancy::BOTH {
                for j in Occupancy::BOTH {
                    let direct = transition_prob(&tp, s + t, i, j).unwrap();
                    let composed: f64 = Occupancy::BOTH
                        .iter()
                        .map(|&k| transition_prob(&tp, s, i, k).unwrap() * transition_prob(&tp, t, k, j).unwrap())
                        .sum();
                    prop_assert!((direct - composed).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn sample_paths_are_well_formed(seed in any::<u64>(), lambda in 0.1f64..10.0, mu in 0.1f64..10.0) {
            let tp = TrafficParams::new(lambda, mu).unwrap();
            let p = sample_path_seeded(&tp, PathStart::Stationary, 1.0, seed, 0);
            prop_assert!(p.transitions().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(p.transitions().iter().all(|&t| t > 0.0 && t <= 1.0));
            let again = sample_path_seeded(&tp, PathStart::Stationary, 1.0, seed, 0);
            prop_assert_eq!(p, again);
        }
    }
}
