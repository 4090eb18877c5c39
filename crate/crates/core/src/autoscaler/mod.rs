//! Scaling strategies consulted by the simulator.

mod aapa;
mod forecast;
mod hpa;
mod predictive;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use aapa::{AapaConfig, AapaStrategy, ArchetypeSource, ArchetypeTable};
pub use forecast::{holt_winters_forecast, holt_winters_path, ols_extrapolate, HoltWintersParams};
pub use hpa::{hpa_recommendation, HpaConfig, HpaStrategy};
pub use predictive::{predictive_decide, PredictiveConfig, PredictiveStrategy};

use crate::error::{Error, Result};
use crate::weaklabel::Archetype;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScalingMode {
    WarmPool,
    Predictive,
    Trend,
    Conservative,
    Reactive,
}

/// Base scaling parameters of one policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub cpu_target: f64,
    pub cooldown_s: f64,
    pub warm_pool: u32,
    pub mode: ScalingMode,
}

impl StrategyParams {
    /// Per-archetype defaults.
    pub fn for_archetype(a: Archetype) -> Self {
        let (cpu_target, minutes, warm_pool, mode) = match a {
            Archetype::Spike => (0.30, 20.0, 2, ScalingMode::WarmPool),
            Archetype::Periodic => (0.75, 3.0, 0, ScalingMode::Predictive),
            Archetype::Ramp => (0.60, 7.0, 0, ScalingMode::Trend),
            Archetype::Stationary => (0.55, 12.0, 0, ScalingMode::Conservative),
        };
        Self {
            cpu_target,
            cooldown_s: minutes * 60.0,
            warm_pool,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cpu_target > 0.0 && self.cpu_target <= 1.0) {
            return Err(Error::validation(format!(
                "cpu_target {} outside (0, 1]",
                self.cpu_target
            )));
        }
        if !(self.cooldown_s >= 0.0 && self.cooldown_s.is_finite()) {
            return Err(Error::validation("cooldown must be a non-negative number of seconds"));
        }
        Ok(())
    }
}

/// Parameters after the confidence-driven margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjustedParams {
    pub margin: f64,
    pub cpu_adj: f64,
    pub cool_adj: f64,
    pub rep_adj: u32,
}

/// Widens margins as confidence `c` drops: `m = 1 + 0.5(1-c)` scales the
/// cooldown and replica floor up and the CPU target down by `0.2(1-c)`.
pub fn adjust_for_uncertainty(base: &StrategyParams, rep_base: u32, c: f64) -> Result<AdjustedParams> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::validation(format!("confidence {c} outside [0, 1]")));
    }
    let margin = 1.0 + 0.5 * (1.0 - c);
    Ok(AdjustedParams {
        margin,
        cpu_adj: base.cpu_target * (1.0 - 0.2 * (1.0 - c)),
        cool_adj: base.cooldown_s * margin,
        rep_adj: (f64::from(rep_base) * margin - 1e-9).ceil().max(0.0) as u32,
    })
}

/// Replica limits applied to every decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaBounds {
    pub min: u32,
    pub max: u32,
}

impl ReplicaBounds {
    pub fn clamp(&self, n: u32) -> u32 {
        n.clamp(self.min, self.max)
    }

    /// Clamps a real-valued replica requirement after rounding it up.
    pub fn clamp_ceil(&self, x: f64) -> u32 {
        if !x.is_finite() || x <= 0.0 {
            return self.min;
        }
        let up = (x - 1e-9).ceil();
        if up >= f64::from(self.max) {
            self.max
        } else {
            self.clamp(up as u32)
        }
    }
}

/// What a strategy sees at a decision tick.
#[derive(Debug, Clone, Copy)]
pub struct ClusterObservation<'a> {
    pub timestamp_s: f64,
    pub ready_replicas: u32,
    pub starting_replicas: u32,
    /// Busy fraction of ready pods over the trailing metric window.
    pub avg_cpu_utilization: f64,
    /// Request counts of every completed minute so far, oldest first.
    pub minute_counts: &'a [f64],
    /// Arrivals per second over the trailing metric window.
    pub recent_rps: f64,
    pub queue_length: usize,
    pub capacity_rps_per_pod: f64,
}

impl ClusterObservation<'_> {
    pub fn current_replicas(&self) -> u32 {
        self.ready_replicas + self.starting_replicas
    }

    /// Pods needed to serve current demand at full utilization.
    pub fn demand_pods(&self) -> f64 {
        let from_util = self.avg_cpu_utilization * f64::from(self.ready_replicas);
        let from_rate = self.recent_rps / self.capacity_rps_per_pod;
        from_util.max(from_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    Deadband,
    Reactive,
    Stabilized,
    Cooldown,
    Forecast,
    WarmPool,
    Trend,
    Conservative,
    ReplicaFloor,
}

impl fmt::Display for DecisionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DecisionReason::Deadband => "deadband",
            DecisionReason::Reactive => "reactive",
            DecisionReason::Stabilized => "stabilized",
            DecisionReason::Cooldown => "cooldown",
            DecisionReason::Forecast => "forecast",
            DecisionReason::WarmPool => "warm_pool",
            DecisionReason::Trend => "trend",
            DecisionReason::Conservative => "conservative",
            DecisionReason::ReplicaFloor => "replica_floor",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingDecision {
    pub desired_replicas: u32,
    /// The policy's raw recommendation before stabilization and cooldown.
    pub recommended: u32,
    /// Scale-down hold applied by this decision, in seconds.
    pub cooldown_s: f64,
    pub reason: DecisionReason,
    pub archetype: Option<Archetype>,
    pub confidence: Option<f64>,
}

/// A stateful policy. Decisions are requested in timestamp order.
pub trait ScalingStrategy: Send {
    fn name(&self) -> &'static str;
    fn decision_interval_s(&self) -> f64;
    fn decide(&mut self, obs: &ClusterObservation<'_>) -> ScalingDecision;
}

/// Selectable strategy families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Hpa,
    Predictive,
    Aapa,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Hpa, StrategyKind::Predictive, StrategyKind::Aapa];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Hpa => "hpa",
            StrategyKind::Predictive => "predictive",
            StrategyKind::Aapa => "aapa",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hpa" => Ok(StrategyKind::Hpa),
            "predictive" | "holt-winters" | "hw" => Ok(StrategyKind::Predictive),
            "aapa" => Ok(StrategyKind::Aapa),
            other => Err(Error::validation(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Scale-down suppression shared by the policies: holds `current` when
/// `desired` would shrink the deployment within `cooldown_s` of the last
/// replica change.
#[derive(Debug, Clone, Default)]
pub(crate) struct CooldownGate {
    last_change_s: Option<f64>,
}

impl CooldownGate {
    pub(crate) fn holds(&self, now: f64, cooldown_s: f64) -> bool {
        self.last_change_s.is_some_and(|t| now - t < cooldown_s)
    }

    pub(crate) fn record(&mut self, now: f64, current: u32, desired: u32) {
        if desired != current {
            self.last_change_s = Some(now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn full_confidence_reproduces_bases() {
        for a in Archetype::ALL {
            let base = StrategyParams::for_archetype(a);
            let adj = adjust_for_uncertainty(&base, 7, 1.0).unwrap();
            assert_eq!(adj.margin, 1.0);
            assert_eq!(adj.cpu_adj, base.cpu_target);
            assert_eq!(adj.cool_adj, base.cooldown_s);
            assert_eq!(adj.rep_adj, 7);
        }
    }

    #[test]
    fn worked_adjustments() {
        let spike = StrategyParams::for_archetype(Archetype::Spike);
        let adj = adjust_for_uncertainty(&spike, 4, 0.0).unwrap();
        assert!(close(adj.margin, 1.5));
        assert!(close(adj.cpu_adj, 0.24));
        assert!(close(adj.cool_adj, 1800.0));
        assert_eq!(adj.rep_adj, 6);

        let periodic = StrategyParams::for_archetype(Archetype::Periodic);
        let adj = adjust_for_uncertainty(&periodic, 3, 0.5).unwrap();
        assert!(close(adj.margin, 1.25));
        assert!(close(adj.cpu_adj, 0.675));
        assert!(close(adj.cool_adj, 225.0));
        assert_eq!(adj.rep_adj, 4);
    }

    #[test]
    fn confidence_out_of_range_is_rejected() {
        let base = StrategyParams::for_archetype(Archetype::Ramp);
        assert!(adjust_for_uncertainty(&base, 1, 1.01).is_err());
        assert!(adjust_for_uncertainty(&base, 1, -0.1).is_err());
        assert!(adjust_for_uncertainty(&base, 1, f64::NAN).is_err());
    }

    #[test]
    fn table_of_bases() {
        let s = StrategyParams::for_archetype(Archetype::Stationary);
        assert_eq!((s.cpu_target, s.cooldown_s, s.mode), (0.55, 720.0, ScalingMode::Conservative));
        let r = StrategyParams::for_archetype(Archetype::Ramp);
        assert_eq!((r.cpu_target, r.cooldown_s, r.mode), (0.60, 420.0, ScalingMode::Trend));
    }

    #[test]
    fn bounds_round_up_and_clamp() {
        let b = ReplicaBounds { min: 1, max: 100 };
        assert_eq!(b.clamp_ceil(0.0), 1);
        assert_eq!(b.clamp_ceil(14.2857), 15);
        assert_eq!(b.clamp_ceil(15.0), 15);
        assert_eq!(b.clamp_ceil(1e9), 100);
        assert_eq!(b.clamp_ceil(f64::NAN), 1);
    }

    #[test]
    fn strategy_keys_parse() {
        for k in StrategyKind::ALL {
            assert_eq!(k.as_str().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("vpa".parse::<StrategyKind>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn adjustment_is_monotone_in_confidence(rep in 0u32..500, arch in 0usize..4) {
            let base = StrategyParams::for_archetype(Archetype::ALL[arch]);
            let mut prev = adjust_for_uncertainty(&base, rep, 0.0).unwrap();
            for i in 1..=10 {
                let cur = adjust_for_uncertainty(&base, rep, i as f64 / 10.0).unwrap();
                proptest::prop_assert!(cur.cpu_adj >= prev.cpu_adj);
                proptest::prop_assert!(cur.cool_adj <= prev.cool_adj);
                proptest::prop_assert!(cur.rep_adj <= prev.rep_adj);
                prev = cur;
            }
        }
    }
}
