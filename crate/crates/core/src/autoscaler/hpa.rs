//! Reactive CPU-target autoscaler with Kubernetes HPA semantics.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{
    ClusterObservation, CooldownGate, DecisionReason, ReplicaBounds, ScalingDecision, ScalingStrategy,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HpaConfig {
    pub target: f64,
    pub tolerance: f64,
    pub stabilization_s: f64,
    /// Minimum time between the last replica change and a scale-down.
    pub scale_down_cooldown_s: f64,
    pub decision_interval_s: f64,
}

impl Default for HpaConfig {
    fn default() -> Self {
        Self {
            target: 0.70,
            tolerance: 0.10,
            stabilization_s: 300.0,
            scale_down_cooldown_s: 300.0,
            decision_interval_s: 60.0,
        }
    }
}

impl HpaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target > 0.0 && self.target <= 1.0) {
            return Err(Error::validation("hpa target must lie in (0, 1]"));
        }
        if !(self.tolerance >= 0.0 && self.stabilization_s >= 0.0 && self.scale_down_cooldown_s >= 0.0) {
            return Err(Error::validation("hpa tolerance and windows must be non-negative"));
        }
        if !(self.decision_interval_s > 0.0) {
            return Err(Error::validation("decision interval must be positive"));
        }
        Ok(())
    }
}

/// Raw HPA recommendation: `ceil(ready * util / target)` outside the
/// tolerance band, `current` inside it.
pub fn hpa_recommendation(current: u32, ready: u32, util: f64, target: f64, tolerance: f64) -> u32 {
    if ready == 0 {
        return current;
    }
    let ratio = util / target;
    if (ratio - 1.0).abs() <= tolerance {
        return current;
    }
    (f64::from(ready) * util / target).ceil().max(0.0) as u32
}

pub struct HpaStrategy {
    cfg: HpaConfig,
    bounds: ReplicaBounds,
    /// (timestamp, recommendation) within the stabilization window.
    history: VecDeque<(f64, u32)>,
    gate: CooldownGate,
}

impl HpaStrategy {
    pub fn new(cfg: HpaConfig, bounds: ReplicaBounds) -> Self {
        Self {
            cfg,
            bounds,
            history: VecDeque::new(),
            gate: CooldownGate::default(),
        }
    }
}

/// Applies scale-down stabilization over `history` (already containing the
/// current recommendation) and returns the stabilized target.
pub(crate) fn stabilize(history: &VecDeque<(f64, u32)>, current: u32, raw: u32) -> u32 {
    if raw >= current {
        return raw;
    }
    let peak = history.iter().map(|&(_, r)| r).max().unwrap_or(raw);
    peak.min(current)
}

pub(crate) fn push_window(history: &mut VecDeque<(f64, u32)>, now: f64, window: f64, rec: u32) {
    while history.front().is_some_and(|&(t, _)| now - t >= window) {
        history.pop_front();
    }
    history.push_back((now, rec));
}

impl ScalingStrategy for HpaStrategy {
    fn name(&self) -> &'static str {
        "hpa"
    }

    fn decision_interval_s(&self) -> f64 {
        self.cfg.decision_interval_s
    }

    fn decide(&mut self, obs: &ClusterObservation<'_>) -> ScalingDecision {
        let now = obs.timestamp_s;
        let current = obs.current_replicas();
        let in_band = obs.ready_replicas > 0
            && (obs.avg_cpu_utilization / self.cfg.target - 1.0).abs() <= self.cfg.tolerance;
        let raw = self.bounds.clamp(hpa_recommendation(
            current,
            obs.ready_replicas,
            obs.avg_cpu_utilization,
            self.cfg.target,
            self.cfg.tolerance,
        ));
        push_window(&mut self.history, now, self.cfg.stabilization_s, raw);
        let mut desired = stabilize(&self.history, current, raw);
        let mut reason = if in_band {
            DecisionReason::Deadband
        } else if desired != raw {
            DecisionReason::Stabilized
        } else {
            DecisionReason::Reactive
        };
        if desired < current && self.gate.holds(now, self.cfg.scale_down_cooldown_s) {
            desired = current;
            reason = DecisionReason::Cooldown;
        }
        let desired = self.bounds.clamp(desired);
        self.gate.record(now, current, desired);
        ScalingDecision {
            desired_replicas: desired,
            recommended: raw,
            cooldown_s: self.cfg.scale_down_cooldown_s,
            reason,
            archetype: None,
            confidence: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOUNDS: ReplicaBounds = ReplicaBounds { min: 1, max: 100 };

    fn obs(t: f64, ready: u32, util: f64) -> ClusterObservation<'static> {
        ClusterObservation {
            timestamp_s: t,
            ready_replicas: ready,
            starting_replicas: 0,
            avg_cpu_utilization: util,
            minute_counts: &[],
            recent_rps: 0.0,
            queue_length: 0,
            capacity_rps_per_pod: 10.0,
        }
    }

    #[test]
    fn worked_scale_up() {
        assert_eq!(hpa_recommendation(4, 4, 0.90, 0.70, 0.10), 6);
        let mut hpa = HpaStrategy::new(HpaConfig::default(), BOUNDS);
        assert_eq!(hpa.decide(&obs(60.0, 4, 0.90)).desired_replicas, 6);
    }

    #[test]
    fn at_target_is_unchanged() {
        let mut hpa = HpaStrategy::new(HpaConfig::default(), BOUNDS);
        let d = hpa.decide(&obs(60.0, 5, 0.70));
        assert_eq!(d.desired_replicas, 5);
        assert_eq!(d.reason, DecisionReason::Deadband);
    }

    #[test]
    fn recent_higher_recommendation_blocks_scale_down() {
        let cfg = HpaConfig {
            scale_down_cooldown_s: 0.0,
            ..HpaConfig::default()
        };
        let mut hpa = HpaStrategy::new(cfg, BOUNDS);
        assert_eq!(hpa.decide(&obs(0.0, 8, 0.70)).desired_replicas, 8);
        assert_eq!(hpa.decide(&obs(60.0, 8, 0.70)).desired_replicas, 8);
        let d = hpa.decide(&obs(180.0, 8, 0.20));
        assert_eq!(d.recommended, 3);
        assert_eq!(d.desired_replicas, 8);
        // once the high recommendations age out, the scale-down goes through
        assert_eq!(hpa.decide(&obs(360.0, 8, 0.20)).desired_replicas, 3);
    }

    #[test]
    fn cooldown_blocks_scale_down_after_a_change() {
        let cfg = HpaConfig {
            stabilization_s: 0.0,
            ..HpaConfig::default()
        };
        let mut hpa = HpaStrategy::new(cfg, BOUNDS);
        assert_eq!(hpa.decide(&obs(0.0, 4, 0.95)).desired_replicas, 6);
        assert_eq!(hpa.decide(&obs(60.0, 6, 0.1)).desired_replicas, 6);
        assert_eq!(hpa.decide(&obs(300.0, 6, 0.1)).desired_replicas, 1);
    }

    #[test]
    fn recommendation_is_clamped() {
        let mut hpa = HpaStrategy::new(HpaConfig::default(), ReplicaBounds { min: 2, max: 10 });
        assert_eq!(hpa.decide(&obs(0.0, 9, 1.0)).desired_replicas, 10);
    }

    proptest::proptest! {
        #[test]
        fn recommendation_matches_formula(current in 1u32..100, ready in 1u32..100, util in 0.0f64..1.0) {
            let rec = hpa_recommendation(current, ready, util, 0.7, 0.1);
            let ratio = util / 0.7;
            if (ratio - 1.0).abs() <= 0.1 {
                proptest::prop_assert_eq!(rec, current);
            } else {
                proptest::prop_assert_eq!(rec, (f64::from(ready) * util / 0.7).ceil() as u32);
            }
        }
    }
}
