//! Generic forecast-driven baseline: Holt-Winters on per-minute counts,
//! sized for the forecast at a fixed horizon.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::forecast::{holt_winters_forecast, HoltWintersParams};
use super::hpa::{push_window, stabilize};
use super::{
    ClusterObservation, CooldownGate, DecisionReason, ReplicaBounds, ScalingDecision, ScalingStrategy,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictiveConfig {
    pub target: f64,
    pub horizon_min: usize,
    pub holt_winters: HoltWintersParams,
    pub stabilization_s: f64,
    pub scale_down_cooldown_s: f64,
    pub decision_interval_s: f64,
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        Self {
            target: 0.70,
            horizon_min: 15,
            holt_winters: HoltWintersParams::default(),
            stabilization_s: 300.0,
            scale_down_cooldown_s: 300.0,
            decision_interval_s: 60.0,
        }
    }
}

impl PredictiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target > 0.0 && self.target <= 1.0) {
            return Err(Error::validation("predictive target must lie in (0, 1]"));
        }
        if self.horizon_min == 0 {
            return Err(Error::validation("forecast horizon must be at least one minute"));
        }
        if !(self.decision_interval_s > 0.0 && self.stabilization_s >= 0.0 && self.scale_down_cooldown_s >= 0.0) {
            return Err(Error::validation("predictive windows must be non-negative"));
        }
        self.holt_winters.validate()
    }
}

/// Replicas for a forecast arrival rate: `ceil(rps / (capacity * target))`.
pub fn predictive_decide(forecast_rps: f64, capacity_per_pod: f64, target: f64, bounds: &ReplicaBounds) -> u32 {
    bounds.clamp_ceil(forecast_rps / (capacity_per_pod * target))
}

pub struct PredictiveStrategy {
    cfg: PredictiveConfig,
    bounds: ReplicaBounds,
    history: VecDeque<(f64, u32)>,
    gate: CooldownGate,
}

impl PredictiveStrategy {
    pub fn new(cfg: PredictiveConfig, bounds: ReplicaBounds) -> Self {
        Self {
            cfg,
            bounds,
            history: VecDeque::new(),
            gate: CooldownGate::default(),
        }
    }
}

impl ScalingStrategy for PredictiveStrategy {
    fn name(&self) -> &'static str {
        "predictive"
    }

    fn decision_interval_s(&self) -> f64 {
        self.cfg.decision_interval_s
    }

    fn decide(&mut self, obs: &ClusterObservation<'_>) -> ScalingDecision {
        let now = obs.timestamp_s;
        let current = obs.current_replicas();
        let forecast_rps = match holt_winters_forecast(obs.minute_counts, self.cfg.horizon_min, &self.cfg.holt_winters) {
            Ok(per_min) => per_min.max(0.0) / 60.0,
            Err(_) => obs.recent_rps,
        };
        let raw = predictive_decide(forecast_rps, obs.capacity_rps_per_pod, self.cfg.target, &self.bounds);
        push_window(&mut self.history, now, self.cfg.stabilization_s, raw);
        let mut desired = stabilize(&self.history, current, raw);
        let mut reason = if desired == raw {
            DecisionReason::Forecast
        } else {
            DecisionReason::Stabilized
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

    #[test]
    fn worked_conversion() {
        assert_eq!(predictive_decide(100.0, 10.0, 0.7, &BOUNDS), 15);
        assert_eq!(predictive_decide(0.0, 10.0, 0.7, &BOUNDS), 1);
        assert_eq!(predictive_decide(1e6, 10.0, 0.7, &BOUNDS), 100);
    }

    #[test]
    fn sizes_for_the_forecast() {
        let counts = vec![6000.0; 120];
        let obs = ClusterObservation {
            timestamp_s: 7200.0,
            ready_replicas: 2,
            starting_replicas: 0,
            avg_cpu_utilization: 1.0,
            minute_counts: &counts,
            recent_rps: 100.0,
            queue_length: 0,
            capacity_rps_per_pod: 10.0,
        };
        let mut s = PredictiveStrategy::new(PredictiveConfig::default(), BOUNDS);
        assert_eq!(s.decide(&obs).desired_replicas, 15);
    }
}
