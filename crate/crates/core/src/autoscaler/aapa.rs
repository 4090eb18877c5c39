//! Archetype-aware policy: classify the trailing window, pick the
//! archetype's base parameters, widen them by classifier uncertainty and
//! dispatch to the matching sizing rule.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::forecast::{holt_winters_path, ols_extrapolate, HoltWintersParams};
use super::hpa::{hpa_recommendation, push_window, stabilize};
use super::{
    adjust_for_uncertainty, ClusterObservation, CooldownGate, DecisionReason, ReplicaBounds,
    ScalingDecision, ScalingMode, ScalingStrategy, StrategyParams,
};
use crate::classifier::{ModelBundle, Prediction};
use crate::error::{Error, Result};
use crate::features::compute_features;
use crate::weaklabel::{Archetype, FALLBACK_CONFIDENCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeTable {
    pub spike: StrategyParams,
    pub periodic: StrategyParams,
    pub ramp: StrategyParams,
    pub stationary: StrategyParams,
}

impl Default for ArchetypeTable {
    fn default() -> Self {
        Self {
            spike: StrategyParams::for_archetype(Archetype::Spike),
            periodic: StrategyParams::for_archetype(Archetype::Periodic),
            ramp: StrategyParams::for_archetype(Archetype::Ramp),
            stationary: StrategyParams::for_archetype(Archetype::Stationary),
        }
    }
}

impl ArchetypeTable {
    pub fn get(&self, a: Archetype) -> &StrategyParams {
        match a {
            Archetype::Spike => &self.spike,
            Archetype::Periodic => &self.periodic,
            Archetype::Ramp => &self.ramp,
            Archetype::Stationary => &self.stationary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AapaConfig {
    pub params: ArchetypeTable,
    /// Deadband for the reactive (conservative) rule.
    pub tolerance: f64,
    pub classify_window_min: usize,
    pub forecast_horizon_min: usize,
    pub holt_winters: HoltWintersParams,
    pub trend_window_min: usize,
    pub trend_ahead_min: f64,
    pub decision_interval_s: f64,
    /// Also treat the cooldown as a scale-down stabilization window: shrink
    /// only to the largest recommendation seen within it.
    pub stabilize_scale_down: bool,
}

impl Default for AapaConfig {
    fn default() -> Self {
        Self {
            params: ArchetypeTable::default(),
            tolerance: 0.10,
            classify_window_min: 60,
            forecast_horizon_min: 15,
            holt_winters: HoltWintersParams::default(),
            trend_window_min: 15,
            trend_ahead_min: 7.0,
            decision_interval_s: 5.0,
            stabilize_scale_down: true,
        }
    }
}

impl AapaConfig {
    pub fn validate(&self) -> Result<()> {
        for a in Archetype::ALL {
            self.params.get(a).validate()?;
        }
        if self.classify_window_min < 2 {
            return Err(Error::validation("classification window must span at least 2 minutes"));
        }
        if self.forecast_horizon_min == 0 || self.trend_window_min < 2 {
            return Err(Error::validation("forecast horizon and trend window must be positive"));
        }
        if !(self.decision_interval_s > 0.0 && self.tolerance >= 0.0 && self.trend_ahead_min >= 0.0) {
            return Err(Error::validation("aapa interval, tolerance and trend horizon must be positive"));
        }
        self.holt_winters.validate()
    }
}

/// Where the policy gets its archetype from.
#[derive(Debug, Clone)]
pub enum ArchetypeSource {
    Model(Arc<ModelBundle>),
    /// A fixed prediction, for controlled experiments.
    Fixed(Prediction),
}

fn bootstrap_prediction() -> Prediction {
    Prediction {
        archetype: Archetype::Stationary,
        raw_proba: [FALLBACK_CONFIDENCE; Archetype::COUNT],
        confidence: FALLBACK_CONFIDENCE,
    }
}

pub struct AapaStrategy {
    cfg: AapaConfig,
    bounds: ReplicaBounds,
    source: ArchetypeSource,
    gate: CooldownGate,
    /// Recent (time, recommendation) pairs for scale-down stabilization.
    history: VecDeque<(f64, u32)>,
    /// Completed-minute count at which the cached values were computed.
    cached_at: Option<usize>,
    prediction: Prediction,
    /// Peak forecast rate (per minute) over the horizon.
    forecast_peak: f64,
    /// Trend-extrapolated rate (per minute).
    trend_value: f64,
}

impl AapaStrategy {
    pub fn new(cfg: AapaConfig, bounds: ReplicaBounds, source: ArchetypeSource) -> Self {
        Self {
            cfg,
            bounds,
            source,
            gate: CooldownGate::default(),
            history: VecDeque::new(),
            cached_at: None,
            prediction: bootstrap_prediction(),
            forecast_peak: 0.0,
            trend_value: 0.0,
        }
    }

    pub fn current_prediction(&self) -> Prediction {
        self.prediction
    }

    fn refresh(&mut self, counts: &[f64]) {
        if self.cached_at == Some(counts.len()) {
            return;
        }
        self.cached_at = Some(counts.len());
        self.prediction = match &self.source {
            ArchetypeSource::Fixed(p) => *p,
            ArchetypeSource::Model(bundle) => {
                let w = self.cfg.classify_window_min;
                if counts.len() < w {
                    bootstrap_prediction()
                } else {
                    match compute_features(&counts[counts.len() - w..]) {
                        Ok(fv) => bundle.predict(&fv),
                        Err(_) => bootstrap_prediction(),
                    }
                }
            }
        };
        let mode = self.cfg.params.get(self.prediction.archetype).mode;
        self.forecast_peak = 0.0;
        self.trend_value = 0.0;
        match mode {
            ScalingMode::Predictive => {
                if let Ok(path) = holt_winters_path(counts, self.cfg.forecast_horizon_min, &self.cfg.holt_winters) {
                    self.forecast_peak = path.into_iter().fold(0.0, f64::max);
                }
            }
            ScalingMode::Trend => {
                self.trend_value = ols_extrapolate(counts, self.cfg.trend_window_min, self.cfg.trend_ahead_min)
                    .unwrap_or(0.0)
                    .max(0.0);
            }
            _ => {}
        }
    }
}

fn ceil_pods(x: f64) -> u32 {
    if x.is_finite() && x > 0.0 {
        (x - 1e-9).ceil().min(f64::from(u32::MAX / 2)) as u32
    } else {
        0
    }
}

impl ScalingStrategy for AapaStrategy {
    fn name(&self) -> &'static str {
        "aapa"
    }

    fn decision_interval_s(&self) -> f64 {
        self.cfg.decision_interval_s
    }

    fn decide(&mut self, obs: &ClusterObservation<'_>) -> ScalingDecision {
        self.refresh(obs.minute_counts);
        let now = obs.timestamp_s;
        let current = obs.current_replicas();
        let pred = self.prediction;
        let base = *self.cfg.params.get(pred.archetype);
        let cap = obs.capacity_rps_per_pod;
        let demand = obs.demand_pods();
        let need = match base.mode {
            ScalingMode::Predictive => demand.max(self.forecast_peak / 60.0 / cap),
            ScalingMode::Trend => demand.max(self.trend_value / 60.0 / cap),
            _ => demand,
        };
        let rep_base = ceil_pods(need / base.cpu_target);
        let confidence = pred.confidence.clamp(0.0, 1.0);
        let adj = adjust_for_uncertainty(&base, rep_base, confidence)
            .expect("confidence clamped to [0, 1]");
        let (mode_desired, mut reason) = match base.mode {
            ScalingMode::WarmPool => (
                ceil_pods(need / adj.cpu_adj).saturating_add(base.warm_pool),
                DecisionReason::WarmPool,
            ),
            ScalingMode::Predictive => (ceil_pods(need / adj.cpu_adj), DecisionReason::Forecast),
            ScalingMode::Trend => (ceil_pods(need / adj.cpu_adj), DecisionReason::Trend),
            ScalingMode::Conservative | ScalingMode::Reactive => (
                hpa_recommendation(
                    current,
                    obs.ready_replicas,
                    obs.avg_cpu_utilization,
                    adj.cpu_adj,
                    self.cfg.tolerance,
                ),
                DecisionReason::Conservative,
            ),
        };
        let mut desired = mode_desired;
        if adj.rep_adj > desired {
            desired = adj.rep_adj;
            reason = DecisionReason::ReplicaFloor;
        }
        let recommended = self.bounds.clamp(desired);
        let mut desired = recommended;
        if self.cfg.stabilize_scale_down {
            push_window(&mut self.history, now, adj.cool_adj, recommended);
            let stabilized = stabilize(&self.history, current, recommended);
            if stabilized > desired {
                desired = stabilized;
                reason = DecisionReason::Stabilized;
            }
        }
        if desired < current && self.gate.holds(now, adj.cool_adj) {
            desired = current;
            reason = DecisionReason::Cooldown;
        }
        let desired = self.bounds.clamp(desired);
        self.gate.record(now, current, desired);
        ScalingDecision {
            desired_replicas: desired,
            recommended,
            cooldown_s: adj.cool_adj,
            reason,
            archetype: Some(pred.archetype),
            confidence: Some(confidence),
        }
    }
}
