//! Deterministic discrete-event pod cluster.
//!
//! Requests arrive at evenly spaced offsets within each trace minute and
//! wait in one FIFO queue served by the ready pods. A strategy is consulted
//! on a fixed cadence; new pods become ready after a startup delay.

mod engine;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use engine::run_simulation;

use crate::autoscaler::{DecisionReason, ReplicaBounds};
use crate::error::{Error, Result};
use crate::weaklabel::Archetype;

pub(crate) const NS_PER_S: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub pod_startup_s: f64,
    pub metric_window_s: f64,
    pub min_replicas: u32,
    pub init_replicas: u32,
    pub max_replicas: u32,
    pub pod_cpu_millicores: u32,
    pub pod_mem_mb: u32,
    pub capacity_rps_per_pod: f64,
    pub service_time_ms: f64,
    pub slo_ms: f64,
    /// Overrides the strategy's own decision cadence when set.
    pub decision_interval_s: Option<f64>,
    pub rng_seed: u64,
    pub max_queue_wait_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            pod_startup_s: 2.0,
            metric_window_s: 60.0,
            min_replicas: 1,
            init_replicas: 2,
            max_replicas: 100,
            pod_cpu_millicores: 1000,
            pod_mem_mb: 256,
            capacity_rps_per_pod: 10.0,
            service_time_ms: 100.0,
            slo_ms: 500.0,
            decision_interval_s: None,
            rng_seed: 0,
            max_queue_wait_s: 30.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pod_startup_s", self.pod_startup_s),
            ("metric_window_s", self.metric_window_s),
            ("capacity_rps_per_pod", self.capacity_rps_per_pod),
            ("service_time_ms", self.service_time_ms),
            ("slo_ms", self.slo_ms),
            ("max_queue_wait_s", self.max_queue_wait_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive")));
            }
        }
        if let Some(d) = self.decision_interval_s {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::validation("decision_interval_s must be positive"));
            }
        }
        if self.min_replicas == 0 || self.pod_cpu_millicores == 0 || self.pod_mem_mb == 0 {
            return Err(Error::validation("replica and pod resource settings must be positive"));
        }
        if !(self.min_replicas <= self.init_replicas && self.init_replicas <= self.max_replicas) {
            return Err(Error::validation(format!(
                "init_replicas {} outside [{}, {}]",
                self.init_replicas, self.min_replicas, self.max_replicas
            )));
        }
        Ok(())
    }

    pub fn bounds(&self) -> ReplicaBounds {
        ReplicaBounds {
            min: self.min_replicas,
            max: self.max_replicas,
        }
    }

    pub(crate) fn ns(s: f64) -> u64 {
        (s * NS_PER_S as f64).round() as u64
    }
}

/// One request. Dropped requests have no completion time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestRecord {
    pub arrival_ns: u64,
    completion_ns: u64,
    pub start_ns: u64,
    pub violated: bool,
    pub cold_start_affected: bool,
}

impl RequestRecord {
    const DROPPED: u64 = u64::MAX;

    pub(crate) fn served(arrival_ns: u64, start_ns: u64, completion_ns: u64, slo_ns: u64, cold: bool) -> Self {
        Self {
            arrival_ns,
            completion_ns,
            start_ns,
            violated: completion_ns - arrival_ns > slo_ns,
            cold_start_affected: cold,
        }
    }

    pub(crate) fn dropped(arrival_ns: u64, at_ns: u64) -> Self {
        Self {
            arrival_ns,
            completion_ns: Self::DROPPED,
            start_ns: at_ns,
            violated: true,
            cold_start_affected: false,
        }
    }

    pub fn completion_ns(&self) -> Option<u64> {
        (self.completion_ns != Self::DROPPED).then_some(self.completion_ns)
    }

    pub fn is_dropped(&self) -> bool {
        self.completion_ns == Self::DROPPED
    }

    pub fn response_ms(&self) -> Option<f64> {
        self.completion_ns()
            .map(|c| (c - self.arrival_ns) as f64 / 1e6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaChange {
    pub t_ns: u64,
    pub ready: u32,
    pub starting: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingEvent {
    pub t_s: f64,
    pub from: u32,
    pub to: u32,
    pub reason: DecisionReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionRecord {
    pub t_s: f64,
    pub ready: u32,
    pub starting: u32,
    pub utilization: f64,
    pub recommended: u32,
    pub desired: u32,
    pub cooldown_s: f64,
    pub reason: DecisionReason,
    pub archetype: Option<Archetype>,
    pub confidence: Option<f64>,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLog {
    pub strategy: String,
    pub config: SimConfig,
    pub duration_s: u64,
    /// Arrivals per trace minute.
    pub minute_arrivals: Vec<u64>,
    /// Requests in arrival order; in-flight requests are absent.
    pub requests: Vec<RequestRecord>,
    pub arrivals: u64,
    pub completed: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub replica_changes: Vec<ReplicaChange>,
    pub minute_utilization: Vec<f64>,
    pub scaling_events: Vec<ScalingEvent>,
    pub decisions: Vec<DecisionRecord>,
    pub pod_starts: u64,
    pub ready_pod_seconds: f64,
}

/// Both cold-start measures of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ColdStarts {
    pub pod_starts: u64,
    pub affected_requests: u64,
}

pub fn count_cold_starts(log: &SimulationLog) -> ColdStarts {
    ColdStarts {
        pod_starts: log.pod_starts,
        affected_requests: log.requests.iter().filter(|r| r.cold_start_affected).count() as u64,
    }
}

pub fn compute_utilization(log: &SimulationLog, minute: usize) -> Result<f64> {
    log.minute_utilization.get(minute).copied().ok_or_else(|| {
        Error::validation(format!(
            "minute {minute} outside simulated range 0..{}",
            log.minute_utilization.len()
        ))
    })
}

impl SimulationLog {
    /// Ready and starting pods at every whole second.
    pub fn per_second_replicas(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.duration_s as usize);
        let mut idx = 0;
        let mut state = (self.config.init_replicas, 0);
        for s in 0..self.duration_s {
            let t = s * NS_PER_S;
            while idx < self.replica_changes.len() && self.replica_changes[idx].t_ns <= t {
                let c = self.replica_changes[idx];
                state = (c.ready, c.starting);
                idx += 1;
            }
            out.push(state);
        }
        out
    }

    pub fn requests_csv(&self) -> String {
        let mut out = String::with_capacity(self.requests.len() * 32 + 64);
        out.push_str("arrival_s,completion_s,violated,cold_start_affected\n");
        for r in &self.requests {
            let _ = write!(out, "{}", fmt_ns(r.arrival_ns));
            out.push(',');
            if let Some(c) = r.completion_ns() {
                let _ = write!(out, "{}", fmt_ns(c));
            }
            let _ = writeln!(out, ",{},{}", u8::from(r.violated), u8::from(r.cold_start_affected));
        }
        out
    }

    pub fn replicas_csv(&self) -> String {
        let mut out = String::from("second,ready,starting\n");
        for (s, (ready, starting)) in self.per_second_replicas().into_iter().enumerate() {
            let _ = writeln!(out, "{s},{ready},{starting}");
        }
        out
    }

    pub fn scaling_events_csv(&self) -> String {
        let mut out = String::from("timestamp_s,strategy,before,after,reason\n");
        for e in &self.scaling_events {
            let _ = writeln!(out, "{},{},{},{},{}", e.t_s, self.strategy, e.from, e.to, e.reason);
        }
        out
    }

    pub fn utilization_csv(&self) -> String {
        let mut out = String::from("minute,utilization\n");
        for (m, u) in self.minute_utilization.iter().enumerate() {
            let _ = writeln!(out, "{m},{u}");
        }
        out
    }

    /// Concatenation of every serialized table, for byte-level comparisons.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        for part in [
            self.requests_csv(),
            self.replicas_csv(),
            self.scaling_events_csv(),
            self.utilization_csv(),
        ] {
            out.push_str(&part);
            out.push_str("--\n");
        }
        let _ = writeln!(
            out,
            "arrivals={} completed={} dropped={} in_flight={} pod_starts={}",
            self.arrivals, self.completed, self.dropped, self.in_flight, self.pod_starts
        );
        out.into_bytes()
    }

    /// Writes `requests.csv`, `replicas.csv`, `scaling_events.csv` and
    /// `utilization.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("requests.csv", self.requests_csv()),
            ("replicas.csv", self.replicas_csv()),
            ("scaling_events.csv", self.scaling_events_csv()),
            ("utilization.csv", self.utilization_csv()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Seconds with nanosecond precision and no trailing zeros.
fn fmt_ns(ns: u64) -> String {
    let secs = ns / NS_PER_S;
    let frac = ns % NS_PER_S;
    if frac == 0 {
        return secs.to_string();
    }
    let s = format!("{secs}.{frac:09}");
    s.trim_end_matches('0').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_validate() {
        SimConfig::default().validate().unwrap();
        let bad = SimConfig {
            init_replicas: 200,
            ..SimConfig::default()
        };
        assert!(bad.validate().unwrap_err().is_validation());
        let bad = SimConfig {
            capacity_rps_per_pod: 0.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn nanosecond_formatting() {
        assert_eq!(fmt_ns(0), "0");
        assert_eq!(fmt_ns(1_500_000_000), "1.5");
        assert_eq!(fmt_ns(60_000_000_001), "60.000000001");
    }
}
