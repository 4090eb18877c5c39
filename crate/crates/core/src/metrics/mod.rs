//! Scores simulation logs.

mod rei;
mod wilcoxon;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use rei::{compute_rei, rei_from_components, sensitivity_sweep, ReiScore, ReiWeights, SensitivityPoint, SensitivityReport};
pub use wilcoxon::{exact_p_value, normal_p_value, wilcoxon_signed_rank, WilcoxonResult};

use crate::simulator::SimulationLog;

/// Oscillations pair scaling events of opposite direction at most this far apart.
pub const OSCILLATION_WINDOW_S: f64 = 600.0;
pub const UNDERUTIL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub arrivals: u64,
    pub slo_violation_rate: f64,
    /// Response-time percentiles are absent when nothing completed.
    pub p50_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub p99_ms: Option<f64>,
    pub mean_response_ms: Option<f64>,
    /// Pod starts during the run.
    pub cold_starts: u64,
    /// Requests served by a pod that was not ready when they arrived.
    pub cold_start_requests: u64,
    pub dropped: u64,
    pub replica_minutes: f64,
    pub demand_replica_minutes: f64,
    pub avg_cpu_util: f64,
    pub underutil_rate: f64,
    pub scaling_events: usize,
    pub oscillations: usize,
    pub mean_time_between_scaling_s: f64,
    pub duration_minutes: f64,
}

/// Nearest-rank percentile of sorted data.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (pct / 100.0 * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Counts adjacent scaling events that reverse direction within the window.
pub fn count_oscillations(events: &[(f64, i64)], window_s: f64) -> usize {
    events
        .windows(2)
        .filter(|w| w[0].1.signum() * w[1].1.signum() < 0 && w[1].0 - w[0].0 <= window_s)
        .count()
}

pub fn compute_metrics(log: &SimulationLog) -> MetricsReport {
    let violated = log.requests.iter().filter(|r| r.violated).count() as u64;
    let mut responses: Vec<f64> = log.requests.iter().filter_map(|r| r.response_ms()).collect();
    responses.sort_by(f64::total_cmp);
    let mean_response_ms =
        (!responses.is_empty()).then(|| responses.iter().sum::<f64>() / responses.len() as f64);
    let rate = |num: u64| {
        if log.arrivals == 0 {
            0.0
        } else {
            num as f64 / log.arrivals as f64
        }
    };

    let signed: Vec<(f64, i64)> = log
        .scaling_events
        .iter()
        .map(|e| (e.t_s, i64::from(e.to) - i64::from(e.from)))
        .collect();
    let mean_gap = if signed.len() < 2 {
        log.duration_s as f64
    } else {
        (signed[signed.len() - 1].0 - signed[0].0) / (signed.len() - 1) as f64
    };

    let minutes = log.minute_utilization.len().max(1) as f64;
    let per_pod_minute = log.config.capacity_rps_per_pod * 60.0;
    let demand: f64 = log
        .minute_arrivals
        .iter()
        .map(|&c| (c as f64 / per_pod_minute).ceil())
        .sum();

    MetricsReport {
        arrivals: log.arrivals,
        slo_violation_rate: rate(violated),
        p50_ms: nearest_rank(&responses, 50.0),
        p95_ms: nearest_rank(&responses, 95.0),
        p99_ms: nearest_rank(&responses, 99.0),
        mean_response_ms,
        cold_starts: log.pod_starts,
        cold_start_requests: log.requests.iter().filter(|r| r.cold_start_affected).count() as u64,
        dropped: log.dropped,
        replica_minutes: log.ready_pod_seconds / 60.0,
        demand_replica_minutes: demand,
        avg_cpu_util: log.minute_utilization.iter().sum::<f64>() / minutes,
        underutil_rate: log
            .minute_utilization
            .iter()
            .filter(|&&u| u < UNDERUTIL_THRESHOLD)
            .count() as f64
            / minutes,
        scaling_events: signed.len(),
        oscillations: count_oscillations(&signed, OSCILLATION_WINDOW_S),
        mean_time_between_scaling_s: mean_gap,
        duration_minutes: log.duration_s as f64 / 60.0,
    }
}

/// Mean and 95% Student-t half width; the half width is absent for fewer
/// than two values.
pub fn mean_ci95(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, Some(t * (var / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoscaler::DecisionReason;
    use crate::simulator::{ScalingEvent, SimConfig};

    fn empty_log(minutes: usize) -> SimulationLog {
        SimulationLog {
            strategy: "test".into(),
            config: SimConfig::default(),
            duration_s: minutes as u64 * 60,
            minute_arrivals: vec![0; minutes],
            requests: vec![],
            arrivals: 0,
            completed: 0,
            dropped: 0,
            in_flight: 0,
            replica_changes: vec![],
            minute_utilization: vec![0.0; minutes],
            scaling_events: vec![],
            decisions: vec![],
            pod_starts: 0,
            ready_pod_seconds: 2.0 * 60.0 * minutes as f64,
        }
    }

    #[test]
    fn rectangle_of_replicas() {
        let m = compute_metrics(&empty_log(60));
        assert_eq!(m.replica_minutes, 120.0);
        assert_eq!(m.oscillations, 0);
        assert_eq!(m.slo_violation_rate, 0.0);
        assert_eq!(m.p95_ms, None);
        assert_eq!(m.underutil_rate, 1.0);
        assert_eq!(m.mean_time_between_scaling_s, 3600.0);
    }

    #[test]
    fn reversal_within_ten_minutes_is_one_oscillation() {
        let mut log = empty_log(60);
        let ev = |t, from, to| ScalingEvent {
            t_s: t,
            from,
            to,
            reason: DecisionReason::Reactive,
        };
        log.scaling_events = vec![ev(100.0, 2, 4), ev(400.0, 4, 2)];
        assert_eq!(compute_metrics(&log).oscillations, 1);
        log.scaling_events = vec![ev(100.0, 2, 4), ev(800.0, 4, 2)];
        assert_eq!(compute_metrics(&log).oscillations, 0);
        log.scaling_events = vec![ev(100.0, 2, 4), ev(200.0, 4, 6)];
        let m = compute_metrics(&log);
        assert_eq!(m.oscillations, 0);
        assert_eq!(m.mean_time_between_scaling_s, 100.0);
    }

    #[test]
    fn nearest_rank_percentiles() {
        let data: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&data, 95.0), Some(95.0));
        assert_eq!(nearest_rank(&data, 99.0), Some(99.0));
        assert_eq!(nearest_rank(&data, 50.0), Some(50.0));
        assert_eq!(nearest_rank(&[7.0], 99.0), Some(7.0));
        assert_eq!(nearest_rank(&[], 50.0), None);
    }

    #[test]
    fn violation_ratio() {
        use crate::simulator::run_simulation;
        use crate::trace::WorkloadTrace;
        // one pod at twice its capacity
        let cfg = SimConfig {
            init_replicas: 1,
            max_replicas: 1,
            ..SimConfig::default()
        };
        let t = WorkloadTrace::new("x", vec![1200]).unwrap();
        let mut s = crate::autoscaler::HpaStrategy::new(Default::default(), cfg.bounds());
        let log = run_simulation(&t, &mut s, &cfg).unwrap();
        let violated = log.requests.iter().filter(|r| r.violated).count();
        let m = compute_metrics(&log);
        assert_eq!(m.slo_violation_rate, violated as f64 / 1200.0);
        assert!(violated > 0);
        assert!(m.p50_ms <= m.p95_ms && m.p95_ms <= m.p99_ms);
    }

    #[test]
    fn confidence_interval() {
        let (m, hw) = mean_ci95(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(m, 3.0);
        // t(0.975, 4) = 2.776, s = sqrt(2.5)
        assert!((hw.unwrap() - 2.776_445 * (2.5f64 / 5.0).sqrt()).abs() < 1e-4);
        assert_eq!(mean_ci95(&[2.0]).1, None);
    }
}
