use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::trial_seed;
use crate::autoscaler::StrategyKind;
use crate::error::{Error, Result};
use crate::metrics::{
    compute_rei, mean_ci95, sensitivity_sweep, wilcoxon_signed_rank, MetricsReport, ReiScore, ReiWeights,
    SensitivityReport, WilcoxonResult,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub scenario: String,
    pub strategy: StrategyKind,
    pub trial: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
    pub rei: ReiScore,
}

/// Mean and 95% half width across trials.
pub type Estimate = (f64, Option<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub trials: usize,
    pub rei: Estimate,
    pub slo_violation_rate: Estimate,
    pub replica_minutes: Estimate,
    pub p95_ms: Option<f64>,
    pub cold_starts: f64,
    pub cold_start_requests: f64,
    pub dropped: f64,
    pub avg_cpu_util: f64,
    pub scaling_events: f64,
    pub oscillations: f64,
    /// Mean pod-minutes over HPA's mean pod-minutes.
    pub pod_minute_ratio: Option<f64>,
}

/// A strategy tested against HPA on one metric, paired by trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonRow {
    pub strategy: StrategyKind,
    pub metric: &'static str,
    pub result: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub reference_ratio: Option<f64>,
    pub strategies: Vec<StrategySummary>,
    pub wilcoxon: Vec<WilcoxonRow>,
    pub sensitivity: SensitivityReport,
}

impl ScenarioSummary {
    pub fn strategy(&self, kind: StrategyKind) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub weights: ReiWeights,
    pub sensitivity_delta: f64,
    pub runs: Vec<RunResult>,
    pub scenarios: Vec<ScenarioSummary>,
}

const TESTED_METRICS: [(&str, fn(&RunResult) -> f64); 3] = [
    ("slo_violation_rate", |r| r.metrics.slo_violation_rate),
    ("replica_minutes", |r| r.metrics.replica_minutes),
    ("rei", |r| r.rei.rei),
];

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl ComparisonReport {
    pub(crate) fn build(
        cfg: &ExperimentConfig,
        weights: &ReiWeights,
        raw: Vec<(String, StrategyKind, usize, MetricsReport)>,
    ) -> Result<Self> {
        let mut runs = Vec::with_capacity(raw.len());
        for (scenario, strategy, trial, metrics) in raw {
            let rei = compute_rei(&metrics, weights)?;
            runs.push(RunResult {
                scenario,
                strategy,
                trial,
                seed: trial_seed(cfg, trial),
                metrics,
                rei,
            });
        }
        let alpha = cfg.rei.wilcoxon_alpha;
        let mut scenarios = Vec::new();
        for sc in &cfg.scenarios {
            let of = |kind: StrategyKind| -> Vec<&RunResult> {
                runs.iter().filter(|r| r.scenario == sc.name && r.strategy == kind).collect()
            };
            let hpa_runs = of(StrategyKind::Hpa);
            let hpa_pods = (!hpa_runs.is_empty()).then(|| mean(hpa_runs.iter().map(|r| r.metrics.replica_minutes)));

            let mut strategies = Vec::new();
            let mut wilcoxon = Vec::new();
            let mut per_strategy = Vec::new();
            for kind in cfg.strategy_order() {
                let rs = of(kind);
                let collect = |f: fn(&RunResult) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
                let pods = mean_ci95(&collect(|r| r.metrics.replica_minutes));
                let p95: Vec<f64> = rs.iter().filter_map(|r| r.metrics.p95_ms).collect();
                strategies.push(StrategySummary {
                    strategy: kind,
                    trials: rs.len(),
                    rei: mean_ci95(&collect(|r| r.rei.rei)),
                    slo_violation_rate: mean_ci95(&collect(|r| r.metrics.slo_violation_rate)),
                    replica_minutes: pods,
                    p95_ms: (!p95.is_empty()).then(|| mean(p95.iter().copied())),
                    cold_starts: mean(rs.iter().map(|r| r.metrics.cold_starts as f64)),
                    cold_start_requests: mean(rs.iter().map(|r| r.metrics.cold_start_requests as f64)),
                    dropped: mean(rs.iter().map(|r| r.metrics.dropped as f64)),
                    avg_cpu_util: mean(rs.iter().map(|r| r.metrics.avg_cpu_util)),
                    scaling_events: mean(rs.iter().map(|r| r.metrics.scaling_events as f64)),
                    oscillations: mean(rs.iter().map(|r| r.metrics.oscillations as f64)),
                    pod_minute_ratio: hpa_pods.filter(|&h| h > 0.0).map(|h| pods.0 / h),
                });
                if kind != StrategyKind::Hpa && !hpa_runs.is_empty() {
                    for (metric, f) in TESTED_METRICS {
                        let a: Vec<f64> = rs.iter().map(|r| f(r)).collect();
                        let b: Vec<f64> = hpa_runs.iter().map(|r| f(r)).collect();
                        wilcoxon.push(WilcoxonRow {
                            strategy: kind,
                            metric,
                            result: wilcoxon_signed_rank(&a, &b, alpha)?,
                        });
                    }
                }
                per_strategy.push((kind.to_string(), rs.iter().map(|r| r.metrics.clone()).collect()));
            }
            let sensitivity = sensitivity_sweep(&per_strategy, weights, cfg.rei.sensitivity_delta)?;
            scenarios.push(ScenarioSummary {
                name: sc.name.clone(),
                reference_ratio: sc.reference_ratio,
                strategies,
                wilcoxon,
                sensitivity,
            });
        }
        Ok(Self {
            weights: *weights,
            sensitivity_delta: cfg.rei.sensitivity_delta,
            runs,
            scenarios,
        })
    }

    pub fn scenario(&self, name: &str) -> Option<&ScenarioSummary> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from(
            "scenario,strategy,trial,seed,arrivals,slo_violation_rate,p50_ms,p95_ms,p99_ms,\
             mean_response_ms,cold_starts,cold_start_requests,dropped,replica_minutes,\
             demand_replica_minutes,avg_cpu_util,underutil_rate,scaling_events,oscillations,\
             mean_time_between_scaling_s,s_slo,s_eff,s_stab,rei\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.runs {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.strategy,
                r.trial,
                r.seed,
                m.arrivals,
                m.slo_violation_rate,
                opt(m.p50_ms),
                opt(m.p95_ms),
                opt(m.p99_ms),
                opt(m.mean_response_ms),
                m.cold_starts,
                m.cold_start_requests,
                m.dropped,
                m.replica_minutes,
                m.demand_replica_minutes,
                m.avg_cpu_util,
                m.underutil_rate,
                m.scaling_events,
                m.oscillations,
                m.mean_time_between_scaling_s,
                r.rei.s_slo,
                r.rei.s_eff,
                r.rei.s_stab,
                r.rei.rei
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "scenario,strategy,trials,rei_mean,rei_ci95,slo_violation_rate_mean,slo_violation_rate_ci95,\
             replica_minutes_mean,replica_minutes_ci95,pod_minute_ratio_vs_hpa,reference_ratio,\
             cold_starts_mean,cold_start_requests_mean,oscillations_mean\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for sc in &self.scenarios {
            for s in &sc.strategies {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    sc.name,
                    s.strategy,
                    s.trials,
                    s.rei.0,
                    opt(s.rei.1),
                    s.slo_violation_rate.0,
                    opt(s.slo_violation_rate.1),
                    s.replica_minutes.0,
                    opt(s.replica_minutes.1),
                    opt(s.pod_minute_ratio),
                    opt(sc.reference_ratio.filter(|_| s.strategy == StrategyKind::Aapa)),
                    s.cold_starts,
                    s.cold_start_requests,
                    s.oscillations
                );
            }
        }
        out
    }

    pub fn wilcoxon_csv(&self) -> String {
        let mut out = String::from("scenario,strategy,baseline,metric,n,w_plus,w_minus,statistic,p_value,exact,significant\n");
        for sc in &self.scenarios {
            for w in &sc.wilcoxon {
                let r = &w.result;
                let _ = writeln!(
                    out,
                    "{},{},hpa,{},{},{},{},{},{},{},{}",
                    sc.name, w.strategy, w.metric, r.n, r.w_plus, r.w_minus, r.statistic, r.p_value, r.exact, r.significant
                );
            }
        }
        out
    }

    pub fn sensitivity_csv(&self) -> String {
        let mut out = String::from("scenario,perturbation,alpha,beta,gamma,ranking,rank_changes\n");
        for sc in &self.scenarios {
            let s = &sc.sensitivity;
            let w = self.weights;
            let _ = writeln!(out, "{},baseline,{},{},{},{},0", sc.name, w.alpha, w.beta, w.gamma, s.baseline.join(">"));
            for p in &s.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    sc.name,
                    p.label,
                    p.weights.alpha,
                    p.weights.beta,
                    p.weights.gamma,
                    p.ranking.join(">"),
                    p.rank_changes
                );
            }
        }
        out
    }

    pub fn render_text(&self) -> String {
        let ci = |e: &Estimate, digits: usize| match e.1 {
            Some(h) => format!("{:.d$} ± {:.d$}", e.0, h, d = digits),
            None => format!("{:.d$}", e.0, d = digits),
        };
        let mut out = String::new();
        let w = self.weights;
        let _ = writeln!(out, "REI weights: alpha {} beta {} gamma {}", w.alpha, w.beta, w.gamma);
        for sc in &self.scenarios {
            let _ = writeln!(out, "\n== {} ==", sc.name);
            let _ = writeln!(
                out,
                "{:<11} {:>18} {:>20} {:>22} {:>8} {:>10} {:>11} {:>8}",
                "strategy", "REI", "violation rate", "pod-minutes", "ratio", "pod starts", "cold reqs", "osc"
            );
            for s in &sc.strategies {
                let _ = writeln!(
                    out,
                    "{:<11} {:>18} {:>20} {:>22} {:>8} {:>10.1} {:>11.1} {:>8.1}",
                    s.strategy.as_str(),
                    ci(&s.rei, 4),
                    ci(&s.slo_violation_rate, 4),
                    ci(&s.replica_minutes, 1),
                    s.pod_minute_ratio.map(|r| format!("{r:.2}")).unwrap_or_else(|| "-".into()),
                    s.cold_starts,
                    s.cold_start_requests,
                    s.oscillations
                );
            }
            if let (Some(reference), Some(a)) = (sc.reference_ratio, sc.strategy(StrategyKind::Aapa)) {
                if let Some(r) = a.pod_minute_ratio {
                    let _ = writeln!(out, "aapa/hpa pod-minute ratio {r:.2} (reference {reference})");
                }
            }
            for row in &sc.wilcoxon {
                let r = &row.result;
                let _ = writeln!(
                    out,
                    "wilcoxon {} vs hpa on {}: n={} W={} p={:.4}{}{}",
                    row.strategy,
                    row.metric,
                    r.n,
                    r.statistic,
                    r.p_value,
                    if r.exact { " (exact)" } else { " (normal)" },
                    if r.significant { " significant" } else { "" }
                );
            }
            let s = &sc.sensitivity;
            let _ = writeln!(
                out,
                "ranking {} ; max rank changes under ±{} perturbation: {}",
                s.baseline.join(" > "),
                self.sensitivity_delta,
                s.max_rank_changes()
            );
        }
        out
    }

    /// Writes `runs.csv`, `summary.csv`, `wilcoxon.csv`, `sensitivity.csv`
    /// and `report.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, body) in [
            ("runs.csv", self.runs_csv()),
            ("summary.csv", self.summary_csv()),
            ("wilcoxon.csv", self.wilcoxon_csv()),
            ("sensitivity.csv", self.sensitivity_csv()),
            ("report.txt", self.render_text()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
