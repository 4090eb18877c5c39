//! Resource Efficiency Index: a weighted blend of SLO attainment,
//! efficiency and stability, each in [0, 1].

use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::error::{Error, Result};

/// Utilization at which the efficiency score saturates.
pub const EFFICIENT_UTILIZATION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReiWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ReiWeights {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.3,
            gamma: 0.2,
        }
    }
}

impl ReiWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    /// Alternative weighting that gives stability as much weight as
    /// efficiency: (0.4, 0.3, 0.3).
    pub fn stability_heavy() -> Self {
        Self {
            alpha: 0.4,
            beta: 0.3,
            gamma: 0.3,
        }
    }

    /// Looks up a named preset: `default` or `stability-heavy`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "stability-heavy" => Ok(Self::stability_heavy()),
            other => Err(Error::validation(format!("unknown weight preset '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.alpha, self.beta, self.gamma];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::validation("REI weights must be non-negative"));
        }
        let sum: f64 = ws.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("REI weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReiScore {
    pub s_slo: f64,
    pub s_eff: f64,
    pub s_stab: f64,
    pub rei: f64,
}

pub fn rei_from_components(s_slo: f64, s_eff: f64, s_stab: f64, w: &ReiWeights) -> Result<ReiScore> {
    w.validate()?;
    Ok(ReiScore {
        s_slo,
        s_eff,
        s_stab,
        rei: w.alpha * s_slo + w.beta * s_eff + w.gamma * s_stab,
    })
}

/// Scores a run. Efficiency averages utilization against 0.7 with the ratio
/// of the ideal replica integral to the one actually used; stability decays
/// with oscillations per hour.
pub fn compute_rei(report: &MetricsReport, w: &ReiWeights) -> Result<ReiScore> {
    let s_slo = (1.0 - report.slo_violation_rate).clamp(0.0, 1.0);
    let util = (report.avg_cpu_util / EFFICIENT_UTILIZATION).clamp(0.0, 1.0);
    let demand_ratio = if report.replica_minutes > 0.0 {
        (report.demand_replica_minutes / report.replica_minutes).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let s_eff = 0.5 * util + 0.5 * demand_ratio;
    let hours = report.duration_minutes / 60.0;
    let per_hour = if hours > 0.0 {
        report.oscillations as f64 / hours
    } else {
        0.0
    };
    let s_stab = 1.0 / (1.0 + per_hour);
    rei_from_components(s_slo, s_eff, s_stab, w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityPoint {
    /// e.g. `alpha+0.05`
    pub label: String,
    pub weights: ReiWeights,
    pub ranking: Vec<String>,
    pub rank_changes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub baseline: Vec<String>,
    pub points: Vec<SensitivityPoint>,
    /// Perturbations that would have made a weight negative.
    pub skipped: Vec<String>,
}

impl SensitivityReport {
    pub fn max_rank_changes(&self) -> usize {
        self.points.iter().map(|p| p.rank_changes).max().unwrap_or(0)
    }
}

/// Orders strategies by mean REI over their runs, best first.
fn ranking(reports: &[(String, Vec<MetricsReport>)], w: &ReiWeights) -> Result<Vec<String>> {
    let mut scored = Vec::with_capacity(reports.len());
    for (name, runs) in reports {
        if runs.is_empty() {
            return Err(Error::validation(format!("strategy '{name}' has no runs")));
        }
        let mut total = 0.0;
        for r in runs {
            total += compute_rei(r, w)?.rei;
        }
        scored.push((total / runs.len() as f64, name.as_str()));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(scored.into_iter().map(|(_, n)| n.to_string()).collect())
}

/// Re-ranks strategies with each weight moved by `±delta` and the weights
/// renormalized to sum to one.
pub fn sensitivity_sweep(
    reports: &[(String, Vec<MetricsReport>)],
    base: &ReiWeights,
    delta: f64,
) -> Result<SensitivityReport> {
    base.validate()?;
    if reports.is_empty() {
        return Err(Error::validation("sensitivity sweep needs at least one strategy"));
    }
    let baseline = ranking(reports, base)?;
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (i, name) in ["alpha", "beta", "gamma"].iter().enumerate() {
        for sign in [1.0, -1.0] {
            let mut ws = [base.alpha, base.beta, base.gamma];
            ws[i] += sign * delta;
            let label = format!("{name}{}{delta}", if sign > 0.0 { "+" } else { "-" });
            if ws[i] < 0.0 {
                skipped.push(label);
                continue;
            }
            let sum: f64 = ws.iter().sum();
            let weights = ReiWeights {
                alpha: ws[0] / sum,
                beta: ws[1] / sum,
                gamma: ws[2] / sum,
            };
            let rank = ranking(reports, &weights)?;
            let rank_changes = rank.iter().zip(&baseline).filter(|(a, b)| a != b).count();
            points.push(SensitivityPoint {
                label,
                weights,
                ranking: rank,
                rank_changes,
            });
        }
    }
    Ok(SensitivityReport {
        baseline,
        points,
        skipped,
    })
}
