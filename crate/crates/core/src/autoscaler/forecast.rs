//! Additive Holt-Winters smoothing and least-squares trend extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoltWintersParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Season length in samples (minutes).
    pub season_len: usize,
}

impl Default for HoltWintersParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.1,
            gamma: 0.2,
            season_len: 60,
        }
    }
}

impl HoltWintersParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("holt-winters {name} outside [0, 1]")));
            }
        }
        if self.season_len < 2 {
            return Err(Error::validation("season_len must be at least 2"));
        }
        Ok(())
    }
}

/// Forecast `horizon` steps past the end of `history`.
pub fn holt_winters_forecast(history: &[f64], horizon: usize, p: &HoltWintersParams) -> Result<f64> {
    let path = holt_winters_path(history, horizon.max(1), p)?;
    Ok(path[horizon.max(1) - 1])
}

/// Forecasts for steps `1..=horizon`. Uses the seasonal model once two full
/// seasons are available and trend-only (Holt) smoothing before that.
pub fn holt_winters_path(history: &[f64], horizon: usize, p: &HoltWintersParams) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::validation("cannot forecast from an empty history"));
    }
    let l = p.season_len;
    if history.len() >= 2 * l {
        Ok(seasonal(history, horizon, p))
    } else {
        Ok(holt(history, horizon, p))
    }
}

fn holt(x: &[f64], horizon: usize, p: &HoltWintersParams) -> Vec<f64> {
    let mut level = x[0];
    let mut trend = if x.len() > 1 { x[1] - x[0] } else { 0.0 };
    for &v in &x[1..] {
        let prev = level;
        level = p.alpha * v + (1.0 - p.alpha) * (level + trend);
        trend = p.beta * (level - prev) + (1.0 - p.beta) * trend;
    }
    (1..=horizon).map(|h| level + h as f64 * trend).collect()
}

fn seasonal(x: &[f64], horizon: usize, p: &HoltWintersParams) -> Vec<f64> {
    let l = p.season_len;
    // Initial state from the first two seasons: a line through the two
    // season means, seasonal offsets from the averaged residuals.
    let m1 = x[..l].iter().sum::<f64>() / l as f64;
    let m2 = x[l..2 * l].iter().sum::<f64>() / l as f64;
    let slope = (m2 - m1) / l as f64;
    let centre = (l as f64 - 1.0) / 2.0;
    let line = |t: usize| m1 + slope * (t as f64 - centre);
    let mut season: Vec<f64> = (0..l)
        .map(|j| ((x[j] - line(j)) + (x[j + l] - line(j + l))) / 2.0)
        .collect();
    let mean_s = season.iter().sum::<f64>() / l as f64;
    for s in &mut season {
        *s -= mean_s;
    }
    let mut level = line(2 * l - 1) + mean_s;
    let mut trend = slope;
    for (t, &v) in x.iter().enumerate().skip(2 * l) {
        let phase = t % l;
        let prev = level;
        level = p.alpha * (v - season[phase]) + (1.0 - p.alpha) * (level + trend);
        trend = p.beta * (level - prev) + (1.0 - p.beta) * trend;
        season[phase] = p.gamma * (v - level) + (1.0 - p.gamma) * season[phase];
    }
    let last = x.len() - 1;
    (1..=horizon)
        .map(|h| level + h as f64 * trend + season[(last + h) % l])
        .collect()
}

/// Least-squares line over the last `window` samples, evaluated `ahead`
/// steps past the final sample.
pub fn ols_extrapolate(history: &[f64], window: usize, ahead: f64) -> Option<f64> {
    let tail = &history[history.len().saturating_sub(window)..];
    let n = tail.len();
    if n == 0 {
        return None;
    }
    if n == 1 {
        return Some(tail[0]);
    }
    let nf = n as f64;
    let mean_t = (nf - 1.0) / 2.0;
    let mean_y = tail.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &y) in tail.iter().enumerate() {
        let dt = i as f64 - mean_t;
        sxy += dt * (y - mean_y);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    Some(mean_y + slope * (nf - 1.0 + ahead - mean_t))
}
