//! The 37-dimensional window feature vector.
//!
//! Statistical (14), time-domain (13) and frequency-domain (10) features.
//! Degenerate inputs resolve to finite conventions: a zero-variance window
//! has zero skewness, kurtosis, autocorrelation, coefficient of variation,
//! spectral entropy and R².

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

macro_rules! feature_vector {
    ($($field:ident),+ $(,)?) => {
        /// Named window features in canonical column order.
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct FeatureVector {
            $(pub $field: f64,)+
        }

        const NAMES: &[&str] = &[$(stringify!($field)),+];

        impl FeatureVector {
            pub fn to_array(&self) -> [f64; NUM_FEATURES] {
                [$(self.$field),+]
            }

            pub fn from_slice(values: &[f64]) -> Result<Self> {
                if values.len() != NUM_FEATURES {
                    return Err(Error::validation(format!(
                        "expected {NUM_FEATURES} features, got {}",
                        values.len()
                    )));
                }
                let mut it = values.iter().copied();
                Ok(Self { $($field: it.next().unwrap(),)+ })
            }
        }
    };
}

feature_vector!(
    // statistical
    mean,
    std,
    min,
    max,
    median,
    skewness,
    excess_kurtosis,
    p10,
    p25,
    p75,
    p90,
    p95,
    p99,
    iqr,
    // time domain
    peak_to_mean,
    max_to_median,
    ols_slope,
    r_squared,
    trend_direction,
    autocorr_lag1,
    autocorr_lag5,
    autocorr_lag10,
    autocorr_lag30,
    mean_crossings,
    coeff_variation,
    burstiness,
    longest_zero_run,
    // frequency domain
    spectral_entropy,
    dominant_freq_index,
    dominant_power_fraction,
    band_energy_1,
    band_energy_2,
    band_energy_3,
    band_energy_4,
    spectral_centroid,
    spectral_flatness,
    total_spectral_energy,
);

pub const NUM_FEATURES: usize = 37;

/// Feature names in canonical order.
pub fn feature_names() -> &'static [&'static str] {
    NAMES
}

impl FeatureVector {
    pub fn max_autocorr(&self) -> f64 {
        self.autocorr_lag5
            .max(self.autocorr_lag10)
            .max(self.autocorr_lag30)
    }
}

/// Computes the feature vector of a window of non-negative counts.
pub fn compute_features(values: &[f64]) -> Result<FeatureVector> {
    let n = values.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "window needs at least 2 values, got {n}"
        )));
    }
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::validation(format!(
            "window values must be finite and non-negative, found {bad}"
        )));
    }

    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let std = m2.sqrt();
    let degenerate = std == 0.0;
    let (skewness, excess_kurtosis) = if degenerate {
        (0.0, 0.0)
    } else {
        let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
        let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| percentile_sorted(&sorted, p);
    let min = sorted[0];
    let max = sorted[n - 1];
    let median = q(50.0);
    let p25 = q(25.0);
    let p75 = q(75.0);

    let peak_to_mean = if mean > 0.0 { max / mean } else { 0.0 };
    let max_to_median = if median > 0.0 {
        max / median
    } else {
        max / (median + 1.0)
    };

    let (ols_slope, r_squared) = linear_fit(values, mean, degenerate);
    let trend_direction = if ols_slope.abs() <= 1e-12 * (1.0 + mean.abs()) {
        0.0
    } else {
        ols_slope.signum()
    };

    let autocorr = |lag: usize| {
        if degenerate || lag >= n - 1 {
            0.0
        } else {
            pearson(&values[..n - lag], &values[lag..])
        }
    };

    let mean_crossings = values
        .windows(2)
        .filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0)
        .count() as f64;
    let coeff_variation = if mean > 0.0 && !degenerate { std / mean } else { 0.0 };
    let burstiness = if std + mean > 0.0 {
        (std - mean) / (std + mean)
    } else {
        0.0
    };
    let longest_zero_run = values
        .iter()
        .fold((0usize, 0usize), |(best, run), &v| {
            let run = if v == 0.0 { run + 1 } else { 0 };
            (best.max(run), run)
        })
        .0 as f64;

    let spectrum = power_spectrum(values, mean);

    Ok(FeatureVector {
        mean,
        std,
        min,
        max,
        median,
        skewness,
        excess_kurtosis,
        p10: q(10.0),
        p25,
        p75,
        p90: q(90.0),
        p95: q(95.0),
        p99: q(99.0),
        iqr: p75 - p25,
        peak_to_mean,
        max_to_median,
        ols_slope,
        r_squared,
        trend_direction,
        autocorr_lag1: autocorr(1),
        autocorr_lag5: autocorr(5),
        autocorr_lag10: autocorr(10),
        autocorr_lag30: autocorr(30),
        mean_crossings,
        coeff_variation,
        burstiness,
        longest_zero_run,
        ..spectral_features(&spectrum, n, degenerate)
    })
}

/// Linear-interpolated percentile of an ascending slice, `p` in [0, 100].
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// OLS fit against t = 0..n-1, returning (slope, R²).
fn linear_fit(values: &[f64], mean: f64, degenerate: bool) -> (f64, f64) {
    let n = values.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for (t, &y) in values.iter().enumerate() {
        let dt = t as f64 - t_mean;
        let dy = y - mean;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    if degenerate || syy == 0.0 {
        return (slope, 0.0);
    }
    let r2 = (sty * sty) / (stt * syy);
    (slope, r2.clamp(0.0, 1.0))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

thread_local! {
    static PLANNER: std::cell::RefCell<FftPlanner<f64>> = std::cell::RefCell::new(FftPlanner::new());
}

fn fft_for(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

/// |X_k|² of the mean-removed signal for k = 1..=floor(n/2).
fn power_spectrum(values: &[f64], mean: f64) -> Vec<f64> {
    let n = values.len();
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .collect();
    fft_for(n).process(&mut buf);
    buf[1..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

fn spectral_features(power: &[f64], n: usize, degenerate: bool) -> FeatureVector {
    let total: f64 = power.iter().sum();
    let bins = power.len();
    if degenerate || total <= 0.0 || bins == 0 {
        return FeatureVector::default();
    }
    let probs: Vec<f64> = power.iter().map(|p| p / total).collect();

    let entropy = if bins > 1 {
        let h: f64 = probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum();
        (h / (bins as f64).ln()).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let (dominant, dominant_power) = power
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bp), (i, &p)| {
            if p > bp {
                (i, p)
            } else {
                (bi, bp)
            }
        });

    let mut bands = [0.0f64; 4];
    for (i, p) in probs.iter().enumerate() {
        bands[i * 4 / bins] += p;
    }

    let centroid: f64 = probs
        .iter()
        .enumerate()
        .map(|(i, p)| (i + 1) as f64 * p)
        .sum();

    let mean_power = total / bins as f64;
    let floor = 1e-12 * mean_power;
    let log_mean = power.iter().map(|p| (p + floor).ln()).sum::<f64>() / bins as f64;
    let flatness = (log_mean.exp() / mean_power).clamp(0.0, 1.0);

    FeatureVector {
        spectral_entropy: entropy,
        dominant_freq_index: (dominant + 1) as f64,
        dominant_power_fraction: dominant_power / total,
        band_energy_1: bands[0],
        band_energy_2: bands[1],
        band_energy_3: bands[2],
        band_energy_4: bands[3],
        spectral_centroid: centroid,
        spectral_flatness: flatness,
        total_spectral_energy: total / n as f64,
        ..FeatureVector::default()
    }
}
