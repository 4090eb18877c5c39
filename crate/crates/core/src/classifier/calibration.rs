//! Beta calibration: `mu(p) = 1 / (1 + 1 / (e^c * p^a / (1-p)^b))`,
//! i.e. a logistic regression on `(ln p, -ln(1-p))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weaklabel::Archetype;

pub const PROBA_CLAMP: f64 = 1e-6;
const RIDGE: f64 = 1e-4;
const MAX_ITER: usize = 100;

fn clamp_p(p: f64) -> f64 {
    p.clamp(PROBA_CLAMP, 1.0 - PROBA_CLAMP)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl BetaMap {
    pub const IDENTITY: BetaMap = BetaMap {
        a: 1.0,
        b: 1.0,
        c: 0.0,
    };

    pub fn apply(&self, p: f64) -> f64 {
        let p = clamp_p(p);
        let z = self.c + self.a * p.ln() - self.b * (1.0 - p).ln();
        sigmoid(z)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-class maps, indexed by `Archetype::index()`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibrator {
    pub maps: [BetaMap; Archetype::COUNT],
}

impl Default for BetaCalibrator {
    fn default() -> Self {
        Self::identity()
    }
}

impl BetaCalibrator {
    pub fn identity() -> Self {
        Self {
            maps: [BetaMap::IDENTITY; Archetype::COUNT],
        }
    }

    pub fn calibrate(&self, class: Archetype, p: f64) -> f64 {
        self.maps[class.index()].apply(p)
    }
}

/// One-vs-rest fit on validation probabilities.
pub fn fit_beta_calibrator(
    probas: &[[f64; Archetype::COUNT]],
    labels: &[Archetype],
) -> Result<BetaCalibrator> {
    if probas.len() != labels.len() || probas.is_empty() {
        return Err(Error::Calibration(
            "validation predictions and labels must be non-empty and aligned".into(),
        ));
    }
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Err(Error::Calibration(format!(
            "validation labels are all {first}"
        )));
    }
    let mut maps = [BetaMap::IDENTITY; Archetype::COUNT];
    for class in Archetype::ALL {
        let p: Vec<f64> = probas.iter().map(|row| row[class.index()]).collect();
        let y: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        maps[class.index()] = fit_beta_map(&p, &y)?;
    }
    Ok(BetaCalibrator { maps })
}

/// Maximum-likelihood fit of one map. `a` and `b` are kept non-negative by
/// pinning a negative coefficient at zero and refitting the rest.
pub fn fit_beta_map(p: &[f64], y: &[bool]) -> Result<BetaMap> {
    if p.len() != y.len() || p.is_empty() {
        return Err(Error::Calibration("empty calibration data".into()));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Calibration("non-finite probability".into()));
    }
    let rows: Vec<[f64; 3]> = p
        .iter()
        .map(|&v| {
            let v = clamp_p(v);
            [v.ln(), -(1.0 - v).ln(), 1.0]
        })
        .collect();
    let targets: Vec<f64> = y.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();

    let mut free = [true, true, true];
    loop {
        let w = newton_fit(&rows, &targets, free);
        let mut pinned = false;
        for j in 0..2 {
            if free[j] && w[j] < 0.0 {
                free[j] = false;
                pinned = true;
            }
        }
        if !pinned {
            return Ok(BetaMap {
                a: w[0].max(0.0),
                b: w[1].max(0.0),
                c: w[2],
            });
        }
    }
}

fn penalized_nll(rows: &[[f64; 3]], y: &[f64], w: &[f64; 3]) -> f64 {
    let mut total = 0.0;
    for (x, &t) in rows.iter().zip(y) {
        let z = w[0] * x[0] + w[1] * x[1] + w[2] * x[2];
        // log(1 + e^z) - t z, computed stably
        let softplus = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        total += softplus - t * z;
    }
    total + 0.5 * RIDGE * (w[0] * w[0] + w[1] * w[1])
}

/// Damped Newton on the penalized log-loss over the free coordinates;
/// fixed coordinates stay at zero.
fn newton_fit(rows: &[[f64; 3]], y: &[f64], free: [bool; 3]) -> [f64; 3] {
    let idx: Vec<usize> = (0..3).filter(|&j| free[j]).collect();
    let mut w = [0.0; 3];
    for &j in &idx {
        w[j] = if j < 2 { 1.0 } else { 0.0 };
    }
    let mut loss = penalized_nll(rows, y, &w);
    for _ in 0..MAX_ITER {
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        for (x, &t) in rows.iter().zip(y) {
            let mu = sigmoid(w[0] * x[0] + w[1] * x[1] + w[2] * x[2]);
            let r = mu - t;
            let s = (mu * (1.0 - mu)).max(1e-12);
            for i in 0..3 {
                grad[i] += r * x[i];
                for j in 0..3 {
                    hess[i][j] += s * x[i] * x[j];
                }
            }
        }
        for j in 0..2 {
            grad[j] += RIDGE * w[j];
            hess[j][j] += RIDGE;
        }
        let k = idx.len();
        let mut m = vec![vec![0.0; k + 1]; k];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                m[r][c] = hess[i][j];
            }
            m[r][k] = grad[i];
        }
        let Some(step) = solve(m) else { break };

        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let mut cand = w;
            for (r, &i) in idx.iter().enumerate() {
                cand[i] -= t * step[r];
            }
            let cand_loss = penalized_nll(rows, y, &cand);
            if cand_loss <= loss {
                let delta = loss - cand_loss;
                w = cand;
                loss = cand_loss;
                improved = delta > 1e-12 * (1.0 + loss.abs());
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    w
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for c in col..=n {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_parameters_reproduce_input() {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert!((BetaMap::IDENTITY.apply(p) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn calibrated_inputs_fit_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
        let y: Vec<bool> = p.iter().map(|&pi| rng.random::<f64>() < pi).collect();
        let map = fit_beta_map(&p, &y).unwrap();
        for i in 1..100 {
            let q = i as f64 / 100.0;
            assert!((map.apply(q) - q).abs() < 0.05, "p={q} mu={}", map.apply(q));
        }
    }

    #[test]
    fn overconfident_inputs_are_shrunk() {
        // true frequency is p^2/(p^2 + (1-p)^2)^(1/2)-ish; just check direction
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.01..0.99)).collect();
        let y: Vec<bool> = p
            .iter()
            .map(|&pi| rng.random::<f64>() < 0.5 + (pi - 0.5) * 0.5)
            .collect();
        let map = fit_beta_map(&p, &y).unwrap();
        assert!(map.apply(0.95) < 0.85);
        assert!(map.apply(0.05) > 0.15);
    }

    #[test]
    fn anti_correlated_data_pins_coefficients_at_zero() {
        let p: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
        let y: Vec<bool> = p.iter().map(|&pi| pi < 0.5).collect();
        let map = fit_beta_map(&p, &y).unwrap();
        assert!(map.a >= 0.0 && map.b >= 0.0);
        let grid: Vec<f64> = (1..=100).map(|i| map.apply(i as f64 / 101.0)).collect();
        assert!(grid.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_class_validation_is_rejected() {
        let probas = vec![[0.7, 0.1, 0.1, 0.1]; 60];
        let labels = vec![Archetype::Spike; 60];
        assert!(matches!(
            fit_beta_calibrator(&probas, &labels),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn separable_data_stays_finite() {
        let p: Vec<f64> = (0..100).map(|i| if i < 50 { 0.02 } else { 0.98 }).collect();
        let y: Vec<bool> = (0..100).map(|i| i >= 50).collect();
        let map = fit_beta_map(&p, &y).unwrap();
        assert!(map.a.is_finite() && map.b.is_finite() && map.c.is_finite());
        assert!(map.apply(0.98) > 0.9);
    }

    proptest::proptest! {
        #[test]
        fn fitted_maps_are_monotone_and_open(seed in 0u64..200, skew in 0.2f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
            let y: Vec<bool> = p.iter().map(|&pi| rng.random::<f64>() < pi.powf(skew)).collect();
            let map = fit_beta_map(&p, &y).unwrap();
            proptest::prop_assert!(map.a >= 0.0 && map.b >= 0.0);
            let grid: Vec<f64> = (1..=100).map(|i| map.apply(i as f64 / 101.0)).collect();
            for w in grid.windows(2) {
                proptest::prop_assert!(w[0] <= w[1]);
            }
            for &m in &grid {
                proptest::prop_assert!(m > 0.0 && m < 1.0);
            }
        }
    }
}
