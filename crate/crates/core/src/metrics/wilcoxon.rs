//! Two-sided Wilcoxon signed-rank test on paired samples.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size that uses the exact null distribution.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// Pairs with a non-zero difference.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    pub exact: bool,
    /// Every difference was zero; the p-value is 1 by convention.
    pub degenerate: bool,
}

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Ranks of the non-zero absolute differences and the sign of each.
fn signed_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    (average_ranks(&abs), diffs.iter().map(|d| *d > 0.0).collect())
}

/// Exact two-sided p-value of the positive-rank sum `w_plus` under the
/// sign-flip null. Ranks may be half-integers (ties).
pub fn exact_p_value(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let obs = (2.0 * w_plus).round() as usize;
    let all = 2f64.powi(ranks.len() as i32);
    let lower: u64 = counts[..=obs].iter().sum();
    let upper: u64 = counts[obs..].iter().sum();
    (2.0 * lower.min(upper) as f64 / all).min(1.0)
}

/// Normal approximation with tie and continuity corrections.
pub fn normal_p_value(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alpha: f64) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::validation("paired samples differ in length"));
    }
    if a.is_empty() {
        return Err(Error::validation("paired samples are empty"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::validation("paired samples contain non-finite values"));
    }
    let (ranks, positive) = signed_ranks(a, b);
    let n = ranks.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            statistic: 0.0,
            p_value: 1.0,
            significant: false,
            exact: true,
            degenerate: true,
        });
    }
    // fold from +0.0: an empty float sum is -0.0
    let w_plus = ranks
        .iter()
        .zip(&positive)
        .filter(|(_, &p)| p)
        .fold(0.0, |acc, (r, _)| acc + r);
    let w_minus = n as f64 * (n as f64 + 1.0) / 2.0 - w_plus;
    let exact = n <= EXACT_MAX_N;
    let p_value = if exact {
        exact_p_value(&ranks, w_plus)
    } else {
        normal_p_value(&ranks, w_plus)
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        p_value,
        significant: p_value < alpha,
        exact,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Enumerates every sign assignment.
    fn brute_force_p(ranks: &[f64], w_plus: f64) -> f64 {
        let n = ranks.len();
        let mean = ranks.iter().sum::<f64>() / 2.0;
        let dev = (w_plus - mean).abs();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if (w - mean).abs() >= dev - 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0], 0.05).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn all_positive_five() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = wilcoxon_signed_rank(&a, &[0.0; 5], 0.05).unwrap();
        assert_eq!(r.w_minus, 0.0);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.0625).abs() < 1e-15);
        assert!(!r.significant);
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let n = rng.random_range(1..=12);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5i32..=5) as f64).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5i32..=5) as f64).collect();
            let r = wilcoxon_signed_rank(&a, &b, 0.05).unwrap();
            if r.degenerate {
                continue;
            }
            let (ranks, _) = signed_ranks(&a, &b);
            assert!((r.p_value - brute_force_p(&ranks, r.w_plus)).abs() < 1e-12);
        }
    }

    #[test]
    fn swapping_samples_keeps_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 12, 30] {
            let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let ab = wilcoxon_signed_rank(&a, &b, 0.05).unwrap();
            let ba = wilcoxon_signed_rank(&b, &a, 0.05).unwrap();
            assert_eq!(ab.p_value, ba.p_value);
        }
    }

    #[test]
    fn large_samples_use_the_approximation() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 + 0.5).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&a, &b, 0.05).unwrap();
        assert!(!r.exact);
        assert!(r.significant);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0], 0.05).is_err());
        assert!(wilcoxon_signed_rank(&[], &[], 0.05).is_err());
    }
}
