//! Weak supervision: ten Boolean labeling functions over a
//! [`FeatureVector`], combined by majority vote.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{compute_features, FeatureVector};
use crate::trace::Window;

/// Workload behaviour class. Declaration order is the tie-break precedence
/// and the class index used by the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Archetype {
    Spike,
    Periodic,
    Ramp,
    Stationary,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [
        Archetype::Spike,
        Archetype::Periodic,
        Archetype::Ramp,
        Archetype::Stationary,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::Spike => "SPIKE",
            Archetype::Periodic => "PERIODIC",
            Archetype::Ramp => "RAMP",
            Archetype::Stationary => "STATIONARY",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SPIKE" => Ok(Archetype::Spike),
            "PERIODIC" => Ok(Archetype::Periodic),
            "RAMP" => Ok(Archetype::Ramp),
            "STATIONARY" => Ok(Archetype::Stationary),
            other => Err(Error::validation(format!("unknown archetype tag {other:?}"))),
        }
    }
}

impl TryFrom<String> for Archetype {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Archetype> for String {
    fn from(a: Archetype) -> String {
        a.as_str().to_string()
    }
}

/// One labeling function's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LfVote {
    pub lf_id: u8,
    /// `None` means abstain.
    pub vote: Option<Archetype>,
}

/// Majority-vote label with agreement confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakLabel {
    pub archetype: Archetype,
    pub confidence: f64,
    pub votes: Vec<LfVote>,
}

pub const NUM_LFS: usize = 10;
pub const FALLBACK_CONFIDENCE: f64 = 0.25;

/// Thresholds read by the labeling functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelingThresholds {
    /// LF1: excess kurtosis above this ...
    pub spike_kurtosis: f64,
    /// ... and max/median above this.
    pub spike_max_to_median: f64,
    /// LF2: burstiness above this ...
    pub spike_burstiness: f64,
    /// ... and p99 above this multiple of the median.
    pub spike_p99_to_median: f64,
    /// LF3: spectral entropy below this ...
    pub periodic_entropy: f64,
    /// ... and max(lag 5/10/30 autocorrelation) above this. Also used by LF10.
    pub periodic_autocorr: f64,
    /// LF4: dominant spectral power fraction above this.
    pub periodic_dominant_fraction: f64,
    /// LF5: R² above this (and a non-zero slope). Also the LF4 trend guard.
    pub ramp_r_squared: f64,
    /// LF6: fraction of first differences that share one sign.
    pub ramp_monotone_fraction: f64,
    /// LF7: coefficient of variation below this ...
    pub stationary_cv: f64,
    /// ... and spectral entropy above this.
    pub stationary_entropy: f64,
    /// LF8: R² below this ...
    pub stationary_r_squared: f64,
    /// ... and std below this multiple of the mean.
    pub stationary_std_to_mean: f64,
    /// LF9: mean requests/min below this marks an idle window.
    pub idle_mean: f64,
    /// LF10: max/median above this with periodic autocorrelation.
    pub bursty_periodic_max_to_median: f64,
}

impl Default for LabelingThresholds {
    fn default() -> Self {
        Self {
            spike_kurtosis: 10.0,
            spike_max_to_median: 20.0,
            spike_burstiness: 0.7,
            spike_p99_to_median: 15.0,
            periodic_entropy: 0.5,
            periodic_autocorr: 0.6,
            periodic_dominant_fraction: 0.4,
            ramp_r_squared: 0.8,
            ramp_monotone_fraction: 0.8,
            stationary_cv: 0.3,
            stationary_entropy: 0.8,
            stationary_r_squared: 0.2,
            stationary_std_to_mean: 0.3,
            idle_mean: 0.1,
            bursty_periodic_max_to_median: 20.0,
        }
    }
}

/// Evaluates the ten labeling functions, in `lf_id` order.
///
/// `monotone_fraction` is the largest share of first differences with one
/// strict sign; it comes from the raw window because it is not part of the
/// feature vector.
pub fn apply_labeling_functions(
    fv: &FeatureVector,
    monotone_fraction: f64,
    th: &LabelingThresholds,
) -> Vec<LfVote> {
    use Archetype::*;
    let rules: [(bool, Archetype); NUM_LFS] = [
        (
            fv.excess_kurtosis > th.spike_kurtosis && fv.max_to_median > th.spike_max_to_median,
            Spike,
        ),
        (
            fv.burstiness > th.spike_burstiness && fv.p99 > th.spike_p99_to_median * fv.median,
            Spike,
        ),
        (
            fv.spectral_entropy < th.periodic_entropy && fv.max_autocorr() > th.periodic_autocorr,
            Periodic,
        ),
        // A clean linear trend concentrates its spectrum in the first bin, so
        // the dominant-power rule only fires on windows that are not
        // trend-dominated.
        (
            fv.dominant_power_fraction > th.periodic_dominant_fraction
                && fv.r_squared <= th.ramp_r_squared,
            Periodic,
        ),
        (
            fv.r_squared > th.ramp_r_squared && fv.ols_slope.abs() > 0.0,
            Ramp,
        ),
        (monotone_fraction >= th.ramp_monotone_fraction, Ramp),
        (
            fv.coeff_variation < th.stationary_cv && fv.spectral_entropy > th.stationary_entropy,
            Stationary,
        ),
        (
            fv.r_squared < th.stationary_r_squared && fv.std < th.stationary_std_to_mean * fv.mean,
            Stationary,
        ),
        (fv.mean < th.idle_mean, Stationary),
        (
            fv.max_to_median > th.bursty_periodic_max_to_median
                && fv.max_autocorr() > th.periodic_autocorr,
            Periodic,
        ),
    ];
    rules
        .iter()
        .enumerate()
        .map(|(i, &(fires, class))| LfVote {
            lf_id: i as u8 + 1,
            vote: fires.then_some(class),
        })
        .collect()
}

/// Largest fraction of first differences sharing one strict sign.
pub fn monotone_fraction(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let (up, down) = values.windows(2).fold((0usize, 0usize), |(u, d), w| {
        if w[1] > w[0] {
            (u + 1, d)
        } else if w[1] < w[0] {
            (u, d + 1)
        } else {
            (u, d)
        }
    });
    up.max(down) as f64 / (values.len() - 1) as f64
}

/// Plurality vote over non-abstaining LFs. Ties go to the earliest
/// archetype in precedence order; no votes at all yields STATIONARY with
/// the uniform-prior confidence.
pub fn majority_vote(votes: &[LfVote]) -> WeakLabel {
    let mut counts = [0usize; Archetype::COUNT];
    for v in votes.iter().filter_map(|v| v.vote) {
        counts[v.index()] += 1;
    }
    let cast: usize = counts.iter().sum();
    if cast == 0 {
        return WeakLabel {
            archetype: Archetype::Stationary,
            confidence: FALLBACK_CONFIDENCE,
            votes: votes.to_vec(),
        };
    }
    // First maximum wins, which realises the precedence order.
    let (winner, best) = counts
        .iter()
        .enumerate()
        .fold((0, 0), |(bi, bc), (i, &c)| if c > bc { (i, c) } else { (bi, bc) });
    WeakLabel {
        archetype: Archetype::ALL[winner],
        confidence: best as f64 / cast as f64,
        votes: votes.to_vec(),
    }
}

/// Features and weak label of a window.
pub fn label_window(window: &Window, th: &LabelingThresholds) -> Result<(FeatureVector, WeakLabel)> {
    let fv = compute_features(&window.values)?;
    let votes = apply_labeling_functions(&fv, monotone_fraction(&window.values), th);
    Ok((fv, majority_vote(&votes)))
}

/// A labeled window.
#[derive(Debug, Clone)]
pub struct LabeledRow {
    pub function_id: String,
    pub start_minute: usize,
    pub features: FeatureVector,
    pub label: WeakLabel,
}

/// Labels every window; windows whose features fail are skipped and logged.
pub fn label_dataset(windows: &[Window], th: &LabelingThresholds) -> Vec<LabeledRow> {
    let mut rows = Vec::with_capacity(windows.len());
    for w in windows {
        match label_window(w, th) {
            Ok((features, label)) => rows.push(LabeledRow {
                function_id: w.function_id.clone(),
                start_minute: w.start_minute,
                features,
                label,
            }),
            Err(e) => log::warn!(
                "skipping window {}@{}: {e}",
                w.function_id,
                w.start_minute
            ),
        }
    }
    rows
}

/// Per-class row counts in archetype order.
pub fn class_distribution(rows: &[LabeledRow]) -> [usize; Archetype::COUNT] {
    let mut counts = [0; Archetype::COUNT];
    for r in rows {
        counts[r.label.archetype.index()] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{generate_synthetic, slide_windows, SyntheticSpec};

    fn quiet_fv() -> FeatureVector {
        // Every rule's condition is false.
        FeatureVector {
            mean: 10.0,
            std: 5.0,
            median: 10.0,
            p99: 20.0,
            excess_kurtosis: 0.0,
            max_to_median: 2.0,
            burstiness: -0.3,
            spectral_entropy: 0.65,
            autocorr_lag5: 0.1,
            dominant_power_fraction: 0.1,
            r_squared: 0.5,
            ols_slope: 0.1,
            coeff_variation: 0.5,
            ..FeatureVector::default()
        }
    }

    fn votes_of(fv: &FeatureVector, mono: f64) -> Vec<Option<Archetype>> {
        apply_labeling_functions(fv, mono, &LabelingThresholds::default())
            .into_iter()
            .map(|v| v.vote)
            .collect()
    }

    #[test]
    fn quiet_vector_abstains_everywhere() {
        let votes = votes_of(&quiet_fv(), 0.5);
        assert_eq!(votes.len(), NUM_LFS);
        assert!(votes.iter().all(Option::is_none));
        let label = majority_vote(&apply_labeling_functions(
            &quiet_fv(),
            0.5,
            &LabelingThresholds::default(),
        ));
        assert_eq!(label.archetype, Archetype::Stationary);
        assert_eq!(label.confidence, 0.25);
    }

    #[test]
    fn kurtosis_rule_votes_spike() {
        let fv = FeatureVector {
            excess_kurtosis: 15.0,
            max_to_median: 30.0,
            ..quiet_fv()
        };
        let votes = votes_of(&fv, 0.5);
        assert_eq!(votes[0], Some(Archetype::Spike));
        assert!(votes[1..].iter().all(Option::is_none));
    }

    #[test]
    fn constant_window_rules() {
        let w = Window {
            function_id: "c".into(),
            start_minute: 0,
            values: vec![5.0; 60],
        };
        let (fv, label) = label_window(&w, &LabelingThresholds::default()).unwrap();
        assert_eq!(fv.spectral_entropy, 0.0);
        assert_eq!(label.votes[6].vote, None);
        assert_eq!(label.votes[7].vote, Some(Archetype::Stationary));
        assert_eq!(label.archetype, Archetype::Stationary);
    }

    #[test]
    fn idle_window_is_stationary() {
        let w = Window {
            function_id: "z".into(),
            start_minute: 0,
            values: vec![0.0; 60],
        };
        let (_, label) = label_window(&w, &LabelingThresholds::default()).unwrap();
        assert_eq!(label.votes[8].vote, Some(Archetype::Stationary));
        assert_eq!(label.archetype, Archetype::Stationary);
    }

    fn votes(list: &[Option<Archetype>]) -> Vec<LfVote> {
        let mut v: Vec<LfVote> = list
            .iter()
            .enumerate()
            .map(|(i, &vote)| LfVote {
                lf_id: i as u8 + 1,
                vote,
            })
            .collect();
        while v.len() < NUM_LFS {
            v.push(LfVote {
                lf_id: v.len() as u8 + 1,
                vote: None,
            });
        }
        v
    }

    #[test]
    fn vote_examples() {
        use Archetype::*;
        let l = majority_vote(&votes(&[Some(Spike), Some(Spike), Some(Periodic)]));
        assert_eq!(l.archetype, Spike);
        assert!((l.confidence - 2.0 / 3.0).abs() < 1e-15);

        let l = majority_vote(&votes(&[Some(Periodic), Some(Spike)]));
        assert_eq!(l.archetype, Spike);
        assert_eq!(l.confidence, 0.5);

        let l = majority_vote(&votes(&[]));
        assert_eq!(l.archetype, Stationary);
        assert_eq!(l.confidence, 0.25);
    }

    #[test]
    fn parses_tags() {
        assert_eq!("ramp".parse::<Archetype>().unwrap(), Archetype::Ramp);
        assert!("BURSTY".parse::<Archetype>().is_err());
    }

    #[test]
    fn rectified_periodic_windows_label_periodic() {
        let mut spec = SyntheticSpec::new(Archetype::Periodic, 60 + 999 * 10, 100.0);
        spec.amplitude = 5.0;
        spec.period_minutes = Some(60.0);
        spec.noise_std = 5.0;
        spec.rng_seed = 21;
        let trace = generate_synthetic("p", &spec).unwrap();
        let windows = slide_windows(&trace, 60, 10).unwrap();
        assert_eq!(windows.len(), 1000);
        let rows = label_dataset(&windows, &LabelingThresholds::default());
        let periodic = class_distribution(&rows)[Archetype::Periodic.index()];
        assert!(periodic as f64 >= 0.9 * 1000.0, "periodic {periodic}");
        assert!(label_dataset(&[], &LabelingThresholds::default()).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vote_strategy() -> impl Strategy<Value = Vec<LfVote>> {
            proptest::collection::vec(proptest::option::of(0usize..4), NUM_LFS).prop_map(|v| {
                v.into_iter()
                    .enumerate()
                    .map(|(i, a)| LfVote {
                        lf_id: i as u8 + 1,
                        vote: a.map(|k| Archetype::ALL[k]),
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn vote_invariants(v in vote_strategy()) {
                let label = majority_vote(&v);
                let mut counts = [0usize; 4];
                for a in v.iter().filter_map(|x| x.vote) {
                    counts[a.index()] += 1;
                }
                let m: usize = counts.iter().sum();
                if m == 0 {
                    prop_assert_eq!(label.confidence, 0.25);
                } else {
                    let k = counts[label.archetype.index()];
                    prop_assert_eq!(label.confidence, k as f64 / m as f64);
                    let best = *counts.iter().max().unwrap();
                    prop_assert_eq!(k, best);
                    // Highest-precedence tied winner is chosen.
                    let first = counts.iter().position(|&c| c == best).unwrap();
                    prop_assert_eq!(label.archetype.index(), first);
                    if counts[0] == best {
                        prop_assert_eq!(label.archetype, Archetype::Spike);
                    }
                }
                prop_assert_eq!(majority_vote(&v), label);
            }
        }
    }
}
