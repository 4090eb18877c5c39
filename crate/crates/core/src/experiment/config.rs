use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::autoscaler::{AapaConfig, HpaConfig, PredictiveConfig, StrategyKind};
use crate::classifier::Hyperparams;
use crate::error::{Error, Result};
use crate::metrics::ReiWeights;
use crate::simulator::SimConfig;
use crate::trace::{validate_windowing, SyntheticSpec, DEFAULT_MIN_TOTAL_INVOCATIONS, DEFAULT_STRIDE, DEFAULT_WINDOW_LEN};
use crate::weaklabel::{Archetype, LabelingThresholds};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Base seed; trial `i` runs with `seed + i`.
    pub seed: u64,
    pub trials: usize,
    pub output_dir: PathBuf,
    pub window: WindowConfig,
    pub corpus: CorpusConfig,
    pub labeling: LabelingThresholds,
    pub classifier: ClassifierConfig,
    pub strategies: StrategiesConfig,
    pub simulation: SimConfig,
    pub rei: ReiConfig,
    pub scenarios: Vec<ScenarioConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub length: usize,
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            length: DEFAULT_WINDOW_LEN,
            stride: DEFAULT_STRIDE,
        }
    }
}

/// Traces used for labeling and training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// An invocation-count CSV; when set, the synthetic list is ignored.
    pub trace_csv: Option<PathBuf>,
    pub min_total_invocations: u64,
    pub synthetic: Vec<NamedSpec>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            trace_csv: None,
            min_total_invocations: DEFAULT_MIN_TOTAL_INVOCATIONS,
            synthetic: default_corpus(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSpec {
    pub function_id: String,
    #[serde(flatten)]
    pub spec: SyntheticSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub seed: u64,
    #[serde(flatten)]
    pub params: Hyperparams,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            params: Hyperparams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategiesConfig {
    pub enabled: Vec<StrategyKind>,
    /// Serialized model used by the archetype-aware strategy; defaults to
    /// `model.txt` in the output directory.
    pub model_path: Option<PathBuf>,
    pub hpa: HpaConfig,
    pub predictive: PredictiveConfig,
    pub aapa: AapaConfig,
}

impl Default for StrategiesConfig {
    fn default() -> Self {
        Self {
            enabled: StrategyKind::ALL.to_vec(),
            model_path: None,
            hpa: HpaConfig::default(),
            predictive: PredictiveConfig::default(),
            aapa: AapaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReiConfig {
    /// `default` or `stability-heavy`; overrides `weights` when set.
    pub preset: Option<String>,
    pub weights: ReiWeights,
    pub sensitivity_delta: f64,
    pub wilcoxon_alpha: f64,
}

impl Default for ReiConfig {
    fn default() -> Self {
        Self {
            preset: None,
            weights: ReiWeights::default(),
            sensitivity_delta: 0.05,
            wilcoxon_alpha: 0.05,
        }
    }
}

impl ReiConfig {
    pub fn resolved_weights(&self) -> Result<ReiWeights> {
        let w = match &self.preset {
            Some(name) => ReiWeights::preset(name)?,
            None => self.weights,
        };
        w.validate()?;
        Ok(w)
    }
}

/// One workload replayed by `simulate` and `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Published pod-minute ratio against HPA, reported next to ours.
    #[serde(default)]
    pub reference_ratio: Option<f64>,
    #[serde(default)]
    pub trace_csv: Option<PathBuf>,
    #[serde(default)]
    pub function_id: Option<String>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 42,
            trials: 5,
            output_dir: PathBuf::from("out"),
            window: WindowConfig::default(),
            corpus: CorpusConfig::default(),
            labeling: LabelingThresholds::default(),
            classifier: ClassifierConfig::default(),
            strategies: StrategiesConfig::default(),
            simulation: SimConfig::default(),
            rei: ReiConfig::default(),
            scenarios: default_scenarios(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::validation(format!("config: {e}")))
    }

    pub fn model_path(&self) -> PathBuf {
        self.strategies
            .model_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("model.txt"))
    }

    /// Checks everything that can be checked without touching the disk.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::validation(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.trials == 0 {
            return Err(Error::validation("trials must be at least 1"));
        }
        validate_windowing(self.window.length, self.window.stride)?;
        let mut ids = BTreeSet::new();
        for named in &self.corpus.synthetic {
            named.spec.validate(self.window.length)?;
            if !ids.insert(named.function_id.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate corpus function_id '{}'",
                    named.function_id
                )));
            }
            if named.function_id.is_empty() || named.function_id.contains(['/', '\\', ',']) {
                return Err(Error::validation(format!(
                    "function_id '{}' must be non-empty and free of '/', '\\' and ','",
                    named.function_id
                )));
            }
        }
        if self.corpus.trace_csv.is_none() && self.corpus.synthetic.is_empty() {
            return Err(Error::validation("corpus needs a trace_csv or synthetic specs"));
        }
        self.classifier.params.validate()?;
        if self.strategies.enabled.is_empty() {
            return Err(Error::validation("no strategies enabled"));
        }
        self.strategies.hpa.validate()?;
        self.strategies.predictive.validate()?;
        self.strategies.aapa.validate()?;
        self.simulation.validate()?;
        self.rei.resolved_weights()?;
        if !(self.rei.sensitivity_delta > 0.0 && self.rei.sensitivity_delta < 1.0) {
            return Err(Error::validation("sensitivity_delta must lie in (0, 1)"));
        }
        if !(self.rei.wilcoxon_alpha > 0.0 && self.rei.wilcoxon_alpha < 1.0) {
            return Err(Error::validation("wilcoxon_alpha must lie in (0, 1)"));
        }
        let mut names = BTreeSet::new();
        for s in &self.scenarios {
            if !names.insert(s.name.as_str()) {
                return Err(Error::validation(format!("duplicate scenario '{}'", s.name)));
            }
            if s.name.is_empty() || s.name.contains(['/', '\\', ',']) {
                return Err(Error::validation(format!("bad scenario name '{}'", s.name)));
            }
            match (&s.synthetic, &s.trace_csv) {
                (Some(spec), None) => spec.validate(1)?,
                (None, Some(_)) => {}
                _ => {
                    return Err(Error::validation(format!(
                        "scenario '{}' needs exactly one of synthetic or trace_csv",
                        s.name
                    )))
                }
            }
        }
        Ok(())
    }

    /// Enabled strategies in canonical order, without duplicates.
    pub fn strategy_order(&self) -> Vec<StrategyKind> {
        let set: BTreeSet<StrategyKind> = self.strategies.enabled.iter().copied().collect();
        set.into_iter().collect()
    }
}

/// Ten functions per archetype, each 2550 minutes long (250 windows at the
/// default window and stride).
pub fn default_corpus() -> Vec<NamedSpec> {
    const MINUTES: usize = 2550;
    let mut out = Vec::new();
    for i in 0..10u64 {
        let f = i as f64;
        let mut spike = SyntheticSpec::new(Archetype::Spike, MINUTES, 20.0 + 4.0 * f);
        spike.amplitude = 40.0 + 4.0 * f;
        spike.noise_std = 0.1 * spike.base_rate;
        spike.rng_seed = 1000 + i;
        out.push(NamedSpec {
            function_id: format!("spike-{i:02}"),
            spec: spike,
        });

        let mut periodic = SyntheticSpec::new(Archetype::Periodic, MINUTES, 200.0 + 50.0 * f);
        periodic.amplitude = 0.6 + 0.04 * f;
        periodic.period_minutes = Some(if i % 2 == 0 { 60.0 } else { 30.0 });
        periodic.noise_std = 0.05 * periodic.base_rate;
        periodic.rng_seed = 2000 + i;
        out.push(NamedSpec {
            function_id: format!("periodic-{i:02}"),
            spec: periodic,
        });

        let mut ramp = SyntheticSpec::new(Archetype::Ramp, MINUTES, 100.0 + 20.0 * f);
        ramp.slope = 2.0 + 0.3 * f;
        ramp.noise_std = ramp.slope / 3.0;
        ramp.rng_seed = 3000 + i;
        out.push(NamedSpec {
            function_id: format!("ramp-{i:02}"),
            spec: ramp,
        });

        let mut stationary = SyntheticSpec::new(Archetype::Stationary, MINUTES, 300.0 + 100.0 * f);
        stationary.noise_std = (0.1 + 0.01 * f) * stationary.base_rate;
        stationary.rng_seed = 4000 + i;
        out.push(NamedSpec {
            function_id: format!("stationary-{i:02}"),
            spec: stationary,
        });
    }
    out
}

/// One-day workloads, one per archetype.
pub fn default_scenarios() -> Vec<ScenarioConfig> {
    const DAY: usize = 1440;
    let mut spike = SyntheticSpec::new(Archetype::Spike, DAY, 60.0);
    spike.amplitude = 40.0;
    spike.noise_std = 6.0;
    spike.rng_seed = 11;

    let mut periodic = SyntheticSpec::new(Archetype::Periodic, DAY, 2400.0);
    periodic.amplitude = 0.7;
    periodic.period_minutes = Some(60.0);
    periodic.noise_std = 120.0;
    periodic.rng_seed = 12;

    let mut ramp = SyntheticSpec::new(Archetype::Ramp, DAY, 300.0);
    ramp.slope = 3.0;
    ramp.noise_std = 1.0;
    ramp.rng_seed = 13;

    let mut stationary = SyntheticSpec::new(Archetype::Stationary, DAY, 2400.0);
    stationary.noise_std = 600.0;
    stationary.rng_seed = 14;

    let scenario = |name: &str, spec: SyntheticSpec, reference: f64| ScenarioConfig {
        name: name.to_string(),
        reference_ratio: Some(reference),
        trace_csv: None,
        function_id: None,
        synthetic: Some(spec),
    };
    vec![
        scenario("spike", spike, 7.7),
        scenario("periodic", periodic, 2.0),
        scenario("ramp", ramp, 2.0),
        scenario("stationary", stationary, 2.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str("trials = 2\n[simulation]\nmax_replicas = 50\n").unwrap();
        assert_eq!(cfg.trials, 2);
        assert_eq!(cfg.simulation.max_replicas, 50);
        assert_eq!(cfg.simulation.init_replicas, 2);
        assert_eq!(cfg.scenarios.len(), 4);
    }

    #[test]
    fn bad_settings_fail_validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.window.stride = 61;
        assert!(cfg.validate().unwrap_err().is_validation());

        let mut cfg = ExperimentConfig::default();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.rei.weights = ReiWeights {
            alpha: 0.5,
            beta: 0.3,
            gamma: 0.3,
        };
        assert!(cfg.validate().is_err());

        assert!(ExperimentConfig::from_toml_str("unknown_key = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("version = 2").unwrap().validate().is_err());
    }

    #[test]
    fn corpus_has_ten_functions_per_class() {
        let corpus = default_corpus();
        for a in Archetype::ALL {
            assert_eq!(corpus.iter().filter(|n| n.spec.archetype == a).count(), 10);
        }
    }
}
