//! Wires the pipeline into the generate / label / train / features /
//! simulate / compare commands. Each command writes its artifacts under the
//! configured output directory and returns a short human-readable summary.

mod config;
mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

pub use config::{
    default_corpus, default_scenarios, ClassifierConfig, CorpusConfig, ExperimentConfig, NamedSpec, ReiConfig,
    ScenarioConfig, StrategiesConfig, WindowConfig, CONFIG_VERSION,
};
pub use report::{ComparisonReport, RunResult, ScenarioSummary, StrategySummary, WilcoxonRow};

use crate::autoscaler::{
    AapaStrategy, ArchetypeSource, HpaStrategy, PredictiveStrategy, ScalingStrategy, StrategyKind,
};
use crate::classifier::{train_pipeline, ModelBundle, TrainingOutcome};
use crate::error::{Error, Result};
use crate::features::{feature_names, FeatureVector};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::simulator::{run_simulation, SimConfig, SimulationLog};
use crate::trace::{
    generate_synthetic, load_trace_csv, slide_windows, write_trace_csv, LoadOptions, Window, WorkloadTrace,
};
use crate::weaklabel::{class_distribution, label_dataset, Archetype, LabeledRow, WeakLabel};

/// Seed of trial `trial`.
pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    cfg.seed.wrapping_add(trial as u64)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Traces of the labeling corpus.
pub fn corpus_traces(cfg: &ExperimentConfig) -> Result<Vec<WorkloadTrace>> {
    match &cfg.corpus.trace_csv {
        Some(path) => load_trace_csv(
            path,
            &LoadOptions {
                min_total_invocations: cfg.corpus.min_total_invocations,
            },
        ),
        None => cfg
            .corpus
            .synthetic
            .iter()
            .map(|n| generate_synthetic(&n.function_id, &n.spec))
            .collect(),
    }
}

pub fn corpus_windows(cfg: &ExperimentConfig) -> Result<Vec<Window>> {
    let mut windows = Vec::new();
    for t in corpus_traces(cfg)? {
        windows.extend(slide_windows(&t, cfg.window.length, cfg.window.stride)?);
    }
    Ok(windows)
}

/// Weak labels for every corpus window.
pub fn label_corpus(cfg: &ExperimentConfig) -> Result<Vec<LabeledRow>> {
    let rows = label_dataset(&corpus_windows(cfg)?, &cfg.labeling);
    if rows.is_empty() {
        return Err(Error::validation(
            "the corpus produced no labeled windows (traces shorter than the window?)",
        ));
    }
    Ok(rows)
}

/// The trace a scenario replays in a given trial. Synthetic scenarios are
/// re-drawn per trial; CSV scenarios replay the same trace every time.
pub fn scenario_trace(cfg: &ExperimentConfig, scenario: &ScenarioConfig, trial: usize) -> Result<WorkloadTrace> {
    if let Some(spec) = &scenario.synthetic {
        let mut spec = spec.clone();
        spec.rng_seed = spec.rng_seed.wrapping_add(trial_seed(cfg, trial));
        return generate_synthetic(&scenario.name, &spec);
    }
    let path = scenario
        .trace_csv
        .as_ref()
        .ok_or_else(|| Error::validation(format!("scenario '{}' has no trace", scenario.name)))?;
    let traces = load_trace_csv(path, &LoadOptions { min_total_invocations: 0 })?;
    let found = match &scenario.function_id {
        Some(id) => traces.into_iter().find(|t| &t.function_id == id),
        None => traces.into_iter().next(),
    };
    found.ok_or_else(|| {
        Error::validation(format!(
            "scenario '{}': function not found in {}",
            scenario.name,
            path.display()
        ))
    })
}

const LABELED_FIXED: [&str; 4] = ["function_id", "start_minute", "label", "confidence"];

pub fn write_labeled_csv(path: &Path, rows: &[LabeledRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = LABELED_FIXED.to_vec();
    header.extend(feature_names());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.function_id.clone(),
            r.start_minute.to_string(),
            r.label.archetype.to_string(),
            r.label.confidence.to_string(),
        ];
        rec.extend(r.features.to_array().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads rows written by [`write_labeled_csv`]. Individual votes are not
/// stored, so the rows come back with an empty vote list.
pub fn read_labeled_csv(path: &Path) -> Result<Vec<LabeledRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let names = feature_names();
    let expected = LABELED_FIXED.iter().chain(names.iter());
    if header.len() != LABELED_FIXED.len() + names.len() || !header.iter().zip(expected).all(|(a, b)| a == *b) {
        return Err(Error::validation(format!(
            "{}: header does not match the labeled-window layout",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|e| bad(format!("column {}: {e}", header[j].to_string())))
        };
        let start_minute = rec[1].parse::<usize>().map_err(|e| bad(format!("start_minute: {e}")))?;
        let archetype: Archetype = rec[2].parse().map_err(|e: Error| bad(e.to_string()))?;
        let confidence = num(3)?;
        let values = (LABELED_FIXED.len()..rec.len()).map(num).collect::<Result<Vec<_>>>()?;
        rows.push(LabeledRow {
            function_id: rec[0].to_string(),
            start_minute,
            features: FeatureVector::from_slice(&values)?,
            label: WeakLabel {
                archetype,
                confidence,
                votes: Vec::new(),
            },
        });
    }
    Ok(rows)
}

pub fn build_strategy(
    kind: StrategyKind,
    cfg: &ExperimentConfig,
    model: Option<&Arc<ModelBundle>>,
) -> Result<Box<dyn ScalingStrategy>> {
    let bounds = cfg.simulation.bounds();
    Ok(match kind {
        StrategyKind::Hpa => Box::new(HpaStrategy::new(cfg.strategies.hpa, bounds)),
        StrategyKind::Predictive => Box::new(PredictiveStrategy::new(cfg.strategies.predictive, bounds)),
        StrategyKind::Aapa => {
            let model = model.ok_or_else(|| {
                Error::validation("the aapa strategy needs a trained model; run `train` first")
            })?;
            Box::new(AapaStrategy::new(
                cfg.strategies.aapa,
                bounds,
                ArchetypeSource::Model(Arc::clone(model)),
            ))
        }
    })
}

fn sim_config(cfg: &ExperimentConfig, trial: usize) -> SimConfig {
    SimConfig {
        rng_seed: trial_seed(cfg, trial),
        ..cfg.simulation
    }
}

/// Runs one strategy over one scenario trial.
pub fn simulate_one(
    cfg: &ExperimentConfig,
    scenario: &ScenarioConfig,
    kind: StrategyKind,
    trial: usize,
    model: Option<&Arc<ModelBundle>>,
) -> Result<SimulationLog> {
    let trace = scenario_trace(cfg, scenario, trial)?;
    let mut strategy = build_strategy(kind, cfg, model)?;
    run_simulation(&trace, strategy.as_mut(), &sim_config(cfg, trial))
}

fn check_model(cfg: &ExperimentConfig, model: Option<&Arc<ModelBundle>>) -> Result<()> {
    if cfg.strategy_order().contains(&StrategyKind::Aapa) && model.is_none() {
        return Err(Error::validation(
            "the aapa strategy needs a trained model; run `train` first",
        ));
    }
    Ok(())
}

/// Every (scenario, strategy, trial) run, scored. Runs execute in parallel;
/// results come back in a fixed order so the report is reproducible.
pub fn run_comparison(cfg: &ExperimentConfig, model: Option<Arc<ModelBundle>>) -> Result<ComparisonReport> {
    cfg.validate()?;
    check_model(cfg, model.as_ref())?;
    if cfg.scenarios.is_empty() {
        return Err(Error::validation("no scenarios configured"));
    }
    let weights = cfg.rei.resolved_weights()?;
    let mut jobs = Vec::new();
    for (si, _) in cfg.scenarios.iter().enumerate() {
        for kind in cfg.strategy_order() {
            for trial in 0..cfg.trials {
                jobs.push((si, kind, trial));
            }
        }
    }
    let results: Vec<Result<MetricsReport>> = jobs
        .par_iter()
        .map(|&(si, kind, trial)| {
            let log = simulate_one(cfg, &cfg.scenarios[si], kind, trial, model.as_ref())?;
            Ok(compute_metrics(&log))
        })
        .collect();
    let mut runs = Vec::with_capacity(jobs.len());
    for ((si, kind, trial), metrics) in jobs.into_iter().zip(results) {
        runs.push((cfg.scenarios[si].name.clone(), kind, trial, metrics?));
    }
    ComparisonReport::build(cfg, &weights, runs)
}

pub fn load_model(cfg: &ExperimentConfig) -> Result<Option<Arc<ModelBundle>>> {
    let path = cfg.model_path();
    if !cfg.strategy_order().contains(&StrategyKind::Aapa) {
        return Ok(None);
    }
    if !path.exists() {
        return Err(Error::validation(format!(
            "model {} not found; run `train` first",
            path.display()
        )));
    }
    Ok(Some(Arc::new(ModelBundle::load(&path)?)))
}

/// Writes one CSV per corpus spec and per scenario, plus a manifest with the
/// ground-truth archetype of each.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    if cfg.corpus.synthetic.is_empty() && cfg.scenarios.iter().all(|s| s.synthetic.is_none()) {
        return Err(Error::validation("no synthetic specs to generate"));
    }
    let dir = cfg.output_dir.join("traces");
    create_dir(&dir)?;
    let mut manifest = String::from("file,function_id,kind,archetype,minutes,total_invocations\n");
    let mut n = 0;
    let mut emit = |file: String, trace: &WorkloadTrace, kind: &str, archetype: Archetype| -> Result<()> {
        write_trace_csv(&dir.join(&file), std::slice::from_ref(trace))?;
        let _ = writeln!(
            manifest,
            "{file},{},{kind},{archetype},{},{}",
            trace.function_id,
            trace.len(),
            trace.total()
        );
        n += 1;
        Ok(())
    };
    for named in &cfg.corpus.synthetic {
        let trace = generate_synthetic(&named.function_id, &named.spec)?;
        emit(format!("{}.csv", named.function_id), &trace, "corpus", named.spec.archetype)?;
    }
    for s in &cfg.scenarios {
        if let Some(spec) = &s.synthetic {
            let trace = scenario_trace(cfg, s, 0)?;
            emit(format!("scenario-{}.csv", s.name), &trace, "scenario", spec.archetype)?;
        }
    }
    write_file(&dir.join("manifest.csv"), &manifest)?;
    Ok(format!("wrote {n} traces and manifest.csv to {}\n", dir.display()))
}

fn distribution_text(rows: &[LabeledRow]) -> String {
    let dist = class_distribution(rows);
    let mut out = String::new();
    for a in Archetype::ALL {
        let n = dist[a.index()];
        let _ = writeln!(
            out,
            "{:<11} {:>7} {:>6.1}%",
            a.as_str(),
            n,
            100.0 * n as f64 / rows.len().max(1) as f64
        );
    }
    out
}

pub fn cmd_label(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let rows = label_corpus(cfg)?;
    let path = cfg.output_dir.join("labeled.csv");
    write_labeled_csv(&path, &rows)?;
    let dist = distribution_text(&rows);
    write_file(&cfg.output_dir.join("class_distribution.txt"), &dist)?;
    Ok(format!("labeled {} windows -> {}\n{dist}", rows.len(), path.display()))
}

pub fn cmd_features(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("features.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["function_id", "start_minute"];
    header.extend(feature_names());
    w.write_record(&header)?;
    let mut n = 0;
    for win in corpus_windows(cfg)? {
        match crate::features::compute_features(&win.values) {
            Ok(fv) => {
                let mut rec = vec![win.function_id.clone(), win.start_minute.to_string()];
                rec.extend(fv.to_array().iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
                n += 1;
            }
            Err(e) => log::warn!("skipping window {}@{}: {e}", win.function_id, win.start_minute),
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(format!("wrote {n} feature vectors to {}\n", path.display()))
}

/// Trains on `labeled.csv` when present, otherwise labels the corpus first.
pub fn train_from_config(cfg: &ExperimentConfig) -> Result<TrainingOutcome> {
    let labeled = cfg.output_dir.join("labeled.csv");
    let rows = if labeled.exists() {
        read_labeled_csv(&labeled)?
    } else {
        label_corpus(cfg)?
    };
    train_pipeline(&rows, &cfg.classifier.params, cfg.classifier.seed)
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let outcome = train_from_config(cfg)?;
    let model_path = cfg.model_path();
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    outcome.bundle.save(&model_path)?;
    let ev = &outcome.evaluation;
    write_file(&cfg.output_dir.join("confusion.csv"), ev.confusion_csv())?;
    let mut text = format!(
        "train/validation/test windows: {}/{}/{}\ntest accuracy: {:.4}\n",
        outcome.split_sizes[0], outcome.split_sizes[1], outcome.split_sizes[2], ev.accuracy
    );
    let _ = writeln!(text, "{:<11} {:>9} {:>9}", "class", "precision", "recall");
    for a in Archetype::ALL {
        let _ = writeln!(
            text,
            "{:<11} {:>9.4} {:>9.4}",
            a.as_str(),
            ev.precision[a.index()],
            ev.recall[a.index()]
        );
    }
    write_file(&cfg.output_dir.join("evaluation.txt"), &text)?;
    Ok(format!("{text}model -> {}\n", model_path.display()))
}

/// Runs trial 0 of every scenario and strategy and writes the full logs.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let model = load_model(cfg)?;
    check_model(cfg, model.as_ref())?;
    let mut text = String::new();
    for s in &cfg.scenarios {
        for kind in cfg.strategy_order() {
            let log = simulate_one(cfg, s, kind, 0, model.as_ref())?;
            let dir: PathBuf = cfg.output_dir.join("simulate").join(&s.name).join(kind.as_str());
            create_dir(&dir)?;
            log.write_csvs(&dir)?;
            let m = compute_metrics(&log);
            let _ = writeln!(
                text,
                "{:<12} {:<11} violations {:>7.4}  pod-min {:>9.1}  pod starts {:>5}  events {:>4}",
                s.name, kind, m.slo_violation_rate, m.replica_minutes, m.cold_starts, m.scaling_events
            );
        }
    }
    Ok(text)
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let model = load_model(cfg)?;
    let report = run_comparison(cfg, model)?;
    let dir = cfg.output_dir.join("compare");
    create_dir(&dir)?;
    report.write(&dir)?;
    Ok(report.render_text())
}
