//! Archetype classifier: boosted trees plus beta calibration.

mod calibration;
mod gbdt;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use calibration::{fit_beta_calibrator, fit_beta_map, BetaCalibrator, BetaMap, PROBA_CLAMP};
pub use gbdt::{softmax, Hyperparams};

use crate::error::{Error, Result};
use crate::features::{feature_names, FeatureVector, NUM_FEATURES};
use crate::weaklabel::{Archetype, LabeledRow};
use gbdt::{Booster, Node, Tree, TrainingSet};

const FORMAT_HEADER: &str = "archscale-model v1";

/// Multiclass tree ensemble bound to the canonical feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsembleModel {
    pub feature_names: Vec<String>,
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub max_depth: usize,
    booster: Booster,
}

/// Trains on feature vectors and their archetype labels.
pub fn train(
    features: &[FeatureVector],
    labels: &[Archetype],
    hp: &Hyperparams,
    seed: u64,
) -> Result<TreeEnsembleModel> {
    if features.len() != labels.len() {
        return Err(Error::Training("features and labels differ in length".into()));
    }
    if features.len() < 100 {
        return Err(Error::Training(format!(
            "need at least 100 training rows, got {}",
            features.len()
        )));
    }
    let rows: Vec<Vec<f64>> = features.iter().map(|f| f.to_array().to_vec()).collect();
    let y: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    let booster = gbdt::fit(
        &TrainingSet {
            rows: &rows,
            labels: &y,
            n_classes: Archetype::COUNT,
        },
        hp,
        seed,
    )?;
    Ok(TreeEnsembleModel {
        feature_names: feature_names().iter().map(|s| s.to_string()).collect(),
        learning_rate: hp.learning_rate,
        n_rounds: hp.n_rounds,
        max_depth: hp.max_depth,
        booster,
    })
}

/// Convenience wrapper over [`train`] for weakly labeled rows.
pub fn train_on_rows(rows: &[LabeledRow], hp: &Hyperparams, seed: u64) -> Result<TreeEnsembleModel> {
    let (x, y) = split_rows(rows);
    train(&x, &y, hp, seed)
}

fn split_rows(rows: &[LabeledRow]) -> (Vec<FeatureVector>, Vec<Archetype>) {
    rows.iter().map(|r| (r.features, r.label.archetype)).unzip()
}

fn argmax(p: &[f64; Archetype::COUNT]) -> Archetype {
    let mut best = 0;
    for i in 1..Archetype::COUNT {
        if p[i] > p[best] {
            best = i;
        }
    }
    Archetype::ALL[best]
}

impl TreeEnsembleModel {
    pub fn predict_proba(&self, fv: &FeatureVector) -> [f64; Archetype::COUNT] {
        self.proba_unchecked(&fv.to_array())
    }

    /// Scores a raw feature slice; it must have exactly 37 values.
    pub fn predict_proba_slice(&self, values: &[f64]) -> Result<[f64; Archetype::COUNT]> {
        if values.len() != NUM_FEATURES {
            return Err(Error::validation(format!(
                "expected {NUM_FEATURES} features, got {}",
                values.len()
            )));
        }
        Ok(self.proba_unchecked(values))
    }

    /// Scores a slice whose column order is given by `names`, which must match
    /// the order the model was trained with.
    pub fn predict_proba_named(&self, names: &[&str], values: &[f64]) -> Result<[f64; Archetype::COUNT]> {
        if names.len() != self.feature_names.len()
            || names.iter().zip(&self.feature_names).any(|(a, b)| *a != b)
        {
            return Err(Error::validation(
                "feature columns do not match the model's binding",
            ));
        }
        self.predict_proba_slice(values)
    }

    fn proba_unchecked(&self, values: &[f64]) -> [f64; Archetype::COUNT] {
        let p = self.booster.predict_proba(values);
        let mut out = [0.0; Archetype::COUNT];
        out.copy_from_slice(&p);
        out
    }

    pub fn n_trees(&self) -> usize {
        self.booster.trees.iter().map(Vec::len).sum()
    }
}

/// Classifier output for one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub archetype: Archetype,
    pub raw_proba: [f64; Archetype::COUNT],
    pub confidence: f64,
}

impl Prediction {
    pub fn from_proba(raw_proba: [f64; Archetype::COUNT], calibrator: &BetaCalibrator) -> Self {
        let archetype = argmax(&raw_proba);
        let confidence = calibrator
            .calibrate(archetype, raw_proba[archetype.index()])
            .clamp(0.0, 1.0);
        Self {
            archetype,
            raw_proba,
            confidence,
        }
    }
}

pub fn predict(model: &TreeEnsembleModel, calibrator: &BetaCalibrator, fv: &FeatureVector) -> Prediction {
    Prediction::from_proba(model.predict_proba(fv), calibrator)
}

/// Test-set scores. Confusion rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub n: usize,
    pub accuracy: f64,
    pub precision: [f64; Archetype::COUNT],
    pub recall: [f64; Archetype::COUNT],
    pub confusion: [[usize; Archetype::COUNT]; Archetype::COUNT],
}

/// Scores predictions against labels. Precision or recall of a class with no
/// predicted or true members is reported as 0.
pub fn evaluate(model: &TreeEnsembleModel, features: &[FeatureVector], labels: &[Archetype]) -> Evaluation {
    let predicted: Vec<Archetype> = features
        .iter()
        .map(|f| argmax(&model.predict_proba(f)))
        .collect();
    evaluate_predictions(&predicted, labels)
}

pub fn evaluate_predictions(predicted: &[Archetype], truth: &[Archetype]) -> Evaluation {
    let mut confusion = [[0usize; Archetype::COUNT]; Archetype::COUNT];
    for (p, t) in predicted.iter().zip(truth) {
        confusion[t.index()][p.index()] += 1;
    }
    let n = predicted.len().min(truth.len());
    let correct: usize = (0..Archetype::COUNT).map(|i| confusion[i][i]).sum();
    let mut precision = [0.0; Archetype::COUNT];
    let mut recall = [0.0; Archetype::COUNT];
    for k in 0..Archetype::COUNT {
        let col: usize = (0..Archetype::COUNT).map(|t| confusion[t][k]).sum();
        let row: usize = confusion[k].iter().sum();
        if col > 0 {
            precision[k] = confusion[k][k] as f64 / col as f64;
        }
        if row > 0 {
            recall[k] = confusion[k][k] as f64 / row as f64;
        }
    }
    Evaluation {
        n,
        accuracy: if n > 0 { correct as f64 / n as f64 } else { 0.0 },
        precision,
        recall,
        confusion,
    }
}

impl Evaluation {
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for a in Archetype::ALL {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
        for t in Archetype::ALL {
            out.push_str(t.as_str());
            for p in Archetype::ALL {
                let _ = write!(out, ",{}", self.confusion[t.index()][p.index()]);
            }
            out.push('\n');
        }
        out
    }
}

/// Train / validation / test slices of a labeled dataset.
#[derive(Debug, Clone, Default)]
pub struct TemporalSplit {
    pub train: Vec<LabeledRow>,
    pub validation: Vec<LabeledRow>,
    pub test: Vec<LabeledRow>,
}

/// Splits rows by `start_minute` into 9/14, 2/14 and 3/14 of the covered span.
pub fn temporal_split(rows: &[LabeledRow]) -> TemporalSplit {
    let mut split = TemporalSplit::default();
    let Some(lo) = rows.iter().map(|r| r.start_minute).min() else {
        return split;
    };
    let hi = rows.iter().map(|r| r.start_minute).max().unwrap_or(lo);
    let span = (hi - lo + 1) as f64;
    let train_end = lo as f64 + span * 9.0 / 14.0;
    let val_end = lo as f64 + span * 11.0 / 14.0;
    for r in rows {
        let s = r.start_minute as f64;
        if s < train_end {
            split.train.push(r.clone());
        } else if s < val_end {
            split.validation.push(r.clone());
        } else {
            split.test.push(r.clone());
        }
    }
    split
}

/// Outcome of the full train / calibrate / evaluate pass.
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub bundle: ModelBundle,
    pub evaluation: Evaluation,
    pub split_sizes: [usize; 3],
}

/// Trains on the first temporal slice, calibrates on the second and scores
/// the third.
pub fn train_pipeline(rows: &[LabeledRow], hp: &Hyperparams, seed: u64) -> Result<TrainingOutcome> {
    let split = temporal_split(rows);
    let model = train_on_rows(&split.train, hp, seed)?;
    let (vx, vy) = split_rows(&split.validation);
    let val_proba: Vec<[f64; 4]> = vx.iter().map(|f| model.predict_proba(f)).collect();
    let calibrator = fit_beta_calibrator(&val_proba, &vy)?;
    let (tx, ty) = split_rows(&split.test);
    let evaluation = evaluate(&model, &tx, &ty);
    Ok(TrainingOutcome {
        bundle: ModelBundle { model, calibrator },
        evaluation,
        split_sizes: [split.train.len(), split.validation.len(), split.test.len()],
    })
}

/// A model together with its calibrator; the unit that is saved and loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: TreeEnsembleModel,
    pub calibrator: BetaCalibrator,
}

impl ModelBundle {
    pub fn predict(&self, fv: &FeatureVector) -> Prediction {
        predict(&self.model, &self.calibrator, fv)
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let b = &m.booster;
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_HEADER}");
        let _ = writeln!(
            out,
            "classes {}",
            Archetype::ALL.map(|a| a.as_str()).join(" ")
        );
        let _ = writeln!(out, "features {}", m.feature_names.len());
        for name in &m.feature_names {
            let _ = writeln!(out, "feature {name}");
        }
        let _ = writeln!(out, "learning_rate {}", m.learning_rate);
        let _ = writeln!(out, "n_rounds {}", m.n_rounds);
        let _ = writeln!(out, "max_depth {}", m.max_depth);
        let _ = writeln!(out, "init {}", join_f64(&b.init_scores));
        let _ = writeln!(out, "rounds {}", b.trees.len());
        for (r, round) in b.trees.iter().enumerate() {
            for (k, tree) in round.iter().enumerate() {
                let _ = writeln!(out, "tree {r} {k} {}", tree.nodes.len());
                for node in &tree.nodes {
                    match *node {
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            let _ = writeln!(out, "split {feature} {threshold} {left} {right}");
                        }
                        Node::Leaf { value } => {
                            let _ = writeln!(out, "leaf {value}");
                        }
                    }
                }
            }
        }
        for a in Archetype::ALL {
            let map = self.calibrator.maps[a.index()];
            let _ = writeln!(out, "beta {a} {} {} {}", map.a, map.b, map.c);
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Parser::new(text).bundle()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line_no: usize,
}

fn fmt_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::ModelFormat(format!("line {line}: {msg}"))
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line_no: 0,
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        let (i, line) = self
            .lines
            .next()
            .ok_or_else(|| fmt_err(self.line_no + 1, "unexpected end of file"))?;
        self.line_no = i + 1;
        Ok(line)
    }

    /// Reads a line starting with `key` and returns the remaining tokens.
    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some(k) if k == key => Ok(tokens.collect()),
            other => Err(fmt_err(
                self.line_no,
                format!("expected '{key}', found '{}'", other.unwrap_or("")),
            )),
        }
    }

    fn one<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let t = self.keyed(key)?;
        if t.len() != 1 {
            return Err(fmt_err(self.line_no, format!("'{key}' takes one value")));
        }
        self.parse(t[0])
    }

    fn parse<T: std::str::FromStr>(&self, token: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| fmt_err(self.line_no, format!("bad value '{token}'")))
    }

    fn bundle(mut self) -> Result<ModelBundle> {
        if self.next_line()?.trim() != FORMAT_HEADER {
            return Err(fmt_err(1, format!("missing '{FORMAT_HEADER}' header")));
        }
        let classes = self.keyed("classes")?;
        let expected = Archetype::ALL.map(|a| a.as_str());
        if classes != expected {
            return Err(fmt_err(self.line_no, "unexpected class list"));
        }
        let n_features: usize = self.one("features")?;
        let mut names = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            let t = self.keyed("feature")?;
            if t.len() != 1 {
                return Err(fmt_err(self.line_no, "feature name missing"));
            }
            names.push(t[0].to_string());
        }
        if names.iter().map(String::as_str).ne(feature_names().iter().copied()) {
            return Err(fmt_err(
                self.line_no,
                "feature binding differs from the canonical feature order",
            ));
        }
        let learning_rate: f64 = self.one("learning_rate")?;
        let n_rounds: usize = self.one("n_rounds")?;
        let max_depth: usize = self.one("max_depth")?;
        let init_tokens = self.keyed("init")?;
        let init_scores = init_tokens
            .iter()
            .map(|t| self.parse::<f64>(t))
            .collect::<Result<Vec<_>>>()?;
        if init_scores.len() != Archetype::COUNT {
            return Err(fmt_err(self.line_no, "init needs one score per class"));
        }
        let rounds: usize = self.one("rounds")?;
        let mut trees = Vec::with_capacity(rounds);
        for r in 0..rounds {
            let mut round = Vec::with_capacity(Archetype::COUNT);
            for k in 0..Archetype::COUNT {
                let header = self.keyed("tree")?;
                if header.len() != 3 {
                    return Err(fmt_err(self.line_no, "tree header needs round, class, size"));
                }
                let (hr, hk): (usize, usize) = (self.parse(header[0])?, self.parse(header[1])?);
                if hr != r || hk != k {
                    return Err(fmt_err(self.line_no, "trees out of order"));
                }
                let size: usize = self.parse(header[2])?;
                round.push(self.tree(size, n_features)?);
            }
            trees.push(round);
        }
        let mut maps = [BetaMap::IDENTITY; Archetype::COUNT];
        for a in Archetype::ALL {
            let t = self.keyed("beta")?;
            if t.len() != 4 || t[0] != a.as_str() {
                return Err(fmt_err(self.line_no, format!("expected beta parameters for {a}")));
            }
            let map = BetaMap {
                a: self.parse(t[1])?,
                b: self.parse(t[2])?,
                c: self.parse(t[3])?,
            };
            if !(map.a >= 0.0 && map.b >= 0.0 && map.c.is_finite()) {
                return Err(fmt_err(self.line_no, "beta parameters out of range"));
            }
            maps[a.index()] = map;
        }
        self.keyed("end")?;
        Ok(ModelBundle {
            model: TreeEnsembleModel {
                feature_names: names,
                learning_rate,
                n_rounds,
                max_depth,
                booster: Booster {
                    n_features,
                    n_classes: Archetype::COUNT,
                    init_scores,
                    trees,
                },
            },
            calibrator: BetaCalibrator { maps },
        })
    }

    fn tree(&mut self, size: usize, n_features: usize) -> Result<Tree> {
        if size == 0 {
            return Err(fmt_err(self.line_no, "empty tree"));
        }
        let mut nodes = Vec::with_capacity(size);
        for idx in 0..size {
            let line = self.next_line()?;
            let t: Vec<&str> = line.split_whitespace().collect();
            let node = match t.as_slice() {
                ["leaf", v] => Node::Leaf {
                    value: self.parse(v)?,
                },
                ["split", f, thr, l, r] => {
                    let feature: usize = self.parse(f)?;
                    let left: usize = self.parse(l)?;
                    let right: usize = self.parse(r)?;
                    // children always follow their parent, which rules out cycles
                    if feature >= n_features || left <= idx || right <= idx || left >= size || right >= size {
                        return Err(fmt_err(self.line_no, "split references out of range"));
                    }
                    Node::Split {
                        feature,
                        threshold: self.parse(thr)?,
                        left,
                        right,
                    }
                }
                _ => return Err(fmt_err(self.line_no, "expected 'leaf' or 'split' node")),
            };
            nodes.push(node);
        }
        Ok(Tree { nodes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{generate_synthetic, slide_windows, SyntheticSpec};
    use crate::weaklabel::{label_dataset, LabelingThresholds};

    fn small_corpus() -> Vec<LabeledRow> {
        let mut windows = Vec::new();
        for (i, arch) in Archetype::ALL.into_iter().enumerate() {
            let mut spec = SyntheticSpec::new(arch, 600, 50.0);
            spec.rng_seed = 10 + i as u64;
            match arch {
                Archetype::Spike => {
                    spec.amplitude = 60.0;
                    spec.noise_std = 2.0;
                }
                Archetype::Periodic => {
                    spec.amplitude = 0.8;
                    spec.period_minutes = Some(30.0);
                    spec.noise_std = 2.0;
                }
                Archetype::Ramp => {
                    spec.slope = 3.0;
                    spec.noise_std = 1.0;
                }
                Archetype::Stationary => spec.noise_std = 8.0,
            }
            let trace = generate_synthetic(arch.as_str(), &spec).unwrap();
            windows.extend(slide_windows(&trace, 60, 10).unwrap());
        }
        label_dataset(&windows, &LabelingThresholds::default())
    }

    fn quick_hp() -> Hyperparams {
        Hyperparams {
            n_rounds: 20,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn probabilities_lie_on_the_simplex() {
        let rows = small_corpus();
        let model = train_on_rows(&rows, &quick_hp(), 3).unwrap();
        for r in &rows {
            let p = model.predict_proba(&r.features);
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn training_fits_rule_labels() {
        let rows = small_corpus();
        let model = train_on_rows(&rows, &quick_hp(), 3).unwrap();
        let (x, y) = split_rows(&rows);
        let eval = evaluate(&model, &x, &y);
        assert!(eval.accuracy > 0.97, "accuracy {}", eval.accuracy);
    }

    #[test]
    fn wrong_dimension_and_permuted_columns_are_rejected() {
        let rows = small_corpus();
        let model = train_on_rows(&rows, &quick_hp(), 3).unwrap();
        assert!(model.predict_proba_slice(&[0.0; 36]).unwrap_err().is_validation());
        let mut names: Vec<&str> = feature_names().to_vec();
        names.swap(0, 1);
        let values = rows[0].features.to_array();
        assert!(model.predict_proba_named(&names, &values).is_err());
        names.swap(0, 1);
        assert_eq!(
            model.predict_proba_named(&names, &values).unwrap(),
            model.predict_proba(&rows[0].features)
        );
    }

    #[test]
    fn too_few_rows_is_a_training_error() {
        let rows = small_corpus();
        assert!(matches!(
            train_on_rows(&rows[..50], &quick_hp(), 0),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn uniform_probabilities_break_ties_toward_spike() {
        let p = Prediction::from_proba([0.25; 4], &BetaCalibrator::identity());
        assert_eq!(p.archetype, Archetype::Spike);
        assert!((p.confidence - 0.25).abs() < 1e-12);
    }

    #[test]
    fn near_identity_calibration_keeps_confidence() {
        let p = Prediction::from_proba([0.97, 0.01, 0.01, 0.01], &BetaCalibrator::identity());
        assert!((p.confidence - 0.97).abs() < 0.05);
    }

    #[test]
    fn perfect_predictions_give_diagonal_confusion() {
        let truth: Vec<Archetype> = Archetype::ALL.iter().cycle().take(40).copied().collect();
        let e = evaluate_predictions(&truth, &truth);
        assert_eq!(e.accuracy, 1.0);
        for t in 0..4 {
            for p in 0..4 {
                assert_eq!(e.confusion[t][p], if t == p { 10 } else { 0 });
            }
        }
        assert_eq!(e.precision, [1.0; 4]);
        assert_eq!(e.recall, [1.0; 4]);
    }

    #[test]
    fn confusion_orientation_is_true_by_predicted() {
        let e = evaluate_predictions(&[Archetype::Ramp], &[Archetype::Spike]);
        assert_eq!(e.confusion[Archetype::Spike.index()][Archetype::Ramp.index()], 1);
        assert_eq!(e.precision[Archetype::Ramp.index()], 0.0);
    }

    #[test]
    fn temporal_split_respects_time_order() {
        let rows = small_corpus();
        let split = temporal_split(&rows);
        let max_train = split.train.iter().map(|r| r.start_minute).max().unwrap();
        let min_val = split.validation.iter().map(|r| r.start_minute).min().unwrap();
        let max_val = split.validation.iter().map(|r| r.start_minute).max().unwrap();
        let min_test = split.test.iter().map(|r| r.start_minute).min().unwrap();
        assert!(max_train < min_val && max_val < min_test);
        assert_eq!(split.train.len() + split.validation.len() + split.test.len(), rows.len());
    }

    #[test]
    fn text_format_round_trips_exactly() {
        let rows = small_corpus();
        let outcome = train_pipeline(&rows, &quick_hp(), 4).unwrap();
        let text = outcome.bundle.to_text();
        let back = ModelBundle::from_text(&text).unwrap();
        assert_eq!(back, outcome.bundle);
        assert_eq!(back.to_text(), text);
        for r in rows.iter().step_by(7) {
            assert_eq!(back.predict(&r.features), outcome.bundle.predict(&r.features));
        }
    }

    #[test]
    fn corrupted_model_text_is_rejected() {
        let rows = small_corpus();
        let outcome = train_pipeline(&rows, &quick_hp(), 4).unwrap();
        let text = outcome.bundle.to_text();
        assert!(ModelBundle::from_text("").unwrap_err().is_validation());
        assert!(ModelBundle::from_text(&text.replace("archscale-model v1", "v0")).is_err());
        let truncated: String = text.lines().take(60).collect::<Vec<_>>().join("\n");
        assert!(ModelBundle::from_text(&truncated).is_err());
        let swapped = text.replacen("feature mean\nfeature std", "feature std\nfeature mean", 1);
        assert!(ModelBundle::from_text(&swapped).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let rows = small_corpus();
        let a = train_on_rows(&rows, &quick_hp(), 11).unwrap();
        let b = train_on_rows(&rows, &quick_hp(), 11).unwrap();
        for r in rows.iter().step_by(5) {
            assert_eq!(a.predict_proba(&r.features), b.predict_proba(&r.features));
        }
    }

    #[test]
    fn confidence_is_monotone_in_argmax_probability() {
        let cal = BetaCalibrator {
            maps: [BetaMap { a: 1.7, b: 0.4, c: -0.3 }; 4],
        };
        let mut last = 0.0;
        for i in 0..=60 {
            let top = 0.4 + i as f64 * 0.01;
            let rest = (1.0 - top) / 3.0;
            let p = Prediction::from_proba([rest, top, rest, rest], &cal);
            assert_eq!(p.archetype, Archetype::Periodic);
            assert!(p.confidence >= last);
            last = p.confidence;
        }
    }
}
