//! Classifiers, stratified splitting, cross-validation and the benchmark grid.
//!
//! Every model consumes z-scored rows; the standardizer is always fitted on the rows a
//! model is trained on and reused unchanged for the rows it is evaluated on.

pub mod ann;
pub mod bayes;
pub mod knn;
pub mod lda;
pub mod metrics;
pub mod svm;
pub mod tree;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMask, FeatureVector};
use crate::recording::Activity;

pub use ann::Mlp;
pub use bayes::GaussianNb;
pub use knn::Knn;
pub use lda::Lda;
pub use metrics::{BinaryCounts, ClassMetrics, ConfusionMatrix};
pub use svm::{Kernel, Svm};
pub use tree::DecisionTree;

pub const DEFAULT_TEST_FRACTION: f64 = 0.1;
pub const DEFAULT_FOLDS: usize = 10;
/// Smallest class size accepted by [`LabeledDataset::split_stratified`].
pub const MIN_CLASS_ROWS: usize = 10;

pub trait Classifier: Send {
    fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<()>;

    fn predict_one(&self, x: &[f64]) -> Result<usize>;

    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>> {
        x.iter().map(|r| self.predict_one(r)).collect()
    }
}

/// Validates a training set and returns its dimensionality.
pub(crate) fn check_training(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::insufficient("empty training set"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::invalid("rows have no features"));
    }
    for row in x {
        check_row(row, dim)?;
    }
    if let Some(&c) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::invalid(format!("label {c} outside {n_classes} classes")));
    }
    Ok(dim)
}

pub(crate) fn check_row(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::invalid(format!("row has {} features, model expects {dim}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature row".into()));
    }
    Ok(())
}

/// Isotropic unit-variance Gaussian clusters, labels assigned round-robin. Class `c` is
/// centred `separation` along axis `c mod dim`, negated for every wrap past `dim`.
pub fn gaussian_blobs(n_classes: usize, n_rows: usize, dim: usize, separation: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n_rows);
    let mut y = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let c = i % n_classes;
        let sign = if (c / dim) % 2 == 0 { 1.0 } else { -1.0 };
        let row: Vec<f64> = (0..dim)
            .map(|j| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                noise + if j == c % dim { sign * separation } else { 0.0 }
            })
            .collect();
        x.push(row);
        y.push(c);
    }
    (x, y)
}

/// Per-class random partition with `round(n_c * fraction)` rows of each class held out,
/// at least one and never all. Returns sorted `(kept, held_out)` indices.
pub(crate) fn split_indices(y: &[usize], n_classes: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(rng);
        let n = idx.len();
        let n_held = if n < 2 { 0 } else { ((n as f64 * fraction).round() as usize).clamp(1, n - 1) };
        held.extend_from_slice(&idx[..n_held]);
        kept.extend_from_slice(&idx[n_held..]);
    }
    kept.sort_unstable();
    held.sort_unstable();
    (kept, held)
}

/// Z-score parameters estimated from one set of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, 1 for constant columns.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Standardizer> {
        let first = rows.first().ok_or_else(|| Error::insufficient("cannot standardize zero rows"))?;
        let p = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            check_row(r, p)?;
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        let scale = (0..p)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var.sqrt() > 1e-12 * mean[j].abs().max(1.0) {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, feature_names: Vec<String>, class_names: Vec<String>) -> Result<LabeledDataset> {
        let ds = LabeledDataset {
            rows,
            labels,
            feature_names,
            class_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Masked feature rows labelled with the three activity classes.
    pub fn from_features(rows: &[FeatureVector], mask: &FeatureMask) -> Result<LabeledDataset> {
        LabeledDataset::new(
            rows.iter().map(|fv| mask.apply(&fv.values)).collect(),
            rows.iter().map(|fv| fv.label.index()).collect(),
            mask.names().into_iter().map(String::from).collect(),
            Activity::ALL.iter().map(|a| a.to_string()).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_training(&self.rows, &self.labels, self.n_classes())?;
        if self.rows[0].len() != self.feature_names.len() {
            return Err(Error::invalid("feature names do not match row width"));
        }
        if self.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
            return Err(Error::insufficient("dataset needs at least two classes"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        self.labels.iter().for_each(|&l| c[l] += 1);
        c
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    fn require_class_rows(&self, required: usize) -> Result<()> {
        for (c, &count) in self.class_counts().iter().enumerate() {
            if count > 0 && count < required {
                return Err(Error::ClassTooSmall {
                    class: self.class_names[c].clone(),
                    count,
                    required,
                });
            }
        }
        Ok(())
    }

    /// Stratified hold-out split; each class contributes `round(n_c * test_fraction)` rows.
    pub fn split_stratified(&self, test_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::invalid(format!("test fraction {test_fraction} must lie in (0, 1)")));
        }
        self.require_class_rows(MIN_CLASS_ROWS)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (train, test) = split_indices(&self.labels, self.n_classes(), test_fraction, &mut rng);
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// Fold number of every row. Classes are dealt round-robin in shuffled order with the
    /// dealer continuing across classes, so fold sizes differ by at most one.
    pub fn stratified_folds(&self, k: usize, seed: u64) -> Result<Vec<usize>> {
        if k < 2 {
            return Err(Error::invalid("cross-validation needs at least 2 folds"));
        }
        self.require_class_rows(k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fold = vec![0; self.len()];
        let mut dealer = 0;
        for c in 0..self.n_classes() {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == c).collect();
            idx.shuffle(&mut rng);
            for i in idx {
                fold[i] = dealer % k;
                dealer += 1;
            }
        }
        Ok(fold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Lda,
    GaussianNb { var_smoothing: f64 },
    DecisionTree { max_depth: usize, min_leaf: usize },
    Knn { k: usize },
    Svm { kernel: Kernel, c: f64, tol: f64, max_passes: usize },
    Ann {
        hidden: usize,
        learning_rate: f64,
        momentum: f64,
        batch_size: usize,
        max_epochs: usize,
        patience: usize,
    },
}

impl ModelSpec {
    pub fn build(&self, seed: u64) -> Box<dyn Classifier> {
        match *self {
            ModelSpec::Lda => Box::new(Lda::new()),
            ModelSpec::GaussianNb { var_smoothing } => Box::new(GaussianNb::new(var_smoothing)),
            ModelSpec::DecisionTree { max_depth, min_leaf } => Box::new(DecisionTree::new(max_depth, min_leaf)),
            ModelSpec::Knn { k } => Box::new(Knn::new(k)),
            ModelSpec::Svm { kernel, c, tol, max_passes } => {
                let mut m = Svm::new(kernel);
                m.c = c;
                m.tol = tol;
                m.max_passes = max_passes;
                Box::new(m)
            }
            ModelSpec::Ann {
                hidden,
                learning_rate,
                momentum,
                batch_size,
                max_epochs,
                patience,
            } => {
                let mut m = Mlp::new(hidden, seed);
                m.learning_rate = learning_rate;
                m.momentum = momentum;
                m.batch_size = batch_size;
                m.max_epochs = max_epochs;
                m.patience = patience;
                Box::new(m)
            }
        }
    }
}


/// Tunable hyperparameters shared by the named presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub var_smoothing: f64,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub knn_fine_k: usize,
    pub knn_medium_k: usize,
    pub knn_coarse_k: usize,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub ann_narrow: usize,
    pub ann_medium: usize,
    pub ann_wide: usize,
    pub ann_learning_rate: f64,
    pub ann_momentum: f64,
    pub ann_batch_size: usize,
    pub ann_max_epochs: usize,
    pub ann_patience: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            var_smoothing: bayes::DEFAULT_VAR_SMOOTHING,
            tree_max_depth: tree::DEFAULT_MAX_DEPTH,
            tree_min_leaf: tree::DEFAULT_MIN_LEAF,
            knn_fine_k: 1,
            knn_medium_k: 10,
            knn_coarse_k: 100,
            svm_c: svm::DEFAULT_C,
            svm_tol: svm::DEFAULT_TOLERANCE,
            svm_max_passes: svm::DEFAULT_MAX_PASSES,
            ann_narrow: 10,
            ann_medium: 25,
            ann_wide: 100,
            ann_learning_rate: ann::DEFAULT_LEARNING_RATE,
            ann_momentum: ann::DEFAULT_MOMENTUM,
            ann_batch_size: ann::DEFAULT_BATCH_SIZE,
            ann_max_epochs: ann::DEFAULT_MAX_EPOCHS,
            ann_patience: ann::DEFAULT_PATIENCE,
        }
    }
}

pub const PRESET_NAMES: [&str; 12] = [
    "lda",
    "gaussian_nb",
    "decision_tree",
    "fine_knn",
    "medium_knn",
    "coarse_knn",
    "linear_svm",
    "quadratic_svm",
    "cubic_svm",
    "narrow_ann",
    "medium_ann",
    "wide_ann",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPreset {
    pub name: String,
    pub spec: ModelSpec,
}

impl Hyperparams {
    pub fn preset(&self, name: &str) -> Result<ModelPreset> {
        let svm = |kernel| ModelSpec::Svm {
            kernel,
            c: self.svm_c,
            tol: self.svm_tol,
            max_passes: self.svm_max_passes,
        };
        let ann = |hidden| ModelSpec::Ann {
            hidden,
            learning_rate: self.ann_learning_rate,
            momentum: self.ann_momentum,
            batch_size: self.ann_batch_size,
            max_epochs: self.ann_max_epochs,
            patience: self.ann_patience,
        };
        let spec = match name {
            "lda" => ModelSpec::Lda,
            "gaussian_nb" => ModelSpec::GaussianNb {
                var_smoothing: self.var_smoothing,
            },
            "decision_tree" => ModelSpec::DecisionTree {
                max_depth: self.tree_max_depth,
                min_leaf: self.tree_min_leaf,
            },
            "fine_knn" => ModelSpec::Knn { k: self.knn_fine_k },
            "medium_knn" => ModelSpec::Knn { k: self.knn_medium_k },
            "coarse_knn" => ModelSpec::Knn { k: self.knn_coarse_k },
            "linear_svm" => svm(Kernel::Linear),
            "quadratic_svm" => svm(Kernel::Polynomial { degree: 2 }),
            "cubic_svm" => svm(Kernel::Polynomial { degree: 3 }),
            "narrow_ann" => ann(self.ann_narrow),
            "medium_ann" => ann(self.ann_medium),
            "wide_ann" => ann(self.ann_wide),
            other => {
                return Err(Error::invalid(format!(
                    "unknown model preset `{other}`; expected one of {}",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Ok(ModelPreset {
            name: name.to_string(),
            spec,
        })
    }

    pub fn presets(&self, names: &[&str]) -> Result<Vec<ModelPreset>> {
        names.iter().map(|n| self.preset(n)).collect()
    }

    /// Applies one `key = value` setting. Returns `Ok(false)` for keys this struct does
    /// not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "nb.var_smoothing" => self.var_smoothing = num(key, value)?,
            "tree.max_depth" => self.tree_max_depth = num(key, value)?,
            "tree.min_leaf" => self.tree_min_leaf = num(key, value)?,
            "knn.fine.k" => self.knn_fine_k = num(key, value)?,
            "knn.medium.k" => self.knn_medium_k = num(key, value)?,
            "knn.coarse.k" => self.knn_coarse_k = num(key, value)?,
            "svm.c" => self.svm_c = num(key, value)?,
            "svm.tol" => self.svm_tol = num(key, value)?,
            "svm.max_passes" => self.svm_max_passes = num(key, value)?,
            "ann.narrow.hidden" => self.ann_narrow = num(key, value)?,
            "ann.medium.hidden" => self.ann_medium = num(key, value)?,
            "ann.wide.hidden" => self.ann_wide = num(key, value)?,
            "ann.learning_rate" => self.ann_learning_rate = num(key, value)?,
            "ann.momentum" => self.ann_momentum = num(key, value)?,
            "ann.batch_size" => self.ann_batch_size = num(key, value)?,
            "ann.max_epochs" => self.ann_max_epochs = num(key, value)?,
            "ann.patience" => self.ann_patience = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn fit_standardized(spec: &ModelSpec, train: &LabeledDataset, seed: u64) -> Result<(Box<dyn Classifier>, Standardizer)> {
    let scaler = Standardizer::fit(&train.rows)?;
    let mut model = spec.build(seed);
    model.fit(&scaler.transform(&train.rows), &train.labels, train.n_classes())?;
    Ok((model, scaler))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    /// Mean held-out accuracy over folds, percent.
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

/// Stratified k-fold cross-validation; each fold is standardized on its own training rows.
pub fn cross_validate(data: &LabeledDataset, spec: &ModelSpec, k: usize, seed: u64) -> Result<CvOutcome> {
    let folds = data.stratified_folds(k, seed)?;
    let mut fold_accuracies = Vec::with_capacity(k);
    for f in 0..k {
        let train: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
        let held: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
        let (model, scaler) = fit_standardized(spec, &data.subset(&train), seed)?;
        let test = data.subset(&held);
        let pred = model.predict(&scaler.transform(&test.rows))?;
        let cm = ConfusionMatrix::from_predictions(&test.labels, &pred, data.n_classes())?;
        fold_accuracies.push(cm.accuracy());
    }
    Ok(CvOutcome {
        accuracy: fold_accuracies.iter().sum::<f64>() / k as f64,
        fold_accuracies,
    })
}

/// Confusion matrix of an already fitted model on pre-scaled rows.
pub fn evaluate(model: &dyn Classifier, rows: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if rows.is_empty() {
        return Err(Error::insufficient("cannot evaluate on an empty test set"));
    }
    ConfusionMatrix::from_predictions(labels, &model.predict(rows)?, n_classes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl ModelReport {
    pub fn from_confusion(model: &str, validation_accuracy: f64, confusion: ConfusionMatrix) -> ModelReport {
        ModelReport {
            model: model.to_string(),
            validation_accuracy,
            test_accuracy: confusion.accuracy(),
            per_class: confusion.class_metrics(),
            confusion,
        }
    }

    pub fn mean_f1(&self) -> f64 {
        self.per_class.iter().map(|m| m.f1).sum::<f64>() / self.per_class.len() as f64
    }
}

/// Cross-validates on `train`, refits on all of it and scores on `test`.
pub fn run_preset(train: &LabeledDataset, test: &LabeledDataset, preset: &ModelPreset, folds: usize, seed: u64) -> Result<ModelReport> {
    let cv = cross_validate(train, &preset.spec, folds, seed)?;
    let (model, scaler) = fit_standardized(&preset.spec, train, seed)?;
    let cm = evaluate(model.as_ref(), &scaler.transform(&test.rows), &test.labels, train.n_classes())?;
    Ok(ModelReport::from_confusion(&preset.name, cv.accuracy, cm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub model: String,
    pub outcome: std::result::Result<ModelReport, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub test_fraction: f64,
    pub folds: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            test_fraction: DEFAULT_TEST_FRACTION,
            folds: DEFAULT_FOLDS,
        }
    }
}

/// Splits once, then runs every preset on its own thread. A failing preset becomes a
/// failed entry and does not stop the others. Entries keep the preset order.
pub fn benchmark_grid(data: &LabeledDataset, presets: &[ModelPreset], settings: GridSettings, seed: u64) -> Result<Vec<GridEntry>> {
    data.validate()?;
    let (train, test) = data.split_stratified(settings.test_fraction, seed)?;
    let (train, test) = (&train, &test);
    Ok(std::thread::scope(|s| {
        let handles: Vec<_> = presets
            .iter()
            .map(|p| s.spawn(move || run_preset(train, test, p, settings.folds, seed)))
            .collect();
        handles
            .into_iter()
            .zip(presets)
            .map(|(h, p)| {
                let outcome = match h.join() {
                    Ok(r) => r.map_err(|e| e.to_string()),
                    Err(_) => Err("model thread panicked".to_string()),
                };
                if let Err(e) = &outcome {
                    log::warn!("{} failed: {e}", p.name);
                }
                GridEntry {
                    model: p.name.clone(),
                    outcome,
                }
            })
            .collect()
    }))
}

fn csv_name(class: &str) -> String {
    class.replace('-', "_")
}

/// Table of validation/test accuracy and per-class F1, one row per model.
pub fn write_report_csv<W: Write>(w: W, entries: &[GridEntry], class_names: &[String]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["model".to_string(), "validation_accuracy".into(), "test_accuracy".into()];
    header.extend(class_names.iter().map(|c| format!("f1_{}", csv_name(c))));
    header.extend(["mean_f1".into(), "status".into()]);
    csv.write_record(&header)?;
    for e in entries {
        let mut row = vec![e.model.clone()];
        match &e.outcome {
            Ok(r) => {
                row.push(format!("{:.4}", r.validation_accuracy));
                row.push(format!("{:.4}", r.test_accuracy));
                row.extend(r.per_class.iter().map(|m| format!("{:.4}", m.f1)));
                row.push(format!("{:.4}", r.mean_f1()));
                row.push("ok".into());
            }
            Err(msg) => {
                row.extend(std::iter::repeat_n(String::new(), 3 + class_names.len()));
                row.push(format!("failed: {msg}"));
            }
        }
        csv.write_record(&row)?;
    }
    csv.flush().map_err(Error::Net)
}

/// Long-format precision, sensitivity and F1 per model and class, for bar charts.
pub fn write_class_metrics_csv<W: Write>(w: W, entries: &[GridEntry], class_names: &[String]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["model", "class", "precision", "sensitivity", "f1", "undefined"])?;
    for e in entries {
        let Ok(r) = &e.outcome else { continue };
        for (m, class) in r.per_class.iter().zip(class_names) {
            let flags: Vec<&str> = [
                (m.precision_undefined, "precision"),
                (m.sensitivity_undefined, "sensitivity"),
                (m.f1_undefined, "f1"),
            ]
            .iter()
            .filter(|(f, _)| *f)
            .map(|(_, n)| *n)
            .collect();
            csv.write_record([
                e.model.clone(),
                class.clone(),
                format!("{:.4}", m.precision),
                format!("{:.4}", m.sensitivity),
                format!("{:.4}", m.f1),
                flags.join("|"),
            ])?;
        }
    }
    csv.flush().map_err(Error::Net)
}
