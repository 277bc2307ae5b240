//! Classification metrics, rank AUC and the fold-local modelling pipeline
//! driven by stratified (repeated) cross-validation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    apply_preprocessor, drop_high_missing, fit_preprocessor, stratified_kfold,
    stratified_kfold_labels, Dataset, PreprocessStats,
};
use crate::error::{Error, Result};
use crate::feature_selection::{select_features, FsMethod, SelectionResult};
use crate::hpo::{apply_params, default_domain, optimize, Strategy, TpeConfig, TrialHistory};
use crate::models::{train_gbt, train_logistic, GbtConfig, Model};
use crate::numeric::{mean, sample_sd};
use crate::rng::derive_seed;

/// Columns missing in more than this share of training rows are dropped.
pub const MISSING_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Predicted positive when `prob >= threshold`.
pub fn confusion(labels: &[u8], probs: &[f64], threshold: f64) -> Result<ConfusionMatrix> {
    if labels.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: probs.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::invalid("no rows to evaluate"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(probs) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        match (y == 1, p >= threshold) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    Accuracy,
    Auc,
    Recall,
    Precision,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Accuracy,
        Metric::Auc,
        Metric::Recall,
        Metric::Precision,
        Metric::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
            Metric::Recall => "recall",
            Metric::Precision => "precision",
            Metric::F1 => "f1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub accuracy: f64,
    /// NaN until filled in from scores.
    pub auc: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl MetricSet {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Auc => self.auc,
            Metric::Recall => self.recall,
            Metric::Precision => self.precision,
            Metric::F1 => self.f1,
        }
    }

    fn mean_of(sets: &[MetricSet]) -> MetricSet {
        let avg = |m| mean(&sets.iter().map(|s| s.get(m)).collect::<Vec<_>>());
        MetricSet {
            accuracy: avg(Metric::Accuracy),
            auc: avg(Metric::Auc),
            recall: avg(Metric::Recall),
            precision: avg(Metric::Precision),
            f1: avg(Metric::F1),
        }
    }
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> Result<MetricSet> {
    if cm.total() == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    if cm.tp + cm.fn_ == 0 {
        return Err(Error::invalid("recall undefined: no positive rows"));
    }
    if cm.tp + cm.fp == 0 {
        return Err(Error::invalid("precision undefined: no positive predictions"));
    }
    let recall = cm.tp as f64 / (cm.tp + cm.fn_) as f64;
    let precision = cm.tp as f64 / (cm.tp + cm.fp) as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricSet {
        accuracy: (cm.tp + cm.tn) as f64 / cm.total() as f64,
        auc: f64::NAN,
        recall,
        precision,
        f1,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (midrank Mann-Whitney form).
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&r| labels[r] == 1).count();
        rank_sum += midrank * pos_in_group as f64;
        i = j;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Accuracy, recall, precision and F1 at the 0.5 threshold, plus AUC.
pub fn evaluate_predictions(labels: &[u8], probs: &[f64]) -> Result<MetricSet> {
    let mut m = metrics_from_confusion(&confusion(labels, probs, 0.5)?)?;
    m.auc = roc_auc(labels, probs)?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub strategy: Strategy,
    pub n_trials: usize,
    /// Folds of the inner cross-validation that scores each trial.
    pub inner_k: usize,
    pub tpe: TpeConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Logistic,
    Gbt {
        config: GbtConfig,
        tuning: Option<Tuning>,
    },
}

impl ModelSpec {
    /// Short label used in result keys: LR, XGB, XGB_RS or XGB_TPE.
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Logistic => "LR".into(),
            ModelSpec::Gbt { tuning: None, .. } => "XGB".into(),
            ModelSpec::Gbt {
                tuning: Some(t), ..
            } => format!("XGB_{}", t.strategy),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub fs: FsMethod,
    /// Features kept; capped at the number available after filtering.
    pub n_features: usize,
    pub model: ModelSpec,
}

impl Pipeline {
    pub fn key_prefix(&self) -> String {
        format!("{}_{}", self.fs, self.model.label())
    }
}

/// Everything fitted on one training partition.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub stats: PreprocessStats,
    pub selection: SelectionResult,
    pub model: Model,
    pub tuning: Option<TrialHistory>,
}

impl FittedPipeline {
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let kept = ds.select_features(&self.stats.feature_names)?;
        let z = apply_preprocessor(&kept, &self.stats)?;
        self.model.predict(&z.select_features(&self.selection.selected)?)
    }
}

/// 1 − mean validation AUC of a boosting config over stratified folds.
pub fn cv_auc_loss(ds: &Dataset, cfg: &GbtConfig, k: usize, seed: u64) -> Result<f64> {
    let plan = stratified_kfold_labels(ds.target(), k, seed)?;
    let mut aucs = Vec::with_capacity(k);
    for f in 0..k {
        let train = ds.select_rows(&plan.training_rows(f))?;
        let valid = ds.select_rows(&plan.validation_rows(f))?;
        let model = train_gbt(&train, cfg)?;
        let probs = crate::models::predict_gbt(&model, &valid)?;
        aucs.push(roc_auc(valid.target(), &probs)?);
    }
    Ok(1.0 - mean(&aucs))
}

/// Stages 1-3 on a training partition: missing-column filter, imputation
/// and scaling, feature selection, then (optionally tuned) model fitting.
pub fn fit_pipeline(train: &Dataset, pipeline: &Pipeline, seed: u64) -> Result<FittedPipeline> {
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }
    if pipeline.n_features == 0 {
        return Err(Error::config("n_features must be positive"));
    }
    let filtered = drop_high_missing(train, MISSING_THRESHOLD)?;
    let stats = fit_preprocessor(&filtered)?;
    let z = apply_preprocessor(&filtered, &stats)?;
    let k = pipeline.n_features.min(z.n_features());
    let selection = select_features(&z, pipeline.fs, k)?;
    let x = z.select_features(&selection.selected)?;
    let (model, tuning) = match &pipeline.model {
        ModelSpec::Logistic => (Model::Logistic(train_logistic(&x)?), None),
        ModelSpec::Gbt { config, tuning } => {
            let base = GbtConfig {
                seed: derive_seed(seed, 1),
                ..config.clone()
            };
            match tuning {
                None => (Model::Gbt(train_gbt(&x, &base)?), None),
                Some(t) => {
                    let inner_seed = derive_seed(seed, 2);
                    let objective = |p: &crate::hpo::Params| {
                        cv_auc_loss(&x, &apply_params(&base, p)?, t.inner_k, inner_seed)
                    };
                    let (best, history) = optimize(
                        objective,
                        &default_domain(),
                        t.n_trials,
                        t.strategy,
                        &t.tpe,
                        derive_seed(seed, 3),
                    )?;
                    let cfg = apply_params(&base, &best.params)?;
                    (Model::Gbt(train_gbt(&x, &cfg)?), Some(history))
                }
            }
        }
    };
    Ok(FittedPipeline {
        stats,
        selection,
        model,
        tuning,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub folds: Vec<MetricSet>,
    pub mean: MetricSet,
}

/// k-fold cross-validation; every fitted component sees training rows only.
pub fn cross_validate(ds: &Dataset, pipeline: &Pipeline, k: usize, seed: u64) -> Result<CvResult> {
    cross_validate_fitted(ds, pipeline, k, seed).map(|(r, _)| r)
}

/// [`cross_validate`] that also returns the per-fold fitted pipelines.
pub fn cross_validate_fitted(
    ds: &Dataset,
    pipeline: &Pipeline,
    k: usize,
    seed: u64,
) -> Result<(CvResult, Vec<FittedPipeline>)> {
    let plan = stratified_kfold(ds, k, seed)?;
    let mut folds = Vec::with_capacity(k);
    let mut fitted = Vec::with_capacity(k);
    for f in 0..k {
        let train = ds.select_rows(&plan.training_rows(f))?;
        let valid = ds.select_rows(&plan.validation_rows(f))?;
        let fp = fit_pipeline(&train, pipeline, derive_seed(seed, 100 + f as u64))?;
        let probs = fp.predict(&valid)?;
        folds.push(evaluate_predictions(valid.target(), &probs)?);
        fitted.push(fp);
    }
    let mean = MetricSet::mean_of(&folds);
    Ok((CvResult { folds, mean }, fitted))
}

/// Per-repeat means of one metric for one pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRecord {
    /// `FS_model_metric`; repeat `r` is reported as `FS_model_metric_r`.
    pub key: String,
    pub per_repeat: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl CvRecord {
    fn new(key: String, per_repeat: Vec<f64>) -> Self {
        CvRecord {
            mean: mean(&per_repeat),
            sd: sample_sd(&per_repeat),
            key,
            per_repeat,
        }
    }
}

/// `repeats` rounds of k-fold CV with fold seeds derived from `(seed, r)`.
pub fn repeated_cv(
    ds: &Dataset,
    pipeline: &Pipeline,
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<BTreeMap<Metric, CvRecord>> {
    if repeats < 2 {
        return Err(Error::config("repeats must be at least 2"));
    }
    let means: Vec<MetricSet> = (0..repeats)
        .map(|r| cross_validate(ds, pipeline, k, derive_seed(seed, r as u64)).map(|c| c.mean))
        .collect::<Result<_>>()?;
    let prefix = pipeline.key_prefix();
    Ok(Metric::ALL
        .into_iter()
        .map(|m| {
            let values = means.iter().map(|s| s.get(m)).collect();
            (m, CvRecord::new(format!("{prefix}_{m}"), values))
        })
        .collect())
}

/// Writes records as `key,value` rows: one per repeat, then `_mean` and `_SD`.
pub fn write_cv_table<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a CvRecord>,
) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "key,value").map_err(io)?;
    for rec in records {
        for (i, v) in rec.per_repeat.iter().enumerate() {
            writeln!(w, "{}_{},{}", rec.key, i + 1, v).map_err(io)?;
        }
        writeln!(w, "{}_mean,{}", rec.key, rec.mean).map_err(io)?;
        writeln!(w, "{}_SD,{}", rec.key, rec.sd).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a table written by [`write_cv_table`], preserving record order.
pub fn read_cv_table(path: impl AsRef<Path>) -> Result<Vec<CvRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let bad = |m: String| Error::Parse(format!("{}: {m}", path.display()));
    let mut out: Vec<CvRecord> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let (key, value) = (&rec[0], &rec[1]);
        let v: f64 = value.parse().map_err(|_| bad(format!("bad value `{value}`")))?;
        let (stem, suffix) = key
            .rsplit_once('_')
            .ok_or_else(|| bad(format!("bad key `{key}`")))?;
        let current = out.last_mut().filter(|c| c.key == stem);
        match (suffix, current) {
            ("mean", Some(c)) => c.mean = v,
            ("SD", Some(c)) => c.sd = v,
            (idx, cur) => {
                let idx: usize = idx.parse().map_err(|_| bad(format!("bad key `{key}`")))?;
                match cur {
                    Some(c) if idx == c.per_repeat.len() + 1 => c.per_repeat.push(v),
                    None if idx == 1 => out.push(CvRecord {
                        key: stem.to_string(),
                        per_repeat: vec![v],
                        mean: f64::NAN,
                        sd: f64::NAN,
                    }),
                    _ => return Err(bad(format!("out-of-order key `{key}`"))),
                }
            }
        }
    }
    Ok(out)
}
