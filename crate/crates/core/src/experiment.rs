//! End-to-end experiment runner: repeated CV over every configured
//! (selection method, model) pair, Wilcoxon comparisons, a feature
//! importance ranking and a markdown summary.
//!
//! Artifacts written to the output directory:
//!
//! | file | content |
//! |---|---|
//! | `manifest.toml` | resolved configuration; `run --config manifest.toml` repeats the run |
//! | `cv_results.csv` | `key,value` rows per pipeline and metric |
//! | `fs_comparisons.csv` | selection methods compared within each model |
//! | `model_comparisons.csv` | models compared, each on its best selection method |
//! | `importance.csv` | split counts of the best boosted model refit on all rows |
//! | `summary.md` | readable digest of the above |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_csv, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{
    fit_pipeline, repeated_cv, write_cv_table, CvRecord, Metric, ModelSpec, Pipeline, Tuning,
};
use crate::feature_selection::FsMethod;
use crate::hpo::{Strategy, TpeConfig};
use crate::models::{feature_importance, GbtConfig, Model};
use crate::rng::derive_seed;
use crate::stats::{
    directional_comparison, pairwise_comparison, write_comparisons, Alternative, ComparisonMatrix,
};
use crate::synth::{generate, SynthSpec};

/// Flat configuration; every key is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// CSV input. When absent a synthetic dataset is generated.
    pub data: Option<PathBuf>,
    pub target: String,
    pub fs: Vec<String>,
    /// `LR` and/or `GBT`.
    pub models: Vec<String>,
    /// Tuning strategies for GBT: `none`, `RS`, `TPE`.
    pub hpo: Vec<String>,
    pub k: usize,
    pub repeats: usize,
    pub n_features: usize,
    pub n_trials: usize,
    pub inner_k: usize,
    pub alpha: f64,
    /// `one_sided` (pairs oriented by mean, tested as greater) or `two_sided`.
    pub sidedness: String,
    pub seed: u64,

    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub lambda: f64,

    pub synth_rows: usize,
    pub synth_informative: usize,
    pub synth_redundant: usize,
    pub synth_noise: usize,
    pub synth_positive_rate: f64,
    pub synth_missing_rate: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let gbt = GbtConfig::default();
        let synth = SynthSpec::default();
        ExperimentConfig {
            data: None,
            target: "target".into(),
            fs: FsMethod::ALL.iter().map(|m| m.name().to_string()).collect(),
            models: vec!["LR".into(), "GBT".into()],
            hpo: vec!["RS".into(), "TPE".into()],
            k: 10,
            repeats: 10,
            n_features: 50,
            n_trials: 20,
            inner_k: 5,
            alpha: 0.1,
            sidedness: "one_sided".into(),
            seed: 0,
            n_estimators: gbt.n_estimators,
            learning_rate: gbt.learning_rate,
            max_depth: gbt.max_depth,
            max_leaves: gbt.max_leaves,
            subsample: gbt.subsample,
            colsample_bytree: gbt.colsample_bytree,
            gamma: gbt.gamma,
            min_child_weight: gbt.min_child_weight,
            lambda: gbt.lambda,
            synth_rows: synth.n_rows,
            synth_informative: synth.n_informative,
            synth_redundant: synth.n_redundant,
            synth_noise: synth.n_noise,
            synth_positive_rate: synth.positive_rate,
            synth_missing_rate: synth.missing_rate,
        }
    }
}

/// Validated form of [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub pipelines: Vec<Pipeline>,
    pub fs: Vec<FsMethod>,
    pub model_labels: Vec<String>,
    pub sidedness: Alternative,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn gbt_config(&self) -> GbtConfig {
        GbtConfig {
            learning_rate: self.learning_rate,
            subsample: self.subsample,
            max_leaves: self.max_leaves,
            max_depth: self.max_depth,
            gamma: self.gamma,
            colsample_bytree: self.colsample_bytree,
            min_child_weight: self.min_child_weight,
            n_estimators: self.n_estimators,
            lambda: self.lambda,
            ..GbtConfig::default()
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            n_rows: self.synth_rows,
            n_informative: self.synth_informative,
            n_redundant: self.synth_redundant,
            n_noise: self.synth_noise,
            positive_rate: self.synth_positive_rate,
            missing_rate: self.synth_missing_rate,
            seed: self.seed,
            ..SynthSpec::default()
        }
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        let dedup_err = |what: &str| Error::config(format!("{what} listed twice"));
        let mut fs = Vec::new();
        for name in &self.fs {
            let m: FsMethod = name.parse()?;
            if fs.contains(&m) {
                return Err(dedup_err(name));
            }
            fs.push(m);
        }
        if fs.is_empty() {
            return Err(Error::config("no feature-selection methods configured"));
        }
        let mut strategies: Vec<Option<Strategy>> = Vec::new();
        for h in &self.hpo {
            let s = if h.eq_ignore_ascii_case("none") {
                None
            } else {
                Some(h.parse()?)
            };
            if strategies.contains(&s) {
                return Err(dedup_err(h));
            }
            strategies.push(s);
        }
        if self.k < 2 {
            return Err(Error::config("k must be at least 2"));
        }
        if self.repeats < 2 {
            return Err(Error::config("repeats must be at least 2"));
        }
        if self.n_features == 0 {
            return Err(Error::config("n_features must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha must lie in (0, 1)"));
        }
        let sidedness = match self.sidedness.as_str() {
            "one_sided" => Alternative::Greater,
            "two_sided" => Alternative::TwoSided,
            s => {
                return Err(Error::config(format!(
                    "unknown sidedness `{s}` (expected one_sided or two_sided)"
                )))
            }
        };
        let gbt = self.gbt_config();
        gbt.validate()?;
        let tpe = TpeConfig::default();

        let mut specs: Vec<ModelSpec> = Vec::new();
        let mut seen = Vec::new();
        for m in &self.models {
            let key = m.to_ascii_uppercase();
            if seen.contains(&key) {
                return Err(dedup_err(m));
            }
            seen.push(key.clone());
            match key.as_str() {
                "LR" => specs.push(ModelSpec::Logistic),
                "GBT" | "XGB" => {
                    if strategies.is_empty() {
                        return Err(Error::config("GBT needs at least one hpo entry"));
                    }
                    if strategies.iter().any(Option::is_some) {
                        if self.n_trials == 0 {
                            return Err(Error::config("n_trials must be at least 1"));
                        }
                        if self.inner_k < 2 {
                            return Err(Error::config("inner_k must be at least 2"));
                        }
                    }
                    for s in &strategies {
                        specs.push(ModelSpec::Gbt {
                            config: gbt.clone(),
                            tuning: s.map(|strategy| Tuning {
                                strategy,
                                n_trials: self.n_trials,
                                inner_k: self.inner_k,
                                tpe: tpe.clone(),
                            }),
                        });
                    }
                }
                _ => return Err(Error::config(format!("unknown model `{m}` (expected LR or GBT)"))),
            }
        }
        if specs.is_empty() {
            return Err(Error::config("no models configured"));
        }
        if self.data.is_none() {
            self.synth_spec().validate()?;
        }
        let model_labels = specs.iter().map(ModelSpec::label).collect();
        let pipelines = specs
            .iter()
            .flat_map(|spec| {
                fs.iter().map(move |&f| Pipeline {
                    fs: f,
                    n_features: self.n_features,
                    model: spec.clone(),
                })
            })
            .collect();
        Ok(ExperimentPlan {
            pipelines,
            fs,
            model_labels,
            sidedness,
        })
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.data {
            Some(path) => load_csv(path, &self.target),
            None => Ok(generate(&self.synth_spec())?.dataset),
        }
    }
}

/// Result of one pipeline: its records keyed by metric.
type PipelineResult = (Pipeline, BTreeMap<Metric, CvRecord>);

fn compare(
    series: &[(String, Vec<f64>)],
    criterion: &str,
    alpha: f64,
    sidedness: Alternative,
) -> Result<ComparisonMatrix> {
    match sidedness {
        Alternative::TwoSided => pairwise_comparison(series, criterion, alpha, sidedness),
        _ => directional_comparison(series, criterion, alpha),
    }
}

pub struct RunOutput {
    pub results: Vec<PipelineResult>,
    pub fs_comparisons: Vec<ComparisonMatrix>,
    pub model_comparisons: Vec<ComparisonMatrix>,
    /// Best selection method per model label, by mean AUC.
    pub best_fs: Vec<(String, FsMethod)>,
    pub importance: Vec<(String, usize)>,
    pub importance_source: Option<String>,
}

/// Runs every pipeline and builds the comparisons without touching disk.
pub fn execute(cfg: &ExperimentConfig, plan: &ExperimentPlan, ds: &Dataset) -> Result<RunOutput> {
    if ds.positive_count() < cfg.k || ds.n_rows() - ds.positive_count() < cfg.k {
        return Err(Error::invalid(format!(
            "each class needs at least k = {} rows",
            cfg.k
        )));
    }
    let mut results: Vec<PipelineResult> = Vec::new();
    for p in &plan.pipelines {
        let recs = repeated_cv(ds, p, cfg.k, cfg.repeats, cfg.seed)?;
        results.push((p.clone(), recs));
    }
    let auc_mean = |label: &str, f: FsMethod| {
        results
            .iter()
            .find(|(p, _)| p.model.label() == label && p.fs == f)
            .map(|(_, r)| r[&Metric::Auc].mean)
            .expect("pipeline present")
    };
    let per_repeat = |label: &str, f: FsMethod, m: Metric| -> Vec<f64> {
        results
            .iter()
            .find(|(p, _)| p.model.label() == label && p.fs == f)
            .map(|(_, r)| r[&m].per_repeat.clone())
            .expect("pipeline present")
    };

    let mut fs_comparisons = Vec::new();
    if plan.fs.len() >= 2 {
        for label in &plan.model_labels {
            for m in Metric::ALL {
                let series: Vec<(String, Vec<f64>)> = plan
                    .fs
                    .iter()
                    .map(|&f| (f.to_string(), per_repeat(label, f, m)))
                    .collect();
                fs_comparisons.push(compare(&series, &format!("{label}_{m}"), cfg.alpha, plan.sidedness)?);
            }
        }
    }

    let mut best_fs = Vec::new();
    for label in &plan.model_labels {
        let mut best = plan.fs[0];
        for &f in &plan.fs[1..] {
            if auc_mean(label, f) > auc_mean(label, best) {
                best = f;
            }
        }
        best_fs.push((label.clone(), best));
    }

    let mut model_comparisons = Vec::new();
    if plan.model_labels.len() >= 2 {
        for m in Metric::ALL {
            let series: Vec<(String, Vec<f64>)> = best_fs
                .iter()
                .map(|(label, f)| (format!("{f}_{label}"), per_repeat(label, *f, m)))
                .collect();
            model_comparisons.push(compare(&series, m.name(), cfg.alpha, plan.sidedness)?);
        }
    }

    let winner = best_fs
        .iter()
        .filter(|(label, _)| label.starts_with("XGB"))
        .fold(None::<&(String, FsMethod)>, |acc, cur| match acc {
            Some(a) if auc_mean(&a.0, a.1) >= auc_mean(&cur.0, cur.1) => Some(a),
            _ => Some(cur),
        });
    let (importance, importance_source) = match winner {
        Some((label, f)) => {
            let pipeline = plan
                .pipelines
                .iter()
                .find(|p| &p.model.label() == label && p.fs == *f)
                .expect("pipeline present");
            let fitted = fit_pipeline(ds, pipeline, derive_seed(cfg.seed, 0xF1))?;
            match &fitted.model {
                Model::Gbt(m) => (feature_importance(m), Some(pipeline.key_prefix())),
                Model::Logistic(_) => unreachable!("boosted label"),
            }
        }
        None => (Vec::new(), None),
    };

    Ok(RunOutput {
        results,
        fs_comparisons,
        model_comparisons,
        best_fs,
        importance,
        importance_source,
    })
}

fn summary_markdown(cfg: &ExperimentConfig, ds: &Dataset, out: &RunOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Experiment summary\n");
    let _ = writeln!(
        s,
        "Data: {} rows, {} features, {} positives. {}-fold CV repeated {} times, seed {}.\n",
        ds.n_rows(),
        ds.n_features(),
        ds.positive_count(),
        cfg.k,
        cfg.repeats,
        cfg.seed
    );
    let _ = writeln!(s, "## Mean ± sd over repeats\n");
    let _ = write!(s, "| Pipeline |");
    for m in Metric::ALL {
        let _ = write!(s, " {m} |");
    }
    let _ = writeln!(s, "\n|---|---|---|---|---|---|");
    for (p, recs) in &out.results {
        let _ = write!(s, "| {} |", p.key_prefix());
        for m in Metric::ALL {
            let r = &recs[&m];
            let _ = write!(s, " {:.4} ± {:.4} |", r.mean, r.sd);
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s, "\n## Best selection method per model (by mean AUC)\n");
    for (label, f) in &out.best_fs {
        let _ = writeln!(s, "- {label}: {f}");
    }
    if !out.fs_comparisons.is_empty() {
        let _ = writeln!(s, "\n## Selection methods compared\n");
        for m in &out.fs_comparisons {
            let _ = writeln!(s, "{}", m.to_markdown());
        }
    }
    if !out.model_comparisons.is_empty() {
        let _ = writeln!(s, "## Models compared\n");
        for m in &out.model_comparisons {
            let _ = writeln!(s, "{}", m.to_markdown());
        }
    }
    if let Some(src) = &out.importance_source {
        let _ = writeln!(s, "## Feature importance ({src}, refit on all rows)\n");
        let _ = writeln!(s, "| Feature | F score |\n|---|---|");
        for (f, c) in out.importance.iter().take(20) {
            let _ = writeln!(s, "| {f} | {c} |");
        }
    }
    s
}

pub fn write_importance(path: &Path, importance: &[(String, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["feature", "f_score"])?;
    for (f, c) in importance {
        w.write_record([f.as_str(), &c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_importance(path: &Path) -> Result<Vec<(String, usize)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let c = rec[1]
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad count", path.display())))?;
        out.push((rec[0].to_string(), c));
    }
    Ok(out)
}

fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, ds: &Dataset, out: &RunOutput) -> Result<()> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| Error::io(p, e)
    };
    let manifest = dir.join("manifest.toml");
    fs::write(&manifest, cfg.to_toml_string()).map_err(io(&manifest))?;
    write_cv_table(
        dir.join("cv_results.csv"),
        out.results.iter().flat_map(|(_, r)| r.values()),
    )?;
    write_comparisons(dir.join("fs_comparisons.csv"), &out.fs_comparisons)?;
    write_comparisons(dir.join("model_comparisons.csv"), &out.model_comparisons)?;
    write_importance(&dir.join("importance.csv"), &out.importance)?;
    let summary = dir.join("summary.md");
    fs::write(&summary, summary_markdown(cfg, ds, out)).map_err(io(&summary))?;
    Ok(())
}

/// Validates, runs, and publishes artifacts to `output` by renaming a
/// completed staging directory. Nothing is written if validation fails.
pub fn run_experiment(cfg: &ExperimentConfig, output: &Path) -> Result<RunOutput> {
    let plan = cfg.plan()?;
    let ds = cfg.load_dataset()?;
    let out = execute(cfg, &plan, &ds)?;

    let name = output
        .file_name()
        .ok_or_else(|| Error::config(format!("bad output path {}", output.display())))?;
    let parent = match output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let staging = parent.join(format!(".{}.partial", name.to_string_lossy()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    if let Err(e) = write_artifacts(&staging, cfg, &ds, &out) {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if output.exists() {
        fs::remove_dir_all(output).map_err(|e| Error::io(output, e))?;
    }
    fs::rename(&staging, output).map_err(|e| Error::io(output, e))?;
    Ok(out)
}
