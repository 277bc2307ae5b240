//! C interface to `riskmodel`.
//!
//! Every function returns an [`RmStatus`]. On failure the message is kept
//! per thread and can be read with [`rm_last_error`]. Objects are handed out
//! as opaque pointers and released with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use riskmodel::dataset::{self, Dataset};
use riskmodel::evaluation::{self, MISSING_THRESHOLD};
use riskmodel::models::{train_gbt, train_logistic, GbtConfig, Model};
use riskmodel::stats::{self, Alternative, TestMethod};
use riskmodel::synth::{self, SynthSpec};
use riskmodel::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    DimensionMismatch = 4,
    SingleClass = 5,
    UnknownFeature = 6,
    Numerical = 7,
    Io = 8,
    Parse = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmAlternative {
    Greater = 0,
    Less = 1,
    TwoSided = 2,
}

/// Opaque dataset handle.
pub struct RmDataset(Dataset);

/// Opaque fitted model handle.
pub struct RmModel(Model);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RmGbtConfig {
    pub learning_rate: f64,
    pub subsample: f64,
    pub max_leaves: usize,
    pub max_depth: usize,
    pub gamma: f64,
    pub colsample_bytree: f64,
    pub min_child_weight: f64,
    pub n_estimators: usize,
    pub lambda: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl From<RmGbtConfig> for GbtConfig {
    fn from(c: RmGbtConfig) -> Self {
        GbtConfig {
            learning_rate: c.learning_rate,
            subsample: c.subsample,
            max_leaves: c.max_leaves,
            max_depth: c.max_depth,
            gamma: c.gamma,
            colsample_bytree: c.colsample_bytree,
            min_child_weight: c.min_child_weight,
            n_estimators: c.n_estimators,
            lambda: c.lambda,
            min_samples_leaf: c.min_samples_leaf,
            seed: c.seed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RmMetrics {
    pub accuracy: f64,
    pub auc: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RmTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    /// 1 when the exact null distribution was used, 0 for the normal
    /// approximation.
    pub exact: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> RmStatus {
    match e {
        Error::Io { .. } => RmStatus::Io,
        Error::Csv(_) | Error::Json(_) | Error::Parse(_) => RmStatus::Parse,
        Error::InvalidInput(_) => RmStatus::InvalidInput,
        Error::InvalidConfig(_) => RmStatus::InvalidConfig,
        Error::DimensionMismatch { .. } => RmStatus::DimensionMismatch,
        Error::SingleClass => RmStatus::SingleClass,
        Error::UnknownFeature(_) => RmStatus::UnknownFeature,
        Error::Numerical(_) => RmStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RmStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RmStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            RmStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RmStatus::Panic
        }
    }
}

unsafe fn nonnull<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn string(p: *const c_char, what: &'static str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Core(Error::InvalidInput(format!("{what} is not valid UTF-8"))))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn rm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a dataset from row-major `values` (NaN marks a missing cell) and
/// 0/1 `target`. `names` may be NULL, giving `f1..fn`.
///
/// # Safety
/// `values` must hold `n_rows * n_features` doubles, `target` `n_rows`
/// bytes and `names`, if not NULL, `n_features` C strings.
#[no_mangle]
pub unsafe extern "C" fn rm_dataset_new(
    values: *const f64,
    target: *const u8,
    n_rows: usize,
    n_features: usize,
    names: *const *const c_char,
    out: *mut *mut RmDataset,
) -> RmStatus {
    guard(|| {
        let cells = n_rows
            .checked_mul(n_features)
            .ok_or_else(|| Error::InvalidInput("dataset too large".into()))?;
        let values = slice(values, cells, "values")?.to_vec();
        let target = slice(target, n_rows, "target")?.to_vec();
        let names = if names.is_null() {
            (1..=n_features).map(|i| format!("f{i}")).collect()
        } else {
            slice(names, n_features, "names")?
                .iter()
                .map(|&p| string(p, "feature name"))
                .collect::<Result<Vec<_>, _>>()?
        };
        put(out, RmDataset(Dataset::new(names, values, target)?))
    })
}

/// Reads a CSV file whose column `target` holds the 0/1 label.
///
/// # Safety
/// `path` and `target` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn rm_dataset_load_csv(
    path: *const c_char,
    target: *const c_char,
    out: *mut *mut RmDataset,
) -> RmStatus {
    guard(|| {
        let path = PathBuf::from(string(path, "path")?);
        let target = string(target, "target")?;
        put(out, RmDataset(dataset::load_csv(path, &target)?))
    })
}

/// Generates a synthetic credit-style dataset.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rm_dataset_synth(
    n_rows: usize,
    n_informative: usize,
    n_redundant: usize,
    n_noise: usize,
    positive_rate: f64,
    missing_rate: f64,
    seed: u64,
    out: *mut *mut RmDataset,
) -> RmStatus {
    guard(|| {
        let spec = SynthSpec {
            n_rows,
            n_informative,
            n_redundant,
            n_noise,
            positive_rate,
            missing_rate,
            seed,
            ..SynthSpec::default()
        };
        put(out, RmDataset(synth::generate(&spec)?.dataset))
    })
}

/// Drops mostly-missing columns, imputes medians and standardises, with
/// all statistics taken from `ds` itself.
///
/// # Safety
/// `ds` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rm_dataset_preprocess(
    ds: *const RmDataset,
    out: *mut *mut RmDataset,
) -> RmStatus {
    guard(|| {
        let ds = &nonnull(ds, "dataset")?.0;
        let kept = dataset::drop_high_missing(ds, MISSING_THRESHOLD)?;
        let stats = dataset::fit_preprocessor(&kept)?;
        put(out, RmDataset(dataset::apply_preprocessor(&kept, &stats)?))
    })
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn rm_dataset_n_rows(ds: *const RmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_rows())
}

/// Number of feature columns, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn rm_dataset_n_features(ds: *const RmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_features())
}

/// # Safety
/// `ds` must be NULL or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rm_dataset_free(ds: *mut RmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Default boosting settings.
#[no_mangle]
pub extern "C" fn rm_gbt_config_default() -> RmGbtConfig {
    let c = GbtConfig::default();
    RmGbtConfig {
        learning_rate: c.learning_rate,
        subsample: c.subsample,
        max_leaves: c.max_leaves,
        max_depth: c.max_depth,
        gamma: c.gamma,
        colsample_bytree: c.colsample_bytree,
        min_child_weight: c.min_child_weight,
        n_estimators: c.n_estimators,
        lambda: c.lambda,
        min_samples_leaf: c.min_samples_leaf,
        seed: c.seed,
    }
}

/// Fits a logistic regression. The dataset must have no missing cells.
///
/// # Safety
/// `ds` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rm_train_logistic(ds: *const RmDataset, out: *mut *mut RmModel) -> RmStatus {
    guard(|| {
        let ds = &nonnull(ds, "dataset")?.0;
        put(out, RmModel(Model::Logistic(train_logistic(ds)?)))
    })
}

/// Fits a boosted tree ensemble. `config` may be NULL for the defaults.
///
/// # Safety
/// `ds` must come from this library; `config` NULL or valid; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rm_train_gbt(
    ds: *const RmDataset,
    config: *const RmGbtConfig,
    out: *mut *mut RmModel,
) -> RmStatus {
    guard(|| {
        let ds = &nonnull(ds, "dataset")?.0;
        let cfg: GbtConfig = config.as_ref().map_or_else(GbtConfig::default, |c| (*c).into());
        put(out, RmModel(Model::Gbt(train_gbt(ds, &cfg)?)))
    })
}

/// Writes one probability per row of `ds` into `probs`, which must have
/// room for `len` values with `len == rm_dataset_n_rows(ds)`. Columns are
/// matched to the model by name.
///
/// # Safety
/// Handles must come from this library; `probs` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rm_model_predict(
    model: *const RmModel,
    ds: *const RmDataset,
    probs: *mut f64,
    len: usize,
) -> RmStatus {
    guard(|| {
        let model = &nonnull(model, "model")?.0;
        let ds = &nonnull(ds, "dataset")?.0;
        if len != ds.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: ds.n_rows(),
                actual: len,
            }
            .into());
        }
        if probs.is_null() && len > 0 {
            return Err(Fail::Null("probs"));
        }
        let p = model.predict(ds)?;
        if len > 0 {
            std::slice::from_raw_parts_mut(probs, len).copy_from_slice(&p);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rm_model_save(model: *const RmModel, path: *const c_char) -> RmStatus {
    guard(|| {
        let model = &nonnull(model, "model")?.0;
        model.save(PathBuf::from(string(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rm_model_load(path: *const c_char, out: *mut *mut RmModel) -> RmStatus {
    guard(|| {
        let path = PathBuf::from(string(path, "path")?);
        put(out, RmModel(Model::load(path)?))
    })
}

/// Number of input features the model expects, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn rm_model_n_features(model: *const RmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.feature_names().len())
}

/// # Safety
/// `model` must be NULL or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rm_model_free(model: *mut RmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Area under the ROC curve, ties counted as one half.
///
/// # Safety
/// `labels` and `scores` must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rm_roc_auc(
    labels: *const u8,
    scores: *const f64,
    n: usize,
    out: *mut f64,
) -> RmStatus {
    guard(|| {
        let labels = slice(labels, n, "labels")?;
        let scores = slice(scores, n, "scores")?;
        let auc = evaluation::roc_auc(labels, scores)?;
        *(out.as_mut().ok_or(Fail::Null("out"))?) = auc;
        Ok(())
    })
}

/// Threshold metrics at 0.5 plus AUC.
///
/// # Safety
/// `labels` and `probs` must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rm_metrics(
    labels: *const u8,
    probs: *const f64,
    n: usize,
    out: *mut RmMetrics,
) -> RmStatus {
    guard(|| {
        let labels = slice(labels, n, "labels")?;
        let probs = slice(probs, n, "probs")?;
        let m = evaluation::evaluate_predictions(labels, probs)?;
        *(out.as_mut().ok_or(Fail::Null("out"))?) = RmMetrics {
            accuracy: m.accuracy,
            auc: m.auc,
            recall: m.recall,
            precision: m.precision,
            f1: m.f1,
        };
        Ok(())
    })
}

/// Signed-rank test of the paired differences `a - b`.
///
/// # Safety
/// `a` and `b` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rm_wilcoxon(
    a: *const f64,
    b: *const f64,
    n: usize,
    alternative: RmAlternative,
    out: *mut RmTestResult,
) -> RmStatus {
    guard(|| {
        let a = slice(a, n, "a")?;
        let b = slice(b, n, "b")?;
        let alt = match alternative {
            RmAlternative::Greater => Alternative::Greater,
            RmAlternative::Less => Alternative::Less,
            RmAlternative::TwoSided => Alternative::TwoSided,
        };
        let r = stats::wilcoxon_signed_rank(a, b, alt)?;
        *(out.as_mut().ok_or(Fail::Null("out"))?) = RmTestResult {
            statistic: r.statistic,
            p_value: r.p_value,
            n_effective: r.n_effective,
            exact: i32::from(r.method == TestMethod::Exact),
        };
        Ok(())
    })
}

/// Per-comparison level `alpha / m`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rm_bonferroni_alpha(alpha: f64, m: usize, out: *mut f64) -> RmStatus {
    guard(|| {
        let a = stats::bonferroni_alpha(alpha, m)?;
        *(out.as_mut().ok_or(Fail::Null("out"))?) = a;
        Ok(())
    })
}
