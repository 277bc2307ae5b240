use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use riskmodel_ffi::*;

fn last_error() -> String {
    let p = rm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synth(rows: usize, seed: u64) -> *mut RmDataset {
    let mut raw = ptr::null_mut();
    let st = unsafe { rm_dataset_synth(rows, 4, 2, 4, 0.5, 0.05, seed, &mut raw) };
    assert_eq!(st, RmStatus::Ok);
    let mut clean = ptr::null_mut();
    assert_eq!(unsafe { rm_dataset_preprocess(raw, &mut clean) }, RmStatus::Ok);
    unsafe { rm_dataset_free(raw) };
    clean
}

#[test]
fn header_is_generated() {
    let h = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/riskmodel.h");
    let text = std::fs::read_to_string(&h).unwrap();
    for name in [
        "rm_dataset_new",
        "rm_train_gbt",
        "rm_model_predict",
        "rm_wilcoxon",
        "RM_STATUS_NULL_POINTER",
        "typedef struct RmModel RmModel;",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    if Command::new("cc").arg("--version").output().is_ok() {
        let out = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
            .arg(&h)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn train_predict_save_load() {
    let ds = synth(400, 3);
    let n = unsafe { rm_dataset_n_rows(ds) };
    assert_eq!(n, 400);
    // preprocessing keeps row order, so the labels come straight from the generator
    let labels = riskmodel::synth::generate(&riskmodel::synth::SynthSpec {
        n_rows: 400,
        n_informative: 4,
        n_redundant: 2,
        n_noise: 4,
        positive_rate: 0.5,
        missing_rate: 0.05,
        seed: 3,
        ..Default::default()
    })
    .unwrap()
    .dataset
    .target()
    .to_vec();

    let mut cfg = rm_gbt_config_default();
    cfg.n_estimators = 30;
    let mut gbt = ptr::null_mut();
    assert_eq!(unsafe { rm_train_gbt(ds, &cfg, &mut gbt) }, RmStatus::Ok);
    assert_eq!(unsafe { rm_model_n_features(gbt) }, unsafe { rm_dataset_n_features(ds) });

    let mut probs = vec![0.0; n];
    assert_eq!(unsafe { rm_model_predict(gbt, ds, probs.as_mut_ptr(), n) }, RmStatus::Ok);
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    let mut auc = 0.0;
    assert_eq!(
        unsafe { rm_roc_auc(labels.as_ptr(), probs.as_ptr(), n, &mut auc) },
        RmStatus::Ok
    );
    assert!(auc > 0.8, "training auc {auc}");

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { rm_model_save(gbt, path.as_ptr()) }, RmStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { rm_model_load(path.as_ptr(), &mut back) }, RmStatus::Ok);
    let mut again = vec![0.0; n];
    assert_eq!(unsafe { rm_model_predict(back, ds, again.as_mut_ptr(), n) }, RmStatus::Ok);
    assert_eq!(probs, again);

    let mut lr = ptr::null_mut();
    assert_eq!(unsafe { rm_train_logistic(ds, &mut lr) }, RmStatus::Ok);
    let mut m = RmMetrics::default();
    assert_eq!(unsafe { rm_model_predict(lr, ds, probs.as_mut_ptr(), n) }, RmStatus::Ok);
    assert_eq!(
        unsafe { rm_metrics(labels.as_ptr(), probs.as_ptr(), n, &mut m) },
        RmStatus::Ok
    );
    assert!(m.auc > 0.7 && m.accuracy > 0.6);

    unsafe {
        rm_model_free(gbt);
        rm_model_free(back);
        rm_model_free(lr);
        rm_dataset_free(ds);
    }
}

#[test]
fn arrays_and_names() {
    let values = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let target = [0u8, 1, 1];
    let names = [CString::new("a").unwrap(), CString::new("b").unwrap()];
    let ptrs: Vec<_> = names.iter().map(|c| c.as_ptr()).collect();
    let mut ds = ptr::null_mut();
    let st = unsafe { rm_dataset_new(values.as_ptr(), target.as_ptr(), 3, 2, ptrs.as_ptr(), &mut ds) };
    assert_eq!(st, RmStatus::Ok);
    assert_eq!(unsafe { rm_dataset_n_features(ds) }, 2);
    unsafe { rm_dataset_free(ds) };

    let bad = [0u8, 2, 1];
    let st = unsafe { rm_dataset_new(values.as_ptr(), bad.as_ptr(), 3, 2, ptr::null(), &mut ds) };
    assert_eq!(st, RmStatus::InvalidInput);
    assert!(!last_error().is_empty());
}

#[test]
fn error_codes() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rm_train_logistic(ptr::null(), &mut out) }, RmStatus::NullPointer);
    assert!(last_error().contains("null"));

    let path = CString::new("/nonexistent/x.csv").unwrap();
    let target = CString::new("target").unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(
        unsafe { rm_dataset_load_csv(path.as_ptr(), target.as_ptr(), &mut ds) },
        RmStatus::Io
    );
    assert!(ds.is_null());

    let ok = synth(100, 1);
    let mut cfg = rm_gbt_config_default();
    cfg.learning_rate = 0.0;
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rm_train_gbt(ok, &cfg, &mut m) }, RmStatus::InvalidConfig);

    let mut lr = ptr::null_mut();
    assert_eq!(unsafe { rm_train_logistic(ok, &mut lr) }, RmStatus::Ok);
    let mut buf = vec![0.0; 5];
    assert_eq!(
        unsafe { rm_model_predict(lr, ok, buf.as_mut_ptr(), 5) },
        RmStatus::DimensionMismatch
    );

    // a successful call clears the message
    let mut a = 0.0;
    assert_eq!(unsafe { rm_bonferroni_alpha(0.1, 4, &mut a) }, RmStatus::Ok);
    assert!(rm_last_error().is_null());
    assert!((a - 0.025).abs() < 1e-15);
    unsafe {
        rm_model_free(lr);
        rm_dataset_free(ok);
    }
}

#[test]
fn wilcoxon_exact() {
    let a: Vec<f64> = (1..=10).map(|i| i as f64).collect();
    let b = vec![0.0; 10];
    let mut r = RmTestResult::default();
    let st = unsafe { rm_wilcoxon(a.as_ptr(), b.as_ptr(), 10, RmAlternative::Greater, &mut r) };
    assert_eq!(st, RmStatus::Ok);
    assert_eq!(r.p_value, 1.0 / 1024.0);
    assert_eq!(r.statistic, 55.0);
    assert_eq!(r.n_effective, 10);
    assert_eq!(r.exact, 1);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
