//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.
//!
//!     cargo test -p riskmodel --test acceptance

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use riskmodel::dataset::{apply_preprocessor, drop_high_missing, fit_preprocessor, Dataset};
use riskmodel::evaluation::{
    confusion, metrics_from_confusion, repeated_cv, roc_auc, Metric, ModelSpec, Pipeline, Tuning,
    MISSING_THRESHOLD,
};
use riskmodel::experiment::{run_experiment, ExperimentConfig};
use riskmodel::feature_selection::{
    cluster_variables, select_features, variance_explained_curve, FsMethod,
};
use riskmodel::hpo::{default_domain, optimize, sample_uniform, ParamKind, Params, Strategy, TpeConfig};
use riskmodel::models::{leaf_weight, predict_gbt, split_gain, train_gbt, GbtConfig};
use riskmodel::rng::rng_from;
use riskmodel::stats::{bonferroni_alpha, wilcoxon_signed_rank, Alternative, TestMethod};
use riskmodel::synth::{generate, SynthSpec, Synthetic};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn preprocessed(s: &Synthetic) -> Dataset {
    let kept = drop_high_missing(&s.dataset, MISSING_THRESHOLD).unwrap();
    let stats = fit_preprocessor(&kept).unwrap();
    apply_preprocessor(&kept, &stats).unwrap()
}

fn c1_wilcoxon_floor() -> Outcome {
    let a: Vec<f64> = (1..=10).map(|i| 0.80 + 0.005 * i as f64).collect();
    let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x - 0.001 * (i + 1) as f64).collect();
    let r = wilcoxon_signed_rank(&a, &b, Alternative::Greater).map_err(|e| e.to_string())?;
    ensure!(r.method == TestMethod::Exact, "expected exact method, got {:?}", r.method);
    ensure!(r.n_effective == 10, "n_effective {}", r.n_effective);
    ensure!(r.p_value == 1.0 / 1024.0, "p = {}", r.p_value);
    ensure!(r.p_value == 0.0009765625, "p = {}", r.p_value);
    Ok(format!("p = {}", r.p_value))
}

fn c2_bonferroni() -> Outcome {
    let ten = bonferroni_alpha(0.1, 10).map_err(|e| e.to_string())?;
    let three = bonferroni_alpha(0.1, 3).map_err(|e| e.to_string())?;
    ensure!(ten == 0.01, "m=10 gives {ten}");
    ensure!(three == 0.1 / 3.0, "m=3 gives {three}");
    ensure!(format!("{three:.4}") == "0.0333", "m=3 prints as {three:.4}");
    Ok(format!("m=10 -> {ten}, m=3 -> {three:.4}"))
}

/// Two-sided Kolmogorov-Smirnov p-value (asymptotic, small-sample corrected).
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * (-2.0 * k * k * lambda * lambda).exp();
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn c3_domain() -> Outcome {
    let expected = [
        ("learning_rate", 0.005, 0.2, ParamKind::Real),
        ("subsample", 0.8, 1.0, ParamKind::Real),
        ("max_leaves", 10.0, 200.0, ParamKind::Integer),
        ("max_depth", 5.0, 30.0, ParamKind::Integer),
        ("gamma", 0.0, 0.02, ParamKind::Real),
        ("colsample_bytree", 0.8, 1.0, ParamKind::Real),
        ("min_child_weight", 0.0, 10.0, ParamKind::Real),
    ];
    let domain = default_domain();
    ensure!(domain.params().len() == 7, "{} parameters", domain.params().len());
    for (name, lo, hi, kind) in expected {
        let p = domain
            .params()
            .iter()
            .find(|p| p.name == name)
            .ok_or(format!("missing {name}"))?;
        ensure!(
            p.lower == lo && p.upper == hi && p.kind == kind,
            "{name}: [{}, {}] {:?}",
            p.lower,
            p.upper,
            p.kind
        );
    }
    let mut rng = rng_from(2024);
    let mut lr = Vec::with_capacity(10_000);
    for i in 0..10_000 {
        let draw = sample_uniform(&domain, &mut rng);
        for p in domain.params() {
            let v = draw[&p.name];
            ensure!(v >= p.lower && v <= p.upper, "draw {i}: {} = {v}", p.name);
            if p.kind == ParamKind::Integer {
                ensure!(v.fract() == 0.0, "draw {i}: {} = {v} not integral", p.name);
            }
        }
        lr.push(draw["learning_rate"]);
    }
    lr.sort_by(f64::total_cmp);
    let n = lr.len() as f64;
    let d = lr
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x - 0.005) / (0.2 - 0.005);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    let p = ks_p_value(d, lr.len());
    ensure!(p > 0.01, "KS D = {d:.5}, p = {p:.4}");
    Ok(format!("bounds ok, 10000 draws in range, KS D = {d:.5} p = {p:.3}"))
}

fn c4_metric_oracle() -> Outcome {
    let mut rng = rng_from(44);
    let mut checked = 0;
    let mut undefined = 0;
    for set in 0..1000 {
        let n = rng.gen_range(1..=60);
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        // A coarse grid puts some predictions exactly on the threshold.
        let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=20) as f64 / 20.0).collect();
        let (mut tp, mut fp, mut tn, mut fneg) = (0u32, 0u32, 0u32, 0u32);
        for (&y, &p) in labels.iter().zip(&probs) {
            match (y == 1, p >= 0.5) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fneg += 1,
            }
        }
        let cm = confusion(&labels, &probs, 0.5).map_err(|e| e.to_string())?;
        ensure!(
            (cm.tp, cm.fp, cm.tn, cm.fn_) == (tp as usize, fp as usize, tn as usize, fneg as usize),
            "set {set}: confusion {cm:?}"
        );
        let got = metrics_from_confusion(&cm);
        if tp + fneg == 0 || tp + fp == 0 {
            ensure!(got.is_err(), "set {set}: undefined ratio accepted");
            undefined += 1;
            continue;
        }
        let m = got.map_err(|e| e.to_string())?;
        let acc = f64::from(tp + tn) / f64::from(n);
        let rec = f64::from(tp) / f64::from(tp + fneg);
        let prec = f64::from(tp) / f64::from(tp + fp);
        let f1 = if tp == 0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
        ensure!(m.accuracy == acc, "set {set}: accuracy {} vs {acc}", m.accuracy);
        ensure!(m.recall == rec, "set {set}: recall {} vs {rec}", m.recall);
        ensure!(m.precision == prec, "set {set}: precision {} vs {prec}", m.precision);
        ensure!(m.f1 == f1, "set {set}: f1 {} vs {f1}", m.f1);
        checked += 1;
    }
    Ok(format!("{checked} sets equal, {undefined} undefined sets rejected"))
}

fn c5_auc_oracle() -> Outcome {
    let mut rng = rng_from(55);
    let mut worst: f64 = 0.0;
    let mut with_ties = 0;
    for set in 0..200 {
        let n = rng.gen_range(2..=100);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        labels[0] = 1;
        labels[1] = 0;
        let levels = if set % 2 == 0 { 5 } else { 1_000_000 };
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        let distinct: BTreeSet<u64> = scores.iter().map(|s| s.to_bits()).collect();
        if distinct.len() < n {
            with_ties += 1;
        }
        let auc = roc_auc(&labels, &scores).map_err(|e| e.to_string())?;
        let diff = (auc - wins / pairs).abs();
        ensure!(diff <= 1e-12, "set {set}: {auc} vs {}", wins / pairs);
        worst = worst.max(diff);
    }
    Ok(format!("200 sets ({with_ties} with ties), max |diff| = {worst:.1e}"))
}

/// Minimizer of `g w + (h + λ) w² / 2` by bisection on the derivative.
fn argmin_quadratic(g: f64, hl: f64) -> f64 {
    let (mut lo, mut hi) = (-1e4, 1e4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g + hl * mid > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c6_gbt_objective() -> Outcome {
    let leaf_obj = |g: f64, h: f64, lambda: f64| {
        let w = argmin_quadratic(g, h + lambda);
        g * w + 0.5 * (h + lambda) * w * w
    };
    let mut rng = rng_from(66);
    let (mut worst_w, mut worst_gain): (f64, f64) = (0.0, 0.0);
    for i in 0..1000 {
        let gl: f64 = rng.gen_range(-10.0..10.0);
        let gr: f64 = rng.gen_range(-10.0..10.0);
        let hl: f64 = rng.gen_range(0.01..10.0);
        let hr: f64 = rng.gen_range(0.01..10.0);
        let lambda: f64 = rng.gen_range(0.0..5.0);
        let gamma: f64 = rng.gen_range(0.0..1.0);

        let w = leaf_weight(gl, hl, lambda).map_err(|e| e.to_string())?;
        let dw = (w - argmin_quadratic(gl, hl + lambda)).abs();
        ensure!(dw <= 1e-6, "draw {i}: leaf weight off by {dw:e}");

        let before = leaf_obj(gl + gr, hl + hr, lambda) + gamma;
        let after = leaf_obj(gl, hl, lambda) + leaf_obj(gr, hr, lambda) + 2.0 * gamma;
        let gain = split_gain(gl, hl, gr, hr, lambda, gamma).map_err(|e| e.to_string())?;
        let dg = (gain - (before - after)).abs();
        ensure!(dg <= 1e-6, "draw {i}: split gain off by {dg:e}");
        worst_w = worst_w.max(dw);
        worst_gain = worst_gain.max(dg);
    }
    Ok(format!("1000 draws, max |dw| = {worst_w:.1e}, max |dgain| = {worst_gain:.1e}"))
}

fn c7_boosting_descent() -> Outcome {
    let ds = preprocessed(&generate(&SynthSpec::default()).map_err(|e| e.to_string())?);
    let cfg = GbtConfig {
        n_estimators: 100,
        learning_rate: 0.1,
        gamma: 0.0,
        subsample: 1.0,
        colsample_bytree: 1.0,
        ..GbtConfig::default()
    };
    let model = train_gbt(&ds, &cfg).map_err(|e| e.to_string())?;
    let logloss = |b: usize| -> Result<f64, String> {
        let p = predict_gbt(&model.truncated(b), &ds).map_err(|e| e.to_string())?;
        Ok(ds
            .target()
            .iter()
            .zip(&p)
            .map(|(&y, &p)| if y == 1 { -p.ln() } else { -(1.0 - p).ln() })
            .sum())
    };
    let first = logloss(0)?;
    let mut prev = first;
    for b in 1..=100 {
        let l = logloss(b)?;
        ensure!(l <= prev + 1e-9, "round {b}: loss {l} > {prev}");
        prev = l;
    }
    Ok(format!("summed logloss {first:.2} -> {prev:.2} over 100 rounds"))
}

fn c8_model_ordering() -> Outcome {
    let lr = Pipeline {
        fs: FsMethod::Correlation,
        n_features: 50,
        model: ModelSpec::Logistic,
    };
    let gbt = Pipeline {
        fs: FsMethod::Correlation,
        n_features: 50,
        model: ModelSpec::Gbt {
            config: GbtConfig::default(),
            tuning: Some(Tuning {
                strategy: Strategy::Random,
                n_trials: 3,
                inner_k: 2,
                tpe: TpeConfig::default(),
            }),
        },
    };
    let mut significant = 0;
    let mut lines = Vec::new();
    let mut margin_ok = true;
    for seed in 0..5 {
        let ds = generate(&SynthSpec::with_seed(seed)).map_err(|e| e.to_string())?.dataset;
        let a = repeated_cv(&ds, &gbt, 10, 10, seed).map_err(|e| e.to_string())?;
        let b = repeated_cv(&ds, &lr, 10, 10, seed).map_err(|e| e.to_string())?;
        let (a, b) = (&a[&Metric::Auc], &b[&Metric::Auc]);
        let margin = a.mean - b.mean;
        let t = wilcoxon_signed_rank(&a.per_repeat, &b.per_repeat, Alternative::Greater)
            .map_err(|e| e.to_string())?;
        if t.p_value < 0.05 {
            significant += 1;
        }
        margin_ok &= margin >= 0.01;
        let line = format!(
            "seed {seed}: GBT {:.4} LR {:.4} margin {margin:.4} p {:.6}",
            a.mean, b.mean, t.p_value
        );
        eprintln!("    {line}");
        lines.push(line);
    }
    ensure!(margin_ok, "margin below 0.01: {}", lines.join("; "));
    ensure!(significant >= 4, "significant on {significant}/5: {}", lines.join("; "));
    Ok(format!("margin >= 0.01 on 5/5, p < 0.05 on {significant}/5"))
}

/// Smooth bowl over the unit-scaled search box with an interior optimum.
fn synth_objective(params: &Params) -> f64 {
    let domain = default_domain();
    let centre = [0.3, 0.7, 0.25, 0.4, 0.6, 0.5, 0.35];
    let weight = [4.0, 1.0, 2.0, 1.0, 0.5, 1.0, 2.0];
    domain
        .params()
        .iter()
        .zip(centre.iter().zip(&weight))
        .map(|(p, (c, w))| {
            let u = (params[&p.name] - p.lower) / (p.upper - p.lower);
            w * (u - c).powi(2)
        })
        .sum()
}

fn c9_tpe_vs_rs() -> Outcome {
    let domain = default_domain();
    let tpe = TpeConfig::default();
    let mut wins = 0;
    for pair in 0..50u64 {
        let run = |s| {
            optimize(|p| Ok(synth_objective(p)), &domain, 50, s, &tpe, 9000 + pair)
                .map(|(best, _)| best.loss)
                .map_err(|e| e.to_string())
        };
        if run(Strategy::Tpe)? <= run(Strategy::Random)? {
            wins += 1;
        }
    }
    ensure!(wins >= 35, "TPE at least as good in {wins}/50 pairs");
    Ok(format!("TPE at least as good in {wins}/50 pairs"))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn c10_fs_sanity() -> Outcome {
    let s = generate(&SynthSpec::default()).map_err(|e| e.to_string())?;
    let ds = preprocessed(&s);
    // Noisy copy of each informative column, found by correlation.
    let copies: Vec<String> = s
        .informative
        .iter()
        .filter_map(|f| {
            let x = ds.column(ds.feature_index(f)?);
            ds.feature_names()
                .iter()
                .enumerate()
                .filter(|(_, g)| !s.informative.contains(g))
                .map(|(j, g)| (pearson(&x, &ds.column(j)).abs(), g))
                .filter(|(r, _)| *r >= 0.5)
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, g)| g.clone())
        })
        .collect();
    let mut counts = Vec::new();
    let mut short = Vec::new();
    for method in FsMethod::ALL {
        let sel = select_features(&ds, method, 50).map_err(|e| e.to_string())?;
        let hits = s.informative.iter().filter(|f| sel.selected.contains(f)).count();
        let via_copy = copies.iter().filter(|f| sel.selected.contains(f)).count();
        counts.push(format!("{method} {hits}"));
        if hits < 8 {
            short.push(format!(
                "{method} keeps {hits}/10 informative features ({via_copy} of their noisy copies)"
            ));
        }
    }
    ensure!(short.is_empty(), "{}; counts: {}", short.join("; "), counts.join(", "));

    let mut rng = rng_from(1010);
    let mut col = || (0..500).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>();
    let (x1, x3, e1, e2) = (col(), col(), col(), col());
    let mut values = Vec::with_capacity(2000);
    for r in 0..500 {
        values.extend([x1[r], x1[r] + 0.01 * e1[r], x3[r], x3[r] + 0.01 * e2[r]]);
    }
    let names = ["a1", "a2", "b1", "b2"].map(String::from).to_vec();
    let target = (0..500).map(|r| (r % 2) as u8).collect();
    let dup = Dataset::new(names, values, target).map_err(|e| e.to_string())?;
    let vc = cluster_variables(&dup, 2).map_err(|e| e.to_string())?;
    ensure!(vc.clusters == vec![vec![0, 1], vec![2, 3]], "clusters {:?}", vc.clusters);
    Ok(format!("informative kept: {}; duplicate groups recovered", counts.join(", ")))
}

fn c11_variance_explained() -> Outcome {
    let spec = SynthSpec {
        n_informative: 5,
        n_redundant: 5,
        n_noise: 10,
        ..SynthSpec::default()
    };
    let ds = preprocessed(&generate(&spec).map_err(|e| e.to_string())?);
    ensure!(ds.n_features() == 20, "{} features", ds.n_features());
    let curve = variance_explained_curve(&ds, 20).map_err(|e| e.to_string())?;
    ensure!(curve.len() == 20, "curve length {}", curve.len());
    for (i, w) in curve.windows(2).enumerate() {
        ensure!(w[1] >= w[0], "drops from {} to {} at {} clusters", w[0], w[1], i + 2);
    }
    ensure!(curve[19] == 1.0, "20 clusters explain {}", curve[19]);
    Ok(format!("{:.4} at 1 cluster -> {} at 20", curve[0], curve[19]))
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn c12_determinism() -> Outcome {
    let cfg = ExperimentConfig {
        k: 3,
        repeats: 2,
        n_features: 10,
        n_trials: 2,
        inner_k: 2,
        n_estimators: 20,
        hpo: vec!["none".into(), "RS".into(), "TPE".into()],
        synth_rows: 300,
        synth_noise: 10,
        seed: 12,
        ..ExperimentConfig::default()
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let t0 = Instant::now();
    run_experiment(&cfg, &a).map_err(|e| e.to_string())?;
    let once = t0.elapsed();
    run_experiment(&cfg, &b).map_err(|e| e.to_string())?;
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    ensure!(ta.len() >= 6, "only {} artifacts", ta.len());
    let names: Vec<_> = ta.iter().map(|(n, _)| n.as_str()).collect();
    ensure!(
        names == tb.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        "file lists differ"
    );
    for ((name, x), (_, y)) in ta.iter().zip(&tb) {
        ensure!(x == y, "{name} differs between runs");
    }
    Ok(format!(
        "{} artifacts byte-identical ({}), one run {:.1}s",
        ta.len(),
        names.join(" "),
        once.as_secs_f64()
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "wilcoxon floor", budget: secs(1), run: c1_wilcoxon_floor },
        Criterion { id: 2, name: "bonferroni constants", budget: secs(1), run: c2_bonferroni },
        Criterion { id: 3, name: "search domain", budget: secs(5), run: c3_domain },
        Criterion { id: 4, name: "metric oracle", budget: secs(5), run: c4_metric_oracle },
        Criterion { id: 5, name: "auc oracle", budget: secs(5), run: c5_auc_oracle },
        Criterion { id: 6, name: "gbt objective oracle", budget: secs(10), run: c6_gbt_objective },
        Criterion { id: 7, name: "boosting descent", budget: secs(60), run: c7_boosting_descent },
        Criterion { id: 8, name: "model ordering", budget: secs(30 * 60), run: c8_model_ordering },
        Criterion { id: 9, name: "tpe vs random search", budget: secs(20 * 60), run: c9_tpe_vs_rs },
        Criterion { id: 10, name: "feature selection sanity", budget: secs(120), run: c10_fs_sanity },
        Criterion { id: 11, name: "variance explained", budget: secs(60), run: c11_variance_explained },
        Criterion { id: 12, name: "determinism", budget: None, run: c12_determinism },
    ];
    let only: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let took = t0.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if took > b => Err(format!("took {took:.1?}, budget {b:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {}: {detail} [{:.2}s]", c.id, c.name, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
