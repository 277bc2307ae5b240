use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use riskmodel::dataset::{
    apply_preprocessor, drop_high_missing, fit_preprocessor, load_csv, PreprocessStats,
};
use riskmodel::evaluation::{
    evaluate_predictions, repeated_cv, write_cv_table, Metric, ModelSpec, Pipeline, Tuning,
    MISSING_THRESHOLD,
};
use riskmodel::experiment::{run_experiment, write_importance, ExperimentConfig};
use riskmodel::feature_selection::{read_name_list, select_features, FsMethod};
use riskmodel::hpo::{
    apply_params, default_domain, Params, Strategy, TpeConfig, TrialHistory,
};
use riskmodel::models::{feature_importance, train_gbt, train_logistic, GbtConfig, Model};
use riskmodel::stats::{
    directional_comparison, pairwise_comparison, write_comparisons, Alternative, ComparisonMatrix,
};
use riskmodel::synth::{generate, SynthSpec};
use riskmodel::{Error, Result};

/// `println!` that stops quietly when stdout is closed early.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Business-risk modelling toolkit.
#[derive(Parser)]
#[command(name = "riskmodel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known informative columns.
    Synth(SynthArgs),
    /// Drop sparse columns, impute medians and standardize.
    Preprocess(PreprocessArgs),
    /// Rank features and keep the top k (one per cluster for Cluster).
    Select(SelectArgs),
    /// Tune boosting hyper-parameters by inner cross-validated AUC.
    Tune(TuneArgs),
    /// Fit a model on a preprocessed dataset.
    Train(TrainArgs),
    /// Score a saved model, or run repeated CV of one pipeline.
    Evaluate(EvaluateArgs),
    /// Pairwise signed-rank tests between series.
    Compare(CompareArgs),
    /// Split-count importance of a saved boosted model.
    Importance(ImportanceArgs),
    /// Run the full experiment from a config file.
    Run(RunArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a 0/1 target column.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "target")]
    target: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also write the informative column names, one per line.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "target")]
    target: String,
    #[arg(long, default_value_t = 2000)]
    rows: usize,
    #[arg(long, default_value_t = 10)]
    informative: usize,
    #[arg(long, default_value_t = 10)]
    redundant: usize,
    #[arg(long, default_value_t = 40)]
    noise: usize,
    #[arg(long, default_value_t = 0.52)]
    positive_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    missing_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output CSV of imputed, standardized values.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the fitted statistics.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Apply previously fitted statistics instead of fitting.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// Name list output; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GbtArgs {
    #[arg(long, default_value_t = 100)]
    n_estimators: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 6)]
    max_depth: usize,
    #[arg(long, default_value_t = 31)]
    max_leaves: usize,
    #[arg(long, default_value_t = 1.0)]
    subsample: f64,
    #[arg(long, default_value_t = 1.0)]
    colsample_bytree: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    min_child_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GbtArgs {
    fn config(&self) -> GbtConfig {
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
            seed: self.seed,
            ..GbtConfig::default()
        }
    }
}

#[derive(Args)]
struct TuneArgs {
    /// Preprocessed CSV.
    #[command(flatten)]
    data: DataArgs,
    /// Restrict to the names in this file.
    #[arg(long)]
    features: Option<PathBuf>,
    /// RS or TPE.
    #[arg(long, default_value = "TPE")]
    strategy: String,
    #[arg(long, default_value_t = 20)]
    n_trials: usize,
    #[arg(long, default_value_t = 5)]
    inner_k: usize,
    /// Trial log; an existing log with the same strategy and seed is resumed.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    gbt: GbtArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Preprocessed CSV.
    #[command(flatten)]
    data: DataArgs,
    /// lr or gbt.
    #[arg(long)]
    model: String,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Take tuned values from the best trial of this log.
    #[arg(long)]
    trials: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    gbt: GbtArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Saved model to score on the data. Without it, run repeated CV.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "Correlation")]
    fs: String,
    /// LR, XGB, XGB_RS or XGB_TPE (CV mode).
    #[arg(long, default_value = "LR")]
    pipeline: String,
    #[arg(long, default_value_t = 50)]
    n_features: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 20)]
    n_trials: usize,
    #[arg(long, default_value_t = 5)]
    inner_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CV table output (CV mode).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Either a `key,value` CV table or a CSV whose columns are series.
    #[arg(long)]
    input: PathBuf,
    /// Metric to compare when the input is a CV table.
    #[arg(long, default_value = "auc")]
    criterion: String,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// greater, less, two_sided, or directional (orient each pair by mean).
    #[arg(long, default_value = "directional")]
    alternative: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated selection methods.
    #[arg(long, value_delimiter = ',')]
    fs: Option<Vec<String>>,
    /// Comma-separated models: LR, GBT.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Comma-separated tuning strategies: none, RS, TPE.
    #[arg(long, value_delimiter = ',')]
    hpo: Option<Vec<String>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    n_features: Option<usize>,
    #[arg(long)]
    n_trials: Option<usize>,
    #[arg(long)]
    inner_k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sidedness: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load_features(ds: riskmodel::dataset::Dataset, features: &Option<PathBuf>) -> Result<riskmodel::dataset::Dataset> {
    match features {
        Some(path) => ds.select_features(&read_name_list(path)?),
        None => Ok(ds),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let s = generate(&SynthSpec {
        n_rows: a.rows,
        n_informative: a.informative,
        n_redundant: a.redundant,
        n_noise: a.noise,
        positive_rate: a.positive_rate,
        missing_rate: a.missing_rate,
        seed: a.seed,
        ..SynthSpec::default()
    })?;
    s.dataset.write_csv(&a.out, &a.target)?;
    if let Some(t) = &a.truth {
        s.write_truth(t)?;
    }
    say!(
        "wrote {} rows x {} features ({} positives) to {}",
        s.dataset.n_rows(),
        s.dataset.n_features(),
        s.dataset.positive_count(),
        a.out.display()
    );
    Ok(())
}

fn cmd_preprocess(a: PreprocessArgs) -> Result<()> {
    let ds = load_csv(&a.data.data, &a.data.target)?;
    let (ds, stats) = match &a.stats {
        Some(p) => {
            let stats = PreprocessStats::read_tsv(p)?;
            (ds.select_features(&stats.feature_names)?, stats)
        }
        None => {
            let kept = drop_high_missing(&ds, MISSING_THRESHOLD)?;
            let stats = fit_preprocessor(&kept)?;
            (kept, stats)
        }
    };
    let z = apply_preprocessor(&ds, &stats)?;
    z.write_csv(&a.out, &a.data.target)?;
    if let Some(p) = &a.stats_out {
        stats.write_tsv(p)?;
    }
    say!("wrote {} features to {}", z.n_features(), a.out.display());
    Ok(())
}

fn cmd_select(a: SelectArgs) -> Result<()> {
    let method: FsMethod = a.method.parse()?;
    let ds = drop_high_missing(&load_csv(&a.data.data, &a.data.target)?, MISSING_THRESHOLD)?;
    let z = apply_preprocessor(&ds, &fit_preprocessor(&ds)?)?;
    let sel = select_features(&z, method, a.k)?;
    match &a.out {
        Some(p) => {
            sel.write(p)?;
            say!("wrote {} names to {}", sel.selected.len(), p.display());
        }
        None => sel.selected.iter().for_each(|n| say!("{n}")),
    }
    Ok(())
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let strategy: Strategy = a.strategy.parse()?;
    let ds = load_features(load_csv(&a.data.data, &a.data.target)?, &a.features)?;
    let base = a.gbt.config();
    base.validate()?;
    let mut history = match TrialHistory::read_tsv(&a.out) {
        Ok(h) if h.strategy == strategy && h.seed == a.gbt.seed => h,
        _ => TrialHistory::new(strategy, a.gbt.seed),
    };
    let inner_seed = a.gbt.seed;
    let mut objective = |p: &Params| {
        riskmodel::evaluation::cv_auc_loss(&ds, &apply_params(&base, p)?, a.inner_k, inner_seed)
    };
    history.extend(&mut objective, &default_domain(), a.n_trials, &TpeConfig::default())?;
    history.write_tsv(&a.out)?;
    let best = history.best().expect("at least one trial");
    say!("best trial {} loss {}", best.index, best.loss);
    for (k, v) in &best.params {
        say!("  {k} = {v}");
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let ds = load_features(load_csv(&a.data.data, &a.data.target)?, &a.features)?;
    let model = match a.model.to_ascii_lowercase().as_str() {
        "lr" | "logistic" => Model::Logistic(train_logistic(&ds)?),
        "gbt" | "xgb" => {
            let mut cfg = a.gbt.config();
            if let Some(t) = &a.trials {
                let h = TrialHistory::read_tsv(t)?;
                cfg = apply_params(&cfg, &h.best().expect("non-empty log").params)?;
            }
            Model::Gbt(train_gbt(&ds, &cfg)?)
        }
        m => return Err(Error::InvalidConfig(format!("unknown model `{m}` (expected lr or gbt)"))),
    };
    model.save(&a.out)?;
    say!("saved model to {}", a.out.display());
    Ok(())
}

fn parse_pipeline_label(label: &str, a: &EvaluateArgs) -> Result<ModelSpec> {
    let tuning = |strategy| {
        Some(Tuning {
            strategy,
            n_trials: a.n_trials,
            inner_k: a.inner_k,
            tpe: TpeConfig::default(),
        })
    };
    let config = GbtConfig::default();
    match label.to_ascii_uppercase().as_str() {
        "LR" => Ok(ModelSpec::Logistic),
        "XGB" | "GBT" => Ok(ModelSpec::Gbt { config, tuning: None }),
        "XGB_RS" => Ok(ModelSpec::Gbt { config, tuning: tuning(Strategy::Random) }),
        "XGB_TPE" => Ok(ModelSpec::Gbt { config, tuning: tuning(Strategy::Tpe) }),
        _ => Err(Error::InvalidConfig(format!("unknown pipeline model `{label}`"))),
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let ds = load_csv(&a.data.data, &a.data.target)?;
    if let Some(path) = &a.model {
        let model = Model::load(path)?;
        let m = evaluate_predictions(ds.target(), &model.predict(&ds)?)?;
        for metric in Metric::ALL {
            say!("{metric}\t{}", m.get(metric));
        }
        return Ok(());
    }
    let pipeline = Pipeline {
        fs: a.fs.parse()?,
        n_features: a.n_features,
        model: parse_pipeline_label(&a.pipeline, &a)?,
    };
    let recs = repeated_cv(&ds, &pipeline, a.k, a.repeats, a.seed)?;
    for r in recs.values() {
        say!("{}\t{:.4} ± {:.4}", r.key, r.mean, r.sd);
    }
    if let Some(out) = &a.out {
        write_cv_table(out, recs.values())?;
    }
    Ok(())
}

/// Series from a CV table (one per record of the criterion) or from columns.
fn read_series(path: &Path, criterion: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().eq(["key", "value"]) {
        let suffix = format!("_{}", criterion.parse::<Metric>()?);
        let records = riskmodel::evaluation::read_cv_table(path)?;
        return Ok(records
            .into_iter()
            .filter_map(|rec| {
                rec.key
                    .strip_suffix(&suffix)
                    .map(|stem| (stem.to_string(), rec.per_repeat))
            })
            .collect());
    }
    let mut series: Vec<(String, Vec<f64>)> =
        header.iter().map(|h| (h.to_string(), Vec::new())).collect();
    for rec in r.records() {
        let rec = rec?;
        for (i, field) in rec.iter().enumerate() {
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("{}: bad number `{field}`", path.display())))?;
            series[i].1.push(v);
        }
    }
    Ok(series)
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let series = read_series(&a.input, &a.criterion)?;
    let matrix: ComparisonMatrix = if a.alternative.eq_ignore_ascii_case("directional") {
        directional_comparison(&series, &a.criterion, a.alpha)?
    } else {
        let alt: Alternative = a.alternative.parse()?;
        pairwise_comparison(&series, &a.criterion, a.alpha, alt)?
    };
    say!(
        "{}: alpha {} / m {} = {}",
        matrix.criterion, matrix.alpha, matrix.m, matrix.corrected_alpha
    );
    for c in &matrix.comparisons {
        say!(
            "{} vs. {}\t{}\tW = {}\tn = {}\tp = {}\t{}",
            c.first,
            c.second,
            c.alternative,
            c.result.statistic,
            c.result.n_effective,
            c.result.p_value,
            c.decision.label()
        );
    }
    if let Some(out) = &a.out {
        write_comparisons(out, std::slice::from_ref(&matrix))?;
    }
    Ok(())
}

fn cmd_importance(a: ImportanceArgs) -> Result<()> {
    let imp = match Model::load(&a.model)? {
        Model::Gbt(m) => feature_importance(&m),
        Model::Logistic(_) => {
            return Err(Error::InvalidInput("importance needs a boosted model".into()))
        }
    };
    for (f, c) in &imp {
        say!("{f}\t{c}");
    }
    if let Some(out) = &a.out {
        write_importance(out, &imp)?;
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = a.$field.clone() {
                cfg.$field = v;
            }
        )*};
    }
    set!(target, fs, models, hpo, k, repeats, n_features, n_trials, inner_k, alpha, sidedness, seed);
    if let Some(d) = &a.data {
        cfg.data = Some(d.clone());
    }
    let out = run_experiment(&cfg, &a.output)?;
    say!("wrote artifacts to {}", a.output.display());
    for (label, f) in &out.best_fs {
        say!("best selection for {label}: {f}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Select(a) => cmd_select(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Importance(a) => cmd_importance(a),
        Command::Run(a) => cmd_run(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
