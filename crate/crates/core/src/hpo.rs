//! Hyper-parameter search: uniform random search and a tree-structured
//! Parzen estimator (TPE) over a box of real and integer parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::models::GbtConfig;
use crate::rng::{derive_seed, rng_from, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Real,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower
            && v <= self.upper
            && (self.kind == ParamKind::Real || v.fract() == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDomain {
    params: Vec<ParamSpec>,
}

impl SearchDomain {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::config("search domain has no parameters"));
        }
        for (i, p) in params.iter().enumerate() {
            if !(p.lower < p.upper) || !p.lower.is_finite() || !p.upper.is_finite() {
                return Err(Error::config(format!(
                    "parameter {}: need finite lower < upper",
                    p.name
                )));
            }
            if p.kind == ParamKind::Integer && (p.lower.fract() != 0.0 || p.upper.fract() != 0.0) {
                return Err(Error::config(format!(
                    "integer parameter {} has non-integral bounds",
                    p.name
                )));
            }
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::config(format!("duplicate parameter {}", p.name)));
            }
        }
        Ok(SearchDomain { params })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn contains(&self, params: &Params) -> bool {
        params.len() == self.params.len()
            && self
                .params
                .iter()
                .all(|p| params.get(&p.name).is_some_and(|&v| p.contains(v)))
    }
}

pub type Params = BTreeMap<String, f64>;

/// The seven tuned boosting parameters and their search bounds.
pub fn default_domain() -> SearchDomain {
    let p = |name: &str, lower, upper, kind| ParamSpec {
        name: name.into(),
        lower,
        upper,
        kind,
    };
    use ParamKind::*;
    SearchDomain::new(vec![
        p("learning_rate", 0.005, 0.2, Real),
        p("subsample", 0.8, 1.0, Real),
        p("max_leaves", 10.0, 200.0, Integer),
        p("max_depth", 5.0, 30.0, Integer),
        p("gamma", 0.0, 0.02, Real),
        p("colsample_bytree", 0.8, 1.0, Real),
        p("min_child_weight", 0.0, 10.0, Real),
    ])
    .expect("static domain is valid")
}

fn sample_param(p: &ParamSpec, rng: &mut Rng) -> f64 {
    match p.kind {
        ParamKind::Real => rng.gen_range(p.lower..=p.upper),
        ParamKind::Integer => rng.gen_range(p.lower as i64..=p.upper as i64) as f64,
    }
}

pub fn sample_uniform(domain: &SearchDomain, rng: &mut Rng) -> Params {
    domain
        .params
        .iter()
        .map(|p| (p.name.clone(), sample_param(p, rng)))
        .collect()
}

/// Overlays tuned values on a base config. Unknown names are an error.
pub fn apply_params(base: &GbtConfig, params: &Params) -> Result<GbtConfig> {
    let mut cfg = base.clone();
    for (name, &v) in params {
        match name.as_str() {
            "learning_rate" => cfg.learning_rate = v,
            "subsample" => cfg.subsample = v,
            "max_leaves" => cfg.max_leaves = v.round() as usize,
            "max_depth" => cfg.max_depth = v.round() as usize,
            "gamma" => cfg.gamma = v,
            "colsample_bytree" => cfg.colsample_bytree = v,
            "min_child_weight" => cfg.min_child_weight = v,
            "n_estimators" => cfg.n_estimators = v.round() as usize,
            "lambda" => cfg.lambda = v,
            _ => return Err(Error::config(format!("unknown boosting parameter {name}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    pub n_startup: usize,
    pub gamma_quantile: f64,
    pub n_candidates: usize,
    /// Smallest kernel width as a fraction of the parameter range.
    pub bandwidth_floor: f64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            n_startup: 20,
            gamma_quantile: 0.25,
            n_candidates: 24,
            bandwidth_floor: 0.01,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_startup == 0 || self.n_candidates == 0 {
            return Err(Error::config("TPE n_startup and n_candidates must be positive"));
        }
        if !(self.gamma_quantile > 0.0 && self.gamma_quantile < 1.0) {
            return Err(Error::config("TPE gamma_quantile must lie in (0, 1)"));
        }
        if !(self.bandwidth_floor > 0.0 && self.bandwidth_floor <= 1.0) {
            return Err(Error::config("TPE bandwidth_floor must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "RS")]
    Random,
    #[serde(rename = "TPE")]
    Tpe,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "RS",
            Strategy::Tpe => "TPE",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RS" | "RANDOM" => Ok(Strategy::Random),
            "TPE" => Ok(Strategy::Tpe),
            _ => Err(Error::config(format!("unknown tuning strategy `{s}` (expected RS or TPE)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub params: Params,
    /// `+inf` when the objective produced a non-finite value.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialHistory {
    pub strategy: Strategy,
    pub seed: u64,
    pub trials: Vec<Trial>,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// One-dimensional Parzen estimator: truncated Gaussians at the
/// observations plus a uniform component over the whole interval.
struct Parzen {
    lo: f64,
    hi: f64,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    /// Normalizing mass of each kernel inside [lo, hi].
    masses: Vec<f64>,
    integer: bool,
}

impl Parzen {
    fn new(spec: &ParamSpec, observed: &[f64], floor: f64) -> Parzen {
        let (lo, hi) = match spec.kind {
            ParamKind::Real => (spec.lower, spec.upper),
            ParamKind::Integer => (spec.lower - 0.5, spec.upper + 0.5),
        };
        let range = hi - lo;
        let mut mus = observed.to_vec();
        mus.sort_by(f64::total_cmp);
        let sigmas: Vec<f64> = (0..mus.len())
            .map(|i| {
                let left = if i == 0 { lo } else { mus[i - 1] };
                let right = if i + 1 == mus.len() { hi } else { mus[i + 1] };
                // Widths shrink as observations accumulate but never below the floor.
                let min_width = (floor * range).max(range / (mus.len() + 1) as f64);
                (mus[i] - left).max(right - mus[i]).clamp(min_width, range)
            })
            .collect();
        let masses = mus
            .iter()
            .zip(&sigmas)
            .map(|(&m, &s)| std_normal_cdf((hi - m) / s) - std_normal_cdf((lo - m) / s))
            .collect();
        Parzen {
            lo,
            hi,
            mus,
            sigmas,
            masses,
            integer: spec.kind == ParamKind::Integer,
        }
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        let k = rng.gen_range(0..=self.mus.len());
        let x = if k == self.mus.len() {
            rng.gen_range(self.lo..self.hi)
        } else {
            loop {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                let x = self.mus[k] + self.sigmas[k] * z;
                if x >= self.lo && x < self.hi {
                    break x;
                }
            }
        };
        if self.integer {
            x.round().clamp(self.lo + 0.5, self.hi - 0.5)
        } else {
            x
        }
    }

    /// Log density at `x`; for integers, log probability of the cell.
    fn log_density(&self, x: f64) -> f64 {
        let w = 1.0 / (self.mus.len() + 1) as f64;
        let range = self.hi - self.lo;
        let mut total;
        if self.integer {
            let (a, b) = (x - 0.5, x + 0.5);
            total = w * (b - a) / range;
            for i in 0..self.mus.len() {
                let (m, s) = (self.mus[i], self.sigmas[i]);
                total += w * (std_normal_cdf((b - m) / s) - std_normal_cdf((a - m) / s))
                    / self.masses[i];
            }
        } else {
            total = w / range;
            for i in 0..self.mus.len() {
                let z = (x - self.mus[i]) / self.sigmas[i];
                let pdf = (-0.5 * z * z).exp()
                    / (self.sigmas[i] * (2.0 * std::f64::consts::PI).sqrt());
                total += w * pdf / self.masses[i];
            }
        }
        total.max(f64::MIN_POSITIVE).ln()
    }
}

/// Next point to evaluate given the completed trials.
pub fn tpe_suggest(
    trials: &[Trial],
    domain: &SearchDomain,
    cfg: &TpeConfig,
    rng: &mut Rng,
) -> Params {
    let finite: Vec<&Trial> = trials.iter().filter(|t| t.loss.is_finite()).collect();
    if trials.len() < cfg.n_startup || finite.is_empty() {
        return sample_uniform(domain, rng);
    }
    let mut ranked: Vec<&Trial> = trials.iter().collect();
    ranked.sort_by(|a, b| a.loss.total_cmp(&b.loss).then(a.index.cmp(&b.index)));
    let n_good = ((cfg.gamma_quantile * trials.len() as f64).ceil() as usize)
        .clamp(1, finite.len());
    let (good, bad) = ranked.split_at(n_good);

    let estimators: Vec<(Parzen, Parzen)> = domain
        .params
        .iter()
        .map(|p| {
            let values = |set: &[&Trial]| -> Vec<f64> {
                set.iter().map(|t| t.params[&p.name]).collect()
            };
            (
                Parzen::new(p, &values(good), cfg.bandwidth_floor),
                Parzen::new(p, &values(bad), cfg.bandwidth_floor),
            )
        })
        .collect();

    let mut best: Option<(f64, Params)> = None;
    for _ in 0..cfg.n_candidates {
        let mut cand = Params::new();
        let mut score = 0.0;
        for (p, (l, g)) in domain.params.iter().zip(&estimators) {
            let x = l.sample(rng).clamp(p.lower, p.upper);
            score += l.log_density(x) - g.log_density(x);
            cand.insert(p.name.clone(), x);
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cand));
        }
    }
    best.expect("n_candidates is positive").1
}

impl TrialHistory {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        TrialHistory {
            strategy,
            seed,
            trials: Vec::new(),
        }
    }

    /// Lowest-loss trial; the earliest wins ties.
    pub fn best(&self) -> Option<&Trial> {
        self.trials
            .iter()
            .min_by(|a, b| a.loss.total_cmp(&b.loss).then(a.index.cmp(&b.index)))
    }

    /// Evaluates trials until the history holds `n_trials`. Each trial draws
    /// from its own derived seed, so an interrupted history resumes exactly.
    pub fn extend<F>(
        &mut self,
        objective: &mut F,
        domain: &SearchDomain,
        n_trials: usize,
        tpe: &TpeConfig,
    ) -> Result<()>
    where
        F: FnMut(&Params) -> Result<f64>,
    {
        tpe.validate()?;
        while self.trials.len() < n_trials {
            let index = self.trials.len();
            let mut rng = rng_from(derive_seed(self.seed, index as u64));
            let params = match self.strategy {
                Strategy::Random => sample_uniform(domain, &mut rng),
                Strategy::Tpe => tpe_suggest(&self.trials, domain, tpe, &mut rng),
            };
            let loss = objective(&params)?;
            self.trials.push(Trial {
                index,
                params,
                loss: if loss.is_finite() { loss } else { f64::INFINITY },
            });
        }
        Ok(())
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let names: Vec<&String> = self
            .trials
            .first()
            .map(|t| t.params.keys().collect())
            .unwrap_or_default();
        let io = |e| Error::io(path, e);
        write!(w, "index\tstrategy\tseed\tloss").map_err(io)?;
        for n in &names {
            write!(w, "\t{n}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for t in &self.trials {
            write!(w, "{}\t{}\t{}\t{}", t.index, self.strategy, self.seed, t.loss).map_err(io)?;
            for v in t.params.values() {
                write!(w, "\t{v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(f).lines();
        let bad = |m: String| Error::Parse(format!("{}: {m}", path.display()));
        let header = lines
            .next()
            .ok_or_else(|| bad("empty trial log".into()))?
            .map_err(|e| Error::io(path, e))?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.len() < 4 || cols[..4] != ["index", "strategy", "seed", "loss"] {
            return Err(bad("unexpected header".into()));
        }
        let names = &cols[4..];
        let mut history: Option<TrialHistory> = None;
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != cols.len() {
                return Err(bad(format!("row has {} fields, expected {}", f.len(), cols.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
            let index: usize = f[0].parse().map_err(|_| bad("bad index".into()))?;
            let strategy: Strategy = f[1].parse()?;
            let seed: u64 = f[2].parse().map_err(|_| bad("bad seed".into()))?;
            let h = history.get_or_insert_with(|| TrialHistory::new(strategy, seed));
            if h.strategy != strategy || h.seed != seed || index != h.trials.len() {
                return Err(bad(format!("inconsistent trial {index}")));
            }
            let mut params = Params::new();
            for (n, v) in names.iter().zip(&f[4..]) {
                params.insert(n.to_string(), num(v)?);
            }
            h.trials.push(Trial {
                index,
                params,
                loss: num(f[3])?,
            });
        }
        history.ok_or_else(|| bad("no trials".into()))
    }
}

/// Runs `n_trials` evaluations and returns the best trial with the history.
pub fn optimize<F>(
    mut objective: F,
    domain: &SearchDomain,
    n_trials: usize,
    strategy: Strategy,
    tpe: &TpeConfig,
    seed: u64,
) -> Result<(Trial, TrialHistory)>
where
    F: FnMut(&Params) -> Result<f64>,
{
    if n_trials == 0 {
        return Err(Error::config("n_trials must be at least 1"));
    }
    let mut history = TrialHistory::new(strategy, seed);
    history.extend(&mut objective, domain, n_trials, tpe)?;
    let best = history.best().expect("at least one trial").clone();
    Ok((best, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_domain() -> SearchDomain {
        SearchDomain::new(vec![ParamSpec {
            name: "x".into(),
            lower: 0.0,
            upper: 1.0,
            kind: ParamKind::Real,
        }])
        .unwrap()
    }

    #[test]
    fn default_domain_bounds() {
        let d = default_domain();
        let b = |n: &str| {
            let p = d.get(n).unwrap();
            (p.lower, p.upper, p.kind)
        };
        assert_eq!(d.params().len(), 7);
        assert_eq!(b("learning_rate"), (0.005, 0.2, ParamKind::Real));
        assert_eq!(b("subsample"), (0.8, 1.0, ParamKind::Real));
        assert_eq!(b("max_leaves"), (10.0, 200.0, ParamKind::Integer));
        assert_eq!(b("max_depth"), (5.0, 30.0, ParamKind::Integer));
        assert_eq!(b("gamma"), (0.0, 0.02, ParamKind::Real));
        assert_eq!(b("colsample_bytree"), (0.8, 1.0, ParamKind::Real));
        assert_eq!(b("min_child_weight"), (0.0, 10.0, ParamKind::Real));
    }

    #[test]
    fn domain_validation() {
        let p = |lower, upper, kind| ParamSpec {
            name: "a".into(),
            lower,
            upper,
            kind,
        };
        assert!(SearchDomain::new(vec![p(1.0, 1.0, ParamKind::Real)]).is_err());
        assert!(SearchDomain::new(vec![p(0.5, 3.0, ParamKind::Integer)]).is_err());
        assert!(SearchDomain::new(vec![p(0.0, 1.0, ParamKind::Real), p(0.0, 2.0, ParamKind::Real)]).is_err());
    }

    #[test]
    fn uniform_draws_in_domain_and_deterministic() {
        let d = default_domain();
        let mut rng = rng_from(1);
        for _ in 0..10_000 {
            let s = sample_uniform(&d, &mut rng);
            assert!(d.contains(&s));
        }
        let a: Vec<Params> = (0..5).map({
            let mut r = rng_from(7);
            move |_| sample_uniform(&d, &mut r)
        }).collect();
        let d = default_domain();
        let b: Vec<Params> = (0..5).map({
            let mut r = rng_from(7);
            move |_| sample_uniform(&d, &mut r)
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn integer_endpoints_are_reachable() {
        let d = SearchDomain::new(vec![ParamSpec {
            name: "k".into(),
            lower: 1.0,
            upper: 3.0,
            kind: ParamKind::Integer,
        }])
        .unwrap();
        let mut rng = rng_from(2);
        let mut seen = [0; 3];
        for _ in 0..300 {
            seen[sample_uniform(&d, &mut rng)["k"] as usize - 1] += 1;
        }
        assert!(seen.iter().all(|&c| c > 50));
    }

    #[test]
    fn parzen_integer_masses_sum_to_one() {
        let spec = ParamSpec {
            name: "k".into(),
            lower: 5.0,
            upper: 30.0,
            kind: ParamKind::Integer,
        };
        let p = Parzen::new(&spec, &[6.0, 6.0, 20.0, 29.0], 0.01);
        let total: f64 = (5..=30).map(|k| p.log_density(k as f64).exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let real = Parzen::new(&unit_domain().params[0], &[0.1, 0.5, 0.52], 0.01);
        let n = 100_000;
        let integral: f64 = (0..n)
            .map(|i| real.log_density((i as f64 + 0.5) / n as f64).exp())
            .sum::<f64>()
            / n as f64;
        assert!((integral - 1.0).abs() < 1e-6);
    }

    #[test]
    fn startup_phase_is_uniform_sampling() {
        let d = unit_domain();
        let trials: Vec<Trial> = (0..5)
            .map(|i| Trial {
                index: i,
                params: Params::from([("x".to_string(), 0.5)]),
                loss: 0.0,
            })
            .collect();
        let cfg = TpeConfig::default();
        let a = tpe_suggest(&trials, &d, &cfg, &mut rng_from(3));
        let b = sample_uniform(&d, &mut rng_from(3));
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_histories_stay_in_domain() {
        let d = default_domain();
        let mut rng = rng_from(4);
        let trials: Vec<Trial> = (0..30)
            .map(|i| Trial {
                index: i,
                params: sample_uniform(&d, &mut rng),
                loss: 0.3,
            })
            .collect();
        for gamma_quantile in [0.25, 0.999] {
            let cfg = TpeConfig {
                gamma_quantile,
                ..Default::default()
            };
            for _ in 0..200 {
                assert!(d.contains(&tpe_suggest(&trials, &d, &cfg, &mut rng)));
            }
        }
        let infinite: Vec<Trial> = trials
            .iter()
            .cloned()
            .map(|t| Trial { loss: f64::INFINITY, ..t })
            .collect();
        assert!(d.contains(&tpe_suggest(&infinite, &d, &TpeConfig::default(), &mut rng)));
    }

    #[test]
    fn tpe_beats_random_search_on_parabola() {
        let d = unit_domain();
        let f = |p: &Params| Ok((p["x"] - 0.5).powi(2));
        let mut wins = 0;
        for seed in 0..100 {
            let (rs, _) = optimize(f, &d, 50, Strategy::Random, &TpeConfig::default(), seed).unwrap();
            let (tpe, _) = optimize(f, &d, 50, Strategy::Tpe, &TpeConfig::default(), seed).unwrap();
            wins += usize::from(tpe.loss < rs.loss);
        }
        assert!(wins >= 80, "TPE won {wins} of 100");
    }

    #[test]
    fn optimize_contracts() {
        let d = default_domain();
        let f = |p: &Params| Ok((p["learning_rate"] - 0.1).abs() + p["gamma"]);
        let (best, h) = optimize(f, &d, 1, Strategy::Tpe, &TpeConfig::default(), 0).unwrap();
        assert_eq!(h.trials.len(), 1);
        assert_eq!(best, h.trials[0]);
        for strategy in [Strategy::Random, Strategy::Tpe] {
            let (best, h) = optimize(f, &d, 40, strategy, &TpeConfig::default(), 5).unwrap();
            let min = h.trials.iter().map(|t| t.loss).fold(f64::INFINITY, f64::min);
            assert_eq!(best.loss, min);
            let (_, again) = optimize(f, &d, 40, strategy, &TpeConfig::default(), 5).unwrap();
            assert_eq!(h, again);
        }
        assert!(optimize(f, &d, 0, Strategy::Random, &TpeConfig::default(), 0).is_err());
    }

    #[test]
    fn non_finite_losses_become_infinite() {
        let d = unit_domain();
        let f = |p: &Params| Ok(if p["x"] < 0.5 { f64::NAN } else { p["x"] });
        let (best, h) = optimize(f, &d, 30, Strategy::Tpe, &TpeConfig::default(), 2).unwrap();
        assert!(h.trials.iter().all(|t| !t.loss.is_nan()));
        assert!(best.loss.is_finite());
    }

    #[test]
    fn history_round_trips_and_resumes() {
        let d = default_domain();
        let mut f = |p: &Params| Ok(p["min_child_weight"] / 10.0 - p["subsample"]);
        let (_, full) = optimize(&mut f, &d, 30, Strategy::Tpe, &TpeConfig::default(), 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.tsv");
        let mut partial = TrialHistory::new(Strategy::Tpe, 8);
        partial.extend(&mut f, &d, 22, &TpeConfig::default()).unwrap();
        partial.write_tsv(&path).unwrap();
        let mut resumed = TrialHistory::read_tsv(&path).unwrap();
        assert_eq!(resumed, partial);
        resumed.extend(&mut f, &d, 30, &TpeConfig::default()).unwrap();
        assert_eq!(resumed, full);
    }

    #[test]
    fn params_apply_to_config() {
        let mut rng = rng_from(0);
        let p = sample_uniform(&default_domain(), &mut rng);
        let cfg = apply_params(&GbtConfig::default(), &p).unwrap();
        assert_eq!(cfg.max_depth as f64, p["max_depth"]);
        assert_eq!(cfg.learning_rate, p["learning_rate"]);
        let bad = Params::from([("depth".to_string(), 3.0)]);
        assert!(apply_params(&GbtConfig::default(), &bad).is_err());
    }
}
