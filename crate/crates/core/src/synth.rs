//! Seeded synthetic credit-style datasets with a known set of informative
//! columns.
//!
//! Informative columns share a weak latent factor. Redundant columns are
//! noisy copies of informative ones and noise columns are independent of
//! everything. The target is Bernoulli with a logit built from the
//! informative columns: a linear part plus interaction, curvature and step
//! terms that a linear model cannot represent.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, MISSING};
use crate::error::{Error, Result};
use crate::numeric::sigmoid;
use crate::rng::{derive_seed, rng_from, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_informative: usize,
    pub n_redundant: usize,
    pub n_noise: usize,
    pub positive_rate: f64,
    pub missing_rate: f64,
    pub seed: u64,
    /// Correlation between any two informative columns.
    pub informative_correlation: f64,
    /// Standard deviation of the noise added to build a redundant copy.
    pub redundant_noise: f64,
    /// Multiplier on the non-linear part of the logit.
    pub nonlinearity: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_rows: 2000,
            n_informative: 10,
            n_redundant: 10,
            n_noise: 40,
            positive_rate: 0.52,
            missing_rate: 0.05,
            seed: 0,
            informative_correlation: 0.3,
            redundant_noise: 0.3,
            nonlinearity: 1.0,
        }
    }
}

impl SynthSpec {
    pub fn with_seed(seed: u64) -> Self {
        SynthSpec {
            seed,
            ..SynthSpec::default()
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_informative + self.n_redundant + self.n_noise
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("synth: {m}")));
        if self.n_rows < 2 {
            return bad("n_rows must be at least 2");
        }
        if self.n_informative == 0 {
            return bad("n_informative must be at least 1");
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad("positive_rate must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad("missing_rate must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.informative_correlation) {
            return bad("informative_correlation must lie in [0, 1)");
        }
        if !(self.redundant_noise >= 0.0 && self.redundant_noise.is_finite()) {
            return bad("redundant_noise must be non-negative");
        }
        if !self.nonlinearity.is_finite() {
            return bad("nonlinearity must be finite");
        }
        Ok(())
    }
}

/// A generated dataset plus the names of its informative columns.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub informative: Vec<String>,
}

impl Synthetic {
    pub fn write_truth(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        for name in &self.informative {
            writeln!(f, "{name}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn logit_of(x: &[f64], nonlinearity: f64) -> f64 {
    let mut eta = 0.0;
    for (j, v) in x.iter().enumerate() {
        let sign = if j % 3 == 2 { -1.0 } else { 1.0 };
        eta += sign * 0.45 * v;
    }
    let at = |j: usize| x.get(j).copied();
    let mut nl = 0.0;
    if let (Some(a), Some(b)) = (at(0), at(1)) {
        nl += 1.0 * a * b;
    }
    if let Some(c) = at(2) {
        nl += 0.8 * (c * c - 1.0);
    }
    if let Some(d) = at(3) {
        nl += 1.2 * (f64::from(u8::from(d > 0.5)) - f64::from(u8::from(d < -0.5)));
    }
    if let (Some(e), Some(f)) = (at(4), at(5)) {
        nl += if e > 0.0 { 1.0 * f } else { -0.5 * f };
    }
    if let Some(g) = at(6) {
        nl -= 0.8 * (g.abs() - 0.8);
    }
    eta + nonlinearity * nl
}

/// Intercept making the mean predicted probability equal `rate`.
fn calibrate_intercept(eta: &[f64], rate: f64) -> f64 {
    let mean_prob = |b: f64| eta.iter().map(|e| sigmoid(e + b)).sum::<f64>() / eta.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_prob(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn generate(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let n = spec.n_rows;
    let k = spec.n_informative;
    let p = spec.n_features();
    let mut rng = rng_from(derive_seed(spec.seed, 0x5EED));

    let shared = spec.informative_correlation.sqrt();
    let own = (1.0 - spec.informative_correlation).sqrt();
    // Raw standardized columns, column-major.
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); p];
    let mut eta = Vec::with_capacity(n);
    let mut inf_row = vec![0.0; k];
    for _ in 0..n {
        let latent = normal(&mut rng);
        for (j, slot) in inf_row.iter_mut().enumerate() {
            *slot = shared * latent + own * normal(&mut rng);
            cols[j].push(*slot);
        }
        for r in 0..spec.n_redundant {
            let v = inf_row[r % k] + spec.redundant_noise * normal(&mut rng);
            cols[k + r].push(v);
        }
        for z in 0..spec.n_noise {
            let v = normal(&mut rng);
            cols[k + spec.n_redundant + z].push(v);
        }
        eta.push(logit_of(&inf_row, spec.nonlinearity));
    }
    let intercept = calibrate_intercept(&eta, spec.positive_rate);
    let target: Vec<u8> = eta
        .iter()
        .map(|e| u8::from(rng.gen::<f64>() < sigmoid(e + intercept)))
        .collect();

    // Arbitrary per-column units so standardization has work to do.
    for col in cols.iter_mut() {
        let scale = 0.5 + 4.5 * rng.gen::<f64>();
        let shift = (rng.gen::<f64>() - 0.5) * 200.0;
        for v in col.iter_mut() {
            *v = ((*v * scale + shift) * 1e6).round() / 1e6;
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let width = p.to_string().len().max(2);
    let names: Vec<String> = (0..p).map(|i| format!("v{:0width$}", i + 1)).collect();
    // Column `order[pos]` is written at position `pos`.
    let mut informative = Vec::new();
    for (pos, &src) in order.iter().enumerate() {
        if src < k {
            informative.push(names[pos].clone());
        }
    }
    informative.sort();

    let mut values = Vec::with_capacity(n * p);
    for r in 0..n {
        for &src in &order {
            values.push(cols[src][r]);
        }
    }
    if spec.missing_rate > 0.0 {
        for v in values.iter_mut() {
            if rng.gen::<f64>() < spec.missing_rate {
                *v = MISSING;
            }
        }
    }
    Ok(Synthetic {
        dataset: Dataset::new(names, values, target)?,
        informative,
    })
}
