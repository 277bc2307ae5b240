//! Tabular numeric data with a binary target: loading, missing-column
//! filtering, stratified sampling and folding, and train-fitted
//! median imputation plus z-scoring.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numeric::{mean, median, sample_sd};
use crate::rng::rng_from;

/// Marker stored in place of an absent value. It is NaN, so it can never
/// collide with a finite observation.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// Feature matrix (row-major) plus a 0/1 target per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    feature_names: Vec<String>,
    values: Vec<f64>,
    target: Vec<u8>,
}

/// Bitwise cell comparison, so two missing markers compare equal.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.feature_names == other.feature_names
            && self.target == other.target
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, values: Vec<f64>, target: Vec<u8>) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::invalid("dataset must have at least one row"));
        }
        if values.len() != feature_names.len() * target.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len() * target.len(),
                actual: values.len(),
            });
        }
        if let Some(&bad) = target.iter().find(|&&t| t > 1) {
            return Err(Error::invalid(format!("target value {bad} is not 0 or 1")));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate feature name `{name}`")));
            }
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::invalid("feature values must be finite or missing"));
        }
        Ok(Dataset {
            feature_names,
            values,
            target,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_features() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[row * p..(row + 1) * p]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.value(r, col)).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn positive_count(&self) -> usize {
        self.target.iter().filter(|&&t| t == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.positive_count();
        pos > 0 && pos < self.n_rows()
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| is_missing(*v))
    }

    /// Rows in the given order (indices may repeat).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let p = self.n_features();
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut target = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.n_rows() {
                return Err(Error::invalid(format!("row index {r} out of range")));
            }
            values.extend_from_slice(self.row(r));
            target.push(self.target[r]);
        }
        Dataset::new(self.feature_names.clone(), values, target)
    }

    /// Columns by name, in the given order.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_index(n.as_ref())
                    .ok_or_else(|| Error::UnknownFeature(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&idx))
    }

    pub(crate) fn select_columns(&self, idx: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        Dataset {
            feature_names: idx.iter().map(|&c| self.feature_names[c].clone()).collect(),
            values,
            target: self.target.clone(),
        }
    }

    /// Fraction of missing cells in each column.
    pub fn missing_fractions(&self) -> Vec<f64> {
        let n = self.n_rows() as f64;
        (0..self.n_features())
            .map(|c| {
                (0..self.n_rows())
                    .filter(|&r| is_missing(self.value(r, c)))
                    .count() as f64
                    / n
            })
            .collect()
    }

    /// Writes the dataset in the same CSV dialect [`load_csv`] reads; the
    /// target is the last column.
    pub fn write_csv(&self, path: impl AsRef<Path>, target_name: &str) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(target_name);
        w.write_record(&header)?;
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for r in 0..self.n_rows() {
            record.clear();
            record.extend(self.row(r).iter().map(|&v| {
                if is_missing(v) {
                    String::new()
                } else {
                    v.to_string()
                }
            }));
            record.push(self.target[r].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() || t == "NA" {
        return Some(MISSING);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

/// Reads a comma-delimited file with a header row. Empty cells and the
/// literal `NA` become [`MISSING`]; the named target column must hold 0 or 1.
pub fn load_csv(path: impl AsRef<Path>, target_name: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let target_col = headers
        .iter()
        .position(|h| h.trim() == target_name)
        .ok_or_else(|| Error::invalid(format!("target column `{target_name}` not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_col)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut values = Vec::new();
    let mut target = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row_no = line + 2;
        if rec.len() != headers.len() {
            return Err(Error::Parse(format!(
                "row {row_no}: expected {} fields, found {}",
                headers.len(),
                rec.len()
            )));
        }
        for (i, cell) in rec.iter().enumerate() {
            if i == target_col {
                let y = match cell.trim() {
                    "0" | "0.0" => 0,
                    "1" | "1.0" => 1,
                    other => {
                        return Err(Error::invalid(format!(
                            "row {row_no}: target value `{other}` is not 0 or 1"
                        )))
                    }
                };
                target.push(y);
            } else {
                let v = parse_cell(cell).ok_or_else(|| {
                    Error::Parse(format!(
                        "row {row_no}, column `{}`: non-numeric value `{cell}`",
                        &headers[i]
                    ))
                })?;
                values.push(v);
            }
        }
    }
    Dataset::new(feature_names, values, target)
}

/// Removes columns whose missing fraction is strictly greater than
/// `threshold`. Survivors keep their order.
pub fn drop_high_missing(ds: &Dataset, threshold: f64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!(
            "missing threshold {threshold} outside [0, 1]"
        )));
    }
    let n = ds.n_rows();
    let keep: Vec<usize> = (0..ds.n_features())
        .filter(|&c| {
            let missing = (0..n).filter(|&r| is_missing(ds.value(r, c))).count();
            // Compare counts, not the quotient, so columns sitting exactly at
            // the threshold survive floating error.
            (missing as f64) <= threshold * n as f64 + 1e-9
        })
        .collect();
    if keep.is_empty() && ds.n_features() > 0 {
        return Err(Error::invalid("every column exceeds the missing threshold"));
    }
    Ok(ds.select_columns(&keep))
}

/// Draws `n` rows without replacement, keeping the positive share of the
/// source within one row of `round(n * rate)`.
pub fn stratified_sample(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if n > ds.n_rows() {
        return Err(Error::invalid(format!(
            "sample size {n} exceeds row count {}",
            ds.n_rows()
        )));
    }
    if !ds.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let (mut pos, mut neg) = class_indices(ds);
    let rate = pos.len() as f64 / ds.n_rows() as f64;
    let want_pos = ((n as f64 * rate).round() as usize)
        .min(pos.len())
        .max(n.saturating_sub(neg.len()));
    let mut rng = rng_from(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut rows: Vec<usize> = pos[..want_pos]
        .iter()
        .chain(&neg[..n - want_pos])
        .copied()
        .collect();
    rows.shuffle(&mut rng);
    ds.select_rows(&rows)
}

fn class_indices(ds: &Dataset) -> (Vec<usize>, Vec<usize>) {
    (0..ds.n_rows()).partition(|&r| ds.target()[r] == 1)
}

/// Per-feature statistics fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessStats {
    pub feature_names: Vec<String>,
    pub median: Vec<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl PreprocessStats {
    /// Mean 0, sd 1, median 0 for every feature: applying it is a no-op on
    /// data without missing values.
    pub fn identity(feature_names: &[String]) -> Self {
        let p = feature_names.len();
        PreprocessStats {
            feature_names: feature_names.to_vec(),
            median: vec![0.0; p],
            mean: vec![0.0; p],
            sd: vec![1.0; p],
        }
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = String::from("feature\tmedian\tmean\tsd\n");
        for i in 0..self.feature_names.len() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                self.feature_names[i], self.median[i], self.mean[i], self.sd[i]
            ));
        }
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut stats = PreprocessStats {
            feature_names: vec![],
            median: vec![],
            mean: vec![],
            sd: vec![],
        };
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 {
                return Err(Error::Parse(format!("stats line {}: expected 4 fields", i + 1)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("stats line {}: bad number `{s}`", i + 1)))
            };
            stats.feature_names.push(parts[0].to_string());
            stats.median.push(num(parts[1])?);
            stats.mean.push(num(parts[2])?);
            stats.sd.push(num(parts[3])?);
        }
        Ok(stats)
    }
}

/// Median of observed values, then mean and sample sd of the imputed column.
pub fn fit_preprocessor(training: &Dataset) -> Result<PreprocessStats> {
    let p = training.n_features();
    let mut stats = PreprocessStats {
        feature_names: training.feature_names().to_vec(),
        median: Vec::with_capacity(p),
        mean: Vec::with_capacity(p),
        sd: Vec::with_capacity(p),
    };
    for c in 0..p {
        let col = training.column(c);
        let observed: Vec<f64> = col.iter().copied().filter(|v| !is_missing(*v)).collect();
        if observed.is_empty() {
            return Err(Error::invalid(format!(
                "feature `{}` has no observed training values",
                training.feature_names()[c]
            )));
        }
        let med = median(&observed);
        let imputed: Vec<f64> = col
            .iter()
            .map(|&v| if is_missing(v) { med } else { v })
            .collect();
        stats.median.push(med);
        stats.mean.push(mean(&imputed));
        stats.sd.push(sample_sd(&imputed));
    }
    Ok(stats)
}

/// Imputes with the fitted medians and z-scores with the fitted mean/sd.
/// Zero-spread features map to 0.
pub fn apply_preprocessor(ds: &Dataset, stats: &PreprocessStats) -> Result<Dataset> {
    let map = ds
        .feature_names()
        .iter()
        .map(|n| stats.index_of(n).ok_or_else(|| Error::UnknownFeature(n.clone())))
        .collect::<Result<Vec<_>>>()?;
    let p = ds.n_features();
    let mut values = Vec::with_capacity(ds.values().len());
    for r in 0..ds.n_rows() {
        let row = ds.row(r);
        for c in 0..p {
            let s = map[c];
            let v = if is_missing(row[c]) { stats.median[s] } else { row[c] };
            let sd = stats.sd[s];
            values.push(if sd > 0.0 { (v - stats.mean[s]) / sd } else { 0.0 });
        }
    }
    Dataset::new(ds.feature_names().to_vec(), values, ds.target().to_vec())
}

/// Assignment of every row to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn validation_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&r| self.assignment[r] == fold)
            .collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&r| self.assignment[r] != fold)
            .collect()
    }
}

/// Shuffles each class and deals it round-robin across folds. Negatives
/// continue where positives stopped so fold sizes also differ by at most one.
pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    stratified_kfold_labels(ds.target(), k, seed)
}

pub(crate) fn stratified_kfold_labels(target: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
        (0..target.len()).partition(|&r| target[r] == 1);
    if pos.len() < k || neg.len() < k {
        return Err(Error::invalid(format!(
            "each class needs at least {k} rows (positives {}, negatives {})",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = rng_from(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assignment = vec![0usize; target.len()];
    for (i, &r) in pos.iter().chain(&neg).enumerate() {
        assignment[r] = i % k;
    }
    Ok(FoldPlan { k, assignment })
}
