//! Filter-style feature selection: four relevance scorers plus divisive
//! variable clustering with a one-representative-per-cluster rule.

mod clustering;
mod scoring;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub use clustering::{
    cluster_variables, one_minus_r2_ratio, select_from_clusters, variance_explained,
    variance_explained_curve, VariableClustering,
};
pub use scoring::{bin_codes, score_features, FeatureScore, MAX_BINS};

/// The five selection methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FsMethod {
    Gini,
    ChiSquare,
    Cluster,
    Correlation,
    Information,
}

impl FsMethod {
    pub const ALL: [FsMethod; 5] = [
        FsMethod::Gini,
        FsMethod::ChiSquare,
        FsMethod::Cluster,
        FsMethod::Correlation,
        FsMethod::Information,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FsMethod::Gini => "Gini",
            FsMethod::ChiSquare => "ChiSquare",
            FsMethod::Cluster => "Cluster",
            FsMethod::Correlation => "Correlation",
            FsMethod::Information => "Information",
        }
    }
}

impl fmt::Display for FsMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FsMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "gini" => Ok(FsMethod::Gini),
            "chisquare" | "chi2" | "chisq" => Ok(FsMethod::ChiSquare),
            "cluster" | "varclus" => Ok(FsMethod::Cluster),
            "correlation" | "corr" => Ok(FsMethod::Correlation),
            "information" | "info" | "gainratio" => Ok(FsMethod::Information),
            _ => Err(Error::config(format!("unknown feature-selection method `{s}`"))),
        }
    }
}

/// Selected feature names, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    pub method: FsMethod,
    pub selected: Vec<String>,
    pub k: usize,
}

impl SelectionResult {
    /// One name per line, in rank order.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        for name in &self.selected {
            writeln!(f, "{name}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Reads a one-column name list, skipping blank lines.
pub fn read_name_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut names = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if !t.is_empty() {
            names.push(t.to_string());
        }
    }
    Ok(names)
}

/// The `k` highest scores; ties go to the lexicographically smaller name.
pub fn select_top_k(scores: &[FeatureScore], k: usize) -> Result<SelectionResult> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k > scores.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} scored features",
            scores.len()
        )));
    }
    let method = scores[0].method;
    let mut ranked: Vec<&FeatureScore> = scores.iter().collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(SelectionResult {
        method,
        selected: ranked[..k].iter().map(|s| s.feature.clone()).collect(),
        k,
    })
}

/// Runs `method` on a preprocessed dataset and keeps `k` features. For
/// `Cluster`, `k` is the number of clusters.
pub fn select_features(ds: &Dataset, method: FsMethod, k: usize) -> Result<SelectionResult> {
    match method {
        FsMethod::Cluster => {
            let clustering = cluster_variables(ds, k)?;
            select_from_clusters(&clustering)
        }
        _ => select_top_k(&score_features(ds, method)?, k),
    }
}
