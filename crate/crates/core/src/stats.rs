//! Wilcoxon signed-rank tests and Bonferroni-corrected pairwise comparisons.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::numeric::mean;

/// Largest effective sample size handled by exact enumeration.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Greater,
    Less,
    TwoSided,
}

impl Alternative {
    pub fn name(self) -> &'static str {
        match self {
            Alternative::Greater => "greater",
            Alternative::Less => "less",
            Alternative::TwoSided => "two_sided",
        }
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            "two_sided" | "two" => Ok(Alternative::TwoSided),
            _ => Err(Error::config(format!(
                "unknown alternative `{s}` (expected greater, less or two_sided)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

impl TestMethod {
    pub fn name(self) -> &'static str {
        match self {
            TestMethod::Exact => "exact",
            TestMethod::NormalApprox => "normal_approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    /// Sum of the ranks of positive differences.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: TestMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Rejected,
    NotRejected,
}

impl Decision {
    pub fn label(self) -> &'static str {
        match self {
            Decision::Rejected => "Rejected",
            Decision::NotRejected => "Not rejected",
        }
    }
}

/// Midranks (1-based) of `values`.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        tie_sizes.push(j - i);
        i = j;
    }
    (ranks, tie_sizes)
}

/// Number of sign assignments of ranks 1..=n for each value of the
/// positive-rank sum.
fn signed_rank_counts(n: usize) -> Vec<u64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for r in 1..=n {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    counts
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Paired signed-rank test of `a - b`. Zero differences are dropped and
/// tied magnitudes share midranks.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("signed-rank test needs at least one pair"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("signed-rank test needs finite values"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Err(Error::invalid("all paired differences are zero"));
    }
    let magnitudes: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = midranks(&magnitudes);
    let w: f64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let has_ties = ties.iter().any(|&t| t > 1);

    if n <= EXACT_MAX_N && !has_ties {
        // Without ties the statistic is an integer.
        let w_int = w.round() as usize;
        let counts = signed_rank_counts(n);
        let total = (1u64 << n) as f64;
        let upper: u64 = counts[w_int..].iter().sum();
        let lower: u64 = counts[..=w_int].iter().sum();
        let p_greater = upper as f64 / total;
        let p_less = lower as f64 / total;
        let p = match alternative {
            Alternative::Greater => p_greater,
            Alternative::Less => p_less,
            Alternative::TwoSided => (2.0 * p_greater.min(p_less)).min(1.0),
        };
        return Ok(TestResult {
            statistic: w,
            p_value: p,
            n_effective: n,
            method: TestMethod::Exact,
        });
    }

    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    let p = match alternative {
        Alternative::Greater => normal_sf((w - mu - 0.5) / sigma),
        Alternative::Less => 1.0 - normal_sf((w - mu + 0.5) / sigma),
        Alternative::TwoSided => {
            let z = ((w - mu).abs() - 0.5).max(0.0) / sigma;
            (2.0 * normal_sf(z)).min(1.0)
        }
    };
    Ok(TestResult {
        statistic: w,
        p_value: p.clamp(0.0, 1.0),
        n_effective: n,
        method: TestMethod::NormalApprox,
    })
}

/// Per-test significance level for `m` simultaneous hypotheses.
pub fn bonferroni_alpha(alpha: f64, m: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if m == 0 {
        return Err(Error::config("number of hypotheses must be positive"));
    }
    Ok(alpha / m as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub first: String,
    pub second: String,
    pub alternative: Alternative,
    pub result: TestResult,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    pub criterion: String,
    pub alpha: f64,
    pub corrected_alpha: f64,
    pub m: usize,
    pub comparisons: Vec<Comparison>,
}

fn test_pair(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TestResult> {
    match wilcoxon_signed_rank(a, b, alternative) {
        // Identical series carry no evidence of a difference.
        Err(Error::InvalidInput(_)) if a == b => Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            method: TestMethod::Exact,
        }),
        other => other,
    }
}

fn check_series(series: &[(String, Vec<f64>)]) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::invalid("a comparison needs at least two series"));
    }
    let len = series[0].1.len();
    for (name, s) in series {
        if s.len() != len {
            return Err(Error::invalid(format!(
                "series {name} has {} values, expected {len}",
                s.len()
            )));
        }
    }
    Ok(())
}

fn build_matrix(
    series: &[(String, Vec<f64>)],
    criterion: &str,
    alpha: f64,
    orient: impl Fn(usize, usize) -> (usize, usize, Alternative),
) -> Result<ComparisonMatrix> {
    check_series(series)?;
    let m = series.len() * (series.len() - 1) / 2;
    let corrected = bonferroni_alpha(alpha, m)?;
    let mut comparisons = Vec::with_capacity(m);
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let (x, y, alternative) = orient(i, j);
            let result = test_pair(&series[x].1, &series[y].1, alternative)?;
            comparisons.push(Comparison {
                first: series[x].0.clone(),
                second: series[y].0.clone(),
                alternative,
                result,
                decision: if result.p_value < corrected {
                    Decision::Rejected
                } else {
                    Decision::NotRejected
                },
            });
        }
    }
    Ok(ComparisonMatrix {
        criterion: criterion.to_string(),
        alpha,
        corrected_alpha: corrected,
        m,
        comparisons,
    })
}

/// One test per unordered pair, in input order, each at `alpha / m`.
pub fn pairwise_comparison(
    series: &[(String, Vec<f64>)],
    criterion: &str,
    alpha: f64,
    alternative: Alternative,
) -> Result<ComparisonMatrix> {
    build_matrix(series, criterion, alpha, |i, j| (i, j, alternative))
}

/// Like [`pairwise_comparison`] with one-sided tests, each pair ordered so
/// that the series with the larger mean comes first and is tested as
/// greater. Equal means keep input order.
pub fn directional_comparison(
    series: &[(String, Vec<f64>)],
    criterion: &str,
    alpha: f64,
) -> Result<ComparisonMatrix> {
    build_matrix(series, criterion, alpha, |i, j| {
        if mean(&series[j].1) > mean(&series[i].1) {
            (j, i, Alternative::Greater)
        } else {
            (i, j, Alternative::Greater)
        }
    })
}

const CSV_HEADER: [&str; 11] = [
    "criterion",
    "first",
    "second",
    "alternative",
    "statistic",
    "n_effective",
    "method",
    "p_value",
    "alpha",
    "corrected_alpha",
    "decision",
];

impl ComparisonMatrix {
    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "{} (alpha = {}, m = {}, corrected alpha = {:.4})\n\n",
            self.criterion, self.alpha, self.m, self.corrected_alpha
        );
        s.push_str("| Pair | Alternative | W | n | p value | Decision |\n");
        s.push_str("|---|---|---|---|---|---|\n");
        for c in &self.comparisons {
            s.push_str(&format!(
                "| {} vs. {} | {} | {} | {} | {:.4} | {} |\n",
                c.first,
                c.second,
                c.alternative,
                c.result.statistic,
                c.result.n_effective,
                c.result.p_value,
                c.decision.label()
            ));
        }
        s
    }

    /// Appends rows to a comparison CSV; writes the header when `header`.
    pub fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>, header: bool) -> Result<()> {
        if header {
            w.write_record(CSV_HEADER)?;
        }
        for c in &self.comparisons {
            w.write_record([
                self.criterion.clone(),
                c.first.clone(),
                c.second.clone(),
                c.alternative.to_string(),
                c.result.statistic.to_string(),
                c.result.n_effective.to_string(),
                c.result.method.name().to_string(),
                c.result.p_value.to_string(),
                self.alpha.to_string(),
                self.corrected_alpha.to_string(),
                c.decision.label().to_string(),
            ])?;
        }
        Ok(())
    }
}

pub fn write_comparisons(path: impl AsRef<Path>, matrices: &[ComparisonMatrix]) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    if matrices.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for (i, m) in matrices.iter().enumerate() {
        m.write_rows(&mut w, i == 0)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a comparison CSV back into one matrix per criterion, in file order.
pub fn read_comparisons(path: impl AsRef<Path>) -> Result<Vec<ComparisonMatrix>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    let bad = |m: &str| Error::Parse(format!("{}: {m}", path.display()));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
    let mut out: Vec<ComparisonMatrix> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let method = match &rec[6] {
            "exact" => TestMethod::Exact,
            "normal_approx" => TestMethod::NormalApprox,
            _ => return Err(bad("bad method")),
        };
        let decision = match &rec[10] {
            "Rejected" => Decision::Rejected,
            "Not rejected" => Decision::NotRejected,
            _ => return Err(bad("bad decision")),
        };
        let cmp = Comparison {
            first: rec[1].to_string(),
            second: rec[2].to_string(),
            alternative: rec[3].parse()?,
            result: TestResult {
                statistic: num(&rec[4])?,
                n_effective: rec[5].parse().map_err(|_| bad("bad count"))?,
                method,
                p_value: num(&rec[7])?,
            },
            decision,
        };
        let (alpha, corrected) = (num(&rec[8])?, num(&rec[9])?);
        match out.last_mut() {
            Some(m) if m.criterion == rec[0] => m.comparisons.push(cmp),
            _ => out.push(ComparisonMatrix {
                criterion: rec[0].to_string(),
                alpha,
                corrected_alpha: corrected,
                m: 0,
                comparisons: vec![cmp],
            }),
        }
    }
    for m in &mut out {
        m.m = m.comparisons.len();
    }
    Ok(out)
}
