use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::pearson;

use super::FsMethod;

/// Upper bound on equal-frequency bins for the contingency-based scorers.
pub const MAX_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScore {
    pub feature: String,
    pub score: f64,
    pub method: FsMethod,
}

/// Equal-frequency bin index per value. Columns with at most `max_bins`
/// distinct values get one bin per value. Cut points are order statistics,
/// so the partition depends only on ranks.
pub fn bin_codes(col: &[f64], max_bins: usize) -> Vec<usize> {
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let cuts: Vec<f64> = if distinct.len() <= max_bins {
        distinct[1..].to_vec()
    } else {
        let n = sorted.len();
        let mut cuts: Vec<f64> = (1..max_bins).map(|i| sorted[i * n / max_bins]).collect();
        cuts.dedup();
        // A cut at the minimum would leave bin 0 empty.
        cuts.retain(|&c| c > sorted[0]);
        cuts
    };
    col.iter()
        .map(|&v| cuts.partition_point(|&c| c <= v))
        .collect()
}

/// Per-bin class counts `[negatives, positives]`.
fn contingency(codes: &[usize], target: &[u8]) -> Vec<[f64; 2]> {
    let n_bins = codes.iter().copied().max().map_or(0, |m| m + 1);
    let mut table = vec![[0.0; 2]; n_bins];
    for (&b, &y) in codes.iter().zip(target) {
        table[b][y as usize] += 1.0;
    }
    table
}

fn gini_impurity(counts: [f64; 2]) -> f64 {
    let n = counts[0] + counts[1];
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] / n;
    let p1 = counts[1] / n;
    1.0 - p0 * p0 - p1 * p1
}

fn entropy(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

fn totals(table: &[[f64; 2]]) -> [f64; 2] {
    table
        .iter()
        .fold([0.0; 2], |acc, r| [acc[0] + r[0], acc[1] + r[1]])
}

/// Parent impurity minus the size-weighted impurity of the bins.
pub(crate) fn gini_gain(table: &[[f64; 2]]) -> f64 {
    let tot = totals(table);
    let n = tot[0] + tot[1];
    let children: f64 = table
        .iter()
        .map(|r| (r[0] + r[1]) / n * gini_impurity(*r))
        .sum();
    (gini_impurity(tot) - children).max(0.0)
}

/// Pearson chi-squared statistic of the bins-by-class table.
pub(crate) fn chi_square(table: &[[f64; 2]]) -> f64 {
    let tot = totals(table);
    let n = tot[0] + tot[1];
    let mut chi = 0.0;
    for row in table {
        let rn = row[0] + row[1];
        if rn == 0.0 {
            continue;
        }
        for c in 0..2 {
            let expected = rn * tot[c] / n;
            if expected > 0.0 {
                chi += (row[c] - expected).powi(2) / expected;
            }
        }
    }
    chi
}

/// Information gain divided by split information (log base 2). Zero when
/// the feature puts every row in one bin.
pub(crate) fn gain_ratio(table: &[[f64; 2]]) -> f64 {
    let tot = totals(table);
    let n = tot[0] + tot[1];
    let conditional: f64 = table
        .iter()
        .map(|r| (r[0] + r[1]) / n * entropy(r))
        .sum();
    let gain = (entropy(&tot) - conditional).max(0.0);
    let sizes: Vec<f64> = table.iter().map(|r| r[0] + r[1]).collect();
    let split_info = entropy(&sizes);
    if split_info <= 0.0 {
        0.0
    } else {
        gain / split_info
    }
}

/// One relevance score per feature; larger means more relevant.
pub fn score_features(ds: &Dataset, method: FsMethod) -> Result<Vec<FeatureScore>> {
    if method == FsMethod::Cluster {
        return Err(Error::invalid(
            "Cluster selection has no per-feature score; use cluster_variables",
        ));
    }
    if ds.has_missing() {
        return Err(Error::invalid("feature scoring needs imputed data"));
    }
    if !ds.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let y: Vec<f64> = ds.target().iter().map(|&t| f64::from(t)).collect();
    let scores = (0..ds.n_features())
        .map(|c| {
            let col = ds.column(c);
            let score = match method {
                FsMethod::Correlation => pearson(&col, &y).abs(),
                _ => {
                    let table = contingency(&bin_codes(&col, MAX_BINS), ds.target());
                    match method {
                        FsMethod::Gini => gini_gain(&table),
                        FsMethod::ChiSquare => chi_square(&table),
                        FsMethod::Information => gain_ratio(&table),
                        FsMethod::Correlation | FsMethod::Cluster => unreachable!(),
                    }
                }
            };
            FeatureScore {
                feature: ds.feature_names()[c].clone(),
                score,
                method,
            }
        })
        .collect();
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCORERS: [FsMethod; 4] = [
        FsMethod::Gini,
        FsMethod::ChiSquare,
        FsMethod::Correlation,
        FsMethod::Information,
    ];

    fn dataset(cols: &[Vec<f64>], target: &[u8]) -> Dataset {
        let n = target.len();
        let mut values = Vec::new();
        for r in 0..n {
            for c in cols {
                values.push(c[r]);
            }
        }
        let names = (0..cols.len()).map(|i| format!("f{i}")).collect();
        Dataset::new(names, values, target.to_vec()).unwrap()
    }

    fn balanced_target(n: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from(i % 2 == 1)).collect()
    }

    fn score(ds: &Dataset, m: FsMethod, c: usize) -> f64 {
        score_features(ds, m).unwrap()[c].score
    }

    #[test]
    fn gini_of_perfect_binary_feature_is_half() {
        let y = balanced_target(40);
        let x: Vec<f64> = y.iter().map(|&t| f64::from(t)).collect();
        let d = dataset(&[x], &y);
        assert!((score(&d, FsMethod::Gini, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chi_square_closed_form() {
        // a=20, b=0, c=0, d=20: N(ad - bc)^2 / ((a+b)(c+d)(a+c)(b+d)) = 40.
        let table = [[20.0, 0.0], [0.0, 20.0]];
        let closed = 40.0 * (20.0f64 * 20.0).powi(2) / (20.0f64 * 20.0 * 20.0 * 20.0);
        assert_eq!(closed, 40.0);
        assert!((chi_square(&table) - closed).abs() < 1e-12);
        let y = balanced_target(40);
        let x: Vec<f64> = y.iter().map(|&t| f64::from(t)).collect();
        assert!((score(&dataset(&[x], &y), FsMethod::ChiSquare, 0) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_matches_2x2_formula_on_uneven_table() {
        let (a, b, c, d) = (13.0, 7.0, 4.0, 16.0);
        let n = a + b + c + d;
        let closed: f64 = n * (a * d - b * c) * (a * d - b * c) / ((a + b) * (c + d) * (a + c) * (b + d));
        assert!((chi_square(&[[a, b], [c, d]]) - closed).abs() < 1e-12);
    }

    #[test]
    fn correlation_of_target_copy_is_one() {
        let y = balanced_target(30);
        let x: Vec<f64> = y.iter().map(|&t| 3.0 * f64::from(t) - 1.0).collect();
        assert!((score(&dataset(&[x], &y), FsMethod::Correlation, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gain_ratio_of_perfect_binary_feature_is_one() {
        let y = balanced_target(40);
        let x: Vec<f64> = y.iter().map(|&t| f64::from(t)).collect();
        assert!((score(&dataset(&[x], &y), FsMethod::Information, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_scores_zero() {
        let y = balanced_target(20);
        let d = dataset(&[vec![2.5; 20]], &y);
        for m in SCORERS {
            assert_eq!(score(&d, m, 0), 0.0, "{m}");
        }
    }

    #[test]
    fn duplicates_and_monotone_transforms_score_identically() {
        let y = balanced_target(200);
        let x: Vec<f64> = (0..200)
            .map(|i| ((i * 37 % 101) as f64) * 0.1 + f64::from(y[i]) * 3.0)
            .collect();
        let cubed: Vec<f64> = x.iter().map(|v| v.powi(3) + 7.0).collect();
        let expd: Vec<f64> = x.iter().map(|v| (v * 0.5).exp()).collect();
        let d = dataset(&[x.clone(), x.clone(), cubed, expd], &y);
        for m in SCORERS {
            let s = score_features(&d, m).unwrap();
            assert_eq!(s[0].score, s[1].score, "{m} duplicate");
            if m != FsMethod::Correlation {
                assert_eq!(s[0].score, s[2].score, "{m} cube");
                assert_eq!(s[0].score, s[3].score, "{m} exp");
            }
        }
        let affine: Vec<f64> = x.iter().map(|v| 4.0 * v - 11.0).collect();
        let d = dataset(&[x, affine], &y);
        let s = score_features(&d, FsMethod::Correlation).unwrap();
        assert!((s[0].score - s[1].score).abs() < 1e-12);
    }

    #[test]
    fn bins_are_equal_frequency() {
        let col: Vec<f64> = (0..100).map(f64::from).collect();
        let codes = bin_codes(&col, 10);
        for b in 0..10 {
            assert_eq!(codes.iter().filter(|&&c| c == b).count(), 10);
        }
        let few = bin_codes(&[3.0, 1.0, 3.0, 2.0], 10);
        assert_eq!(few, vec![2, 0, 2, 1]);
    }

    #[test]
    fn scoring_rejects_bad_inputs() {
        let d = dataset(&[vec![1.0, f64::NAN]], &[0, 1]);
        assert!(score_features(&d, FsMethod::Gini).is_err());
        let d = dataset(&[vec![1.0, 2.0]], &[1, 1]);
        assert!(matches!(
            score_features(&d, FsMethod::Gini),
            Err(Error::SingleClass)
        ));
        let d = dataset(&[vec![1.0, 2.0]], &[0, 1]);
        assert!(score_features(&d, FsMethod::Cluster).is_err());
    }
}
