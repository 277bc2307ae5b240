//! Divisive principal-component variable clustering.
//!
//! All work happens on the feature correlation matrix. A cluster's
//! component is the first eigenvector of its correlation sub-matrix; the
//! squared correlation between feature `i` and the component `v` of cluster
//! `C` is `(R[i, C] · v)^2 / λ1(C)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

use super::{FsMethod, SelectionResult};

#[derive(Debug, Clone, PartialEq)]
pub struct VariableClustering {
    pub feature_names: Vec<String>,
    /// Member feature indices, ascending within each cluster.
    pub clusters: Vec<Vec<usize>>,
    /// First-component weights, aligned with `clusters[c]`.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub r2_own: Vec<f64>,
    pub r2_next: Vec<f64>,
}

impl VariableClustering {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Cluster index of every feature.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_features()];
        for (c, members) in self.clusters.iter().enumerate() {
            for &m in members {
                out[m] = c;
            }
        }
        out
    }
}

fn correlation_matrix(ds: &Dataset) -> Result<DMatrix<f64>> {
    if ds.has_missing() {
        return Err(Error::invalid("variable clustering needs imputed data"));
    }
    let n = ds.n_rows();
    let p = ds.n_features();
    let mut z = DMatrix::<f64>::zeros(n, p);
    for c in 0..p {
        let col = ds.column(c);
        let m = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        if ss > 0.0 {
            let s = ss.sqrt();
            for (r, v) in col.iter().enumerate() {
                z[(r, c)] = (v - m) / s;
            }
        }
    }
    let mut corr = z.transpose() * &z;
    for i in 0..p {
        for j in 0..p {
            corr[(i, j)] = corr[(i, j)].clamp(-1.0, 1.0);
        }
        corr[(i, i)] = 1.0;
    }
    Ok(corr)
}

fn sub_matrix(corr: &DMatrix<f64>, members: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(members.len(), members.len(), |i, j| {
        corr[(members[i], members[j])]
    })
}

/// Eigenpairs sorted by descending eigenvalue; each vector's largest
/// component is made positive so results are reproducible.
fn eigen_desc(m: DMatrix<f64>, count: usize) -> Vec<(f64, Vec<f64>)> {
    if m.nrows() == 1 {
        return vec![(1.0, vec![1.0])];
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .into_iter()
        .take(count)
        .map(|i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (eig.eigenvalues[i].max(0.0), v)
        })
        .collect()
}

/// Squared correlation of feature `i` with the score `Z[:, members] · w`.
fn r2_with(corr: &DMatrix<f64>, i: usize, members: &[usize], w: &[f64], w_var: f64) -> f64 {
    if w_var <= 0.0 {
        return 0.0;
    }
    let cov: f64 = members
        .iter()
        .zip(w)
        .map(|(&m, &wm)| corr[(i, m)] * wm)
        .sum();
    (cov * cov / w_var).clamp(0.0, 1.0)
}

fn quadratic_form(corr: &DMatrix<f64>, members: &[usize], w: &[f64]) -> f64 {
    let mut q = 0.0;
    for (a, &ma) in members.iter().enumerate() {
        for (b, &mb) in members.iter().enumerate() {
            q += w[a] * corr[(ma, mb)] * w[b];
        }
    }
    q
}

struct Component {
    eigenvalue: f64,
    weights: Vec<f64>,
}

fn first_component(corr: &DMatrix<f64>, members: &[usize]) -> Component {
    let (eigenvalue, weights) = eigen_desc(sub_matrix(corr, members), 1).remove(0);
    Component {
        eigenvalue,
        weights,
    }
}

fn second_eigenvalue(corr: &DMatrix<f64>, members: &[usize]) -> f64 {
    if members.len() < 2 {
        return f64::NEG_INFINITY;
    }
    eigen_desc(sub_matrix(corr, members), 2)[1].0
}

/// Splits a cluster in two: quartimax-rotate its two leading loading
/// vectors, assign each member to the rotated component it correlates with
/// more, then make one reassignment pass against the halves' own first
/// components.
fn split_cluster(corr: &DMatrix<f64>, members: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let pairs = eigen_desc(sub_matrix(corr, members), 2);
    let (l1, v1) = &pairs[0];
    let (l2, v2) = &pairs[1];
    let a: Vec<f64> = v1.iter().map(|x| x * l1.sqrt()).collect();
    let b: Vec<f64> = v2.iter().map(|x| x * l2.sqrt()).collect();

    // Quartimax for two factors: maximizing sum(a'^4 + b'^4) over the angle
    // gives 4θ = arg(sum (a + ib)^4).
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        let r2 = x * x + y * y;
        let phi = y.atan2(*x);
        re += r2 * r2 * (4.0 * phi).cos();
        im += r2 * r2 * (4.0 * phi).sin();
    }
    let theta = im.atan2(re) / 4.0;
    let (s, c) = theta.sin_cos();
    let wa: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * c + y * s).collect();
    let wb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| -x * s + y * c).collect();
    let va = quadratic_form(corr, members, &wa);
    let vb = quadratic_form(corr, members, &wb);

    let fits: Vec<(f64, f64)> = members
        .iter()
        .map(|&i| {
            (
                r2_with(corr, i, members, &wa, va),
                r2_with(corr, i, members, &wb, vb),
            )
        })
        .collect();
    let mut to_b: Vec<bool> = fits.iter().map(|(ra, rb)| rb > ra).collect();
    if to_b.iter().all(|&x| x) || to_b.iter().all(|&x| !x) {
        // Degenerate rotation: peel off the member leaning most toward the
        // emptier side.
        let want_b = !to_b[0];
        let pick = (0..members.len())
            .max_by(|&p, &q| {
                let lean = |k: usize| {
                    let (ra, rb) = fits[k];
                    if want_b {
                        rb - ra
                    } else {
                        ra - rb
                    }
                };
                lean(p).total_cmp(&lean(q)).then(q.cmp(&p))
            })
            .unwrap();
        to_b[pick] = want_b;
    }

    let halves = |to_b: &[bool]| -> (Vec<usize>, Vec<usize>) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (k, &m) in members.iter().enumerate() {
            if to_b[k] {
                right.push(m);
            } else {
                left.push(m);
            }
        }
        (left, right)
    };

    let (left, right) = halves(&to_b);
    let ca = first_component(corr, &left);
    let cb = first_component(corr, &right);
    let reassigned: Vec<bool> = members
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let ra = r2_with(corr, i, &left, &ca.weights, ca.eigenvalue);
            let rb = r2_with(corr, i, &right, &cb.weights, cb.eigenvalue);
            if ra > rb {
                false
            } else if rb > ra {
                true
            } else {
                to_b[k]
            }
        })
        .collect();
    if reassigned.iter().any(|&x| x) && reassigned.iter().any(|&x| !x) {
        halves(&reassigned)
    } else {
        (left, right)
    }
}

/// Runs the divisive splitting, calling `visit` after every cluster count
/// from 1 up to `max_clusters`.
fn divisive(
    corr: &DMatrix<f64>,
    max_clusters: usize,
    mut visit: impl FnMut(&[Vec<usize>]),
) -> Vec<Vec<usize>> {
    let p = corr.nrows();
    let mut clusters: Vec<Vec<usize>> = vec![(0..p).collect()];
    let mut second: Vec<f64> = vec![second_eigenvalue(corr, &clusters[0])];
    visit(&clusters);
    while clusters.len() < max_clusters {
        let target = (0..clusters.len())
            .filter(|&c| clusters[c].len() >= 2)
            .max_by(|&a, &b| second[a].total_cmp(&second[b]).then(b.cmp(&a)))
            .expect("a splittable cluster exists while count < feature count");
        let (left, right) = split_cluster(corr, &clusters[target]);
        second[target] = second_eigenvalue(corr, &left);
        second.push(second_eigenvalue(corr, &right));
        clusters[target] = left;
        clusters.push(right);
        visit(&clusters);
    }
    clusters
}

fn summarize(
    names: &[String],
    corr: &DMatrix<f64>,
    mut clusters: Vec<Vec<usize>>,
) -> VariableClustering {
    clusters.iter_mut().for_each(|c| c.sort_unstable());
    clusters.sort_by_key(|c| c[0]);
    let comps: Vec<Component> = clusters.iter().map(|c| first_component(corr, c)).collect();
    let p = names.len();
    let mut r2_own = vec![0.0; p];
    let mut r2_next = vec![0.0; p];
    for (ci, members) in clusters.iter().enumerate() {
        for &i in members {
            let mut next = 0.0f64;
            for (cj, other) in clusters.iter().enumerate() {
                let r2 = r2_with(corr, i, other, &comps[cj].weights, comps[cj].eigenvalue);
                if ci == cj {
                    r2_own[i] = r2;
                } else {
                    next = next.max(r2);
                }
            }
            r2_next[i] = next;
        }
    }
    VariableClustering {
        feature_names: names.to_vec(),
        eigenvalues: comps.iter().map(|c| c.eigenvalue).collect(),
        components: comps.into_iter().map(|c| c.weights).collect(),
        clusters,
        r2_own,
        r2_next,
    }
}

/// Splits the feature set until it has `target_clusters` clusters, always
/// splitting the cluster with the largest second eigenvalue.
pub fn cluster_variables(ds: &Dataset, target_clusters: usize) -> Result<VariableClustering> {
    let p = ds.n_features();
    if target_clusters == 0 || target_clusters > p {
        return Err(Error::invalid(format!(
            "cluster count {target_clusters} outside 1..={p}"
        )));
    }
    let corr = correlation_matrix(ds)?;
    let clusters = divisive(&corr, target_clusters, |_| {});
    Ok(summarize(ds.feature_names(), &corr, clusters))
}

/// Share of total standardized variance captured by the cluster components.
pub fn variance_explained(clustering: &VariableClustering) -> f64 {
    clustering.eigenvalues.iter().sum::<f64>() / clustering.n_features() as f64
}

/// Variance explained after each split, for cluster counts 1..=`max_clusters`.
pub fn variance_explained_curve(ds: &Dataset, max_clusters: usize) -> Result<Vec<f64>> {
    let p = ds.n_features();
    if max_clusters == 0 || max_clusters > p {
        return Err(Error::invalid(format!(
            "cluster count {max_clusters} outside 1..={p}"
        )));
    }
    let corr = correlation_matrix(ds)?;
    let mut curve = Vec::with_capacity(max_clusters);
    divisive(&corr, max_clusters, |clusters| {
        let total: f64 = clusters
            .iter()
            .map(|c| first_component(&corr, c).eigenvalue)
            .sum();
        curve.push(total / p as f64);
    });
    Ok(curve)
}

/// `(1 - r2_own) / (1 - r2_next)`; infinite when `r2_next` is 1.
pub fn one_minus_r2_ratio(r2_own: f64, r2_next: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r2_own) || !(0.0..=1.0).contains(&r2_next) {
        return Err(Error::invalid(format!(
            "R² values must lie in [0, 1], got ({r2_own}, {r2_next})"
        )));
    }
    if r2_next == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - r2_own) / (1.0 - r2_next))
}

/// The member with the lowest 1 − R² ratio from every cluster, in cluster
/// order; ties go to the smaller name.
pub fn select_from_clusters(clustering: &VariableClustering) -> Result<SelectionResult> {
    let names = &clustering.feature_names;
    let mut selected = Vec::with_capacity(clustering.clusters.len());
    for members in &clustering.clusters {
        let mut best: Option<(f64, &str)> = None;
        for &i in members {
            let ratio = one_minus_r2_ratio(clustering.r2_own[i], clustering.r2_next[i])?;
            let better = match best {
                None => true,
                Some((r, n)) => ratio < r || (ratio == r && names[i].as_str() < n),
            };
            if better {
                best = Some((ratio, &names[i]));
            }
        }
        let (_, name) = best.ok_or_else(|| Error::invalid("empty cluster"))?;
        selected.push(name.to_string());
    }
    Ok(SelectionResult {
        method: FsMethod::Cluster,
        k: selected.len(),
        selected,
    })
}
