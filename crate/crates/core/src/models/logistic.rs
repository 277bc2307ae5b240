//! Binomial logistic regression fitted by Newton–Raphson (IRLS) with
//! step halving.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{logit, sigmoid};

const MAX_ITER: usize = 100;
const LL_TOL: f64 = 1e-8;
const GRAD_TOL: f64 = 1e-8;
const RIDGE_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// False when the iteration cap was hit first (e.g. separable data).
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    /// A model with the given parameters and generic feature names.
    pub fn from_parameters(intercept: f64, coefficients: Vec<f64>) -> Self {
        LogisticModel {
            feature_names: (0..coefficients.len()).map(|i| format!("x{i}")).collect(),
            intercept,
            coefficients,
            converged: true,
            iterations: 0,
        }
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

fn design(ds: &Dataset) -> DMatrix<f64> {
    let p = ds.n_features();
    DMatrix::from_fn(ds.n_rows(), p + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            ds.value(r, c - 1)
        }
    })
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y.iter()).map(|(e, t)| t * e - softplus(*e)).sum()
}

/// Gradient `X'(y - p)` of the log-likelihood.
fn gradient(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    let eta = x * beta;
    let resid = DVector::from_iterator(y.len(), eta.iter().zip(y.iter()).map(|(e, t)| t - sigmoid(*e)));
    x.tr_mul(&resid)
}

/// Maximizes the binomial log-likelihood of the logistic model.
pub fn train_logistic(ds: &Dataset) -> Result<LogisticModel> {
    if ds.has_missing() {
        return Err(Error::invalid("logistic regression needs imputed data"));
    }
    if !ds.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let x = design(ds);
    let y = DVector::from_iterator(ds.n_rows(), ds.target().iter().map(|&t| f64::from(t)));
    let k = x.ncols();
    let mut beta = DVector::zeros(k);
    beta[0] = logit(ds.positive_count() as f64 / ds.n_rows() as f64);
    let mut ll = log_likelihood(&x, &y, &beta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        let eta = &x * &beta;
        let w: Vec<f64> = eta
            .iter()
            .map(|e| {
                let p = sigmoid(*e);
                p * (1.0 - p)
            })
            .collect();
        let mut xw = x.clone();
        for (r, wr) in w.iter().enumerate() {
            let s = wr.sqrt();
            xw.row_mut(r).scale_mut(s);
        }
        let mut hess = xw.tr_mul(&xw);
        for i in 0..k {
            hess[(i, i)] += RIDGE_JITTER;
        }
        let grad = gradient(&x, &y, &beta);
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => hess
                .lu()
                .solve(&grad)
                .ok_or_else(|| Error::Numerical("singular information matrix".into()))?,
        };

        // Changes below summation rounding are not a loss of likelihood.
        let floor = ll - 1e-12 * (1.0 + ll.abs());
        let mut t = 1.0;
        let mut candidate = &beta + &step * t;
        let mut new_ll = log_likelihood(&x, &y, &candidate);
        while !(new_ll >= floor) && t > 1e-10 {
            t *= 0.5;
            candidate = &beta + &step * t;
            new_ll = log_likelihood(&x, &y, &candidate);
        }
        if !(new_ll >= floor) {
            // No ascent direction left at working precision.
            let g = gradient(&x, &y, &beta).amax();
            converged = g <= GRAD_TOL * 100.0;
            break;
        }
        let delta = new_ll - ll;
        beta = candidate;
        ll = new_ll;
        if delta.abs() < LL_TOL && gradient(&x, &y, &beta).amax() <= GRAD_TOL {
            converged = true;
            break;
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numerical("logistic coefficients diverged".into()));
    }
    Ok(LogisticModel {
        feature_names: ds.feature_names().to_vec(),
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        converged,
        iterations,
    })
}

/// Per-row probability of the positive class.
pub fn predict_logistic(m: &LogisticModel, ds: &Dataset) -> Result<Vec<f64>> {
    if ds.n_features() != m.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: m.coefficients.len(),
            actual: ds.n_features(),
        });
    }
    Ok((0..ds.n_rows()).map(|r| sigmoid(m.margin(ds.row(r)))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_2x2() -> Dataset {
        // x = 0: 1 of 4 positive; x = 1: 3 of 4 positive; 100 copies each.
        let mut values = Vec::new();
        let mut target = Vec::new();
        for _ in 0..100 {
            for (x, y) in [(0.0, 1), (0.0, 0), (0.0, 0), (0.0, 0), (1.0, 1), (1.0, 1), (1.0, 1), (1.0, 0)] {
                values.push(x);
                target.push(y);
            }
        }
        Dataset::new(vec!["x".into()], values, target).unwrap()
    }

    #[test]
    fn closed_form_log_odds() {
        let m = train_logistic(&table_2x2()).unwrap();
        assert!(m.converged);
        assert!((m.intercept - (1.0f64 / 3.0).ln()).abs() < 1e-4);
        assert!((m.coefficients[0] - 9f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn intercept_only_is_logit_of_rate() {
        let target: Vec<u8> = (0..100).map(|i| u8::from(i < 60)).collect();
        let ds = Dataset::new(vec![], vec![], target).unwrap();
        let m = train_logistic(&ds).unwrap();
        assert!((m.intercept - 1.5f64.ln()).abs() < 1e-6);
        assert!(m.coefficients.is_empty());
    }

    #[test]
    fn prediction_examples() {
        let ds = Dataset::new(vec!["a".into()], vec![1.0, -2.0], vec![0, 1]).unwrap();
        let zero = LogisticModel::from_parameters(0.0, vec![0.0]);
        assert_eq!(predict_logistic(&zero, &ds).unwrap(), vec![0.5, 0.5]);
        let none = Dataset::new(vec![], vec![], vec![1]).unwrap();
        let base = LogisticModel::from_parameters(3f64.ln(), vec![]);
        assert!((predict_logistic(&base, &none).unwrap()[0] - 0.75).abs() < 1e-15);
        let pos = LogisticModel::from_parameters(0.1, vec![0.7]);
        let p = predict_logistic(&pos, &ds).unwrap();
        assert!(p[0] > p[1]);
        let wide = Dataset::new(vec!["a".into(), "b".into()], vec![1.0, 2.0], vec![1]).unwrap();
        assert!(matches!(
            predict_logistic(&pos, &wide),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let s = crate::synth::generate(&crate::synth::SynthSpec {
            n_rows: 600,
            missing_rate: 0.0,
            ..Default::default()
        })
        .unwrap();
        let stats = crate::dataset::fit_preprocessor(&s.dataset).unwrap();
        let ds = crate::dataset::apply_preprocessor(&s.dataset, &stats).unwrap();
        let m = train_logistic(&ds).unwrap();
        assert!(m.converged);
        let mut beta = vec![m.intercept];
        beta.extend(&m.coefficients);
        let g = gradient(&design(&ds), &DVector::from_iterator(ds.n_rows(), ds.target().iter().map(|&t| f64::from(t))), &DVector::from_vec(beta));
        assert!(g.amax() <= 1e-6, "gradient {}", g.amax());
    }

    #[test]
    fn single_class_rejected() {
        let ds = Dataset::new(vec!["a".into()], vec![1.0, 2.0], vec![1, 1]).unwrap();
        assert!(matches!(train_logistic(&ds), Err(Error::SingleClass)));
    }
}
