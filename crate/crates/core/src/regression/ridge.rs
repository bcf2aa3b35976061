use nalgebra::{DMatrix, DVector};

use super::tree::check_training_data;
use crate::error::{Error, Result};

/// Weighted ridge regression with an unpenalized intercept.
///
/// Minimizes `Σ_i w_i (y_i - b - x_i^T β)^2 + penalty ||β||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl RidgeModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], w: &[f64], penalty: f64) -> Result<Self> {
        if !(penalty >= 0.0) || !penalty.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ridge penalty must be a non-negative number, got {penalty}"
            )));
        }
        let p = check_training_data(x, y, w)?;
        let sw: f64 = w.iter().sum();
        let x_mean: Vec<f64> = (0..p)
            .map(|j| x.iter().zip(w).map(|(row, wi)| wi * row[j]).sum::<f64>() / sw)
            .collect();
        let y_mean = y.iter().zip(w).map(|(yi, wi)| wi * yi).sum::<f64>() / sw;

        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        let mut centered = vec![0.0; p];
        for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
            for j in 0..p {
                centered[j] = row[j] - x_mean[j];
            }
            let yc = yi - y_mean;
            for j in 0..p {
                rhs[j] += wi * centered[j] * yc;
                for k in 0..=j {
                    gram[(j, k)] += wi * centered[j] * centered[k];
                }
            }
        }
        for j in 0..p {
            gram[(j, j)] += penalty;
            for k in 0..j {
                gram[(k, j)] = gram[(j, k)];
            }
        }
        let beta = match gram.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => gram
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::InvalidConfig(format!("ridge solve failed: {e}")))?,
        };
        let coef: Vec<f64> = beta.iter().copied().collect();
        let intercept = y_mean - coef.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
        if !intercept.is_finite() || coef.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("ridge coefficients"));
        }
        Ok(Self { intercept, coef })
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.intercept
            + self
                .coef
                .iter()
                .zip(features)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}
