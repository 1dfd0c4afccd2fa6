use std::f64::consts::PI;

use super::{check_row, check_training, Classifier};
use crate::error::{Error, Result};

/// Added to every variance, relative to the largest feature variance.
pub const DEFAULT_VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian naive Bayes: independent per-feature normal likelihoods per class.
#[derive(Debug, Clone)]
pub struct GaussianNb {
    pub var_smoothing: f64,
    fit: Option<NbFit>,
}

#[derive(Debug, Clone)]
struct NbFit {
    log_prior: Vec<f64>,
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

impl Default for GaussianNb {
    fn default() -> Self {
        GaussianNb::new(DEFAULT_VAR_SMOOTHING)
    }
}

impl GaussianNb {
    pub fn new(var_smoothing: f64) -> GaussianNb {
        GaussianNb { var_smoothing, fit: None }
    }

    /// Log joint likelihood of `x` under each class.
    pub fn log_joint(&self, x: &[f64]) -> Result<Vec<f64>> {
        let fit = self.fit.as_ref().ok_or(Error::NotFitted)?;
        check_row(x, fit.mean[0].len())?;
        Ok((0..fit.log_prior.len())
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .zip(&fit.mean[c])
                    .zip(&fit.var[c])
                    .map(|((v, m), s2)| -0.5 * ((2.0 * PI * s2).ln() + (v - m).powi(2) / s2))
                    .sum();
                fit.log_prior[c] + ll
            })
            .collect())
    }
}

impl Classifier for GaussianNb {
    fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<()> {
        if !(self.var_smoothing >= 0.0) {
            return Err(Error::invalid("variance smoothing must be non-negative"));
        }
        let p = check_training(x, y, n_classes)?;
        let mut count = vec![0usize; n_classes];
        let mut mean = vec![vec![0.0; p]; n_classes];
        for (row, &c) in x.iter().zip(y) {
            count[c] += 1;
            mean[c].iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        for c in 0..n_classes {
            let k = count[c].max(1) as f64;
            mean[c].iter_mut().for_each(|m| *m /= k);
        }
        let mut var = vec![vec![0.0; p]; n_classes];
        for (row, &c) in x.iter().zip(y) {
            for j in 0..p {
                var[c][j] += (row[j] - mean[c][j]).powi(2);
            }
        }
        let global_max = (0..p)
            .map(|j| {
                let mu = x.iter().map(|r| r[j]).sum::<f64>() / x.len() as f64;
                x.iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / x.len() as f64
            })
            .fold(0.0, f64::max);
        let floor = (self.var_smoothing * global_max).max(1e-12);
        for c in 0..n_classes {
            let k = count[c].max(1) as f64;
            var[c].iter_mut().for_each(|v| *v = *v / k + floor);
        }
        let n = x.len() as f64;
        let log_prior = count
            .iter()
            .map(|&k| if k == 0 { f64::NEG_INFINITY } else { (k as f64 / n).ln() })
            .collect();
        self.fit = Some(NbFit { log_prior, mean, var });
        Ok(())
    }

    fn predict_one(&self, x: &[f64]) -> Result<usize> {
        let lj = self.log_joint(x)?;
        Ok(argmax(&lj))
    }
}

/// Index of the largest value, first on ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}
