use nalgebra::{DMatrix, DVector};

use super::{check_row, check_training, Classifier};
use crate::error::{Error, Result};

/// Linear discriminant analysis with a pooled covariance.
#[derive(Debug, Clone, Default)]
pub struct Lda {
    fit: Option<LdaFit>,
}

#[derive(Debug, Clone)]
struct LdaFit {
    /// One row of discriminant weights per class.
    coef: DMatrix<f64>,
    intercept: DVector<f64>,
}

impl Lda {
    pub fn new() -> Lda {
        Lda::default()
    }
}

/// Cholesky of `m`, adding a growing ridge until it succeeds.
pub(crate) fn regularized_cholesky(m: &DMatrix<f64>) -> Result<nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>> {
    let p = m.nrows();
    let scale = (m.trace() / p as f64).abs().max(1e-12);
    let mut ridge = 1e-10 * scale;
    for _ in 0..12 {
        let mut reg = m.clone();
        for i in 0..p {
            reg[(i, i)] += ridge;
        }
        if let Some(c) = reg.cholesky() {
            return Ok(c);
        }
        ridge *= 10.0;
    }
    Err(Error::invalid("covariance matrix is not positive definite"))
}

impl Classifier for Lda {
    fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<()> {
        let p = check_training(x, y, n_classes)?;
        let n = x.len();
        let mut means = DMatrix::<f64>::zeros(n_classes, p);
        let mut counts = vec![0usize; n_classes];
        for (row, &c) in x.iter().zip(y) {
            counts[c] += 1;
            for j in 0..p {
                means[(c, j)] += row[j];
            }
        }
        for c in 0..n_classes {
            if counts[c] > 0 {
                let k = counts[c] as f64;
                means.row_mut(c).iter_mut().for_each(|v| *v /= k);
            }
        }
        let mut scatter = DMatrix::<f64>::zeros(p, p);
        for (row, &c) in x.iter().zip(y) {
            let d = DVector::from_iterator(p, (0..p).map(|j| row[j] - means[(c, j)]));
            scatter.ger(1.0, &d, &d, 1.0);
        }
        let present = counts.iter().filter(|&&k| k > 0).count();
        let dof = n.saturating_sub(present).max(1) as f64;
        let chol = regularized_cholesky(&(scatter / dof))?;

        let mut coef = DMatrix::<f64>::zeros(n_classes, p);
        let mut intercept = DVector::<f64>::from_element(n_classes, f64::NEG_INFINITY);
        for c in 0..n_classes {
            if counts[c] == 0 {
                continue;
            }
            let mu = means.row(c).transpose();
            let w = chol.solve(&mu);
            intercept[c] = -0.5 * mu.dot(&w) + (counts[c] as f64 / n as f64).ln();
            coef.set_row(c, &w.transpose());
        }
        self.fit = Some(LdaFit { coef, intercept });
        Ok(())
    }

    fn predict_one(&self, x: &[f64]) -> Result<usize> {
        let fit = self.fit.as_ref().ok_or(Error::NotFitted)?;
        check_row(x, fit.coef.ncols())?;
        let scores = &fit.coef * DVector::from_column_slice(x) + &fit.intercept;
        Ok(scores.argmax().0)
    }
}

#[cfg(test)]
mod tests {
    use super::super::gaussian_blobs as blobs;
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let (x, y) = blobs(2, 400, 4, 6.0, 1);
        let (xt, yt) = blobs(2, 200, 4, 6.0, 2);
        let mut m = Lda::new();
        m.fit(&x, &y, 2).unwrap();
        let pred = m.predict(&xt).unwrap();
        let acc = pred.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / yt.len() as f64;
        assert!(acc >= 0.99, "{acc}");
    }

    #[test]
    fn collinear_features_still_fit() {
        let (x, y) = blobs(3, 90, 2, 5.0, 3);
        let x: Vec<Vec<f64>> = x.into_iter().map(|r| vec![r[0], r[1], r[0] + r[1]]).collect();
        let mut m = Lda::new();
        m.fit(&x, &y, 3).unwrap();
        assert_eq!(m.predict(&x).unwrap().len(), 90);
    }

    #[test]
    fn predict_before_fit() {
        assert!(matches!(Lda::new().predict_one(&[0.0]), Err(Error::NotFitted)));
    }
}
