//! Single-hidden-layer perceptron: ReLU hidden units, softmax output, cross-entropy loss,
//! mini-batch gradient descent with momentum and early stopping on a held-out split.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_row, check_training, split_indices, Classifier};
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_MAX_EPOCHS: usize = 500;
pub const DEFAULT_PATIENCE: usize = 20;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.1;

/// Weights and biases of the network; also used for gradients of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

fn columns(x: &[Vec<f64>], idx: impl ExactSizeIterator<Item = usize>, dim: usize) -> DMatrix<f64> {
    let cols = idx.len();
    let mut data = Vec::with_capacity(cols * dim);
    for i in idx {
        data.extend_from_slice(&x[i]);
    }
    DMatrix::from_vec(dim, cols, data)
}

impl Network {
    /// He-normal hidden weights, Glorot-normal output weights, zero biases.
    pub fn new(inputs: usize, hidden: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Network {
        let h = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).unwrap();
        let o = Normal::new(0.0, (2.0 / (hidden + outputs) as f64).sqrt()).unwrap();
        Network {
            w1: DMatrix::from_fn(hidden, inputs, |_, _| h.sample(rng)),
            b1: DVector::zeros(hidden),
            w2: DMatrix::from_fn(outputs, hidden, |_, _| o.sample(rng)),
            b2: DVector::zeros(outputs),
        }
    }

    pub fn zeros_like(&self) -> Network {
        Network {
            w1: DMatrix::zeros(self.w1.nrows(), self.w1.ncols()),
            b1: DVector::zeros(self.b1.len()),
            w2: DMatrix::zeros(self.w2.nrows(), self.w2.ncols()),
            b2: DVector::zeros(self.b2.len()),
        }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flattened parameters: `w1`, `b1`, `w2`, `b2`, each column-major.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(self.w1.as_slice());
        v.extend_from_slice(self.b1.as_slice());
        v.extend_from_slice(self.w2.as_slice());
        v.extend_from_slice(self.b2.as_slice());
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut at = 0;
        for dst in [
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
        ] {
            let n = dst.len();
            dst.copy_from_slice(&p[at..at + n]);
            at += n;
        }
    }

    fn hidden_pre(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z1 = &self.w1 * x;
        for mut col in z1.column_iter_mut() {
            col += &self.b1;
        }
        z1
    }

    /// Log class probabilities, one column per sample.
    fn log_softmax(&self, a1: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z2 = &self.w2 * a1;
        for mut col in z2.column_iter_mut() {
            col += &self.b2;
            let m = col.max();
            let lse = m + col.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            col.iter_mut().for_each(|v| *v -= lse);
        }
        z2
    }

    fn log_probs(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.log_softmax(&self.hidden_pre(x).map(|v| v.max(0.0)))
    }

    /// Mean cross-entropy and its gradient over the rows `x` with labels `y`.
    pub fn loss_and_grad(&self, x: &[Vec<f64>], y: &[usize]) -> (f64, Network) {
        let xm = columns(x, 0..x.len(), self.w1.ncols());
        self.batch_loss_and_grad(&xm, y)
    }

    fn batch_loss_and_grad(&self, x: &DMatrix<f64>, y: &[usize]) -> (f64, Network) {
        let b = x.ncols() as f64;
        let z1 = self.hidden_pre(x);
        let a1 = z1.map(|v| v.max(0.0));
        let logp = self.log_softmax(&a1);
        let mut loss = 0.0;
        let mut dz2 = logp.map(f64::exp);
        for (j, &c) in y.iter().enumerate() {
            loss -= logp[(c, j)];
            dz2[(c, j)] -= 1.0;
        }
        dz2 /= b;
        let dw2 = &dz2 * a1.transpose();
        let db2 = dz2.column_sum();
        let mut dz1 = self.w2.transpose() * &dz2;
        dz1.zip_apply(&z1, |g, z| {
            if z <= 0.0 {
                *g = 0.0
            }
        });
        let dw1 = &dz1 * x.transpose();
        let db1 = dz1.column_sum();
        (
            loss / b,
            Network {
                w1: dw1,
                b1: db1,
                w2: dw2,
                b2: db2,
            },
        )
    }

    pub fn loss(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let logp = self.log_probs(&columns(x, 0..x.len(), self.w1.ncols()));
        -y.iter().enumerate().map(|(j, &c)| logp[(c, j)]).sum::<f64>() / x.len() as f64
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let logp = self.log_probs(&DMatrix::from_column_slice(x.len(), 1, x));
        logp.iter().map(|v| v.exp()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub hidden: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub history: Vec<EpochStats>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    net: Option<Network>,
}

impl Mlp {
    pub fn new(hidden: usize, seed: u64) -> Mlp {
        Mlp {
            hidden,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            batch_size: DEFAULT_BATCH_SIZE,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            seed,
            history: Vec::new(),
            best_epoch: 0,
            net: None,
        }
    }

    pub fn network(&self) -> Option<&Network> {
        self.net.as_ref()
    }

    fn validate_params(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::invalid("hidden width and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("learning rate must be positive and momentum in [0, 1)"));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(Error::invalid("validation fraction must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

impl Classifier for Mlp {
    fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<()> {
        self.validate_params()?;
        let dim = check_training(x, y, n_classes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let (train, valid) = if self.validation_fraction > 0.0 {
            split_indices(y, n_classes, self.validation_fraction, &mut rng)
        } else {
            ((0..x.len()).collect(), Vec::new())
        };
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
            (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
        };
        let (xt, yt) = pick(&train);
        let (xv, yv) = pick(&valid);

        let mut net = Network::new(dim, self.hidden, n_classes, &mut rng);
        let mut velocity = net.zeros_like();
        let mut best = (f64::INFINITY, net.clone());
        let mut since_best = 0;
        let mut order: Vec<usize> = (0..xt.len()).collect();
        self.history.clear();
        self.best_epoch = 0;
        for epoch in 0..self.max_epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(self.batch_size) {
                let xb = columns(&xt, chunk.iter().copied(), dim);
                let yb: Vec<usize> = chunk.iter().map(|&i| yt[i]).collect();
                let (_, g) = net.batch_loss_and_grad(&xb, &yb);
                let (lr, mu) = (self.learning_rate, self.momentum);
                velocity.w1 = &velocity.w1 * mu - g.w1 * lr;
                velocity.b1 = &velocity.b1 * mu - g.b1 * lr;
                velocity.w2 = &velocity.w2 * mu - g.w2 * lr;
                velocity.b2 = &velocity.b2 * mu - g.b2 * lr;
                net.w1 += &velocity.w1;
                net.b1 += &velocity.b1;
                net.w2 += &velocity.w2;
                net.b2 += &velocity.b2;
            }
            let train_loss = net.loss(&xt, &yt);
            let validation_loss = if xv.is_empty() { train_loss } else { net.loss(&xv, &yv) };
            if !train_loss.is_finite() {
                return Err(Error::NonFinite("network loss; lower the learning rate".into()));
            }
            self.history.push(EpochStats { train_loss, validation_loss });
            if validation_loss < best.0 {
                best = (validation_loss, net.clone());
                self.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= self.patience {
                    break;
                }
            }
        }
        self.net = Some(best.1);
        Ok(())
    }

    fn predict_one(&self, x: &[f64]) -> Result<usize> {
        let net = self.net.as_ref().ok_or(Error::NotFitted)?;
        check_row(x, net.w1.ncols())?;
        Ok(super::bayes::argmax(&net.predict_proba(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::super::gaussian_blobs;
    use super::*;
    use rand::Rng;

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = gaussian_blobs(3, 40, 4, 2.0, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = Network::new(4, 7, 3, &mut rng);
        let (_, grad) = net.loss_and_grad(&x, &y);
        let g = grad.params();
        let p = net.params();
        let h = 1e-6;
        for _ in 0..20 {
            let k = rng.random_range(0..p.len());
            let mut probe = net.clone();
            let mut q = p.clone();
            q[k] = p[k] + h;
            probe.set_params(&q);
            let up = probe.loss(&x, &y);
            q[k] = p[k] - h;
            probe.set_params(&q);
            let down = probe.loss(&x, &y);
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - g[k]).abs() / numeric.abs().max(g[k].abs()).max(1e-8);
            assert!(rel < 1e-4, "param {k}: analytic {} numeric {numeric}", g[k]);
        }
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::new(3, 5, 2, &mut rng);
        let p: Vec<f64> = (0..net.n_params()).map(|i| i as f64).collect();
        net.set_params(&p);
        assert_eq!(net.params(), p);
    }

    #[test]
    fn learns_blobs_and_loss_falls() {
        let (x, y) = gaussian_blobs(3, 600, 6, 5.0, 12);
        let mut m = Mlp::new(25, 3);
        m.fit(&x, &y, 3).unwrap();
        let first: Vec<f64> = m.history.iter().take(10).map(|h| h.train_loss).collect();
        assert!(first.windows(2).all(|w| w[1] < w[0]), "{first:?}");
        let correct = m.predict(&x).unwrap().iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(correct >= 590, "{correct}");
    }

    #[test]
    fn deterministic_for_seed() {
        let (x, y) = gaussian_blobs(3, 150, 3, 3.0, 2);
        let mut a = Mlp::new(10, 5);
        let mut b = Mlp::new(10, 5);
        a.max_epochs = 30;
        b.max_epochs = 30;
        a.fit(&x, &y, 3).unwrap();
        b.fit(&x, &y, 3).unwrap();
        assert_eq!(a.network(), b.network());
    }
}
