//! Soft-margin support vector machine trained by sequential minimal optimisation,
//! one binary machine per class pair with a majority vote.

use serde::{Deserialize, Serialize};

use super::{check_row, check_training, Classifier};
use crate::error::{Error, Result};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
/// Iteration budget per binary problem, in multiples of its training-set size.
pub const DEFAULT_MAX_PASSES: usize = 50;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    /// `(x.y / d + 1)^degree` with `d` the feature count.
    Polynomial { degree: u32 },
}

impl Kernel {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
        match self {
            Kernel::Linear => dot,
            Kernel::Polynomial { degree } => (dot / a.len() as f64 + 1.0).powi(degree as i32),
        }
    }
}

#[derive(Debug, Clone)]
struct Machine {
    positive: usize,
    negative: usize,
    support: Vec<Vec<f64>>,
    /// `alpha * y` for each support vector.
    coef: Vec<f64>,
    rho: f64,
}

impl Machine {
    fn decision(&self, kernel: Kernel, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * kernel.eval(s, x))
            .sum::<f64>()
            - self.rho
    }
}

/// Result of one binary SMO solve.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `min 0.5 a'Qa - e'a` s.t. `0 <= a <= c`, `y'a = 0` with `Q_ij = y_i y_j K_ij`.
///
/// The working pair is the maximal violating `i` with the `j` of largest second-order
/// objective decrease; iteration stops when the KKT gap falls below `tol`.
pub fn smo(kernel: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = -y[t] * g[t];
            let free = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if free && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let eligible = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !eligible {
                continue;
            }
            let v = y[t] * g[t];
            gmax2 = gmax2.max(v);
            let grad_diff = gmax + v;
            if i != usize::MAX && grad_diff > 0.0 {
                let quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                let obj = -grad_diff * grad_diff / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || i == usize::MAX || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let quad = (k(i, i) + k(j, j) - 2.0 * k(i, j)).max(TAU);
        if y[i] != y[j] {
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            g[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_count += 1;
            free_sum += yg;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };
    SmoSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone)]
pub struct Svm {
    pub kernel: Kernel,
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
    machines: Vec<Machine>,
    n_classes: usize,
    dim: usize,
    /// Binary problems that hit the iteration cap during the last fit.
    pub unconverged: usize,
}

impl Svm {
    pub fn new(kernel: Kernel) -> Svm {
        Svm {
            kernel,
            c: DEFAULT_C,
            tol: DEFAULT_TOLERANCE,
            max_passes: DEFAULT_MAX_PASSES,
            machines: Vec::new(),
            n_classes: 0,
            dim: 0,
            unconverged: 0,
        }
    }

    fn train_pair(&self, x: &[Vec<f64>], y: &[usize], pos: usize, neg: usize) -> (Machine, bool) {
        let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &c)| c == pos || c == neg).map(|(r, _)| r).collect();
        let signs: Vec<f64> = y
            .iter()
            .filter(|&&c| c == pos || c == neg)
            .map(|&c| if c == pos { 1.0 } else { -1.0 })
            .collect();
        let n = rows.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.kernel.eval(rows[i], rows[j]);
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        let sol = smo(&gram, &signs, self.c, self.tol, self.max_passes.saturating_mul(n).max(1));
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for t in 0..n {
            if sol.alpha[t] > 0.0 {
                support.push(rows[t].clone());
                coef.push(sol.alpha[t] * signs[t]);
            }
        }
        (
            Machine {
                positive: pos,
                negative: neg,
                support,
                coef,
                rho: sol.rho,
            },
            sol.converged,
        )
    }

    /// Decision values of every pairwise machine; positive favours the first class.
    pub fn decisions(&self, x: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
        if self.machines.is_empty() {
            return Err(Error::NotFitted);
        }
        check_row(x, self.dim)?;
        Ok(self
            .machines
            .iter()
            .map(|m| (m.positive, m.negative, m.decision(self.kernel, x)))
            .collect())
    }
}

impl Classifier for Svm {
    fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<()> {
        if !(self.c > 0.0 && self.tol > 0.0) {
            return Err(Error::invalid("SVM needs positive C and tolerance"));
        }
        self.dim = check_training(x, y, n_classes)?;
        self.n_classes = n_classes;
        let mut present = vec![false; n_classes];
        y.iter().for_each(|&c| present[c] = true);
        self.machines.clear();
        self.unconverged = 0;
        for a in 0..n_classes {
            for b in a + 1..n_classes {
                if present[a] && present[b] {
                    let (m, ok) = self.train_pair(x, y, a, b);
                    self.unconverged += usize::from(!ok);
                    self.machines.push(m);
                }
            }
        }
        if self.machines.is_empty() {
            return Err(Error::insufficient("SVM needs at least two classes"));
        }
        if self.unconverged > 0 {
            log::warn!("{} SVM sub-problems stopped at the iteration cap", self.unconverged);
        }
        Ok(())
    }

    fn predict_one(&self, x: &[f64]) -> Result<usize> {
        let mut votes = vec![0usize; self.n_classes];
        for (p, n, d) in self.decisions(x)? {
            votes[if d > 0.0 { p } else { n }] += 1;
        }
        let top = *votes.iter().max().unwrap();
        Ok(votes.iter().position(|&v| v == top).unwrap())
    }
}
