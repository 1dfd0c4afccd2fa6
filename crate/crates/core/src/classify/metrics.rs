use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multi-class confusion counts, `counts[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_predictions(actual: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
        if actual.len() != predicted.len() {
            return Err(Error::invalid("actual and predicted labels differ in length"));
        }
        if actual.is_empty() {
            return Err(Error::insufficient("cannot evaluate on an empty test set"));
        }
        let mut m = ConfusionMatrix::new(n_classes);
        for (&a, &p) in actual.iter().zip(predicted) {
            if a >= n_classes || p >= n_classes {
                return Err(Error::invalid(format!("label outside {n_classes} classes")));
            }
            m.counts[a][p] += 1;
        }
        Ok(m)
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn binary(&self, class: usize) -> BinaryCounts {
        let tp = self.counts[class][class];
        let actual: u64 = self.counts[class].iter().sum();
        let predicted: u64 = self.counts.iter().map(|r| r[class]).sum();
        let fn_ = actual - tp;
        let fp = predicted - tp;
        BinaryCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }

    /// Correct predictions over all predictions, percent.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => 100.0 * self.correct() as f64 / t as f64,
        }
    }

    pub fn class_metrics(&self) -> Vec<ClassMetrics> {
        (0..self.n_classes()).map(|c| ClassMetrics::from_counts(self.binary(c))).collect()
    }
}

/// Percentages for one class. A ratio with a zero denominator is reported as 0 with its
/// flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub sensitivity_undefined: bool,
    pub f1_undefined: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den > 0.0 {
        (num / den, false)
    } else {
        (0.0, true)
    }
}

impl ClassMetrics {
    pub fn from_counts(c: BinaryCounts) -> ClassMetrics {
        let (p, p_undef) = ratio(c.tp as f64, (c.tp + c.fp) as f64);
        let (s, s_undef) = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
        let (f, f_undef) = ratio(2.0 * p * s, p + s);
        ClassMetrics {
            precision: 100.0 * p,
            sensitivity: 100.0 * s,
            f1: 100.0 * f,
            precision_undefined: p_undef,
            sensitivity_undefined: s_undef,
            f1_undefined: f_undef,
        }
    }
}
