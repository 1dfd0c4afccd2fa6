use super::{check_row, check_training, Classifier};
use crate::error::{Error, Result};

/// k-nearest-neighbour vote under Euclidean distance.
///
/// A tied vote goes to whichever tied class owns the nearest neighbour. Equidistant
/// neighbours are ordered by training index.
#[derive(Debug, Clone)]
pub struct Knn {
    pub k: usize,
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_classes: usize,
}

impl Knn {
    pub fn new(k: usize) -> Knn {
        Knn {
            k,
            x: Vec::new(),
            y: Vec::new(),
            n_classes: 0,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

impl Classifier for Knn {
    fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        check_training(x, y, n_classes)?;
        self.x = x.to_vec();
        self.y = y.to_vec();
        self.n_classes = n_classes;
        Ok(())
    }

    fn predict_one(&self, q: &[f64]) -> Result<usize> {
        if self.x.is_empty() {
            return Err(Error::NotFitted);
        }
        check_row(q, self.x[0].len())?;
        let mut d: Vec<(f64, usize)> = self.x.iter().enumerate().map(|(i, r)| (sq_dist(r, q), i)).collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        let mut votes = vec![0usize; self.n_classes];
        for &(_, i) in &d {
            votes[self.y[i]] += 1;
        }
        let top = *votes.iter().max().unwrap();
        Ok(d.iter().map(|&(_, i)| self.y[i]).find(|&c| votes[c] == top).unwrap())
    }
}
