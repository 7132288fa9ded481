use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::{cmp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    /// Order of the L_p distance; 1 is Manhattan, 2 Euclidean.
    pub p: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5, p: 2.0 }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("KNN k must be at least 1".into()));
        }
        if !(self.p >= 1.0) {
            return Err(Error::Config(format!("KNN p must be >= 1, got {}", self.p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel<T> {
    pub k: usize,
    pub p: f64,
    pub n_classes: usize,
    pub train: Matrix<T>,
    pub labels: Vec<usize>,
}

/// `Σ|a − b|^p`. The p-th root is monotone and skipped; `distance` applies it.
#[inline]
fn powered_distance<T: Scalar>(a: &[T], b: &[T], p: f64) -> T {
    if p == 1.0 {
        a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum()
    } else if p == 2.0 {
        a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
    } else if p.is_infinite() {
        a.iter()
            .zip(b)
            .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
    } else {
        let pt = T::lit(p);
        a.iter().zip(b).map(|(&x, &y)| (x - y).abs().powf(pt)).sum()
    }
}

/// L_p distance between two vectors.
pub fn distance<T: Scalar>(a: &[T], b: &[T], p: f64) -> T {
    let s = powered_distance(a, b, p);
    if p == 1.0 || p.is_infinite() {
        s
    } else {
        s.powf(T::lit(1.0 / p))
    }
}

pub(crate) fn fit<T: Scalar>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    cfg: &KnnConfig,
) -> Result<KnnModel<T>> {
    cfg.validate()?;
    if cfg.k > x.rows() {
        return Err(Error::Config(format!(
            "KNN k = {} exceeds the {} training rows",
            cfg.k,
            x.rows()
        )));
    }
    Ok(KnnModel {
        k: cfg.k,
        p: cfg.p,
        n_classes,
        train: x.clone(),
        labels: y.to_vec(),
    })
}

impl<T: Scalar> KnnModel<T> {
    /// Indices of the `k` nearest training rows, nearest first; equal distances keep training order.
    pub fn neighbours(&self, query: &[T]) -> Vec<usize> {
        let mut d: Vec<(T, usize)> = self
            .train
            .iter_rows()
            .enumerate()
            .map(|(i, r)| (powered_distance(r, query, self.p), i))
            .collect();
        let order = |a: &(T, usize), b: &(T, usize)| cmp(&a.0, &b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, order);
            d.truncate(self.k);
        }
        d.sort_by(order);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority class among the neighbours; among tied classes the one met first (nearest) wins.
    pub fn predict_index(&self, query: &[T]) -> usize {
        let nn = self.neighbours(query);
        let mut votes = vec![0usize; self.n_classes];
        for &i in &nn {
            votes[self.labels[i]] += 1;
        }
        let top = *votes.iter().max().expect("at least one class");
        nn.iter()
            .map(|&i| self.labels[i])
            .find(|&c| votes[c] == top)
            .expect("some neighbour has the top count")
    }

    pub fn predict_all(&self, x: &Matrix<T>) -> Vec<usize> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_index(x.row(i)))
            .collect()
    }
}
