use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::Scalar;

/// Per-column z-scoring fitted on training data (population std).
///
/// Columns with zero training variance are flagged in `constant` and passed
/// through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub constant: Vec<bool>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(x: &Matrix<T>) -> Result<Self> {
        if x.rows() < 2 {
            return Err(Error::InsufficientData(format!(
                "standardization needs at least 2 rows, got {}",
                x.rows()
            )));
        }
        let n = T::from_usize_lossy(x.rows());
        let mut mean = vec![T::zero(); x.cols()];
        for row in x.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); x.cols()];
        for row in x.iter_rows() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let std: Vec<T> = var.into_iter().map(|s| (s / n).sqrt()).collect();
        let constant = std.iter().map(|&s| !(s > T::zero())).collect();
        Ok(Self {
            mean,
            std,
            constant,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.constant[j] {
                    v
                } else {
                    (v - self.mean[j]) / self.std[j]
                }
            })
            .collect()
    }

    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        let data = x.iter_rows().flat_map(|r| self.apply_row(r)).collect();
        Matrix::from_vec(x.rows(), x.cols(), data).expect("same shape")
    }
}

pub fn fit_standardizer<T: Scalar>(x: &Matrix<T>) -> Result<Standardizer<T>> {
    Standardizer::fit(x)
}
