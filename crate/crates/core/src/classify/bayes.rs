use crate::error::Result;
use crate::matrix::Matrix;
use crate::num::Scalar;

/// Relative variance floor: `1e-9 ×` the mean per-feature variance of the training set.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes with frequency priors.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel<T> {
    pub priors: Vec<T>,
    /// `means[c][j]`
    pub means: Vec<Vec<T>>,
    pub variances: Vec<Vec<T>>,
}

pub(crate) fn fit<T: Scalar>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
) -> Result<NaiveBayesModel<T>> {
    let d = x.cols();
    let n = x.rows();
    let mut counts = vec![0usize; n_classes];
    let mut means = vec![vec![T::zero(); d]; n_classes];
    for (row, &c) in x.iter_rows().zip(y) {
        counts[c] += 1;
        for (m, &v) in means[c].iter_mut().zip(row) {
            *m = *m + v;
        }
    }
    for (m, &k) in means.iter_mut().zip(&counts) {
        let k = T::from_usize_lossy(k.max(1));
        m.iter_mut().for_each(|v| *v = *v / k);
    }
    let mut variances = vec![vec![T::zero(); d]; n_classes];
    for (row, &c) in x.iter_rows().zip(y) {
        for ((s, &v), &m) in variances[c].iter_mut().zip(row).zip(&means[c]) {
            *s = *s + (v - m) * (v - m);
        }
    }

    let overall = super::standardize::Standardizer::fit(x)
        .map(|s| s.std.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(d.max(1)))
        .unwrap_or(T::zero());
    let mut floor = T::lit(VARIANCE_FLOOR) * overall;
    if !(floor > T::zero()) {
        floor = T::lit(VARIANCE_FLOOR);
    }
    for (c, (v, &k)) in variances.iter_mut().zip(&counts).enumerate() {
        if k == 1 {
            log::warn!(
                "naive Bayes: class {c} has a single training sample; its variances are floored"
            );
        }
        let kt = T::from_usize_lossy(k.max(1));
        v.iter_mut().for_each(|s| *s = (*s / kt).max(floor));
    }
    let priors = counts
        .iter()
        .map(|&k| T::from_usize_lossy(k) / T::from_usize_lossy(n))
        .collect();
    Ok(NaiveBayesModel {
        priors,
        means,
        variances,
    })
}

impl<T: Scalar> NaiveBayesModel<T> {
    /// `ln P(c) + Σ_j ln N(x_j; μ_cj, σ²_cj)` per class; the evidence term is omitted.
    pub fn log_joint(&self, x: &[T]) -> Vec<T> {
        let two_pi = T::lit(2.0) * T::PI();
        let half = T::lit(0.5);
        (0..self.priors.len())
            .map(|c| {
                let ll: T = x
                    .iter()
                    .zip(self.means[c].iter().zip(&self.variances[c]))
                    .map(|(&v, (&m, &s2))| {
                        -half * (two_pi * s2).ln() - (v - m) * (v - m) / (s2 + s2)
                    })
                    .sum();
                self.priors[c].ln() + ll
            })
            .collect()
    }

    /// Normalised posteriors `P(c | x)`.
    pub fn posterior(&self, x: &[T]) -> Vec<T> {
        super::mlp::softmax(&self.log_joint(x))
    }

    pub fn predict_index(&self, x: &[T]) -> usize {
        let lj = self.log_joint(x);
        let mut best = 0;
        for c in 1..lj.len() {
            if lj[c] > lj[best] {
                best = c;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_pdf(x: f64, m: f64, s2: f64) -> f64 {
        (-(x - m) * (x - m) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt()
    }

    #[test]
    fn two_gaussians_by_hand() {
        // class 0 has samples {−1, 1}: mean 0, variance 1; class 1 {9, 11}: mean 10, variance 1
        let x = Matrix::from_vec(4, 1, vec![-1.0f64, 1.0, 9.0, 11.0]).unwrap();
        let m = fit(&x, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(m.means, vec![vec![0.0], vec![10.0]]);
        assert_eq!(m.variances, vec![vec![1.0], vec![1.0]]);
        let p0 = 0.5 * normal_pdf(1.0, 0.0, 1.0);
        let p1 = 0.5 * normal_pdf(1.0, 10.0, 1.0);
        let post = m.posterior(&[1.0]);
        assert!((post[0] - p0 / (p0 + p1)).abs() < 1e-9);
        assert!((post[1] - p1 / (p0 + p1)).abs() < 1e-9);
        assert_eq!(m.predict_index(&[1.0]), 0);
        let lj = m.log_joint(&[1.0]);
        assert!((lj[0] - p0.ln()).abs() < 1e-12);
    }

    #[test]
    fn equidistant_query_is_even() {
        let x = Matrix::from_vec(4, 1, vec![-1.0f64, 1.0, 9.0, 11.0]).unwrap();
        let m = fit(&x, &[0, 0, 1, 1], 2).unwrap();
        let post = m.posterior(&[5.0]);
        assert!((post[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_sample_class_gets_floor() {
        let x = Matrix::from_vec(3, 1, vec![0.0f64, 2.0, 7.0]).unwrap();
        let m = fit(&x, &[0, 0, 1], 2).unwrap();
        let overall = {
            let mean = 3.0;
            ((0.0f64 - mean).powi(2) + (2.0f64 - mean).powi(2) + (7.0f64 - mean).powi(2)) / 3.0
        };
        assert!((m.variances[1][0] - 1e-9 * overall).abs() < 1e-20);
        assert!(m.posterior(&[7.0])[1] > 0.999);
    }
}
