//! Fully connected network: rectifier hidden layers, softmax output,
//! cross-entropy loss, mini-batch SGD with momentum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![100, 50],
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 200,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("MLP layer sizes must be at least 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "MLP epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "MLP needs learning_rate > 0 and momentum in [0, 1), got {} and {}",
                self.learning_rate, self.momentum
            )));
        }
        Ok(())
    }
}

/// Dense layer `z = a·W + b`, `W` stored fan_in × fan_out.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// All weights and biases zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                weights: Matrix::zeros(w[0], w[1]),
                bias: vec![T::zero(); w[1]],
            })
            .collect();
        Self { layers }
    }

    /// Uniform weights in ±√(6 / fan_in), zero biases.
    pub fn random(sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let limit = (6.0 / layer.weights.rows() as f64).sqrt();
            for r in 0..layer.weights.rows() {
                for w in layer.weights.row_mut(r) {
                    *w = T::lit(rng.random_range(-limit..limit));
                }
            }
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").bias.len()
    }

    /// Pre-activations of every layer for one input.
    fn pre_activations(&self, x: &[T]) -> Vec<Vec<T>> {
        let mut zs: Vec<Vec<T>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.clone();
            let add_row = |z: &mut Vec<T>, i: usize, a: T| {
                if a != T::zero() {
                    for (zj, &w) in z.iter_mut().zip(layer.weights.row(i)) {
                        *zj = *zj + a * w;
                    }
                }
            };
            if l == 0 {
                for (i, &a) in x.iter().enumerate() {
                    add_row(&mut z, i, a);
                }
            } else {
                for (i, &a) in zs[l - 1].iter().enumerate() {
                    add_row(&mut z, i, relu(a));
                }
            }
            zs.push(z);
        }
        zs
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[T]) -> Vec<T> {
        softmax(self.pre_activations(x).last().expect("at least one layer"))
    }

    pub fn predict_index(&self, x: &[T]) -> usize {
        let z = self.pre_activations(x);
        argmax(z.last().expect("at least one layer"))
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Parameters flattened layer by layer, weights (row-major) then biases.
    pub fn params(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, p: &[T]) {
        assert_eq!(p.len(), self.n_params(), "parameter vector length");
        let mut k = 0;
        for layer in &mut self.layers {
            for r in 0..layer.weights.rows() {
                for w in layer.weights.row_mut(r) {
                    *w = p[k];
                    k += 1;
                }
            }
            for b in &mut layer.bias {
                *b = p[k];
                k += 1;
            }
        }
    }

    /// Mean cross-entropy over the rows and its gradient, in [`Mlp::params`] order.
    pub fn loss_and_gradient(&self, x: &Matrix<T>, y: &[usize]) -> (T, Vec<T>) {
        let mut grads: Vec<Layer<T>> = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                bias: vec![T::zero(); l.bias.len()],
            })
            .collect();
        let mut loss = T::zero();
        for (row, &label) in x.iter_rows().zip(y) {
            loss = loss + self.accumulate(row, label, &mut grads);
        }
        let n = T::from_usize_lossy(x.rows().max(1));
        let flat = grads
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias).map(|&g| g / n))
            .collect();
        (loss / n, flat)
    }

    /// Backpropagates one sample into `grads`; returns its loss.
    fn accumulate(&self, x: &[T], label: usize, grads: &mut [Layer<T>]) -> T {
        let zs = self.pre_activations(x);
        let out = zs.last().expect("at least one layer");
        let (probs, log_norm) = softmax_with_log_norm(out);
        let loss = log_norm - out[label];

        let mut delta = probs;
        delta[label] = delta[label] - T::one();
        for l in (0..self.layers.len()).rev() {
            let input: Vec<T> = if l == 0 {
                x.to_vec()
            } else {
                zs[l - 1].iter().map(|&z| relu(z)).collect()
            };
            let g = &mut grads[l];
            for (i, &a) in input.iter().enumerate() {
                if a != T::zero() {
                    for (gw, &d) in g.weights.row_mut(i).iter_mut().zip(&delta) {
                        *gw = *gw + a * d;
                    }
                }
            }
            for (gb, &d) in g.bias.iter_mut().zip(&delta) {
                *gb = *gb + d;
            }
            if l > 0 {
                let w = &self.layers[l].weights;
                delta = (0..w.rows())
                    .map(|i| {
                        if zs[l - 1][i] > T::zero() {
                            w.row(i).iter().zip(&delta).map(|(&wij, &d)| wij * d).sum()
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
            }
        }
        loss
    }
}

#[inline]
fn relu<T: Scalar>(z: T) -> T {
    z.max(T::zero())
}

fn softmax_with_log_norm<T: Scalar>(z: &[T]) -> (Vec<T>, T) {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    (e.into_iter().map(|v| v / s).collect(), m + s.ln())
}

pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    softmax_with_log_norm(z).0
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn fit<T: Scalar>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    cfg: &MlpConfig,
) -> Result<Mlp<T>> {
    cfg.validate()?;
    let mut sizes = vec![x.cols()];
    sizes.extend(&cfg.hidden_layers);
    sizes.push(n_classes);
    let mut net = Mlp::random(&sizes, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let lr = T::lit(cfg.learning_rate);
    let mu = T::lit(cfg.momentum);
    let mut params = net.params();
    let mut velocity = vec![T::zero(); params.len()];
    let mut order: Vec<usize> = (0..x.rows()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        for batch in order.chunks(cfg.batch_size) {
            let bx = x.select_rows(batch);
            let by: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (loss, grad) = net.loss_and_gradient(&bx, &by);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss = epoch_loss + loss * T::from_usize_lossy(batch.len());
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = mu * *v - lr * *g;
                *p = *p + *v;
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            net.set_params(&params);
        }
        let mean_loss = epoch_loss / T::from_usize_lossy(x.rows().max(1));
        if !mean_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        if epoch == 1 || epoch % 50 == 0 || epoch == cfg.epochs {
            log::debug!("mlp epoch {epoch}: mean loss {mean_loss}");
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_is_uniform() {
        let net = Mlp::<f64>::zeros(&[16, 100, 50, 8]);
        let p = net.forward(&[0.7; 16]);
        assert!(p.iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0f64, 1000.0, -1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && p[2] == 0.0);
    }

    #[test]
    fn params_round_trip() {
        let mut net = Mlp::<f64>::random(&[3, 4, 2], 9);
        let p = net.params();
        assert_eq!(p.len(), 3 * 4 + 4 + 4 * 2 + 2);
        let limit = (6.0f64 / 3.0).sqrt();
        assert!(p[..12].iter().all(|w| w.abs() < limit));
        let before = net.clone();
        net.set_params(&p);
        assert_eq!(net, before);
    }

    #[test]
    fn initialisation_is_seeded() {
        assert_eq!(Mlp::<f64>::random(&[4, 3], 1), Mlp::random(&[4, 3], 1));
        assert_ne!(Mlp::<f64>::random(&[4, 3], 1), Mlp::random(&[4, 3], 2));
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let x = Matrix::from_vec(4, 1, vec![1e150f64, -1e150, 2e150, -2e150]).unwrap();
        let cfg = MlpConfig {
            hidden_layers: vec![4],
            learning_rate: 1e100,
            epochs: 5,
            batch_size: 2,
            ..MlpConfig::default()
        };
        assert!(matches!(
            fit(&x, &[0, 1, 0, 1], 2, &cfg),
            Err(Error::Diverged { .. })
        ));
    }
}
