//! RBF-kernel soft-margin SVM, one-vs-one, trained by SMO.
//!
//! The binary solver follows the second-order working-set selection of
//! LIBSVM: `i` is the maximal violator, `j` maximises the guaranteed decrease
//! of the dual objective. Kernel rows are computed on demand and kept in a
//! bounded cache.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: f64,
    /// KKT violation tolerance on the dual gradient.
    pub tolerance: f64,
    /// Iteration cap per binary problem, as a multiple of its size.
    pub max_passes: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 65536.0,
            gamma: 2.44e-4,
            tolerance: 1e-3,
            max_passes: 100,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!(
                "SVM C must be positive, got {}",
                self.c
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "SVM gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "SVM tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::Config("SVM max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// `exp(−γ‖a − b‖²)`. The squared distance sums `(a_k − b_k)²`, which is
/// bitwise symmetric in its arguments.
#[inline]
pub fn rbf_kernel<T: Scalar>(a: &[T], b: &[T], gamma: T) -> T {
    let d2 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>();
    (-gamma * d2).exp()
}

/// One binary machine between classes `positive` (+1) and `negative` (−1).
#[derive(Debug, Clone, PartialEq)]
pub struct PairMachine<T> {
    pub positive: usize,
    pub negative: usize,
    /// Indices into [`SvmModel::support_vectors`].
    pub support: Vec<usize>,
    /// `α_i·y_i` for each entry of `support`.
    pub coefficients: Vec<T>,
    pub rho: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T> {
    pub gamma: T,
    pub n_classes: usize,
    pub support_vectors: Matrix<T>,
    pub machines: Vec<PairMachine<T>>,
}

struct BinarySolution<T> {
    alpha: Vec<T>,
    rho: T,
    iterations: usize,
    converged: bool,
}

/// Kernel rows of a training subset, computed lazily with a row budget.
struct KernelCache<'a, T> {
    rows: Vec<&'a [T]>,
    gamma: T,
    capacity: usize,
    clock: u64,
    entries: HashMap<usize, (u64, Vec<T>)>,
}

const CACHE_BYTES: usize = 64 << 20;

impl<'a, T: Scalar> KernelCache<'a, T> {
    fn new(rows: Vec<&'a [T]>, gamma: T) -> Self {
        let row_bytes = rows.len().max(1) * std::mem::size_of::<T>();
        let capacity = (CACHE_BYTES / row_bytes).max(2);
        Self {
            rows,
            gamma,
            capacity,
            clock: 0,
            entries: HashMap::new(),
        }
    }

    fn row(&mut self, i: usize) -> &[T] {
        self.clock += 1;
        let clock = self.clock;
        if !self.entries.contains_key(&i) {
            if self.entries.len() >= self.capacity {
                let oldest = self
                    .entries
                    .iter()
                    .min_by_key(|(_, (stamp, _))| *stamp)
                    .map(|(&k, _)| k)
                    .expect("non-empty cache");
                self.entries.remove(&oldest);
            }
            let xi = self.rows[i];
            let gamma = self.gamma;
            let row = self
                .rows
                .iter()
                .map(|xj| rbf_kernel(xi, xj, gamma))
                .collect();
            self.entries.insert(i, (clock, row));
        }
        let entry = self.entries.get_mut(&i).expect("just inserted");
        entry.0 = clock;
        &entry.1
    }
}

/// Dual problem `min ½αᵀQα − eᵀα`, `0 ≤ α ≤ C`, `yᵀα = 0`, `Q_ij = y_i y_j K_ij`.
fn solve_binary<T: Scalar>(rows: Vec<&[T]>, y: &[i8], cfg: &SvmConfig) -> BinarySolution<T> {
    let n = rows.len();
    let c = T::lit(cfg.c);
    let eps = T::lit(cfg.tolerance);
    let tau = T::lit(1e-12);
    let ys: Vec<T> = y.iter().map(|&v| T::lit(v as f64)).collect();
    let mut cache = KernelCache::new(rows, T::lit(cfg.gamma));
    let mut alpha = vec![T::zero(); n];
    let mut grad = vec![-T::one(); n];
    let max_iter = cfg.max_passes.saturating_mul(n.max(100));

    let in_up = |a: T, yt: i8| (yt > 0 && a < c) || (yt < 0 && a > T::zero());
    let in_low = |a: T, yt: i8| (yt > 0 && a > T::zero()) || (yt < 0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    let mut verified = false;
    while iterations < max_iter {
        // select i: maximal −y_t G_t over I_up
        let mut gmax = T::neg_infinity();
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -ys[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        let mut gmin = T::infinity();
        let mut j = usize::MAX;
        if i != usize::MAX {
            let ki: Vec<T> = cache.row(i).to_vec();
            let mut best = T::infinity();
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -ys[t] * grad[t];
                if v < gmin {
                    gmin = v;
                }
                let b = gmax - v;
                if b > T::zero() {
                    let mut a = T::one() + T::one() - (ki[t] + ki[t]);
                    if a <= T::zero() {
                        a = tau;
                    }
                    let score = -(b * b) / a;
                    if score < best {
                        best = score;
                        j = t;
                    }
                }
            }
        }

        if i == usize::MAX || j == usize::MAX || gmax - gmin < eps {
            if verified {
                converged = true;
                break;
            }
            // recompute the gradient from α before accepting convergence
            let mut fresh = vec![-T::one(); n];
            for t in 0..n {
                if alpha[t] > T::zero() {
                    let kt = cache.row(t);
                    let s = alpha[t] * ys[t];
                    for (g, (&k, &yk)) in fresh.iter_mut().zip(kt.iter().zip(&ys)) {
                        *g = *g + yk * s * k;
                    }
                }
            }
            grad = fresh;
            verified = true;
            continue;
        }
        verified = false;
        iterations += 1;

        let ki: Vec<T> = cache.row(i).to_vec();
        let kj: Vec<T> = cache.row(j).to_vec();
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = ys[i] * ys[j] * ki[j];
        if y[i] != y[j] {
            let mut quad = T::one() + T::one() + qij + qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] = alpha[i] + delta;
            alpha[j] = alpha[j] + delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > T::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = T::one() + T::one() - qij - qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] = alpha[i] - delta;
            alpha[j] = alpha[j] + delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] = grad[t] + ys[t] * (ys[i] * ki[t] * di + ys[j] * kj[t] * dj);
        }
    }

    // ρ: average of y_t G_t over free vectors, else midpoint of the feasible interval
    let mut free_sum = T::zero();
    let mut free_n = 0usize;
    let mut ub = T::infinity();
    let mut lb = T::neg_infinity();
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] > T::zero() && alpha[t] < c {
            free_sum = free_sum + yg;
            free_n += 1;
        } else if (alpha[t] >= c && y[t] < 0) || (alpha[t] <= T::zero() && y[t] > 0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free_n > 0 {
        free_sum / T::from_usize_lossy(free_n)
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / T::lit(2.0)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };

    BinarySolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

/// Support indices, signed coefficients and bias of the machine for classes (a, b).
type PairSolution<T> = (usize, usize, Vec<usize>, Vec<T>, T);

/// Trains all one-vs-one machines. `y` holds class indices in `0..n_classes`.
pub(crate) fn fit<T: Scalar>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    cfg: &SvmConfig,
) -> Result<SvmModel<T>> {
    cfg.validate()?;
    let pairs: Vec<(usize, usize)> = (0..n_classes)
        .flat_map(|a| (a + 1..n_classes).map(move |b| (a, b)))
        .collect();

    let solved: Vec<PairSolution<T>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let members: Vec<usize> = (0..y.len()).filter(|&r| y[r] == a || y[r] == b).collect();
            let rows: Vec<&[T]> = members.iter().map(|&r| x.row(r)).collect();
            let labels: Vec<i8> = members.iter().map(|&r| if y[r] == a { 1 } else { -1 }).collect();
            let sol = solve_binary(rows, &labels, cfg);
            if !sol.converged {
                log::warn!(
                    "SVM pair ({a}, {b}) stopped at the iteration cap ({}) before reaching tolerance",
                    sol.iterations
                );
            }
            let mut sv = Vec::new();
            let mut coef = Vec::new();
            for (k, &r) in members.iter().enumerate() {
                if sol.alpha[k] > T::zero() {
                    sv.push(r);
                    coef.push(sol.alpha[k] * T::lit(labels[k] as f64));
                }
            }
            (a, b, sv, coef, sol.rho)
        })
        .collect();

    // pool the support vectors of all machines, each training row stored once
    let mut pool_index: HashMap<usize, usize> = HashMap::new();
    let mut pool_rows: Vec<usize> = Vec::new();
    let mut machines = Vec::with_capacity(solved.len());
    for (a, b, sv, coef, rho) in solved {
        let support = sv
            .iter()
            .map(|&r| {
                *pool_index.entry(r).or_insert_with(|| {
                    pool_rows.push(r);
                    pool_rows.len() - 1
                })
            })
            .collect();
        machines.push(PairMachine {
            positive: a,
            negative: b,
            support,
            coefficients: coef,
            rho,
        });
    }
    Ok(SvmModel {
        gamma: T::lit(cfg.gamma),
        n_classes,
        support_vectors: x.select_rows(&pool_rows),
        machines,
    })
}

impl<T: Scalar> SvmModel<T> {
    /// Decision values of every machine, in `machines` order.
    pub fn decision_values(&self, query: &[T]) -> Vec<T> {
        let k: Vec<T> = self
            .support_vectors
            .iter_rows()
            .map(|sv| rbf_kernel(sv, query, self.gamma))
            .collect();
        self.machines
            .iter()
            .map(|m| {
                m.support
                    .iter()
                    .zip(&m.coefficients)
                    .map(|(&s, &c)| c * k[s])
                    .sum::<T>()
                    - m.rho
            })
            .collect()
    }

    /// Majority vote; ties go to the class with the larger summed |decision| of its won pairs.
    pub fn predict_index(&self, query: &[T]) -> usize {
        let values = self.decision_values(query);
        let mut votes = vec![0usize; self.n_classes];
        let mut strength = vec![T::zero(); self.n_classes];
        for (m, &f) in self.machines.iter().zip(&values) {
            let winner = if f > T::zero() {
                m.positive
            } else {
                m.negative
            };
            votes[winner] += 1;
            strength[winner] = strength[winner] + f.abs();
        }
        let mut best = 0;
        for c in 1..self.n_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && strength[c] > strength[best]) {
                best = c;
            }
        }
        best
    }
}
