//! Classifiers behind one train/predict interface.
//!
//! Every trainer optionally z-scores the features first; the fitted
//! [`Standardizer`] travels with the model and is applied again at prediction.

mod bayes;
mod knn;
mod mlp;
mod model_io;
mod standardize;
mod svm;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use bayes::{NaiveBayesModel, VARIANCE_FLOOR};
pub use knn::{distance, KnnConfig, KnnModel};
pub use mlp::{softmax, Layer, Mlp, MlpConfig};
pub use model_io::{
    decode_model, encode_model, load_model, load_model_expecting, save_model, FORMAT_VERSION, MAGIC,
};
pub use standardize::{fit_standardizer, Standardizer};
pub use svm::{rbf_kernel, PairMachine, SvmConfig, SvmModel};

use crate::dataio::BeatClass;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Svm,
    Knn,
    Mlp,
    NaiveBayes,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Knn => "knn",
            ModelKind::Mlp => "mlp",
            ModelKind::NaiveBayes => "naive-bayes",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "svm" => Ok(ModelKind::Svm),
            "knn" => Ok(ModelKind::Knn),
            "mlp" => Ok(ModelKind::Mlp),
            "nb" | "bayes" | "naive-bayes" | "naivebayes" => Ok(ModelKind::NaiveBayes),
            _ => Err(Error::Config(format!("unknown classifier {s:?}"))),
        }
    }
}

/// Classifier choice with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierConfig {
    Svm(SvmConfig),
    Knn(KnnConfig),
    Mlp(MlpConfig),
    NaiveBayes,
}

impl ClassifierConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ClassifierConfig::Svm(_) => ModelKind::Svm,
            ClassifierConfig::Knn(_) => ModelKind::Knn,
            ClassifierConfig::Mlp(_) => ModelKind::Mlp,
            ClassifierConfig::NaiveBayes => ModelKind::NaiveBayes,
        }
    }

    /// Default hyperparameters for a kind.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Svm => ClassifierConfig::Svm(SvmConfig::default()),
            ModelKind::Knn => ClassifierConfig::Knn(KnnConfig::default()),
            ModelKind::Mlp => ClassifierConfig::Mlp(MlpConfig::default()),
            ModelKind::NaiveBayes => ClassifierConfig::NaiveBayes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams<T> {
    Svm(SvmModel<T>),
    Knn(KnnModel<T>),
    Mlp(Mlp<T>),
    NaiveBayes(NaiveBayesModel<T>),
}

/// A fitted classifier. Immutable; prediction is deterministic and thread-safe.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    /// Sorted, as present in the training labels.
    pub classes: Vec<BeatClass>,
    pub n_features: usize,
    pub standardizer: Option<Standardizer<T>>,
    pub params: ModelParams<T>,
}

impl<T: Scalar> TrainedModel<T> {
    pub fn kind(&self) -> ModelKind {
        match &self.params {
            ModelParams::Svm(_) => ModelKind::Svm,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::Mlp(_) => ModelKind::Mlp,
            ModelParams::NaiveBayes(_) => ModelKind::NaiveBayes,
        }
    }

    fn check_dim(&self, given: usize) -> Result<()> {
        if given != self.n_features {
            return Err(Error::Shape {
                expected: self.n_features,
                given,
            });
        }
        Ok(())
    }

    fn predict_prepared(&self, row: &[T]) -> usize {
        match &self.params {
            ModelParams::Svm(m) => m.predict_index(row),
            ModelParams::Knn(m) => m.predict_index(row),
            ModelParams::Mlp(m) => m.predict_index(row),
            ModelParams::NaiveBayes(m) => m.predict_index(row),
        }
    }

    pub fn predict_one(&self, row: &[T]) -> Result<BeatClass> {
        self.check_dim(row.len())?;
        let idx = match &self.standardizer {
            Some(s) => self.predict_prepared(&s.apply_row(row)),
            None => self.predict_prepared(row),
        };
        Ok(self.classes[idx])
    }

    /// Labels for every row of `x`, in row order.
    pub fn predict(&self, x: &Matrix<T>) -> Result<Vec<BeatClass>> {
        self.check_dim(x.cols())?;
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_one(x.row(i)).expect("dimension checked"))
            .collect())
    }
}

/// Class list and per-row class indices.
fn encode_labels(y: &[BeatClass]) -> (Vec<BeatClass>, Vec<usize>) {
    let mut classes: Vec<BeatClass> = y.to_vec();
    classes.sort();
    classes.dedup();
    let idx = y
        .iter()
        .map(|c| classes.binary_search(c).expect("present"))
        .collect();
    (classes, idx)
}

/// Fits a classifier; with `standardize` the features are z-scored on `x` first.
pub fn train<T: Scalar>(
    x: &Matrix<T>,
    y: &[BeatClass],
    cfg: &ClassifierConfig,
    standardize: bool,
) -> Result<TrainedModel<T>> {
    if x.rows() != y.len() {
        return Err(Error::Shape {
            expected: x.rows(),
            given: y.len(),
        });
    }
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::InsufficientData("empty training matrix".into()));
    }
    let (classes, idx) = encode_labels(y);
    if classes.len() < 2 {
        return Err(Error::DegenerateTraining(format!(
            "training labels contain {} class(es); at least 2 are needed",
            classes.len()
        )));
    }
    let standardizer = if standardize {
        Some(Standardizer::fit(x)?)
    } else {
        None
    };
    let prepared;
    let xs = match &standardizer {
        Some(s) => {
            prepared = s.apply(x);
            &prepared
        }
        None => x,
    };
    let q = classes.len();
    let params = match cfg {
        ClassifierConfig::Svm(c) => ModelParams::Svm(svm::fit(xs, &idx, q, c)?),
        ClassifierConfig::Knn(c) => ModelParams::Knn(knn::fit(xs, &idx, q, c)?),
        ClassifierConfig::Mlp(c) => ModelParams::Mlp(mlp::fit(xs, &idx, q, c)?),
        ClassifierConfig::NaiveBayes => ModelParams::NaiveBayes(bayes::fit(xs, &idx, q)?),
    };
    Ok(TrainedModel {
        classes,
        n_features: x.cols(),
        standardizer,
        params,
    })
}

pub fn train_svm<T: Scalar>(
    x: &Matrix<T>,
    y: &[BeatClass],
    cfg: &SvmConfig,
) -> Result<TrainedModel<T>> {
    train(x, y, &ClassifierConfig::Svm(*cfg), true)
}

pub fn train_knn<T: Scalar>(
    x: &Matrix<T>,
    y: &[BeatClass],
    cfg: &KnnConfig,
) -> Result<TrainedModel<T>> {
    train(x, y, &ClassifierConfig::Knn(*cfg), true)
}

pub fn train_mlp<T: Scalar>(
    x: &Matrix<T>,
    y: &[BeatClass],
    cfg: &MlpConfig,
) -> Result<TrainedModel<T>> {
    train(x, y, &ClassifierConfig::Mlp(cfg.clone()), true)
}

pub fn train_naive_bayes<T: Scalar>(x: &Matrix<T>, y: &[BeatClass]) -> Result<TrainedModel<T>> {
    train(x, y, &ClassifierConfig::NaiveBayes, true)
}
