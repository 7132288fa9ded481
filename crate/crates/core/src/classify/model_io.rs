//! Single-file model format.
//!
//! ```text
//! magic "ECGDXMDL" | version u32 | kind u8 | n_classes u32 | class names (u8 len + utf-8)
//! n_features u64 | has_standardizer u8 [mean f64, std f64, constant u8]×n_features
//! kind block
//! ```
//! Integers and floats are little-endian; every real is stored as `f64`.

use std::fs;
use std::path::Path;

use super::{
    KnnModel, Layer, Mlp, ModelKind, ModelParams, NaiveBayesModel, PairMachine, Standardizer,
    SvmModel, TrainedModel,
};
use crate::dataio::BeatClass;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::Scalar;

pub const MAGIC: &[u8; 8] = b"ECGDXMDL";
pub const FORMAT_VERSION: u32 = 1;

fn kind_code(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::Svm => 1,
        ModelKind::Knn => 2,
        ModelKind::Mlp => 3,
        ModelKind::NaiveBayes => 4,
    }
}

fn kind_from_code(code: u8) -> Result<ModelKind> {
    Ok(match code {
        1 => ModelKind::Svm,
        2 => ModelKind::Knn,
        3 => ModelKind::Mlp,
        4 => ModelKind::NaiveBayes,
        _ => return Err(Error::ModelLoad(format!("unknown model kind code {code}"))),
    })
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend(v.to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend((v as u64).to_le_bytes());
    }
    fn f64<T: Scalar>(&mut self, v: T) {
        self.0.extend(v.to_f64_lossy().to_le_bytes());
    }
    fn reals<T: Scalar>(&mut self, v: &[T]) {
        v.iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::ModelLoad(format!(
                "truncated model file: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        // a length can never exceed the bytes that remain
        usize::try_from(v)
            .ok()
            .filter(|&n| n <= self.bytes.len())
            .ok_or_else(|| {
                Error::ModelLoad(format!("corrupt length {v} at offset {}", self.pos - 8))
            })
    }
    fn f64<T: Scalar>(&mut self) -> Result<T> {
        Ok(T::lit(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        )))
    }
    fn reals<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        if n > (self.bytes.len() - self.pos) / 8 {
            return Err(Error::ModelLoad(format!(
                "truncated model file: {n} reals expected"
            )));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn index(&mut self, bound: usize, what: &str) -> Result<usize> {
        let v = self.u64()?;
        if v >= bound {
            return Err(Error::ModelLoad(format!(
                "{what} index {v} out of range {bound}"
            )));
        }
        Ok(v)
    }
}

pub fn encode_model<T: Scalar>(model: &TrainedModel<T>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend(MAGIC);
    w.u32(FORMAT_VERSION);
    w.u8(kind_code(model.kind()));
    w.u32(model.classes.len() as u32);
    for c in &model.classes {
        let name = c.name().as_bytes();
        w.u8(name.len() as u8);
        w.0.extend(name);
    }
    w.u64(model.n_features);
    match &model.standardizer {
        None => w.u8(0),
        Some(s) => {
            w.u8(1);
            for j in 0..s.dim() {
                w.f64(s.mean[j]);
                w.f64(s.std[j]);
                w.u8(u8::from(s.constant[j]));
            }
        }
    }
    match &model.params {
        ModelParams::Svm(m) => {
            w.f64(m.gamma);
            w.u64(m.support_vectors.rows());
            w.reals(m.support_vectors.as_slice());
            w.u64(m.machines.len());
            for p in &m.machines {
                w.u64(p.positive);
                w.u64(p.negative);
                w.f64(p.rho);
                w.u64(p.support.len());
                for (&s, &c) in p.support.iter().zip(&p.coefficients) {
                    w.u64(s);
                    w.f64(c);
                }
            }
        }
        ModelParams::Knn(m) => {
            w.u64(m.k);
            w.0.extend(m.p.to_le_bytes());
            w.u64(m.train.rows());
            w.reals(m.train.as_slice());
            m.labels.iter().for_each(|&l| w.u64(l));
        }
        ModelParams::Mlp(m) => {
            w.u64(m.layers.len());
            for l in &m.layers {
                w.u64(l.weights.rows());
                w.u64(l.weights.cols());
                w.reals(l.weights.as_slice());
                w.reals(&l.bias);
            }
        }
        ModelParams::NaiveBayes(m) => {
            for c in 0..m.priors.len() {
                w.f64(m.priors[c]);
                w.reals(&m.means[c]);
                w.reals(&m.variances[c]);
            }
        }
    }
    w.0
}

pub fn decode_model<T: Scalar>(bytes: &[u8]) -> Result<TrainedModel<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)
        .map_err(|_| Error::ModelLoad("file too short for header".into()))?
        != MAGIC
    {
        return Err(Error::ModelLoad("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelLoad(format!(
            "unsupported model format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let kind = kind_from_code(r.u8()?)?;
    let n_classes = r.u32()? as usize;
    if n_classes < 2 {
        return Err(Error::ModelLoad(format!("model holds {n_classes} classes")));
    }
    let mut classes = Vec::with_capacity(n_classes.min(64));
    for _ in 0..n_classes {
        let len = r.u8()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::ModelLoad("class name is not utf-8".into()))?;
        classes.push(
            name.parse::<BeatClass>()
                .map_err(|e| Error::ModelLoad(e.to_string()))?,
        );
    }
    let d = r.u64()?;
    let standardizer = match r.u8()? {
        0 => None,
        1 => {
            let mut s = Standardizer {
                mean: Vec::with_capacity(d),
                std: Vec::with_capacity(d),
                constant: Vec::with_capacity(d),
            };
            for _ in 0..d {
                s.mean.push(r.f64()?);
                s.std.push(r.f64()?);
                s.constant.push(r.u8()? != 0);
            }
            Some(s)
        }
        v => return Err(Error::ModelLoad(format!("bad standardizer flag {v}"))),
    };
    let params = match kind {
        ModelKind::Svm => {
            let gamma = r.f64()?;
            let n_sv = r.u64()?;
            let support_vectors = Matrix::from_vec(n_sv, d, r.reals(n_sv * d)?)?;
            let n_machines = r.u64()?;
            let mut machines = Vec::with_capacity(n_machines);
            for _ in 0..n_machines {
                let positive = r.index(n_classes, "class")?;
                let negative = r.index(n_classes, "class")?;
                let rho = r.f64()?;
                let m = r.u64()?;
                let mut support = Vec::with_capacity(m);
                let mut coefficients = Vec::with_capacity(m);
                for _ in 0..m {
                    support.push(r.index(n_sv, "support vector")?);
                    coefficients.push(r.f64()?);
                }
                machines.push(PairMachine {
                    positive,
                    negative,
                    support,
                    coefficients,
                    rho,
                });
            }
            ModelParams::Svm(SvmModel {
                gamma,
                n_classes,
                support_vectors,
                machines,
            })
        }
        ModelKind::Knn => {
            let k = r.u64()?;
            let p = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            let n = r.u64()?;
            let train = Matrix::from_vec(n, d, r.reals(n * d)?)?;
            let labels = (0..n)
                .map(|_| r.index(n_classes, "label"))
                .collect::<Result<_>>()?;
            if k == 0 || k > n {
                return Err(Error::ModelLoad(format!(
                    "KNN k = {k} with {n} stored rows"
                )));
            }
            ModelParams::Knn(KnnModel {
                k,
                p,
                n_classes,
                train,
                labels,
            })
        }
        ModelKind::Mlp => {
            let n_layers = r.u64()?;
            let mut layers = Vec::with_capacity(n_layers);
            let mut expected_in = d;
            for _ in 0..n_layers {
                let rows = r.u64()?;
                let cols = r.u64()?;
                if rows != expected_in {
                    return Err(Error::ModelLoad(format!(
                        "layer input {rows} does not follow {expected_in}"
                    )));
                }
                let weights = Matrix::from_vec(rows, cols, r.reals(rows * cols)?)?;
                layers.push(Layer {
                    weights,
                    bias: r.reals(cols)?,
                });
                expected_in = cols;
            }
            if n_layers == 0 || expected_in != n_classes {
                return Err(Error::ModelLoad(
                    "network output does not match the class list".into(),
                ));
            }
            ModelParams::Mlp(Mlp { layers })
        }
        ModelKind::NaiveBayes => {
            let mut m = NaiveBayesModel {
                priors: Vec::new(),
                means: Vec::new(),
                variances: Vec::new(),
            };
            for _ in 0..n_classes {
                m.priors.push(r.f64()?);
                m.means.push(r.reals(d)?);
                m.variances.push(r.reals(d)?);
            }
            ModelParams::NaiveBayes(m)
        }
    };
    if r.pos != bytes.len() {
        return Err(Error::ModelLoad(format!(
            "{} trailing bytes after model",
            bytes.len() - r.pos
        )));
    }
    Ok(TrainedModel {
        classes,
        n_features: d,
        standardizer,
        params,
    })
}

pub fn save_model<T: Scalar>(model: &TrainedModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<TrainedModel<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

/// Loads a model and checks it is of `expected` kind.
pub fn load_model_expecting<T: Scalar>(
    path: impl AsRef<Path>,
    expected: ModelKind,
) -> Result<TrainedModel<T>> {
    let model = load_model(path)?;
    if model.kind() != expected {
        return Err(Error::KindMismatch {
            expected: expected.to_string(),
            found: model.kind().to_string(),
        });
    }
    Ok(model)
}
