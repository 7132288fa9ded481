//! Beat segmentation and the per-lead feature vector.
//!
//! Per lead, in this order: `a1..ap` (AR coefficients, default p = 4), mean,
//! variance, std, skewness. Leads are concatenated in the requested order, so
//! two leads give 16 values.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::dataio::{select_leads, BeatClass, EcgRecord, LeadSignal};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::Scalar;

/// Samples kept before the R peak.
pub const PRE_R: usize = 122;
/// Samples kept after the R peak.
pub const POST_R: usize = 177;
pub const BEAT_LEN: usize = PRE_R + 1 + POST_R;

#[derive(Debug, Clone, PartialEq)]
pub struct Heartbeat<T> {
    pub lead_name: String,
    pub samples: Vec<T>,
    pub r_index_in_record: usize,
}

/// Cuts `[r − 122, r + 177]`; `None` when the window leaves the signal.
pub fn segment_beat<T: Scalar>(signal: &LeadSignal<T>, r_index: usize) -> Option<Heartbeat<T>> {
    if r_index < PRE_R || r_index + POST_R >= signal.len() {
        return None;
    }
    Some(Heartbeat {
        lead_name: signal.lead_name.clone(),
        samples: signal.samples[r_index - PRE_R..=r_index + POST_R].to_vec(),
        r_index_in_record: r_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArMethod {
    #[default]
    Burg,
    YuleWalker,
}

impl std::str::FromStr for ArMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "burg" => Ok(ArMethod::Burg),
            "yulewalker" | "yw" => Ok(ArMethod::YuleWalker),
            _ => Err(Error::Config(format!("unknown AR method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArConfig {
    pub order: usize,
    pub method: ArMethod,
}

impl Default for ArConfig {
    fn default() -> Self {
        Self {
            order: 4,
            method: ArMethod::Burg,
        }
    }
}

impl ArConfig {
    pub fn features_per_lead(&self) -> usize {
        self.order + 4
    }

    pub fn feature_names(&self) -> Vec<String> {
        (1..=self.order)
            .map(|i| format!("a{i}"))
            .chain(["mean", "variance", "std", "skewness"].map(String::from))
            .collect()
    }
}

/// Fitted model `x[n] = Σ a[i]·x[n−i] + e[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArFit<T> {
    /// `a[1..=p]`
    pub coefficients: Vec<T>,
    /// Lattice reflection coefficients of the prediction-error filter; all
    /// strictly inside (−1, 1) for a stable model.
    pub reflection: Vec<T>,
    pub noise_variance: T,
}

impl<T: Scalar> ArFit<T> {
    pub fn is_stable(&self) -> bool {
        self.reflection.iter().all(|k| k.abs() < T::one())
    }
}

fn check_ar_input<T: Scalar>(x: &[T], order: usize) -> Result<()> {
    if order == 0 || order >= x.len() {
        return Err(Error::Config(format!(
            "AR order {order} must satisfy 1 <= p < segment length {}",
            x.len()
        )));
    }
    Ok(())
}

/// Burg lattice estimate on a zero-mean sequence.
pub fn burg<T: Scalar>(x: &[T], order: usize) -> Result<ArFit<T>> {
    check_ar_input(x, order)?;
    let n = x.len();
    let mut forward = x.to_vec();
    let mut backward = x.to_vec();
    // prediction-error filter 1 + c1 z^-1 + … ; a_i = −c_i
    let mut filter = vec![T::one()];
    let mut reflection = Vec::with_capacity(order);
    let mut error = x.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(n);
    if error == T::zero() {
        return Err(Error::DegenerateSegment("zero-energy segment"));
    }
    let two = T::lit(2.0);

    for m in 0..order {
        let mut num = T::zero();
        let mut den = T::zero();
        for i in m + 1..n {
            num = num + forward[i] * backward[i - 1];
            den = den + forward[i] * forward[i] + backward[i - 1] * backward[i - 1];
        }
        if den == T::zero() {
            return Err(Error::DegenerateSegment("prediction errors vanished"));
        }
        let k = -two * num / den;

        filter.push(T::zero());
        let prev = filter.clone();
        for i in 1..=m + 1 {
            filter[i] = prev[i] + k * prev[m + 1 - i];
        }
        for i in (m + 1..n).rev() {
            let f = forward[i];
            let b = backward[i - 1];
            forward[i] = f + k * b;
            backward[i] = b + k * f;
        }
        error = error * (T::one() - k * k);
        reflection.push(k);
    }

    Ok(ArFit {
        coefficients: filter[1..].iter().map(|&c| -c).collect(),
        reflection,
        noise_variance: error,
    })
}

/// Yule-Walker estimate via Levinson-Durbin on the biased autocorrelation.
pub fn yule_walker<T: Scalar>(x: &[T], order: usize) -> Result<ArFit<T>> {
    check_ar_input(x, order)?;
    let n = x.len();
    let r: Vec<T> = (0..=order)
        .map(|lag| (0..n - lag).map(|i| x[i] * x[i + lag]).sum::<T>() / T::from_usize_lossy(n))
        .collect();
    if r[0] == T::zero() {
        return Err(Error::DegenerateSegment("zero-energy segment"));
    }
    let mut a: Vec<T> = Vec::with_capacity(order);
    let mut reflection = Vec::with_capacity(order);
    let mut error = r[0];
    for m in 0..order {
        let mut acc = r[m + 1];
        for j in 0..m {
            acc = acc - a[j] * r[m - j];
        }
        let k = acc / error;
        let prev = a.clone();
        for j in 0..m {
            a[j] = prev[j] - k * prev[m - 1 - j];
        }
        a.push(k);
        error = error * (T::one() - k * k);
        reflection.push(-k);
    }
    Ok(ArFit {
        coefficients: a,
        reflection,
        noise_variance: error,
    })
}

/// Full AR fit of a beat after removing its mean.
pub fn fit_ar<T: Scalar>(samples: &[T], cfg: &ArConfig) -> Result<ArFit<T>> {
    let stats = BeatStats::compute(samples);
    if stats.degenerate {
        return Err(Error::DegenerateSegment("constant segment"));
    }
    let centered: Vec<T> = samples.iter().map(|&v| v - stats.mean).collect();
    match cfg.method {
        ArMethod::Burg => burg(&centered, cfg.order),
        ArMethod::YuleWalker => yule_walker(&centered, cfg.order),
    }
}

/// The `order` AR coefficients of a beat.
pub fn ar_coefficients<T: Scalar>(beat: &Heartbeat<T>, cfg: &ArConfig) -> Result<Vec<T>> {
    fit_ar(&beat.samples, cfg).map(|f| f.coefficients)
}

/// Population moments of a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatStats<T> {
    pub mean: T,
    pub variance: T,
    pub std: T,
    pub skewness: T,
    /// Zero spread; skewness is reported as 0.
    pub degenerate: bool,
}

impl<T: Scalar> BeatStats<T> {
    pub fn compute(x: &[T]) -> Self {
        let n = T::from_usize_lossy(x.len().max(1));
        let constant = x.windows(2).all(|w| w[0] == w[1]);
        let (mean, variance) = if constant {
            (x.first().copied().unwrap_or_else(T::zero), T::zero())
        } else {
            let mean = x.iter().copied().sum::<T>() / n;
            (
                mean,
                x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n,
            )
        };
        let std = variance.sqrt();
        let degenerate = !(std > T::zero());
        let skewness = if degenerate {
            T::zero()
        } else {
            x.iter()
                .map(|&v| {
                    let z = (v - mean) / std;
                    z * z * z
                })
                .sum::<T>()
                / n
        };
        Self {
            mean,
            variance,
            std,
            skewness,
            degenerate,
        }
    }
}

pub fn beat_statistics<T: Scalar>(beat: &Heartbeat<T>) -> BeatStats<T> {
    BeatStats::compute(&beat.samples)
}

/// Features of one beat over one or more leads.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub label: Option<BeatClass>,
    pub r_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    OutOfBounds,
    Degenerate(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedBeat {
    pub r_index: usize,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction<T> {
    pub vectors: Vec<FeatureVector<T>>,
    pub skipped: Vec<SkippedBeat>,
}

/// Column names `{lead}_{feature}` for the given leads.
pub fn feature_columns<S: AsRef<str>>(leads: &[S], cfg: &ArConfig) -> Vec<String> {
    let per_lead = cfg.feature_names();
    leads
        .iter()
        .flat_map(|l| per_lead.iter().map(move |f| format!("{}_{f}", l.as_ref())))
        .collect()
}

fn lead_features<T: Scalar>(beat: &Heartbeat<T>, cfg: &ArConfig, out: &mut Vec<T>) -> Result<()> {
    let stats = beat_statistics(beat);
    if stats.degenerate {
        return Err(Error::DegenerateSegment("constant segment"));
    }
    let coefficients = ar_coefficients(beat, cfg)?;
    out.extend(coefficients);
    out.extend([stats.mean, stats.variance, stats.std, stats.skewness]);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSegment("non-finite feature"));
    }
    Ok(())
}

/// Features for labelled R locations. Beats that do not fit or degenerate are skipped.
pub fn extract_labelled<T: Scalar, S: AsRef<str>>(
    record: &EcgRecord<T>,
    beats: &[(usize, Option<BeatClass>)],
    leads: &[S],
    cfg: &ArConfig,
) -> Result<Extraction<T>> {
    let selected = select_leads(record, leads)?;
    let mut vectors = Vec::with_capacity(beats.len());
    let mut skipped = Vec::new();
    'beats: for &(r, label) in beats {
        let mut values = Vec::with_capacity(cfg.features_per_lead() * selected.leads.len());
        for lead in &selected.leads {
            let Some(beat) = segment_beat(lead, r) else {
                skipped.push(SkippedBeat {
                    r_index: r,
                    reason: SkipReason::OutOfBounds,
                });
                continue 'beats;
            };
            if let Err(e) = lead_features(&beat, cfg, &mut values) {
                skipped.push(SkippedBeat {
                    r_index: r,
                    reason: SkipReason::Degenerate(e.to_string()),
                });
                continue 'beats;
            }
        }
        vectors.push(FeatureVector {
            values,
            label,
            r_index: r,
        });
    }
    Ok(Extraction { vectors, skipped })
}

/// Unlabelled variant of [`extract_labelled`].
pub fn extract_features<T: Scalar, S: AsRef<str>>(
    record: &EcgRecord<T>,
    r_indices: &[usize],
    leads: &[S],
    cfg: &ArConfig,
) -> Result<Extraction<T>> {
    let beats: Vec<_> = r_indices.iter().map(|&r| (r, None)).collect();
    extract_labelled(record, &beats, leads, cfg)
}

/// Feature matrix with column names and optional labels, as stored in feature CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<T> {
    pub columns: Vec<String>,
    pub matrix: Matrix<T>,
    pub labels: Vec<Option<BeatClass>>,
}

impl<T: Scalar> FeatureTable<T> {
    pub fn from_vectors(columns: Vec<String>, vectors: &[FeatureVector<T>]) -> Result<Self> {
        let matrix = Matrix::from_rows(columns.len(), vectors.iter().map(|v| &v.values))?;
        Ok(Self {
            columns,
            matrix,
            labels: vectors.iter().map(|v| v.label).collect(),
        })
    }

    /// Labels, failing if any row is unlabelled.
    pub fn required_labels(&self) -> Result<Vec<BeatClass>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.ok_or_else(|| Error::InsufficientData(format!("row {} has no label", i + 1)))
            })
            .collect()
    }

    /// Header row of feature names plus `label`; empty label cell for unlabelled rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{},label", self.columns.join(","))?;
        for (row, label) in self.matrix.iter_rows().zip(&self.labels) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| format!("{:e}", v.to_f64_lossy()))
                .collect();
            writeln!(
                out,
                "{},{}",
                cells.join(","),
                label.map(BeatClass::name).unwrap_or("")
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let header = reader
            .headers()
            .map_err(|e| Error::parse(&label, 1, e.to_string()))?
            .clone();
        let has_label = header.iter().next_back() == Some("label");
        let n_features = header.len() - usize::from(has_label);
        let columns: Vec<String> = header.iter().take(n_features).map(str::to_string).collect();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::parse(&label, line, e.to_string()))?;
            if row.len() != header.len() {
                return Err(Error::parse(
                    &label,
                    line,
                    format!("expected {} cells, found {}", header.len(), row.len()),
                ));
            }
            for (j, cell) in row.iter().take(n_features).enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::parse(
                        &label,
                        line,
                        format!("column {}: bad value {cell:?}", j + 1),
                    )
                })?;
                data.push(T::lit(v));
            }
            labels.push(match (has_label, row.get(n_features)) {
                (true, Some(l)) if !l.is_empty() => Some(l.parse()?),
                _ => None,
            });
        }
        Ok(Self {
            columns,
            matrix: Matrix::from_vec(labels.len(), n_features, data)?,
            labels,
        })
    }
}
