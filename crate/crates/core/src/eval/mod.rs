//! Dataset assembly, splitting, metrics and the experiment drivers.
//!
//! A record goes through ingest → resample (optional) → median denoise →
//! R locations → segmentation → features. Records are processed in
//! parallel and gathered in configuration order, so results do not depend on
//! the thread count.

mod config;
mod grid;
mod metrics;
mod report;
mod split;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{Database, ExperimentConfig, RSource};
pub use grid::{grid_search_svm, GridPoint, GridResult};
pub use metrics::{compute_metrics, ClassMetrics, ConfusionMatrix, MetricsReport};
pub use report::{render_cross_text, render_csv, render_single_text};
pub use split::{stratified_folds, stratified_split, Split};

use crate::classify::{train, TrainedModel};
use crate::dataio::{
    read_csv_record, read_wfdb_annotations, read_wfdb_record, select_leads, BeatAnnotation,
    BeatClass, EcgRecord, LabelManifest,
};
use crate::error::{Error, Result};
use crate::features::{extract_labelled, feature_columns, FeatureTable, FeatureVector};
use crate::preprocess::{median_denoise, resample, FilterConfig};
use crate::qrs::{detect_r_peaks, match_annotations, DetectorConfig};
use crate::Record;

/// Per-record bookkeeping of a dataset build.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSummary {
    pub record: String,
    pub beats: usize,
    pub skipped: usize,
}

/// Labelled feature vectors of one database at a single sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rate_hz: u32,
    pub columns: Vec<String>,
    pub vectors: Vec<FeatureVector<f64>>,
    pub records: Vec<RecordSummary>,
}

impl Dataset {
    pub fn labels(&self) -> Vec<BeatClass> {
        self.vectors
            .iter()
            .map(|v| v.label.expect("dataset vectors are labelled"))
            .collect()
    }

    pub fn table(&self) -> Result<FeatureTable<f64>> {
        FeatureTable::from_vectors(self.columns.clone(), &self.vectors)
    }

    /// Sorted classes present.
    pub fn classes(&self) -> Vec<BeatClass> {
        let mut c = self.labels();
        c.sort();
        c.dedup();
        c
    }
}

/// How a record's beats are located and labelled.
enum BeatSource {
    /// Annotated beats of the listed classes.
    Annotations(Vec<BeatAnnotation>, Vec<BeatClass>),
    /// Every detected beat gets the record label, if there is one.
    RecordLabel(Option<BeatClass>),
}

enum JobLabel {
    Classes(Vec<BeatClass>),
    Record(BeatClass),
}

struct Job {
    id: String,
    label: JobLabel,
}

impl Job {
    fn load(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<(Record, BeatSource)> {
        let id = &self.id;
        match &self.label {
            JobLabel::Classes(classes) => {
                let rec: Record = read_wfdb_record(dir.join(format!("{id}.hea")))
                    .map_err(|e| e.at_stage("ingest", id))?;
                let anns = read_wfdb_annotations(dir.join(format!("{id}.atr")), &rec)
                    .map_err(|e| e.at_stage("ingest", id))?;
                Ok((rec, BeatSource::Annotations(anns.beats, classes.clone())))
            }
            JobLabel::Record(label) => {
                let rec = read_csv_record(
                    dir.join(format!("{id}.csv")),
                    cfg.sampling_rate,
                    &cfg.lead_names,
                    cfg.csv_header,
                )
                .map_err(|e| e.at_stage("ingest", id))?;
                Ok((rec, BeatSource::RecordLabel(Some(*label))))
            }
        }
    }
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Output rate after the optional resampling step.
fn target_rate(cfg: &ExperimentConfig, native: u32) -> u32 {
    cfg.resample_to.unwrap_or(native)
}

fn process_record(
    cfg: &ExperimentConfig,
    record: Record,
    source: BeatSource,
) -> Result<(Vec<FeatureVector<f64>>, usize)> {
    let id = record.record_id.clone();
    let native = record.sampling_rate_hz;
    let rate = target_rate(cfg, native);
    let detect_lead = cfg
        .detect_lead
        .clone()
        .unwrap_or_else(|| cfg.leads[0].clone());

    let mut wanted: Vec<String> = cfg.leads.clone();
    let extra_detect_lead = !wanted.contains(&detect_lead);
    if extra_detect_lead {
        wanted.push(detect_lead.clone());
    }
    let selected = select_leads(&record, &wanted).map_err(|e| e.at_stage("ingest", &id))?;

    let resampled = if rate != native {
        selected
            .map_leads(|l| resample(l, native, rate))
            .and_then(|r| EcgRecord::new(r.record_id.clone(), rate, r.leads))
            .map_err(|e| e.at_stage("resample", &id))?
    } else {
        selected
    };
    let clean = if cfg.denoise {
        let filter = FilterConfig::default();
        resampled
            .map_leads(|l| median_denoise(l, rate, &filter))
            .map_err(|e| e.at_stage("denoise", &id))?
    } else {
        resampled
    };
    // `clean` holds the leads in `wanted` order; name them positionally from here on
    let positional: Vec<String> = (0..cfg.leads.len()).map(|i| format!("@{i}")).collect();
    let detect_idx = if extra_detect_lead {
        cfg.leads.len()
    } else {
        cfg.leads
            .iter()
            .position(|l| *l == detect_lead)
            .expect("present")
    };
    let scale = |i: usize| -> usize {
        if rate == native {
            i
        } else {
            ((i as f64) * rate as f64 / native as f64).round() as usize
        }
    };

    let beats: Vec<(usize, Option<BeatClass>)> = match (&source, cfg.r_source) {
        (BeatSource::Annotations(anns, classes), RSource::Annotated) => anns
            .iter()
            .filter(|a| classes.contains(&a.label))
            .map(|a| (scale(a.sample_index), Some(a.label)))
            .collect(),
        (source, _) => {
            let lead = &clean.leads[detect_idx];
            let det = detect_r_peaks(lead, rate, &DetectorConfig::default())
                .map_err(|e| e.at_stage("detect", &id))?;
            match source {
                BeatSource::RecordLabel(label) => {
                    det.r_peaks.iter().map(|&r| (r, *label)).collect()
                }
                BeatSource::Annotations(anns, classes) => {
                    let scaled: Vec<BeatAnnotation> = anns
                        .iter()
                        .map(|a| BeatAnnotation {
                            sample_index: scale(a.sample_index),
                            label: a.label,
                        })
                        .collect();
                    match_annotations(&det, &scaled, rate, cfg.match_tolerance_s)
                        .matched
                        .into_iter()
                        .filter(|(_, l)| classes.contains(l))
                        .map(|(r, l)| (r, Some(l)))
                        .collect()
                }
            }
        }
    };

    let ext = extract_labelled(&clean, &beats, &positional, &cfg.ar)
        .map_err(|e| e.at_stage("features", &id))?;
    Ok((ext.vectors, ext.skipped.len()))
}

/// Features of a single record, using the pipeline settings of `cfg`.
///
/// With annotations every annotated beat class is kept; without them the
/// detected beats are returned unlabelled. Returns the vectors and the number
/// of beats skipped at the record edges or as degenerate.
pub fn record_features(
    cfg: &ExperimentConfig,
    record: Record,
    annotations: Option<&[BeatAnnotation]>,
) -> Result<(Vec<FeatureVector<f64>>, usize)> {
    let source = match annotations {
        Some(anns) => {
            let mut classes: Vec<BeatClass> = anns.iter().map(|a| a.label).collect();
            classes.sort();
            classes.dedup();
            BeatSource::Annotations(anns.to_vec(), classes)
        }
        None => BeatSource::RecordLabel(None),
    };
    process_record(cfg, record, source)
}

/// Builds the labelled feature set described by `cfg`; relative paths resolve against `data_root`.
pub fn build_dataset(cfg: &ExperimentConfig, data_root: &Path) -> Result<Dataset> {
    cfg.validate()?;
    let dir = resolve(data_root, &cfg.data_dir);

    let jobs: Vec<Job> = match cfg.database {
        Database::MitBih => {
            // one job per record, with every class it contributes
            let mut jobs: Vec<Job> = Vec::new();
            for src in &cfg.class_sources {
                for r in &src.records {
                    match jobs.iter_mut().find(|j| j.id == *r) {
                        Some(Job {
                            label: JobLabel::Classes(classes),
                            ..
                        }) => classes.push(src.class),
                        _ => jobs.push(Job {
                            id: r.clone(),
                            label: JobLabel::Classes(vec![src.class]),
                        }),
                    }
                }
            }
            jobs
        }
        Database::Csv => {
            let manifest_path = resolve(&dir, cfg.labels.as_ref().expect("validated"));
            let manifest = LabelManifest::from_path(&manifest_path)?;
            let (kept, rejected) = manifest.restricted_to(&cfg.classes);
            if rejected > 0 {
                log::info!(
                    "{rejected} manifest records have labels outside the configured classes"
                );
            }
            kept.into_iter()
                .map(|(id, label)| Job {
                    id,
                    label: JobLabel::Record(label),
                })
                .collect()
        }
    };
    if jobs.is_empty() {
        return Err(Error::InsufficientData(
            "the configuration selects no records".into(),
        ));
    }

    #[allow(clippy::type_complexity)]
    let results: Vec<Result<(u32, Vec<FeatureVector<f64>>, usize)>> = jobs
        .par_iter()
        .map(|job| {
            let (rec, source) = job.load(cfg, &dir)?;
            let rate = target_rate(cfg, rec.sampling_rate_hz);
            let (vectors, skipped) = process_record(cfg, rec, source)?;
            Ok((rate, vectors, skipped))
        })
        .collect();

    let mut rate_hz = None;
    let mut vectors = Vec::new();
    let mut records = Vec::new();
    for (Job { id, .. }, r) in jobs.iter().zip(results) {
        let (rate, v, skipped) = r?;
        match rate_hz {
            None => rate_hz = Some(rate),
            Some(prev) if prev != rate => {
                return Err(Error::Config(format!(
                "record {id} is at {rate} Hz but earlier records are at {prev} Hz; set resample_to"
            )))
            }
            _ => {}
        }
        log::info!("record {id}: {} beats, {skipped} skipped", v.len());
        records.push(RecordSummary {
            record: id.clone(),
            beats: v.len(),
            skipped,
        });
        vectors.extend(v);
    }
    if vectors.is_empty() {
        return Err(Error::InsufficientData(
            "no beats survived feature extraction".into(),
        ));
    }
    let lead_labels: Vec<String> = cfg.leads.iter().map(|l| l.replace('@', "lead")).collect();
    Ok(Dataset {
        rate_hz: rate_hz.expect("at least one record"),
        columns: feature_columns(&lead_labels, &cfg.ar),
        vectors,
        records,
    })
}

/// Result of training and testing on one database.
#[derive(Debug, Clone)]
pub struct SingleDbOutcome {
    pub config: ExperimentConfig,
    pub rate_hz: u32,
    pub n_train: usize,
    pub n_test: usize,
    pub records: Vec<RecordSummary>,
    pub report: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub model: TrainedModel<f64>,
}

/// Split, train and test on an assembled dataset.
pub fn evaluate_dataset(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<SingleDbOutcome> {
    let table = dataset.table()?;
    let labels = dataset.labels();
    let split = stratified_split(&labels, cfg.split, cfg.seed)?;
    let train_y: Vec<BeatClass> = split.train.iter().map(|&i| labels[i]).collect();
    let test_y: Vec<BeatClass> = split.test.iter().map(|&i| labels[i]).collect();
    let model = train(
        &table.matrix.select_rows(&split.train),
        &train_y,
        &cfg.effective_classifier(),
        cfg.standardize,
    )
    .map_err(|e| e.at_stage("train", "all"))?;
    let pred = model.predict(&table.matrix.select_rows(&split.test))?;
    let (report, confusion) = compute_metrics(&test_y, &pred, &dataset.classes())?;
    Ok(SingleDbOutcome {
        config: cfg.clone(),
        rate_hz: dataset.rate_hz,
        n_train: split.train.len(),
        n_test: split.test.len(),
        records: dataset.records.clone(),
        report,
        confusion,
        model,
    })
}

pub fn run_single_db(cfg: &ExperimentConfig, data_root: &Path) -> Result<SingleDbOutcome> {
    let dataset = build_dataset(cfg, data_root)?;
    evaluate_dataset(&dataset, cfg)
}

/// Result of training on one database and testing on another.
#[derive(Debug, Clone)]
pub struct CrossDbOutcome {
    pub train_config: ExperimentConfig,
    pub test_config: ExperimentConfig,
    pub rate_hz: u32,
    pub n_train: usize,
    pub n_test: usize,
    pub report: MetricsReport,
    /// Rows actual, columns predicted, over the union of both label sets.
    pub confusion: ConfusionMatrix,
    pub model: TrainedModel<f64>,
}

/// Trains on all of `train_set` and predicts all of `test_set`.
pub fn cross_evaluate(
    train_set: &Dataset,
    test_set: &Dataset,
    train_cfg: &ExperimentConfig,
    test_cfg: &ExperimentConfig,
) -> Result<CrossDbOutcome> {
    if train_set.rate_hz != test_set.rate_hz {
        return Err(Error::Config(format!(
            "training data is at {} Hz and test data at {} Hz; set resample_to on one side",
            train_set.rate_hz, test_set.rate_hz
        )));
    }
    if train_set.columns.len() != test_set.columns.len() {
        return Err(Error::Shape {
            expected: train_set.columns.len(),
            given: test_set.columns.len(),
        });
    }
    let train_table = train_set.table()?;
    let model = train(
        &train_table.matrix,
        &train_set.labels(),
        &train_cfg.effective_classifier(),
        train_cfg.standardize,
    )
    .map_err(|e| e.at_stage("train", "all"))?;
    let test_table = test_set.table()?;
    let pred = model.predict(&test_table.matrix)?;
    let mut classes = model.classes.clone();
    classes.extend(test_set.classes());
    classes.sort();
    classes.dedup();
    let (report, confusion) = compute_metrics(&test_set.labels(), &pred, &classes)?;
    Ok(CrossDbOutcome {
        train_config: train_cfg.clone(),
        test_config: test_cfg.clone(),
        rate_hz: train_set.rate_hz,
        n_train: train_set.vectors.len(),
        n_test: test_set.vectors.len(),
        report,
        confusion,
        model,
    })
}

pub fn run_cross_db(
    train_cfg: &ExperimentConfig,
    test_cfg: &ExperimentConfig,
    data_root: &Path,
) -> Result<CrossDbOutcome> {
    let train_set = build_dataset(train_cfg, data_root)?;
    let test_set = build_dataset(test_cfg, data_root)?;
    cross_evaluate(&train_set, &test_set, train_cfg, test_cfg)
}
