//! `ecgdx` command-line driver.
//!
//! Data goes to standard output or `--out`; progress and errors go to
//! standard error. Exit status: 0 on success, 1 on data or configuration
//! errors (printed as `error[kind]: message`), 2 on usage errors.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecgdx::classify::{load_model, save_model, train, ClassifierConfig};
use ecgdx::dataio::{
    read_csv_record, read_wfdb_annotations, read_wfdb_record, select_leads, AnnotationSet,
};
use ecgdx::eval::{
    build_dataset, compute_metrics, cross_evaluate, evaluate_dataset, grid_search_svm,
    record_features, render_cross_text, render_csv, render_single_text, stratified_split,
    ExperimentConfig, GridResult,
};
use ecgdx::features::{feature_columns, FeatureTable};
use ecgdx::preprocess::{median_denoise, FilterConfig};
use ecgdx::qrs::{detect_r_peaks, DetectionScore, DetectorConfig, Stages};
use ecgdx::{BeatClass, Error, Model, Record, Result};

#[derive(Parser)]
#[command(
    name = "ecgdx",
    version,
    about = "Two-lead ECG arrhythmia classification"
)]
struct Cli {
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    /// Only report warnings and errors on standard error.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read one record and summarise its leads and annotations.
    Ingest(IngestArgs),
    /// Detect R peaks on one lead.
    Detect(DetectArgs),
    /// Extract beat features from a record or from a whole experiment.
    Features(FeaturesArgs),
    /// Train a classifier and save it.
    Train(TrainArgs),
    /// Classify the rows of a feature file with a saved model.
    Predict(PredictArgs),
    /// Split, train and test on one database.
    EvalSingle(EvalSingleArgs),
    /// Train on one database and test on another.
    EvalCross(EvalCrossArgs),
    /// Cross-validated SVM grid search over C and gamma.
    GridSearch(GridArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Txt,
}

#[derive(Args)]
struct RecordArgs {
    /// WFDB header (`.hea`) or CSV record (`.csv`).
    #[arg(long)]
    record: PathBuf,

    /// WFDB annotation file for the record.
    #[arg(long)]
    annotations: Option<PathBuf>,

    /// Sampling rate of CSV records.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(1..))]
    rate: u32,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: RecordArgs,

    /// Write the samples, in physical units, as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: RecordArgs,

    /// Lead name, or `@i` for the i-th lead.
    #[arg(long, default_value = "@0")]
    lead: String,

    /// Skip the median baseline removal.
    #[arg(long)]
    no_denoise: bool,

    /// Matching tolerance in seconds when scoring against --annotations.
    #[arg(long, default_value_t = 0.15)]
    tolerance: f64,

    /// Also write the detector stage signals as CSV.
    #[arg(long)]
    stages: Option<PathBuf>,

    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct Overrides {
    /// Root for relative data paths; defaults to the configuration file's directory.
    #[arg(long, env = "ECGDX_DATA_DIR")]
    data_root: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// svm, knn, mlp or nb.
    #[arg(long)]
    classifier: Option<String>,

    /// Comma-separated lead names or `@i` positions.
    #[arg(long)]
    leads: Option<String>,

    /// Any configuration key, as KEY=VALUE. Repeatable; applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_pair)]
    set: Vec<(String, String)>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Experiment configuration; builds the features of every configured record.
    #[arg(long, required_unless_present = "record", conflicts_with = "record")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    /// Single record; labels come from --annotations when given.
    #[arg(long)]
    record: Option<PathBuf>,

    #[arg(long, requires = "record")]
    annotations: Option<PathBuf>,

    /// Sampling rate of CSV records.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(1..))]
    rate: u32,

    /// Locate beats with the detector even when annotations are given.
    #[arg(long)]
    detect: bool,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labelled feature CSV as written by `features`.
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    features: Option<PathBuf>,

    /// Experiment configuration; trains on every beat it selects.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    /// Where to save the model.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,

    /// Feature CSV; a `label` column, if present, is scored.
    #[arg(long)]
    features: PathBuf,

    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct EvalSingleArgs {
    #[arg(long)]
    config: PathBuf,

    #[command(flatten)]
    overrides: Overrides,

    /// Also save the trained model.
    #[arg(long)]
    model: Option<PathBuf>,

    /// Write the report here in --format; the text report always goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct EvalCrossArgs {
    #[arg(long)]
    train_config: PathBuf,

    #[arg(long)]
    test_config: PathBuf,

    /// Overrides apply to the training configuration; --seed and --data-root to both.
    #[command(flatten)]
    overrides: Overrides,

    #[arg(long)]
    model: Option<PathBuf>,

    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,

    #[command(flatten)]
    overrides: Overrides,

    /// C values, comma-separated; `2^k` is accepted. Default 2^-4, 2^-2, …, 2^16.
    #[arg(long, value_delimiter = ',', value_parser = parse_grid_value)]
    c_grid: Vec<f64>,

    /// Gamma values. Default 2^-14, 2^-12, …, 2^2.
    #[arg(long, value_delimiter = ',', value_parser = parse_grid_value)]
    gamma_grid: Vec<f64>,

    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u16).range(2..))]
    folds: u16,

    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Txt)]
    format: Format,
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    Ok((k.trim().to_ascii_lowercase(), v.trim().to_string()))
}

fn parse_grid_value(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = match s.strip_prefix("2^") {
        Some(e) => e
            .parse::<i32>()
            .map(|e| 2f64.powi(e))
            .map_err(|_| format!("bad exponent in {s:?}"))?,
        None => s
            .parse::<f64>()
            .map_err(|_| format!("not a number: {s:?}"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("grid values must be positive, got {s}"))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `text` to `out`, or to standard output.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_error(Path::new("<stdout>"), e))
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_record(path: &Path, rate: u32) -> Result<Record> {
    if is_csv(path) {
        read_csv_record(path, rate, &[], true)
    } else {
        read_wfdb_record(path)
    }
}

fn load_config(path: &Path, o: &Overrides) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(kind) = &o.classifier {
        cfg.set("classifier", kind)?;
    }
    if let Some(leads) = &o.leads {
        cfg.set("leads", leads)?;
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    for (k, v) in &o.set {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    let root = match &o.data_root {
        Some(r) => r.clone(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    log::debug!("effective configuration:\n{}", cfg.describe());
    Ok((cfg, root))
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let rec = read_record(&a.input.record, a.input.rate)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "record {}: {} leads ({}) at {} Hz, {} samples ({:.1} s)",
        rec.record_id,
        rec.leads.len(),
        rec.lead_names().join(", "),
        rec.sampling_rate_hz,
        rec.duration_samples,
        rec.duration_s()
    );
    if let Some(ann) = &a.input.annotations {
        let set = read_wfdb_annotations(ann, &rec)?;
        s.push_str(&annotation_summary(&set));
    }
    if let Some(p) = &a.out {
        let mut csv = format!("index,{}\n", rec.lead_names().join(","));
        for i in 0..rec.duration_samples {
            let row: Vec<String> = rec.leads.iter().map(|l| l.samples[i].to_string()).collect();
            let _ = writeln!(csv, "{i},{}", row.join(","));
        }
        emit(Some(p), &csv)?;
        log::info!("wrote {} samples to {}", rec.duration_samples, p.display());
    }
    emit(None, &s)
}

fn annotation_summary(set: &AnnotationSet) -> String {
    let mut s = format!("{} labelled beats", set.beats.len());
    for c in BeatClass::MITBIH {
        let n = set.of_class(c).count();
        if n > 0 {
            let _ = write!(s, ", {c} {n}");
        }
    }
    let r = &set.report;
    let _ = writeln!(
        s,
        "\nskipped: {} beats of other classes, {} non-beat, {} duplicates",
        r.skipped_total(),
        r.non_beat,
        r.duplicates
    );
    s
}

fn detect(a: &DetectArgs) -> Result<()> {
    if a.tolerance.is_nan() || a.tolerance <= 0.0 {
        return Err(Error::Config("--tolerance must be positive".into()));
    }
    let rec = read_record(&a.input.record, a.input.rate)?;
    let rate = rec.sampling_rate_hz;
    let lead = select_leads(&rec, &[a.lead.as_str()])?.leads.remove(0);
    let lead = if a.no_denoise {
        lead
    } else {
        median_denoise(&lead, rate, &FilterConfig::default())?
    };
    let cfg = DetectorConfig::default();
    let det = detect_r_peaks(&lead, rate, &cfg)?;
    log::info!(
        "{} R peaks on lead {} of {}",
        det.r_peaks.len(),
        lead.lead_name,
        rec.record_id
    );
    if let Some(p) = &a.stages {
        let file = fs::File::create(p).map_err(|e| io_error(p, e))?;
        let mut w = std::io::BufWriter::new(file);
        Stages::compute(&lead.samples, rate, &cfg)
            .write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| io_error(p, e))?;
    }
    if let Some(ann) = &a.input.annotations {
        let set = read_wfdb_annotations(ann, &rec)?;
        let reference: Vec<usize> = set.beats.iter().map(|b| b.sample_index).collect();
        let tol = (a.tolerance * rate as f64).round() as usize;
        let s = DetectionScore::compute(&det.r_peaks, &reference, tol);
        log::info!(
            "against annotations: sensitivity {:.4}, positive predictivity {:.4} ({} TP, {} FP, {} FN)",
            s.sensitivity(),
            s.positive_predictivity(),
            s.true_positives,
            s.false_positives,
            s.false_negatives
        );
    }
    let mut out = String::new();
    if a.format == Format::Csv {
        out.push_str("r_index\n");
    }
    for r in &det.r_peaks {
        let _ = writeln!(out, "{r}");
    }
    emit(a.out.as_deref(), &out)
}

fn features(a: &FeaturesArgs) -> Result<()> {
    let table = match (&a.config, &a.record) {
        (Some(path), _) => {
            let (cfg, root) = load_config(path, &a.overrides)?;
            let ds = build_dataset(&cfg, &root)?;
            log::info!(
                "{} beats from {} records",
                ds.vectors.len(),
                ds.records.len()
            );
            ds.table()?
        }
        (None, Some(path)) => {
            let mut cfg = ExperimentConfig::default();
            if let Some(leads) = &a.overrides.leads {
                cfg.set("leads", leads)?;
            }
            for (k, v) in &a.overrides.set {
                cfg.set(k, v)?;
            }
            if a.detect {
                cfg.set("r_source", "detected")?;
            }
            cfg.validate()?;
            let rec = read_record(path, a.rate)?;
            let anns = match &a.annotations {
                Some(p) => Some(read_wfdb_annotations(p, &rec)?.beats),
                None => None,
            };
            let lead_labels = select_leads(&rec, &cfg.leads)?.lead_names();
            let id = rec.record_id.clone();
            let (vectors, skipped) = record_features(&cfg, rec, anns.as_deref())?;
            log::info!("record {id}: {} beats, {skipped} skipped", vectors.len());
            FeatureTable::from_vectors(feature_columns(&lead_labels, &cfg.ar), &vectors)?
        }
        (None, None) => unreachable!("clap requires --config or --record"),
    };
    let mut buf = Vec::new();
    table
        .write_csv(&mut buf)
        .map_err(|e| io_error(Path::new("<buffer>"), e))?;
    emit(a.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn train_command(a: &TrainArgs) -> Result<()> {
    let (model, n) = match (&a.features, &a.config) {
        (Some(path), _) => {
            let mut cfg = ExperimentConfig::default();
            if let Some(kind) = &a.overrides.classifier {
                cfg.set("classifier", kind)?;
            }
            if let Some(seed) = a.overrides.seed {
                cfg.seed = seed;
            }
            for (k, v) in &a.overrides.set {
                cfg.set(k, v)?;
            }
            let table = FeatureTable::<f64>::load(path)?;
            let y = table.required_labels()?;
            (
                train(
                    &table.matrix,
                    &y,
                    &cfg.effective_classifier(),
                    cfg.standardize,
                )?,
                y.len(),
            )
        }
        (None, Some(path)) => {
            let (cfg, root) = load_config(path, &a.overrides)?;
            let ds = build_dataset(&cfg, &root)?;
            let table = ds.table()?;
            let y = ds.labels();
            (
                train(
                    &table.matrix,
                    &y,
                    &cfg.effective_classifier(),
                    cfg.standardize,
                )?,
                y.len(),
            )
        }
        (None, None) => unreachable!("clap requires --features or --config"),
    };
    save_model(&model, &a.model)?;
    let names: Vec<&str> = model.classes.iter().map(|c| c.name()).collect();
    log::info!(
        "trained {} on {n} beats ({}), saved to {}",
        model.kind(),
        names.join(", "),
        a.model.display()
    );
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let model: Model = load_model(&a.model)?;
    let table = FeatureTable::<f64>::load(&a.features)?;
    let pred = model.predict(&table.matrix)?;
    let labelled = table.labels.iter().all(Option::is_some) && !table.labels.is_empty();
    let mut out = String::new();
    match a.format {
        Format::Csv => {
            out.push_str(if labelled {
                "row,predicted,actual\n"
            } else {
                "row,predicted\n"
            });
            for (i, p) in pred.iter().enumerate() {
                match table.labels[i] {
                    Some(l) if labelled => {
                        let _ = writeln!(out, "{i},{p},{l}");
                    }
                    _ => {
                        let _ = writeln!(out, "{i},{p}");
                    }
                }
            }
        }
        Format::Txt => {
            for p in &pred {
                let _ = writeln!(out, "{p}");
            }
        }
    }
    emit(a.out.as_deref(), &out)?;
    if labelled {
        let y = table.required_labels()?;
        let mut classes = model.classes.clone();
        classes.extend(&y);
        classes.sort();
        classes.dedup();
        let (report, _) = compute_metrics(&y, &pred, &classes)?;
        log::info!(
            "accuracy {:.4} on {} labelled rows",
            report.accuracy,
            report.total
        );
    }
    Ok(())
}

fn report_file(
    out: Option<&Path>,
    format: Format,
    csv: impl FnOnce() -> String,
    text: &str,
) -> Result<()> {
    if let Some(p) = out {
        let body = match format {
            Format::Csv => csv(),
            Format::Txt => text.to_string(),
        };
        emit(Some(p), &body)?;
        log::info!("report written to {}", p.display());
    }
    Ok(())
}

fn save_if_asked(model: &Model, path: Option<&Path>) -> Result<()> {
    if let Some(p) = path {
        save_model(model, p)?;
        log::info!("model saved to {}", p.display());
    }
    Ok(())
}

fn eval_single(a: &EvalSingleArgs) -> Result<()> {
    let (cfg, root) = load_config(&a.config, &a.overrides)?;
    let ds = build_dataset(&cfg, &root)?;
    log::info!(
        "{} beats from {} records; training {}",
        ds.vectors.len(),
        ds.records.len(),
        cfg.classifier.kind()
    );
    let o = evaluate_dataset(&ds, &cfg)?;
    let text = render_single_text(&o);
    emit(None, &text)?;
    report_file(a.out.as_deref(), a.format, || render_csv(&o.report), &text)?;
    save_if_asked(&o.model, a.model.as_deref())
}

fn eval_cross(a: &EvalCrossArgs) -> Result<()> {
    let (train_cfg, root) = load_config(&a.train_config, &a.overrides)?;
    let test_only = Overrides {
        data_root: a.overrides.data_root.clone(),
        seed: a.overrides.seed,
        classifier: None,
        leads: None,
        set: Vec::new(),
    };
    let (test_cfg, test_root) = load_config(&a.test_config, &test_only)?;
    let train_set = build_dataset(&train_cfg, &root)?;
    log::info!(
        "training set: {} beats at {} Hz",
        train_set.vectors.len(),
        train_set.rate_hz
    );
    let test_set = build_dataset(&test_cfg, &test_root)?;
    log::info!(
        "test set: {} beats at {} Hz",
        test_set.vectors.len(),
        test_set.rate_hz
    );
    let o = cross_evaluate(&train_set, &test_set, &train_cfg, &test_cfg)?;
    let text = render_cross_text(&o);
    emit(None, &text)?;
    report_file(a.out.as_deref(), a.format, || render_csv(&o.report), &text)?;
    save_if_asked(&o.model, a.model.as_deref())
}

fn default_grid(from: i32, to: i32) -> Vec<f64> {
    (from..=to).step_by(2).map(|e| 2f64.powi(e)).collect()
}

fn render_grid(g: &GridResult, format: Format) -> String {
    let mut s = String::new();
    match format {
        Format::Csv => {
            s.push_str("c,gamma,correct,total,accuracy\n");
            for p in &g.points {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{:.6}",
                    p.c,
                    p.gamma,
                    p.correct,
                    p.total,
                    p.accuracy()
                );
            }
        }
        Format::Txt => {
            let _ = writeln!(s, "{:>14} {:>14} {:>9}", "C", "gamma", "accuracy");
            for p in &g.points {
                let _ = writeln!(s, "{:>14} {:>14.6e} {:>9.4}", p.c, p.gamma, p.accuracy());
            }
            let _ = writeln!(s, "best: c = {}, gamma = {}", g.best.c, g.best.gamma);
        }
    }
    s
}

fn grid_search(a: &GridArgs) -> Result<()> {
    let (cfg, root) = load_config(&a.config, &a.overrides)?;
    let ClassifierConfig::Svm(base) = cfg.classifier.clone() else {
        return Err(Error::Config(format!(
            "grid search tunes an SVM, but the classifier is {}",
            cfg.classifier.kind()
        )));
    };
    let c_grid = if a.c_grid.is_empty() {
        default_grid(-4, 16)
    } else {
        a.c_grid.clone()
    };
    let gamma_grid = if a.gamma_grid.is_empty() {
        default_grid(-14, 2)
    } else {
        a.gamma_grid.clone()
    };
    let ds = build_dataset(&cfg, &root)?;
    let table = ds.table()?;
    let labels = ds.labels();
    // tune on the training part only, so the held-out split stays unseen
    let split = stratified_split(&labels, cfg.split, cfg.seed)?;
    let y: Vec<BeatClass> = split.train.iter().map(|&i| labels[i]).collect();
    log::info!(
        "{} grid points x {} folds on {} training beats",
        c_grid.len() * gamma_grid.len(),
        a.folds,
        y.len()
    );
    let g = grid_search_svm(
        &table.matrix.select_rows(&split.train),
        &y,
        &c_grid,
        &gamma_grid,
        a.folds as usize,
        &base,
        cfg.standardize,
        cfg.seed,
    )?;
    emit(a.out.as_deref(), &render_grid(&g, a.format))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Detect(a) => detect(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train_command(a),
        Command::Predict(a) => predict(a),
        Command::EvalSingle(a) => eval_single(a),
        Command::EvalCross(a) => eval_cross(a),
        Command::GridSearch(a) => grid_search(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
        {
            eprintln!("error[config]: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(1)
        }
    }
}
