//! Plain-text `key = value` experiment manifests.
//!
//! ```text
//! database   = mitbih
//! data_dir   = mitdb
//! classes    = Normal=100 LBBB=109 PVC=208
//! leads      = @0,@1
//! classifier = svm
//! c          = 65536
//! gamma      = 2.44e-4
//! seed       = 7
//! ```
//! `#` starts a comment. Later keys override earlier ones.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::classify::{ClassifierConfig, KnnConfig, MlpConfig, ModelKind, SvmConfig};
use crate::dataio::{BeatClass, ClassSource};
use crate::error::{Error, Result};
use crate::features::{ArConfig, ArMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Database {
    /// WFDB records (`.hea`/`.dat`) with `.atr` beat annotations.
    MitBih,
    /// One CSV file per record plus a `record,label` manifest.
    Csv,
}

impl Database {
    pub fn name(self) -> &'static str {
        match self {
            Database::MitBih => "mitbih",
            Database::Csv => "csv",
        }
    }
}

impl FromStr for Database {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mitbih" | "mit-bih" | "wfdb" => Ok(Database::MitBih),
            "csv" | "sphc" => Ok(Database::Csv),
            _ => Err(Error::Config(format!("unknown database {s:?}"))),
        }
    }
}

/// Where beat locations come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RSource {
    /// Expert annotation sample indices.
    Annotated,
    /// The QRS detector; for annotated databases, labels come from matching.
    Detected,
}

impl FromStr for RSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "annotated" | "annotations" => Ok(RSource::Annotated),
            "detected" | "detector" => Ok(RSource::Detected),
            _ => Err(Error::Config(format!("unknown r_source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub database: Database,
    /// Relative paths resolve against the data root given to the drivers.
    pub data_dir: PathBuf,
    /// Class → records, for annotated databases.
    pub class_sources: Vec<ClassSource>,
    /// Record label manifest, for CSV databases.
    pub labels: Option<PathBuf>,
    /// Classes kept from the manifest.
    pub classes: Vec<BeatClass>,
    pub leads: Vec<String>,
    /// Lead the detector runs on; defaults to the first of `leads`.
    pub detect_lead: Option<String>,
    pub r_source: RSource,
    pub resample_to: Option<u32>,
    /// Native rate of CSV records.
    pub sampling_rate: u32,
    pub csv_header: bool,
    pub lead_names: Vec<String>,
    pub denoise: bool,
    pub split: f64,
    pub seed: u64,
    pub classifier: ClassifierConfig,
    pub standardize: bool,
    pub ar: ArConfig,
    pub match_tolerance_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            database: Database::MitBih,
            data_dir: PathBuf::from("."),
            class_sources: ClassSource::mitbih_default(),
            labels: None,
            classes: Vec::new(),
            leads: vec!["@0".into(), "@1".into()],
            detect_lead: None,
            r_source: RSource::Annotated,
            resample_to: None,
            sampling_rate: 500,
            csv_header: true,
            lead_names: Vec::new(),
            denoise: true,
            split: 0.7,
            seed: 0,
            classifier: ClassifierConfig::Svm(SvmConfig::default()),
            standardize: true,
            ar: ArConfig::default(),
            match_tolerance_s: 0.15,
        }
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

/// Keys applied before the others so that later keys can depend on them.
const FIRST: [&str; 2] = ["database", "classifier"];

impl ExperimentConfig {
    /// Defaults adjusted for a database: CSV records use detected beats and the
    /// four rhythm classes.
    pub fn for_database(database: Database) -> Self {
        let mut cfg = Self {
            database,
            ..Self::default()
        };
        if database == Database::Csv {
            cfg.class_sources.clear();
            cfg.classes = BeatClass::SPHC.to_vec();
            cfg.r_source = RSource::Detected;
        }
        cfg
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(
                    "<config>",
                    i + 1,
                    format!("expected key = value, got {line:?}"),
                )
            })?;
            pairs.push((i + 1, k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let database = pairs
            .iter()
            .rev()
            .find(|(_, k, _)| k == "database")
            .map(|(_, _, v)| v.parse())
            .transpose()?
            .unwrap_or(Database::MitBih);
        let mut cfg = Self::for_database(database);
        pairs.sort_by_key(|(_, k, _)| !FIRST.contains(&k.as_str()));
        for (line, k, v) in pairs {
            cfg.set(&k, &v)
                .map_err(|e| Error::parse("<config>", line, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => {
                Error::parse(path.display().to_string(), line, message)
            }
            other => other,
        })
    }

    fn wrong_classifier(&self, key: &str, wanted: ModelKind) -> Error {
        Error::Config(format!(
            "key {key} applies to {wanted}, but the classifier is {}",
            self.classifier.kind()
        ))
    }

    /// Sets one key; used by the parser and by command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "database" => {
                let db: Database = value.parse()?;
                if db != self.database {
                    let keep = std::mem::take(self);
                    *self = Self::for_database(db);
                    self.data_dir = keep.data_dir;
                    self.seed = keep.seed;
                    self.classifier = keep.classifier;
                }
            }
            "data_dir" => self.data_dir = PathBuf::from(value),
            "classes" => match self.database {
                Database::MitBih => self.class_sources = ClassSource::parse_list(value)?,
                Database::Csv => {
                    self.classes = list(value)
                        .iter()
                        .map(|s| s.parse())
                        .collect::<Result<_>>()?;
                }
            },
            "labels" => self.labels = Some(PathBuf::from(value)),
            "leads" => self.leads = list(value),
            "detect_lead" => self.detect_lead = Some(value.to_string()),
            "r_source" => self.r_source = value.parse()?,
            "resample_to" => {
                self.resample_to = match value.to_ascii_lowercase().as_str() {
                    "" | "none" | "native" => None,
                    v => Some(number(key, v)?),
                }
            }
            "sampling_rate" => self.sampling_rate = number(key, value)?,
            "csv_header" => self.csv_header = boolean(key, value)?,
            "lead_names" => self.lead_names = list(value),
            "denoise" => self.denoise = boolean(key, value)?,
            "split" => self.split = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "standardize" => self.standardize = boolean(key, value)?,
            "ar_order" => self.ar.order = number(key, value)?,
            "ar_method" => self.ar.method = value.parse::<ArMethod>()?,
            "match_tolerance_s" => self.match_tolerance_s = number(key, value)?,
            "classifier" => {
                let kind: ModelKind = value.parse()?;
                if kind != self.classifier.kind() {
                    self.classifier = ClassifierConfig::default_for(kind);
                }
            }
            "c" | "gamma" | "tolerance" | "max_passes" => {
                let ClassifierConfig::Svm(svm) = &mut self.classifier else {
                    return Err(self.wrong_classifier(key, ModelKind::Svm));
                };
                match key {
                    "c" => svm.c = number(key, value)?,
                    "gamma" => svm.gamma = number(key, value)?,
                    "tolerance" => svm.tolerance = number(key, value)?,
                    _ => svm.max_passes = number(key, value)?,
                }
            }
            "k" | "p" => {
                let ClassifierConfig::Knn(knn) = &mut self.classifier else {
                    return Err(self.wrong_classifier(key, ModelKind::Knn));
                };
                if key == "k" {
                    knn.k = number(key, value)?;
                } else {
                    knn.p = number(key, value)?;
                }
            }
            "hidden_layers" | "learning_rate" | "momentum" | "epochs" | "batch_size" => {
                let ClassifierConfig::Mlp(mlp) = &mut self.classifier else {
                    return Err(self.wrong_classifier(key, ModelKind::Mlp));
                };
                match key {
                    "hidden_layers" => {
                        mlp.hidden_layers = value
                            .split(|c: char| c == 'x' || c == ',' || c.is_whitespace())
                            .filter(|s| !s.is_empty())
                            .map(|s| number(key, s))
                            .collect::<Result<_>>()?;
                    }
                    "learning_rate" => mlp.learning_rate = number(key, value)?,
                    "momentum" => mlp.momentum = number(key, value)?,
                    "epochs" => mlp.epochs = number(key, value)?,
                    _ => mlp.batch_size = number(key, value)?,
                }
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!(
                "split must be in (0, 1), got {}",
                self.split
            )));
        }
        if self.leads.is_empty() {
            return Err(Error::EmptySelection);
        }
        if self.resample_to == Some(0) || self.sampling_rate == 0 {
            return Err(Error::Config("sampling rates must be positive".into()));
        }
        if self.ar.order == 0 || self.ar.order >= crate::features::BEAT_LEN {
            return Err(Error::Config(format!(
                "ar_order {} out of range",
                self.ar.order
            )));
        }
        match self.database {
            Database::MitBih if self.class_sources.is_empty() => Err(Error::Config(
                "classes must list at least one CLASS=records source".into(),
            )),
            Database::Csv if self.labels.is_none() => {
                Err(Error::Config("CSV databases need a labels manifest".into()))
            }
            Database::Csv if self.r_source == RSource::Annotated => Err(Error::Config(
                "CSV records carry no beat annotations; use r_source = detected".into(),
            )),
            Database::Csv if self.classes.is_empty() => {
                Err(Error::Config("classes must not be empty".into()))
            }
            _ => Ok(()),
        }
    }

    /// Classifier settings with the experiment seed applied to the MLP.
    pub fn effective_classifier(&self) -> ClassifierConfig {
        match &self.classifier {
            ClassifierConfig::Mlp(m) => ClassifierConfig::Mlp(MlpConfig {
                seed: self.seed,
                ..m.clone()
            }),
            other => other.clone(),
        }
    }

    /// Canonical key = value listing; parsing it gives back an equal config.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "database = {}", self.database.name());
        let _ = writeln!(s, "data_dir = {}", self.data_dir.display());
        match self.database {
            Database::MitBih => {
                let sources: Vec<String> = self
                    .class_sources
                    .iter()
                    .map(|c| format!("{}={}", c.class, c.records.join("+")))
                    .collect();
                let _ = writeln!(s, "classes = {}", sources.join(" "));
            }
            Database::Csv => {
                let names: Vec<&str> = self.classes.iter().map(|c| c.name()).collect();
                let _ = writeln!(s, "classes = {}", names.join(","));
                if let Some(l) = &self.labels {
                    let _ = writeln!(s, "labels = {}", l.display());
                }
                let _ = writeln!(s, "sampling_rate = {}", self.sampling_rate);
                let _ = writeln!(s, "csv_header = {}", self.csv_header);
                if !self.lead_names.is_empty() {
                    let _ = writeln!(s, "lead_names = {}", self.lead_names.join(","));
                }
            }
        }
        let _ = writeln!(s, "leads = {}", self.leads.join(","));
        if let Some(l) = &self.detect_lead {
            let _ = writeln!(s, "detect_lead = {l}");
        }
        let r = match self.r_source {
            RSource::Annotated => "annotated",
            RSource::Detected => "detected",
        };
        let _ = writeln!(s, "r_source = {r}");
        if let Some(r) = self.resample_to {
            let _ = writeln!(s, "resample_to = {r}");
        }
        let _ = writeln!(s, "denoise = {}", self.denoise);
        let _ = writeln!(s, "split = {}", self.split);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "standardize = {}", self.standardize);
        let method = match self.ar.method {
            ArMethod::Burg => "burg",
            ArMethod::YuleWalker => "yule-walker",
        };
        let _ = writeln!(s, "ar_order = {}", self.ar.order);
        let _ = writeln!(s, "ar_method = {method}");
        let _ = writeln!(s, "match_tolerance_s = {}", self.match_tolerance_s);
        let _ = writeln!(s, "classifier = {}", self.classifier.kind());
        match &self.classifier {
            ClassifierConfig::Svm(c) => {
                let _ = writeln!(
                    s,
                    "c = {}\ngamma = {}\ntolerance = {}\nmax_passes = {}",
                    c.c, c.gamma, c.tolerance, c.max_passes
                );
            }
            ClassifierConfig::Knn(KnnConfig { k, p }) => {
                let _ = writeln!(s, "k = {k}\np = {p}");
            }
            ClassifierConfig::Mlp(m) => {
                let hidden: Vec<String> = m.hidden_layers.iter().map(usize::to_string).collect();
                let _ = writeln!(
                    s,
                    "hidden_layers = {}\nlearning_rate = {}\nmomentum = {}\nepochs = {}\nbatch_size = {}",
                    hidden.join("x"),
                    m.learning_rate,
                    m.momentum,
                    m.epochs,
                    m.batch_size
                );
            }
            ClassifierConfig::NaiveBayes => {}
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_eight_class_setup() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg.class_sources.len(), 8);
        assert_eq!(cfg.leads, vec!["@0", "@1"]);
        assert_eq!(cfg.split, 0.7);
        assert_eq!(cfg.classifier, ClassifierConfig::Svm(SvmConfig::default()));
    }

    #[test]
    fn hyperparameters_follow_classifier_regardless_of_order() {
        let cfg = ExperimentConfig::parse(
            "hidden_layers = 20x10\nclassifier = mlp\nepochs = 3\nseed = 9",
        )
        .unwrap();
        let ClassifierConfig::Mlp(m) = cfg.effective_classifier() else {
            panic!()
        };
        assert_eq!(m.hidden_layers, vec![20, 10]);
        assert_eq!(m.epochs, 3);
        assert_eq!(m.seed, 9);
    }

    #[test]
    fn wrong_hyperparameter_is_rejected_with_line() {
        let err = ExperimentConfig::parse("classifier = knn\n\ngamma = 1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn csv_database_needs_manifest() {
        assert!(ExperimentConfig::parse("database = sphc").is_err());
        let cfg =
            ExperimentConfig::parse("database = sphc\nlabels = labels.csv\nleads = V4,V5").unwrap();
        assert_eq!(cfg.classes, BeatClass::SPHC.to_vec());
        assert_eq!(cfg.r_source, RSource::Detected);
    }

    #[test]
    fn describe_round_trips() {
        for text in [
            "classifier = knn\nk = 3\np = 1\nseed = 4\nleads = MLII",
            "database = csv\nlabels = l.csv\nclasses = Normal,APB,LBBB,RBBB\nresample_to = 360\nclassifier = mlp",
            "classes = Normal=100 PVC=208\nar_method = yule-walker\nstandardize = false",
        ] {
            let cfg = ExperimentConfig::parse(text).unwrap();
            assert_eq!(ExperimentConfig::parse(&cfg.describe()).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn unknown_key() {
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("split = 1.5").is_err());
    }
}
