use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use super::BeatClass;
use crate::error::{Error, Result};

/// Records contributing beats of one class, e.g. `FPNB=104+217`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSource {
    pub class: BeatClass,
    pub records: Vec<String>,
}

impl ClassSource {
    /// Parses a list of `CLASS=rec[+rec…]` items separated by whitespace, commas or semicolons.
    pub fn parse_list(s: &str) -> Result<Vec<ClassSource>> {
        s.split(|c: char| c.is_whitespace() || c == ',' || c == ';')
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }

    /// Fixed MIT-BIH class sources for the eight-class experiment.
    pub fn mitbih_default() -> Vec<ClassSource> {
        Self::parse_list(
            "Normal=100 LBBB=109 RBBB=118 PACE=107 PVC=208 APC=232 FVNB=213 FPNB=104+217",
        )
        .expect("static source list parses")
    }
}

impl FromStr for ClassSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (class, records) = s.split_once('=').ok_or_else(|| {
            Error::Config(format!("class source {s:?} must look like CLASS=rec+rec"))
        })?;
        let records: Vec<String> = records
            .split('+')
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .map(str::to_string)
            .collect();
        if records.is_empty() {
            return Err(Error::Config(format!(
                "class source {s:?} lists no records"
            )));
        }
        Ok(ClassSource {
            class: class.parse()?,
            records,
        })
    }
}

/// Record-level labels, read from a `record,label` CSV with a header row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelManifest {
    pub entries: Vec<(String, String)>,
}

impl LabelManifest {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut entries = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| Error::parse(&label, i + 2, e.to_string()))?;
            if row.len() < 2 {
                return Err(Error::parse(&label, i + 2, "expected record,label"));
            }
            entries.push((row[0].to_string(), row[1].to_string()));
        }
        Ok(Self { entries })
    }

    /// Entries whose label belongs to `classes`, and the number rejected.
    pub fn restricted_to(&self, classes: &[BeatClass]) -> (Vec<(String, BeatClass)>, usize) {
        let mut kept = Vec::new();
        let mut rejected = 0;
        for (record, label) in &self.entries {
            match label.parse::<BeatClass>() {
                Ok(c) if classes.contains(&c) => kept.push((record.clone(), c)),
                _ => rejected += 1,
            }
        }
        (kept, rejected)
    }
}
