//! Record and annotation ingestion.
//!
//! Amplitudes are stored in physical units (mV) after gain and baseline
//! conversion, so features computed on records from different ADCs line up.

mod annotations;
mod catalog;
mod csv_record;
mod wfdb;

use std::fmt;
use std::str::FromStr;

pub use annotations::{
    beats_from_raw, decode_annotations, read_wfdb_annotations, AnnotationSet, IngestReport,
    RawAnnotation,
};
pub use catalog::{ClassSource, LabelManifest};
pub use csv_record::read_csv_record;
pub use wfdb::{decode_format212, parse_header, read_wfdb_record, SignalSpec, WfdbHeader};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// One recording channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadSignal<T> {
    pub lead_name: String,
    pub samples: Vec<T>,
}

impl<T: Scalar> LeadSignal<T> {
    /// Checks the channel is non-empty and every sample is finite.
    pub fn new(lead_name: impl Into<String>, samples: Vec<T>) -> Result<Self> {
        let lead_name = lead_name.into();
        if samples.is_empty() {
            return Err(Error::InsufficientData(format!(
                "lead {lead_name} has no samples"
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InsufficientData(format!(
                "lead {lead_name} has a non-finite sample at index {i}"
            )));
        }
        Ok(Self { lead_name, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn with_samples(&self, samples: Vec<T>) -> Self {
        Self {
            lead_name: self.lead_name.clone(),
            samples,
        }
    }
}

/// Multi-lead sampled recording.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord<T> {
    pub record_id: String,
    pub sampling_rate_hz: u32,
    pub leads: Vec<LeadSignal<T>>,
    pub duration_samples: usize,
}

impl<T: Scalar> EcgRecord<T> {
    pub fn new(
        record_id: impl Into<String>,
        sampling_rate_hz: u32,
        leads: Vec<LeadSignal<T>>,
    ) -> Result<Self> {
        let record_id = record_id.into();
        if sampling_rate_hz == 0 {
            return Err(Error::Config(format!(
                "record {record_id}: sampling rate must be positive"
            )));
        }
        let Some(first) = leads.first() else {
            return Err(Error::InsufficientData(format!(
                "record {record_id} has no leads"
            )));
        };
        let duration_samples = first.len();
        if let Some(bad) = leads.iter().find(|l| l.len() != duration_samples) {
            return Err(Error::InsufficientData(format!(
                "record {record_id}: lead {} has {} samples, expected {duration_samples}",
                bad.lead_name,
                bad.len()
            )));
        }
        Ok(Self {
            record_id,
            sampling_rate_hz,
            leads,
            duration_samples,
        })
    }

    pub fn lead_names(&self) -> Vec<String> {
        self.leads.iter().map(|l| l.lead_name.clone()).collect()
    }

    pub fn lead(&self, name: &str) -> Option<&LeadSignal<T>> {
        self.leads.iter().find(|l| l.lead_name == name)
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_samples as f64 / self.sampling_rate_hz as f64
    }

    /// Applies `f` to every lead, keeping the record metadata.
    pub fn map_leads(
        &self,
        mut f: impl FnMut(&LeadSignal<T>) -> Result<LeadSignal<T>>,
    ) -> Result<Self> {
        let leads = self.leads.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        let rate = self.sampling_rate_hz;
        Self::new(self.record_id.clone(), rate, leads)
    }
}

/// Lead reference: a name such as `MLII`, or `@i` for the i-th channel.
///
/// Positional references exist because MIT-BIH records do not agree on the
/// second channel (V1 in most, V5/V2/V4 in a few).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeadSelector {
    Name(String),
    Index(usize),
}

impl LeadSelector {
    pub fn parse(s: &str) -> Self {
        match s.strip_prefix('@').and_then(|i| i.parse().ok()) {
            Some(i) => LeadSelector::Index(i),
            None => LeadSelector::Name(s.to_string()),
        }
    }

    fn resolve(&self, names: &[String]) -> Option<usize> {
        match self {
            LeadSelector::Name(n) => names.iter().position(|x| x == n),
            LeadSelector::Index(i) => (*i < names.len()).then_some(*i),
        }
    }
}

impl fmt::Display for LeadSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeadSelector::Name(n) => f.write_str(n),
            LeadSelector::Index(i) => write!(f, "@{i}"),
        }
    }
}

/// Restricts `record` to the requested leads, in the requested order.
pub fn select_leads<T: Scalar, S: AsRef<str>>(
    record: &EcgRecord<T>,
    names: &[S],
) -> Result<EcgRecord<T>> {
    if names.is_empty() {
        return Err(Error::EmptySelection);
    }
    let available = record.lead_names();
    let leads = names
        .iter()
        .map(|n| {
            let sel = LeadSelector::parse(n.as_ref());
            sel.resolve(&available)
                .map(|i| record.leads[i].clone())
                .ok_or_else(|| Error::LeadNotFound {
                    requested: sel.to_string(),
                    available: available.clone(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    EcgRecord::new(record.record_id.clone(), record.sampling_rate_hz, leads)
}

/// Expert label for a beat (MIT-BIH) or a record rhythm (SPHC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BeatClass {
    Normal,
    Lbbb,
    Rbbb,
    Pace,
    Pvc,
    /// Atrial premature contraction; `APB` parses to this class too.
    Apc,
    Fvnb,
    Fpnb,
    Sb,
    Sr,
    Afib,
    St,
}

impl BeatClass {
    pub const MITBIH: [BeatClass; 8] = [
        BeatClass::Normal,
        BeatClass::Lbbb,
        BeatClass::Rbbb,
        BeatClass::Pace,
        BeatClass::Pvc,
        BeatClass::Apc,
        BeatClass::Fvnb,
        BeatClass::Fpnb,
    ];
    pub const SPHC: [BeatClass; 4] = [BeatClass::Sb, BeatClass::Sr, BeatClass::Afib, BeatClass::St];
    pub const CROSS_DB: [BeatClass; 4] = [
        BeatClass::Normal,
        BeatClass::Lbbb,
        BeatClass::Rbbb,
        BeatClass::Apc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BeatClass::Normal => "Normal",
            BeatClass::Lbbb => "LBBB",
            BeatClass::Rbbb => "RBBB",
            BeatClass::Pace => "PACE",
            BeatClass::Pvc => "PVC",
            BeatClass::Apc => "APC",
            BeatClass::Fvnb => "FVNB",
            BeatClass::Fpnb => "FPNB",
            BeatClass::Sb => "SB",
            BeatClass::Sr => "SR",
            BeatClass::Afib => "AFIB",
            BeatClass::St => "ST",
        }
    }

    /// MIT annotation mnemonic to class, for the eight trained beat types.
    pub fn from_mit_code(code: char) -> Option<Self> {
        Some(match code {
            'N' => BeatClass::Normal,
            'L' => BeatClass::Lbbb,
            'R' => BeatClass::Rbbb,
            '/' => BeatClass::Pace,
            'V' => BeatClass::Pvc,
            'A' => BeatClass::Apc,
            'F' => BeatClass::Fvnb,
            'f' => BeatClass::Fpnb,
            _ => return None,
        })
    }
}

impl fmt::Display for BeatClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BeatClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Ok(match upper.as_str() {
            "NORMAL" => BeatClass::Normal,
            "LBBB" => BeatClass::Lbbb,
            "RBBB" => BeatClass::Rbbb,
            "PACE" | "PACED" => BeatClass::Pace,
            "PVC" => BeatClass::Pvc,
            "APC" | "APB" | "PAC" => BeatClass::Apc,
            "FVNB" => BeatClass::Fvnb,
            "FPNB" => BeatClass::Fpnb,
            "SB" => BeatClass::Sb,
            "SR" => BeatClass::Sr,
            "AFIB" => BeatClass::Afib,
            "ST" => BeatClass::St,
            _ => return Err(Error::UnknownLabel(s.to_string())),
        })
    }
}

/// Expert label attached to a record sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeatAnnotation {
    pub sample_index: usize,
    pub label: BeatClass,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(names: &[&str]) -> EcgRecord<f64> {
        let leads = names
            .iter()
            .enumerate()
            .map(|(i, n)| LeadSignal::new(*n, vec![i as f64; 10]).unwrap())
            .collect();
        EcgRecord::new("r", 500, leads).unwrap()
    }

    #[test]
    fn select_two_of_twelve() {
        let names = [
            "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6",
        ];
        let r = record(&names);
        let s = select_leads(&r, &["V4", "V5"]).unwrap();
        assert_eq!(s.lead_names(), vec!["V4", "V5"]);
        assert_eq!(s.leads[0].samples[0], 9.0);
    }

    #[test]
    fn selection_preserves_requested_order() {
        let r = record(&["V2", "V5"]);
        let s = select_leads(&r, &["V5", "V2"]).unwrap();
        assert_eq!(s.lead_names(), vec!["V5", "V2"]);
    }

    #[test]
    fn positional_selection() {
        let r = record(&["MLII", "V1"]);
        let s = select_leads(&r, &["@1"]).unwrap();
        assert_eq!(s.lead_names(), vec!["V1"]);
        assert!(select_leads(&r, &["@2"]).is_err());
    }

    #[test]
    fn empty_and_missing_selection() {
        let r = record(&["MLII", "V1"]);
        assert!(matches!(
            select_leads::<f64, &str>(&r, &[]),
            Err(Error::EmptySelection)
        ));
        match select_leads(&r, &["V4"]) {
            Err(Error::LeadNotFound {
                requested,
                available,
            }) => {
                assert_eq!(requested, "V4");
                assert_eq!(available, vec!["MLII", "V1"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn selection_is_idempotent() {
        let r = record(&["I", "II", "V2", "V5"]);
        let once = select_leads(&r, &["V5", "II"]).unwrap();
        let twice = select_leads(&once, &["V5", "II"]).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn record_rejects_ragged_and_non_finite() {
        let a = LeadSignal::new("a", vec![0.0; 4]).unwrap();
        let b = LeadSignal::new("b", vec![0.0; 5]).unwrap();
        assert!(EcgRecord::new("x", 360, vec![a, b]).is_err());
        assert!(LeadSignal::new("c", vec![0.0, f64::NAN]).is_err());
        assert!(LeadSignal::<f64>::new("d", vec![]).is_err());
    }

    #[test]
    fn class_names_round_trip() {
        for c in BeatClass::MITBIH.iter().chain(BeatClass::SPHC.iter()) {
            assert_eq!(c.name().parse::<BeatClass>().unwrap(), *c);
        }
        assert_eq!("APB".parse::<BeatClass>().unwrap(), BeatClass::Apc);
        assert!("XYZ".parse::<BeatClass>().is_err());
    }
}
