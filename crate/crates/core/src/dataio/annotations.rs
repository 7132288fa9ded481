//! MIT annotation (`.atr`) stream decoding.
//!
//! The stream is a sequence of little-endian 16-bit words. The top 6 bits are
//! the annotation code, the low 10 bits either a time increment or, for the
//! pseudo-codes below, a payload length.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{BeatAnnotation, BeatClass, EcgRecord};
use crate::error::{Error, Result};

const SKIP: u8 = 59;
const NUM: u8 = 60;
const SUB: u8 = 61;
const CHN: u8 = 62;
const AUX: u8 = 63;

/// Mnemonics for codes 0..=41.
const MNEMONICS: [char; 42] = [
    ' ', 'N', 'L', 'R', 'a', 'V', 'F', 'J', 'A', 'S', 'E', 'j', '/', 'Q', '~', '?', '|', '?', 's',
    'T', '*', 'D', '"', '=', 'p', 'B', '^', 't', '+', 'u', '?', '!', '[', ']', 'e', 'n', '@', 'x',
    'f', '(', ')', 'r',
];

fn is_beat_code(code: u8) -> bool {
    matches!(code, 1..=13 | 25 | 34 | 35 | 38 | 41)
}

/// One decoded annotation before class mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawAnnotation {
    pub sample: i64,
    pub code: u8,
    pub aux: Option<Vec<u8>>,
}

impl RawAnnotation {
    pub fn mnemonic(&self) -> char {
        MNEMONICS.get(self.code as usize).copied().unwrap_or('?')
    }

    pub fn is_beat(&self) -> bool {
        is_beat_code(self.code)
    }
}

/// Walks an annotation byte stream. Stops at the end-of-file word or the end of the buffer.
pub fn decode_annotations(bytes: &[u8]) -> Vec<RawAnnotation> {
    let mut out: Vec<RawAnnotation> = Vec::new();
    let mut time: i64 = 0;
    let mut pos = 0;
    let word = |p: usize| -> Option<u16> {
        Some(u16::from_le_bytes([*bytes.get(p)?, *bytes.get(p + 1)?]))
    };

    while let Some(w) = word(pos) {
        pos += 2;
        if w == 0 {
            break;
        }
        let code = (w >> 10) as u8;
        let low = (w & 0x03FF) as usize;
        match code {
            SKIP => {
                // 32-bit interval stored as high word then low word
                let (Some(hi), Some(lo)) = (word(pos), word(pos + 2)) else {
                    break;
                };
                pos += 4;
                time += i64::from((u32::from(hi) << 16 | u32::from(lo)) as i32);
            }
            NUM | SUB | CHN => {}
            AUX => {
                let end = (pos + low).min(bytes.len());
                if let Some(last) = out.last_mut() {
                    last.aux = Some(bytes[pos..end].to_vec());
                }
                pos += low + (low & 1);
            }
            _ => {
                time += low as i64;
                out.push(RawAnnotation {
                    sample: time,
                    code,
                    aux: None,
                });
            }
        }
    }
    out
}

/// What was dropped while converting raw annotations into labelled beats.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// Beat annotations whose code is outside the eight trained classes, by mnemonic.
    pub skipped_beats: BTreeMap<char, usize>,
    /// Rhythm, noise and other non-beat annotations.
    pub non_beat: usize,
    /// Beat annotations sharing a sample index with an earlier one.
    pub duplicates: usize,
}

impl IngestReport {
    pub fn skipped_total(&self) -> usize {
        self.skipped_beats.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    /// Strictly increasing in `sample_index`.
    pub beats: Vec<BeatAnnotation>,
    pub report: IngestReport,
}

impl AnnotationSet {
    pub fn of_class(&self, class: BeatClass) -> impl Iterator<Item = &BeatAnnotation> + '_ {
        self.beats.iter().filter(move |b| b.label == class)
    }
}

/// Maps raw annotations to beat labels for a record of `length` samples.
pub fn beats_from_raw(raw: &[RawAnnotation], length: usize) -> Result<AnnotationSet> {
    let mut report = IngestReport::default();
    let mut beats: Vec<BeatAnnotation> = Vec::new();
    for a in raw {
        if !a.is_beat() {
            report.non_beat += 1;
            continue;
        }
        if a.sample < 0 || a.sample as u64 >= length as u64 {
            return Err(Error::AnnotationOutOfRange {
                index: a.sample.max(0) as usize,
                length,
            });
        }
        match BeatClass::from_mit_code(a.mnemonic()) {
            Some(label) => beats.push(BeatAnnotation {
                sample_index: a.sample as usize,
                label,
            }),
            None => *report.skipped_beats.entry(a.mnemonic()).or_default() += 1,
        }
    }
    beats.sort_by_key(|b| b.sample_index);
    let before = beats.len();
    beats.dedup_by_key(|b| b.sample_index);
    report.duplicates = before - beats.len();
    Ok(AnnotationSet { beats, report })
}

/// Reads beat annotations for `record`, keeping the eight trained beat classes.
pub fn read_wfdb_annotations<T>(
    annotation_path: impl AsRef<Path>,
    record: &EcgRecord<T>,
) -> Result<AnnotationSet> {
    let path = annotation_path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    beats_from_raw(&decode_annotations(&bytes), record.duration_samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(code: u8, low: u16) -> [u8; 2] {
        ((u16::from(code) << 10) | low).to_le_bytes()
    }

    fn stream(words: &[[u8; 2]]) -> Vec<u8> {
        let mut v: Vec<u8> = words.iter().flatten().copied().collect();
        v.extend_from_slice(&[0, 0]);
        v
    }

    #[test]
    fn single_normal_beat() {
        // 1000 does not fit in 10 bits unless < 1024; it does.
        let bytes = stream(&[w(1, 1000)]);
        let set = beats_from_raw(&decode_annotations(&bytes), 2000).unwrap();
        assert_eq!(
            set.beats,
            vec![BeatAnnotation {
                sample_index: 1000,
                label: BeatClass::Normal
            }]
        );
    }

    #[test]
    fn skip_word_advances_time() {
        // SKIP of 5000, then N 10 samples later
        let mut bytes = w(SKIP, 0).to_vec();
        bytes.extend_from_slice(&0u16.to_le_bytes());
        bytes.extend_from_slice(&5000u16.to_le_bytes());
        bytes.extend_from_slice(&w(1, 10));
        bytes.extend_from_slice(&[0, 0]);
        let raw = decode_annotations(&bytes);
        assert_eq!(raw.len(), 1);
        assert_eq!(raw[0].sample, 5010);
    }

    #[test]
    fn rhythm_change_filtered_and_aux_attached() {
        // '+' rhythm annotation with aux "(N" followed by a PVC
        let mut bytes = w(28, 5).to_vec();
        bytes.extend_from_slice(&w(AUX, 3));
        bytes.extend_from_slice(b"(N\0\0"); // 3 bytes + pad
        bytes.extend_from_slice(&w(5, 20));
        bytes.extend_from_slice(&[0, 0]);
        let raw = decode_annotations(&bytes);
        assert_eq!(raw.len(), 2);
        assert_eq!(raw[0].aux.as_deref(), Some(&b"(N\0"[..]));
        let set = beats_from_raw(&raw, 100).unwrap();
        assert_eq!(set.beats.len(), 1);
        assert_eq!(set.beats[0].label, BeatClass::Pvc);
        assert_eq!(set.beats[0].sample_index, 25);
        assert_eq!(set.report.non_beat, 1);
    }

    #[test]
    fn unknown_beat_codes_reported() {
        let bytes = stream(&[w(1, 10), w(4, 10), w(13, 10), w(2, 10)]);
        let set = beats_from_raw(&decode_annotations(&bytes), 100).unwrap();
        assert_eq!(set.beats.len(), 2);
        assert_eq!(set.report.skipped_beats.get(&'a'), Some(&1));
        assert_eq!(set.report.skipped_beats.get(&'Q'), Some(&1));
        assert_eq!(set.report.skipped_total(), 2);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let bytes = stream(&[w(1, 500)]);
        assert!(matches!(
            beats_from_raw(&decode_annotations(&bytes), 400),
            Err(Error::AnnotationOutOfRange {
                index: 500,
                length: 400
            })
        ));
    }

    #[test]
    fn num_sub_chn_do_not_move_time() {
        let bytes = stream(&[w(1, 3), w(NUM, 7), w(SUB, 1), w(CHN, 1), w(1, 4)]);
        let raw = decode_annotations(&bytes);
        assert_eq!(raw.iter().map(|a| a.sample).collect::<Vec<_>>(), vec![3, 7]);
    }
}
