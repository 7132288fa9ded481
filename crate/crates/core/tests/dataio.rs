mod common;

use std::fs;

use common::{code, encode_annotations, pack_212, synth_record, Morph};
use ecgdx::dataio::{
    decode_annotations, decode_format212, read_csv_record, read_wfdb_annotations, read_wfdb_record,
    select_leads,
};
use ecgdx::{BeatClass, Error, Record};
use proptest::prelude::*;

#[test]
fn format212_exhaustive_round_trip() {
    let all: Vec<i16> = (-2048..=2047).collect();
    assert_eq!(decode_format212(&pack_212(&all), all.len()), all);
    // odd count exercises the two-byte tail
    assert_eq!(
        decode_format212(&pack_212(&all[..4095]), 4095),
        &all[..4095]
    );
}

proptest! {
    #[test]
    fn format212_round_trip(samples in prop::collection::vec(-2048i16..=2047, 0..400)) {
        prop_assert_eq!(decode_format212(&pack_212(&samples), samples.len()), samples);
    }

    #[test]
    fn annotation_stream_round_trip(gaps in prop::collection::vec((1usize..5000, 0usize..8), 1..60)) {
        let codes = [code::NORMAL, code::LBBB, code::RBBB, code::PVC, code::APC, code::PACE, code::FUSION, code::PFUS];
        let mut t = 0;
        let anns: Vec<(usize, u8)> = gaps.iter().map(|&(g, c)| { t += g; (t, codes[c]) }).collect();
        let decoded = decode_annotations(&encode_annotations(&anns));
        let back: Vec<(usize, u8)> = decoded.iter().map(|a| (a.sample as usize, a.code)).collect();
        prop_assert_eq!(back, anns);
    }
}

#[test]
fn record_100_first_samples() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data");
    let rec: Record = read_wfdb_record(format!("{dir}/100.hea")).unwrap();
    assert_eq!(rec.record_id, "100");
    assert_eq!(rec.sampling_rate_hz, 360);
    assert_eq!(rec.lead_names(), vec!["MLII", "V5"]);
    let mut expected = vec![[-0.145, -0.065]; 8];
    expected.push([-0.12, -0.08]);
    expected.push([-0.135, -0.08]);
    for (i, e) in expected.iter().enumerate() {
        assert!((rec.leads[0].samples[i] - e[0]).abs() < 1e-12, "MLII[{i}]");
        assert!((rec.leads[1].samples[i] - e[1]).abs() < 1e-12, "V5[{i}]");
    }
}

/// A second decoder written straight from the format description: only counts
/// beat-labelled annotations and their final time.
fn count_beats(bytes: &[u8]) -> (usize, u64) {
    let words: Vec<u16> = bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    let (mut i, mut time, mut beats) = (0, 0u64, 0);
    while i < words.len() && words[i] != 0 {
        let (a, len) = (words[i] >> 10, (words[i] & 1023) as usize);
        i += 1;
        match a {
            59 => {
                time += (u64::from(words[i]) << 16) | u64::from(words[i + 1]);
                i += 2;
            }
            60..=62 => {}
            63 => i += len.div_ceil(2),
            _ => {
                time += len as u64;
                if [1, 2, 3, 5, 6, 8, 12, 38].contains(&a) {
                    beats += 1;
                }
            }
        }
    }
    (beats, time)
}

#[test]
fn synthetic_record_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let synth = synth_record("s1", Morph::Normal, Some((Morph::Pvc, 5)), 30.0, 1);
    synth.write(dir.path());
    let rec: Record = read_wfdb_record(dir.path().join("s1.hea")).unwrap();
    assert_eq!(rec.duration_samples, 30 * 360);
    for (lead, raw) in rec.leads.iter().zip(&synth.leads) {
        for (v, &r) in lead.samples.iter().zip(raw) {
            assert!((v - (r as f64 - 1024.0) / 200.0).abs() < 1e-12);
        }
    }
    let anns = read_wfdb_annotations(dir.path().join("s1.atr"), &rec).unwrap();
    assert_eq!(anns.beats.len(), synth.beats.len());
    assert_eq!(anns.report.non_beat, 1);
    let pvcs = synth.beats.iter().filter(|b| b.1 == Morph::Pvc).count();
    assert_eq!(anns.of_class(BeatClass::Pvc).count(), pvcs);

    let bytes = fs::read(dir.path().join("s1.atr")).unwrap();
    let (n, last) = count_beats(&bytes);
    assert_eq!(n, anns.beats.len());
    assert_eq!(last as usize, anns.beats.last().unwrap().sample_index);
}

#[test]
fn truncated_signal_file() {
    let dir = tempfile::tempdir().unwrap();
    synth_record("t", Morph::Normal, None, 5.0, 2).write(dir.path());
    let dat = dir.path().join("t.dat");
    let bytes = fs::read(&dat).unwrap();
    fs::write(&dat, &bytes[..bytes.len() - 10]).unwrap();
    let err = read_wfdb_record::<f64>(dir.path().join("t.hea")).unwrap_err();
    assert!(matches!(err, Error::Truncated { .. }), "{err}");
}

#[test]
fn annotation_beyond_record_end() {
    let dir = tempfile::tempdir().unwrap();
    synth_record("t", Morph::Normal, None, 5.0, 2).write(dir.path());
    fs::write(
        dir.path().join("t.atr"),
        encode_annotations(&[(100, code::NORMAL), (5000, code::NORMAL)]),
    )
    .unwrap();
    let rec: Record = read_wfdb_record(dir.path().join("t.hea")).unwrap();
    let err = read_wfdb_annotations(dir.path().join("t.atr"), &rec).unwrap_err();
    assert!(matches!(
        err,
        Error::AnnotationOutOfRange {
            index: 5000,
            length: 1800
        }
    ));
}

#[test]
fn unsupported_format_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("x.hea"),
        "x 1 360 10\nx.dat 16 200 11 0 0 0 0 MLII\n",
    )
    .unwrap();
    fs::write(dir.path().join("x.dat"), [0u8; 20]).unwrap();
    let err = read_wfdb_record::<f64>(dir.path().join("x.hea")).unwrap_err();
    assert_eq!(err.kind(), "unsupported-format");
}

#[test]
fn csv_record_and_lead_selection() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r1.csv");
    let mut text = String::from("I,II,V4,V5\n");
    for i in 0..50 {
        text.push_str(&format!("{},{},{},{}\n", i, 2 * i, 3 * i, 4 * i));
    }
    fs::write(&path, text).unwrap();
    let rec: Record = read_csv_record(&path, 500, &[], true).unwrap();
    assert_eq!(rec.record_id, "r1");
    let sel = select_leads(&rec, &["V5", "@2"]).unwrap();
    assert_eq!(sel.lead_names(), vec!["V5", "V4"]);
    assert_eq!(sel.leads[0].samples[10], 40.0);
    let err = select_leads(&rec, &["V2"]).unwrap_err();
    assert!(err.to_string().contains("V2") && err.to_string().contains("V5"));
}
