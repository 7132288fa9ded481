mod common;

use common::{synth_record, Morph};
use ecgdx::dataio::{read_wfdb_annotations, read_wfdb_record, BeatAnnotation, LeadSignal};
use ecgdx::preprocess::{median_denoise, FilterConfig};
use ecgdx::qrs::{
    detect_r_peaks, match_annotations, match_indices, DetectionResult, DetectionScore,
    DetectorConfig, Stages,
};
use ecgdx::{BeatClass, Record};
use proptest::prelude::*;

const RATE: u32 = 360;

/// 60 s of unit Gaussian pulses (σ = 10 ms) at 1 Hz, centred at k·360 + 180.
fn pulse_train() -> (Vec<f64>, Vec<usize>) {
    let n = 60 * RATE as usize;
    let sigma = 0.010 * RATE as f64;
    let centers: Vec<usize> = (0..60).map(|k| k * RATE as usize + 180).collect();
    let mut x = vec![0.0; n];
    for &c in &centers {
        let lo = c.saturating_sub(60);
        for (i, v) in x.iter_mut().enumerate().take((c + 60).min(n)).skip(lo) {
            let z = (i as f64 - c as f64) / sigma;
            *v += (-0.5 * z * z).exp();
        }
    }
    (x, centers)
}

fn detect(x: Vec<f64>) -> Vec<usize> {
    detect_r_peaks(
        &LeadSignal::new("t", x).unwrap(),
        RATE,
        &DetectorConfig::default(),
    )
    .unwrap()
    .r_peaks
}

#[test]
fn pulse_train_fully_detected() {
    let (x, centers) = pulse_train();
    let peaks = detect(x);
    assert_eq!(peaks.len(), 60, "{peaks:?}");
    for (p, c) in peaks.iter().zip(&centers) {
        assert!(p.abs_diff(*c) <= 2, "peak {p} vs centre {c}");
    }
}

#[test]
fn detection_is_amplitude_invariant() {
    let (x, _) = pulse_train();
    let base = detect(x.clone());
    for alpha in [0.5, 2.0, 10.0] {
        assert_eq!(
            detect(x.iter().map(|v| v * alpha).collect()),
            base,
            "alpha {alpha}"
        );
    }
}

#[test]
fn zero_signal_has_no_beats() {
    assert!(detect(vec![0.0; 10 * RATE as usize]).is_empty());
}

#[test]
fn short_signal_rejected() {
    let err = detect_r_peaks(
        &LeadSignal::new("t", vec![0.0; 700]).unwrap(),
        RATE,
        &DetectorConfig::default(),
    )
    .unwrap_err();
    assert_eq!(err.kind(), "length");
    let bad = DetectorConfig {
        bandpass_high_hz: 200.0,
        ..DetectorConfig::default()
    };
    assert!(detect_r_peaks(&LeadSignal::new("t", vec![0.0; 7200]).unwrap(), RATE, &bad).is_err());
}

#[test]
fn stages_are_aligned_with_input() {
    let (x, _) = pulse_train();
    let s = Stages::compute(&x, RATE, &DetectorConfig::default());
    for v in [&s.filtered, &s.derivative, &s.squared, &s.integrated] {
        assert_eq!(v.len(), x.len());
    }
    // zero phase: the integrated energy of a pulse peaks close to its centre
    let c = 30 * RATE as usize + 180;
    let peak = (c - 90..c + 90)
        .max_by(|&a, &b| s.integrated[a].total_cmp(&s.integrated[b]))
        .unwrap();
    assert!(peak.abs_diff(c) <= 10, "{peak}");
    let mut csv = Vec::new();
    s.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("index,filtered,derivative,squared,integrated\n"));
    assert_eq!(text.lines().count(), x.len() + 1);
}

#[test]
fn threshold_trace_covers_signal() {
    let (x, _) = pulse_train();
    let cfg = DetectorConfig {
        record_trace: true,
        ..DetectorConfig::default()
    };
    let res = detect_r_peaks(&LeadSignal::new("t", x.clone()).unwrap(), RATE, &cfg).unwrap();
    assert_eq!(res.signal_threshold_trace.unwrap().len(), x.len());
}

#[test]
fn searchback_recovers_a_small_beat() {
    let (mut x, centers) = pulse_train();
    // one beat at 45% amplitude: energy below the threshold, above half of it
    let c = centers[40];
    for v in &mut x[c - 60..c + 60] {
        *v *= 0.45;
    }
    let with = detect(x.clone());
    assert!(
        with.iter().any(|p| p.abs_diff(c) <= 2),
        "search-back missed the small beat"
    );
    let no_sb = DetectorConfig {
        searchback: false,
        ..DetectorConfig::default()
    };
    let without = detect_r_peaks(&LeadSignal::new("t", x).unwrap(), RATE, &no_sb)
        .unwrap()
        .r_peaks;
    assert!(without.len() <= with.len());
}

#[test]
fn synthetic_record_detection() {
    let dir = tempfile::tempdir().unwrap();
    let synth = synth_record("q", Morph::Normal, Some((Morph::Pvc, 4)), 60.0, 9);
    synth.write(dir.path());
    let rec: Record = read_wfdb_record(dir.path().join("q.hea")).unwrap();
    let anns = read_wfdb_annotations(dir.path().join("q.atr"), &rec).unwrap();
    let lead = median_denoise(&rec.leads[0], RATE, &FilterConfig::default()).unwrap();
    let det = detect_r_peaks(&lead, RATE, &DetectorConfig::default()).unwrap();
    let reference: Vec<usize> = anns.beats.iter().map(|b| b.sample_index).collect();
    let score = DetectionScore::compute(&det.r_peaks, &reference, 54);
    assert!(score.sensitivity() >= 0.995, "{score:?}");
    assert!(score.positive_predictivity() >= 0.995, "{score:?}");

    let m = match_annotations(&det, &anns.beats, RATE, 0.15);
    assert_eq!(m.matched.len(), score.true_positives);
    let pvcs = m
        .matched
        .iter()
        .filter(|(_, l)| *l == BeatClass::Pvc)
        .count();
    assert_eq!(
        pvcs,
        synth.beats.iter().filter(|b| b.1 == Morph::Pvc).count()
    );
}

fn ann(sample_index: usize) -> BeatAnnotation {
    BeatAnnotation {
        sample_index,
        label: BeatClass::Normal,
    }
}

fn detections(r_peaks: Vec<usize>) -> DetectionResult<f64> {
    DetectionResult {
        r_peaks,
        signal_threshold_trace: None,
    }
}

#[test]
fn matching_examples() {
    let m = match_annotations(&detections(vec![100]), &[ann(102)], RATE, 0.15);
    assert_eq!(m.matched, vec![(100, BeatClass::Normal)]);

    let m = match_annotations(&detections(vec![100]), &[ann(400)], RATE, 0.15);
    assert!(m.matched.is_empty());
    assert_eq!(m.unmatched_detections, vec![100]);
    assert_eq!(m.unmatched_annotations, vec![ann(400)]);

    // two candidates, one annotation: the nearer wins, as an exhaustive assignment agrees
    let d = vec![90, 104];
    let m = match_annotations(&detections(d.clone()), &[ann(100)], RATE, 0.15);
    let best = d.iter().min_by_key(|x| x.abs_diff(100)).unwrap();
    assert_eq!(m.matched, vec![(*best, BeatClass::Normal)]);
    assert_eq!(m.unmatched_detections, vec![90]);
}

#[test]
fn score_ratios() {
    let s = DetectionScore::compute(&[10, 200, 400], &[12, 405, 900, 1300], 5);
    assert_eq!(
        (s.true_positives, s.false_positives, s.false_negatives),
        (2, 1, 2)
    );
    assert!((s.sensitivity() - 0.5).abs() < 1e-15);
    assert!((s.positive_predictivity() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(DetectionScore::compute(&[], &[], 5).sensitivity(), 0.0);
}

fn sorted_unique(max: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(0..max, 0..40).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matching_is_one_to_one(d in sorted_unique(3000), a in sorted_unique(3000), tol in 0usize..80) {
        let pairs = match_indices(&d, &a, tol);
        let mut ds: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut as_: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        ds.dedup();
        as_.sort_unstable();
        as_.dedup();
        prop_assert_eq!(ds.len(), pairs.len());
        prop_assert_eq!(as_.len(), pairs.len());
        for (di, ai) in pairs {
            prop_assert!(d[di].abs_diff(a[ai]) <= tol);
        }
    }

    #[test]
    fn peaks_respect_refractory(seed in 0u64..500, amp in 0.2f64..3.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (mut x, _) = pulse_train();
        for v in &mut x {
            *v = *v * amp + rng.random_range(-0.05..0.05);
        }
        let cfg = DetectorConfig::default();
        let peaks = detect_r_peaks(&LeadSignal::new("t", x).unwrap(), RATE, &cfg).unwrap().r_peaks;
        let refractory = cfg.refractory_samples(RATE);
        for w in peaks.windows(2) {
            prop_assert!(w[1] > w[0] && w[1] - w[0] >= refractory, "{:?}", w);
        }
    }
}
