//! Pan-Tompkins R-peak detection.
//!
//! The detector works offline on a whole lead. The band-pass runs forward and
//! backward, and the derivative and integration windows are centred, so the
//! stage outputs line up in time with the input. Each detection is finally
//! moved to the largest absolute sample of the input within ±40 ms.

use std::io::Write;

use crate::dataio::{BeatAnnotation, BeatClass, LeadSignal};
use crate::error::{Error, Result};
use crate::num::{cmp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub bandpass_low_hz: f64,
    pub bandpass_high_hz: f64,
    pub integration_window_s: f64,
    pub refractory_s: f64,
    pub searchback: bool,
    /// Half-width of the final peak refinement window.
    pub refine_window_s: f64,
    /// Candidates closer than this to the previous beat get the T-wave slope test.
    pub t_wave_window_s: f64,
    /// Keep the integrated-signal threshold for every sample.
    pub record_trace: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            bandpass_low_hz: 5.0,
            bandpass_high_hz: 15.0,
            integration_window_s: 0.150,
            refractory_s: 0.200,
            searchback: true,
            refine_window_s: 0.040,
            t_wave_window_s: 0.360,
            record_trace: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self, rate_hz: u32) -> Result<()> {
        let nyquist = rate_hz as f64 / 2.0;
        if !(self.bandpass_low_hz > 0.0
            && self.bandpass_low_hz < self.bandpass_high_hz
            && self.bandpass_high_hz < nyquist)
        {
            return Err(Error::Config(format!(
                "band-pass must satisfy 0 < {} < {} < {nyquist}",
                self.bandpass_low_hz, self.bandpass_high_hz
            )));
        }
        if !(self.refractory_s > 0.0) || !(self.integration_window_s > 0.0) {
            return Err(Error::Config(
                "refractory and integration windows must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn refractory_samples(&self, rate_hz: u32) -> usize {
        seconds_to_samples(self.refractory_s, rate_hz)
    }
}

fn seconds_to_samples(s: f64, rate_hz: u32) -> usize {
    (s * rate_hz as f64).round() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult<T> {
    /// Strictly increasing, consecutive gaps at least the refractory period.
    pub r_peaks: Vec<usize>,
    pub signal_threshold_trace: Option<Vec<T>>,
}

/// Intermediate signals of the detector, all aligned with the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Stages<T> {
    pub filtered: Vec<T>,
    pub derivative: Vec<T>,
    pub squared: Vec<T>,
    pub integrated: Vec<T>,
}

impl<T: Scalar> Stages<T> {
    pub fn compute(x: &[T], rate_hz: u32, cfg: &DetectorConfig) -> Self {
        let filtered = bandpass(x, rate_hz, cfg.bandpass_low_hz, cfg.bandpass_high_hz);
        let derivative = five_point_derivative(&filtered, rate_hz);
        let squared: Vec<T> = derivative.iter().map(|&d| d * d).collect();
        let width = seconds_to_samples(cfg.integration_window_s, rate_hz).max(1) | 1;
        let integrated = moving_average(&squared, width);
        Self {
            filtered,
            derivative,
            squared,
            integrated,
        }
    }

    /// CSV with columns `index,filtered,derivative,squared,integrated`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,filtered,derivative,squared,integrated")?;
        for i in 0..self.filtered.len() {
            writeln!(
                out,
                "{i},{},{},{},{}",
                self.filtered[i], self.derivative[i], self.squared[i], self.integrated[i]
            )?;
        }
        Ok(())
    }
}

/// Second-order section, transposed direct form II.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn butterworth(kind: Pass, cutoff_hz: f64, rate_hz: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff_hz / rate_hz;
        let (s, c) = w0.sin_cos();
        let alpha = s / std::f64::consts::SQRT_2; // Q = 1/sqrt(2)
        let a0 = 1.0 + alpha;
        let b = match kind {
            Pass::Low => [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            Pass::High => [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
        };
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn run<T: Scalar>(&self, x: &mut [T]) {
        let (b0, b1, b2) = (T::lit(self.b[0]), T::lit(self.b[1]), T::lit(self.b[2]));
        let (a1, a2) = (T::lit(self.a[0]), T::lit(self.a[1]));
        let (mut z1, mut z2) = (T::zero(), T::zero());
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Pass {
    Low,
    High,
}

/// Zero-phase Butterworth band-pass (second-order high-pass then low-pass, run both ways).
fn bandpass<T: Scalar>(x: &[T], rate_hz: u32, low_hz: f64, high_hz: f64) -> Vec<T> {
    if x.is_empty() {
        return Vec::new();
    }
    let fs = rate_hz as f64;
    let sections = [
        Biquad::butterworth(Pass::High, low_hz, fs),
        Biquad::butterworth(Pass::Low, high_hz, fs),
    ];
    let pad = (3.0 * fs / low_hz).round() as usize;
    let mut buf: Vec<T> = Vec::with_capacity(x.len() + 2 * pad);
    buf.extend(std::iter::repeat_n(x[0], pad));
    buf.extend_from_slice(x);
    buf.extend(std::iter::repeat_n(x[x.len() - 1], pad));
    for s in &sections {
        s.run(&mut buf);
    }
    buf.reverse();
    for s in &sections {
        s.run(&mut buf);
    }
    buf.reverse();
    buf[pad..pad + x.len()].to_vec()
}

/// Centred five-point derivative (2x[n+1] + x[n+2] − x[n−2] − 2x[n−1]) · fs/8.
fn five_point_derivative<T: Scalar>(x: &[T], rate_hz: u32) -> Vec<T> {
    let n = x.len() as isize;
    let at = |i: isize| x[i.clamp(0, n - 1) as usize];
    let scale = T::lit(rate_hz as f64 / 8.0);
    let two = T::lit(2.0);
    (0..n)
        .map(|i| (two * at(i + 1) + at(i + 2) - at(i - 2) - two * at(i - 1)) * scale)
        .collect()
}

/// Centred moving average over an odd `width`, replicated edges.
fn moving_average<T: Scalar>(x: &[T], width: usize) -> Vec<T> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let half = width / 2;
    let mut prefix: Vec<f64> = Vec::with_capacity(n + 2 * half + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for j in 0..n + 2 * half {
        acc += x[j.saturating_sub(half).min(n - 1)].to_f64_lossy();
        prefix.push(acc);
    }
    let inv = 1.0 / width as f64;
    (0..n)
        .map(|i| T::lit(((prefix[i + width] - prefix[i]) * inv).max(0.0)))
        .collect()
}

/// Local maxima of `y`, thinned so no two are closer than `distance` (the taller wins).
fn peaks_with_min_distance<T: Scalar>(y: &[T], distance: usize) -> Vec<usize> {
    let n = y.len();
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            // walk across plateaus; the first sample of the plateau represents it
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                candidates.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let mut by_height = candidates.clone();
    by_height.sort_by(|&a, &b| cmp(&y[b], &y[a]).then(a.cmp(&b)));
    let mut keep = vec![false; n];
    let mut blocked = vec![false; n];
    for p in by_height {
        if blocked[p] {
            continue;
        }
        keep[p] = true;
        let lo = p.saturating_sub(distance - 1);
        let hi = (p + distance).min(n);
        blocked[lo..hi].iter_mut().for_each(|b| *b = true);
    }
    candidates.into_iter().filter(|&p| keep[p]).collect()
}

fn window_max_abs<T: Scalar>(x: &[T], center: usize, half: usize) -> (usize, T) {
    let lo = center.saturating_sub(half);
    let hi = (center + half + 1).min(x.len());
    let mut best = (lo, x[lo].abs());
    for (j, v) in x.iter().enumerate().take(hi).skip(lo + 1) {
        if v.abs() > best.1 {
            best = (j, v.abs());
        }
    }
    best
}

/// Running peak levels and thresholds for one of the two monitored signals.
#[derive(Debug, Clone, Copy)]
struct Levels<T> {
    signal: T,
    noise: T,
}

impl<T: Scalar> Levels<T> {
    fn threshold(&self) -> T {
        self.noise + T::lit(0.25) * (self.signal - self.noise)
    }

    fn on_signal(&mut self, peak: T, weight: f64) {
        self.signal = T::lit(weight) * peak + T::lit(1.0 - weight) * self.signal;
    }

    fn on_noise(&mut self, peak: T) {
        self.noise = T::lit(0.125) * peak + T::lit(0.875) * self.noise;
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate<T> {
    index: usize,
    integrated: T,
    filtered: T,
    slope: T,
}

/// Recent RR intervals; the "regular" average only admits intervals near the current one.
#[derive(Debug, Default)]
struct RrHistory {
    recent: Vec<f64>,
    regular: Vec<f64>,
}

impl RrHistory {
    fn push(&mut self, rr: f64) {
        push_bounded(&mut self.recent, rr);
        match self.regular_average() {
            Some(avg) if !(0.92 * avg..=1.16 * avg).contains(&rr) => {}
            _ => push_bounded(&mut self.regular, rr),
        }
    }

    fn regular_average(&self) -> Option<f64> {
        let v = if self.regular.is_empty() {
            &self.recent
        } else {
            &self.regular
        };
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn push_bounded(v: &mut Vec<f64>, x: f64) {
    if v.len() == 8 {
        v.remove(0);
    }
    v.push(x);
}

/// Detects R peaks on a (denoised) lead.
pub fn detect_r_peaks<T: Scalar>(
    signal: &LeadSignal<T>,
    rate_hz: u32,
    cfg: &DetectorConfig,
) -> Result<DetectionResult<T>> {
    cfg.validate(rate_hz)?;
    let x = &signal.samples;
    let min_len = 2 * rate_hz as usize;
    if x.len() < min_len {
        return Err(Error::SignalTooShort {
            actual: x.len(),
            required: min_len,
        });
    }
    let stages = Stages::compute(x, rate_hz, cfg);
    let refractory = cfg.refractory_samples(rate_hz).max(1);
    let t_window = seconds_to_samples(cfg.t_wave_window_s, rate_hz);
    let half_integration = seconds_to_samples(cfg.integration_window_s, rate_hz) / 2;

    let mwi = &stages.integrated;
    let learn = min_len.min(x.len());
    let max_of = |v: &[T]| v.iter().fold(T::zero(), |m, a| m.max(a.abs()));
    let mean_of = |v: &[T]| v.iter().map(|a| a.abs()).sum::<T>() / T::from_usize_lossy(v.len());
    let mut lev_i = Levels {
        signal: T::lit(0.25) * max_of(&mwi[..learn]),
        noise: T::lit(0.5) * mean_of(&mwi[..learn]),
    };
    let mut lev_f = Levels {
        signal: T::lit(0.25) * max_of(&stages.filtered[..learn]),
        noise: T::lit(0.5) * mean_of(&stages.filtered[..learn]),
    };

    let candidates: Vec<Candidate<T>> = peaks_with_min_distance(mwi, refractory)
        .into_iter()
        .map(|p| Candidate {
            index: p,
            integrated: mwi[p],
            filtered: window_max_abs(&stages.filtered, p, half_integration).1,
            slope: window_max_abs(&stages.derivative, p, half_integration).1,
        })
        .collect();

    let mut trace = cfg.record_trace.then(|| Vec::with_capacity(x.len()));
    let mut qrs: Vec<usize> = Vec::new();
    let mut last_slope = T::zero();
    let mut rr = RrHistory::default();
    // noise candidates since the last accepted beat, for search-back
    let mut pending: Vec<Candidate<T>> = Vec::new();

    let accept =
        |c: &Candidate<T>, qrs: &mut Vec<usize>, rr: &mut RrHistory, last_slope: &mut T| {
            if let Some(&prev) = qrs.last() {
                rr.push((c.index - prev) as f64);
            }
            qrs.push(c.index);
            *last_slope = c.slope;
        };

    for c in &candidates {
        if cfg.searchback {
            if let (Some(&prev), Some(avg)) = (qrs.last(), rr.regular_average()) {
                if (c.index - prev) as f64 > 1.66 * avg {
                    let half_i = T::lit(0.5) * lev_i.threshold();
                    let half_f = T::lit(0.5) * lev_f.threshold();
                    let best = pending
                        .iter()
                        .filter(|p| {
                            p.index >= prev + refractory
                                && p.index + refractory <= c.index
                                && p.integrated > half_i
                                && p.filtered > half_f
                        })
                        .max_by(|a, b| cmp(&a.integrated, &b.integrated));
                    if let Some(found) = best.copied() {
                        lev_i.on_signal(found.integrated, 0.25);
                        lev_f.on_signal(found.filtered, 0.25);
                        accept(&found, &mut qrs, &mut rr, &mut last_slope);
                        pending.retain(|p| p.index > found.index);
                    }
                }
            }
        }

        let above = c.integrated > lev_i.threshold() && c.filtered > lev_f.threshold();
        let mut is_qrs = false;
        if above {
            match qrs.last() {
                Some(&prev) if c.index < prev + refractory => {}
                Some(&prev) if c.index < prev + t_window && c.slope < T::lit(0.5) * last_slope => {}
                _ => is_qrs = true,
            }
        }
        if is_qrs {
            lev_i.on_signal(c.integrated, 0.125);
            lev_f.on_signal(c.filtered, 0.125);
            accept(c, &mut qrs, &mut rr, &mut last_slope);
            pending.clear();
        } else {
            lev_i.on_noise(c.integrated);
            lev_f.on_noise(c.filtered);
            pending.push(*c);
        }

        if let Some(t) = trace.as_mut() {
            let thr = lev_i.threshold();
            t.resize(c.index + 1, thr);
        }
    }
    if let Some(t) = trace.as_mut() {
        let thr = lev_i.threshold();
        t.resize(x.len(), thr);
    }

    let refine = seconds_to_samples(cfg.refine_window_s, rate_hz);
    let mut refined: Vec<usize> = Vec::with_capacity(qrs.len());
    for p in qrs {
        let (r, amp) = window_max_abs(x, p, refine);
        match refined.last_mut() {
            Some(prev) if r < *prev + refractory => {
                if amp > x[*prev].abs() {
                    *prev = r;
                }
            }
            _ => refined.push(r),
        }
    }

    Ok(DetectionResult {
        r_peaks: refined,
        signal_threshold_trace: trace,
    })
}

/// Greedy one-to-one nearest matching of two sorted index lists within `tolerance`.
///
/// Returns `(detection position, reference position)` pairs sorted by detection.
pub fn match_indices(
    detections: &[usize],
    reference: &[usize],
    tolerance: usize,
) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    let mut start = 0;
    for (di, &d) in detections.iter().enumerate() {
        while start < reference.len() && reference[start] + tolerance < d {
            start += 1;
        }
        for (ai, &a) in reference.iter().enumerate().skip(start) {
            if a > d + tolerance {
                break;
            }
            pairs.push((d.abs_diff(a), di, ai));
        }
    }
    pairs.sort_unstable();
    let mut used_d = vec![false; detections.len()];
    let mut used_a = vec![false; reference.len()];
    let mut out = Vec::new();
    for (_, di, ai) in pairs {
        if !used_d[di] && !used_a[ai] {
            used_d[di] = true;
            used_a[ai] = true;
            out.push((di, ai));
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// (detected sample index, label), ascending by index.
    pub matched: Vec<(usize, BeatClass)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_annotations: Vec<BeatAnnotation>,
}

/// Labels detections with the nearest annotation within `tolerance_s`.
pub fn match_annotations<T>(
    detections: &DetectionResult<T>,
    annotations: &[BeatAnnotation],
    rate_hz: u32,
    tolerance_s: f64,
) -> MatchResult {
    let tol = seconds_to_samples(tolerance_s, rate_hz);
    let reference: Vec<usize> = annotations.iter().map(|a| a.sample_index).collect();
    let pairs = match_indices(&detections.r_peaks, &reference, tol);
    let mut det_used = vec![false; detections.r_peaks.len()];
    let mut ann_used = vec![false; annotations.len()];
    let matched = pairs
        .iter()
        .map(|&(di, ai)| {
            det_used[di] = true;
            ann_used[ai] = true;
            (detections.r_peaks[di], annotations[ai].label)
        })
        .collect();
    MatchResult {
        matched,
        unmatched_detections: detections
            .r_peaks
            .iter()
            .zip(&det_used)
            .filter(|(_, u)| !**u)
            .map(|(d, _)| *d)
            .collect(),
        unmatched_annotations: annotations
            .iter()
            .zip(&ann_used)
            .filter(|(_, u)| !**u)
            .map(|(a, _)| *a)
            .collect(),
    }
}

/// Beat-detection agreement with a reference annotation list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl DetectionScore {
    pub fn compute(detected: &[usize], reference: &[usize], tolerance: usize) -> Self {
        let tp = match_indices(detected, reference, tolerance).len();
        Self {
            true_positives: tp,
            false_positives: detected.len() - tp,
            false_negatives: reference.len() - tp,
        }
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(
            self.true_positives,
            self.true_positives + self.false_negatives,
        )
    }

    pub fn positive_predictivity(&self) -> f64 {
        ratio(
            self.true_positives,
            self.true_positives + self.false_positives,
        )
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}
