//! Test-side writers for WFDB records, independent of the library readers.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const RATE: u32 = 360;
pub const GAIN: f64 = 200.0;
pub const BASELINE: i32 = 1024;

/// Packs 12-bit samples pairwise into 3 bytes; a trailing odd sample takes 2 bytes.
pub fn pack_212(samples: &[i16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 3 / 2 + 2);
    for pair in samples.chunks(2) {
        let a = (pair[0] as u16) & 0x0FFF;
        out.push((a & 0xFF) as u8);
        match pair.get(1) {
            Some(&s) => {
                let b = (s as u16) & 0x0FFF;
                out.push(((a >> 8) as u8) | (((b >> 8) as u8) << 4));
                out.push((b & 0xFF) as u8);
            }
            None => out.push((a >> 8) as u8),
        }
    }
    out
}

/// MIT annotation codes used by the fixtures.
pub mod code {
    pub const NORMAL: u8 = 1;
    pub const LBBB: u8 = 2;
    pub const RBBB: u8 = 3;
    pub const PVC: u8 = 5;
    pub const FUSION: u8 = 6;
    pub const APC: u8 = 8;
    pub const PACE: u8 = 12;
    pub const PFUS: u8 = 38;
    pub const RHYTHM: u8 = 28;
    pub const SKIP: u8 = 59;
    pub const NUM: u8 = 60;
    pub const SUB: u8 = 61;
    pub const AUX: u8 = 63;
}

fn word(code: u8, low: u16) -> [u8; 2] {
    ((u16::from(code) << 10) | (low & 0x3FF)).to_le_bytes()
}

/// Encodes `(sample, code)` pairs (ascending) as an annotation stream.
/// Intervals beyond 10 bits go through a SKIP word. Rhythm annotations get an AUX string.
pub fn encode_annotations(anns: &[(usize, u8)]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut prev = 0usize;
    for &(s, c) in anns {
        let delta = s - prev;
        if delta > 1023 {
            out.extend(word(code::SKIP, 0));
            let d = delta as u32;
            out.extend(((d >> 16) as u16).to_le_bytes());
            out.extend(((d & 0xFFFF) as u16).to_le_bytes());
            out.extend(word(c, 0));
        } else {
            out.extend(word(c, delta as u16));
        }
        if c == code::RHYTHM {
            let text = b"(N";
            out.extend(word(code::AUX, text.len() as u16));
            out.extend(text);
        }
        prev = s;
    }
    out.extend([0, 0]);
    out
}

/// Waveform families for synthetic beats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Morph {
    Normal,
    Pvc,
    Lbbb,
    Apc,
}

impl Morph {
    pub fn code(self) -> u8 {
        match self {
            Morph::Normal => code::NORMAL,
            Morph::Pvc => code::PVC,
            Morph::Lbbb => code::LBBB,
            Morph::Apc => code::APC,
        }
    }

    fn mean_rr_s(self) -> f64 {
        match self {
            Morph::Normal => 0.80,
            Morph::Pvc => 0.75,
            Morph::Lbbb => 0.90,
            Morph::Apc => 0.65,
        }
    }
}

fn gauss(t: f64, center: f64, width: f64) -> f64 {
    let z = (t - center) / width;
    (-0.5 * z * z).exp()
}

/// Millivolt value of a beat at offset `t` seconds from its R peak, on lead `lead`.
pub fn beat_shape(m: Morph, t: f64, lead: usize, amp: f64) -> f64 {
    let v = match m {
        Morph::Normal => {
            0.15 * gauss(t, -0.20, 0.020) - 0.10 * gauss(t, -0.025, 0.008)
                + 1.2 * gauss(t, 0.0, 0.010)
                - 0.20 * gauss(t, 0.025, 0.008)
                + 0.30 * gauss(t, 0.30, 0.040)
        }
        Morph::Apc => {
            0.08 * gauss(t, -0.12, 0.015) - 0.10 * gauss(t, -0.025, 0.008)
                + 1.1 * gauss(t, 0.0, 0.010)
                - 0.20 * gauss(t, 0.025, 0.008)
                + 0.25 * gauss(t, 0.27, 0.035)
        }
        Morph::Pvc => 1.5 * gauss(t, 0.0, 0.035) - 0.45 * gauss(t, 0.30, 0.060),
        Morph::Lbbb => {
            0.8 * gauss(t, -0.018, 0.020) + 0.85 * gauss(t, 0.018, 0.020)
                - 0.25 * gauss(t, 0.32, 0.050)
        }
    };
    let lead_gain = if lead == 0 { 1.0 } else { -0.45 };
    let skew = if lead == 0 {
        0.0
    } else {
        0.12 * gauss(t, 0.06, 0.03)
    };
    amp * (lead_gain * v + skew)
}

/// A generated two-lead record: raw ADC samples plus beat positions.
pub struct SynthRecord {
    pub name: String,
    pub leads: [Vec<i16>; 2],
    pub beats: Vec<(usize, Morph)>,
}

/// Beats of `morph` with optional interleaved `other` beats every `other_every` beats.
pub fn synth_record(
    name: &str,
    morph: Morph,
    other: Option<(Morph, usize)>,
    seconds: f64,
    seed: u64,
) -> SynthRecord {
    let n = (seconds * RATE as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).expect("valid normal");
    let mut mv = [vec![0.0f64; n], vec![0.0f64; n]];
    let mut beats = Vec::new();
    let mut t = 1.0;
    let mut k = 0usize;
    while t < seconds - 1.0 {
        let this = match other {
            Some((o, every)) if k % every == every - 1 => o,
            _ => morph,
        };
        let r = (t * RATE as f64).round() as usize;
        beats.push((r, this));
        let amp = 1.0 + rng.random_range(-0.05..0.05);
        let lo = r.saturating_sub((0.35 * RATE as f64) as usize);
        let hi = (r + (0.55 * RATE as f64) as usize).min(n);
        for i in lo..hi {
            let dt = (i as f64 - r as f64) / RATE as f64;
            for (lead, signal) in mv.iter_mut().enumerate() {
                signal[i] += beat_shape(this, dt, lead, amp);
            }
        }
        t += this.mean_rr_s() + rng.random_range(-0.04..0.04);
        k += 1;
    }
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let leads = mv.map(|signal| {
        signal
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let wander =
                    0.1 * (std::f64::consts::TAU * 0.3 * i as f64 / RATE as f64 + phase).sin();
                let adc = ((v + wander + noise.sample(&mut rng)) * GAIN).round() as i32 + BASELINE;
                adc.clamp(-2048, 2047) as i16
            })
            .collect()
    });
    SynthRecord {
        name: name.to_string(),
        leads,
        beats,
    }
}

impl SynthRecord {
    /// Writes `<name>.hea`, `<name>.dat` and `<name>.atr` into `dir`.
    pub fn write(&self, dir: &Path) {
        let n = self.leads[0].len();
        let interleaved: Vec<i16> = (0..n)
            .flat_map(|i| [self.leads[0][i], self.leads[1][i]])
            .collect();
        fs::write(
            dir.join(format!("{}.dat", self.name)),
            pack_212(&interleaved),
        )
        .unwrap();
        let mut hea = format!("{} 2 {RATE} {n}\n", self.name);
        for (lead, desc) in ["MLII", "V1"].iter().enumerate() {
            let checksum = self.leads[lead]
                .iter()
                .fold(0i16, |a, &v| a.wrapping_add(v));
            hea.push_str(&format!(
                "{}.dat 212 {GAIN} 11 {BASELINE} {} {checksum} 0 {desc}\n",
                self.name, self.leads[lead][0]
            ));
        }
        hea.push_str("# synthetic fixture\n");
        fs::write(dir.join(format!("{}.hea", self.name)), hea).unwrap();
        let mut anns: Vec<(usize, u8)> = vec![(0, code::RHYTHM)];
        anns.extend(self.beats.iter().map(|&(r, m)| (r, m.code())));
        fs::write(
            dir.join(format!("{}.atr", self.name)),
            encode_annotations(&anns),
        )
        .unwrap();
    }
}

/// Three single-class records (Normal, PVC, LBBB) in `dir`; returns their names.
pub fn write_fixture_database(dir: &Path, seconds: f64) -> Vec<&'static str> {
    let specs = [
        ("s100", Morph::Normal, 11u64),
        ("s208", Morph::Pvc, 12),
        ("s109", Morph::Lbbb, 13),
    ];
    for (name, morph, seed) in specs {
        synth_record(name, morph, None, seconds, seed).write(dir);
    }
    specs.iter().map(|s| s.0).collect()
}

/// Config text for the fixture database written by [`write_fixture_database`].
pub fn fixture_config(classifier: &str, extra: &str) -> String {
    format!(
        "database = mitbih\ndata_dir = .\nclasses = Normal=s100 PVC=s208 LBBB=s109\nleads = @0,@1\nclassifier = {classifier}\nseed = 3\n{extra}"
    )
}
