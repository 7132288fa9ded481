//! WFDB header (`.hea`) and format-212 signal (`.dat`) reading.

use std::fs;
use std::path::Path;

use super::{EcgRecord, LeadSignal};
use crate::error::{Error, Result};
use crate::num::Scalar;

const DEFAULT_GAIN: f64 = 200.0;
const DEFAULT_FREQUENCY: f64 = 250.0;

/// One signal line of a header.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub file_name: String,
    pub format: u16,
    pub byte_offset: u64,
    /// ADC units per physical unit.
    pub gain: f64,
    pub baseline: i32,
    pub units: String,
    pub adc_resolution: u32,
    pub adc_zero: i32,
    pub initial_value: Option<i32>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfdbHeader {
    pub record_name: String,
    pub sampling_rate_hz: u32,
    pub n_samples: Option<usize>,
    pub signals: Vec<SignalSpec>,
}

/// Parses header text. `file` only labels error messages.
pub fn parse_header(text: &str, file: &str) -> Result<WfdbHeader> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, record_line) = lines
        .next()
        .ok_or_else(|| Error::parse(file, 1, "header has no record line"))?;
    let fields: Vec<&str> = record_line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(Error::parse(
            file,
            line_no,
            "record line needs a name and a signal count",
        ));
    }
    if fields[0].contains('/') {
        return Err(Error::parse(
            file,
            line_no,
            "multi-segment records are not supported",
        ));
    }
    let record_name = fields[0].to_string();
    let n_signals: usize = fields[1]
        .parse()
        .map_err(|_| Error::parse(file, line_no, format!("bad signal count {:?}", fields[1])))?;

    let frequency = match fields.get(2) {
        Some(f) => {
            // "360", "360/1000" (counter frequency) or "360/1000(0)"
            let base = f.split('/').next().unwrap_or(f);
            base.parse::<f64>()
                .map_err(|_| Error::parse(file, line_no, format!("bad sampling frequency {f:?}")))?
        }
        None => DEFAULT_FREQUENCY,
    };
    if !(frequency > 0.0) || (frequency - frequency.round()).abs() > 1e-9 {
        return Err(Error::parse(
            file,
            line_no,
            format!("sampling frequency {frequency} must be a positive integer"),
        ));
    }
    let n_samples = match fields.get(3) {
        Some(s) => {
            let n: usize = s
                .parse()
                .map_err(|_| Error::parse(file, line_no, format!("bad sample count {s:?}")))?;
            (n > 0).then_some(n)
        }
        None => None,
    };

    let mut signals = Vec::with_capacity(n_signals);
    for _ in 0..n_signals {
        let (line_no, line) = lines.next().ok_or_else(|| {
            Error::parse(
                file,
                line_no,
                format!(
                    "header declares {n_signals} signals but has only {} signal lines",
                    signals.len()
                ),
            )
        })?;
        signals.push(parse_signal_line(line, file, line_no)?);
    }

    Ok(WfdbHeader {
        record_name,
        sampling_rate_hz: frequency.round() as u32,
        n_samples,
        signals,
    })
}

fn parse_signal_line(line: &str, file: &str, line_no: usize) -> Result<SignalSpec> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(Error::parse(
            file,
            line_no,
            "signal line needs a file name and a format",
        ));
    }
    let bad = |what: &str, v: &str| Error::parse(file, line_no, format!("bad {what} {v:?}"));

    // format[xspf][:skew][+offset]
    let fmt_field = fields[1];
    let (fmt_part, byte_offset) = match fmt_field.split_once('+') {
        Some((f, off)) => (f, off.parse::<u64>().map_err(|_| bad("byte offset", off))?),
        None => (fmt_field, 0),
    };
    let fmt_part = fmt_part.split(':').next().unwrap_or(fmt_part);
    let (code, spf) = match fmt_part.split_once('x') {
        Some((c, s)) => (
            c,
            s.parse::<u32>().map_err(|_| bad("samples per frame", s))?,
        ),
        None => (fmt_part, 1),
    };
    let format: u16 = code.parse().map_err(|_| bad("format code", code))?;
    if spf != 1 {
        return Err(Error::UnsupportedFormat {
            file: file.to_string(),
            format: format!("{fmt_field} (multi-sample frames)"),
        });
    }

    let adc_resolution = match fields.get(3) {
        Some(v) => v.parse().map_err(|_| bad("ADC resolution", v))?,
        None => 12,
    };
    let adc_zero: i32 = match fields.get(4) {
        Some(v) => v.parse().map_err(|_| bad("ADC zero", v))?,
        None => 0,
    };

    // gain[(baseline)][/units]
    let (mut gain, mut baseline, mut units) = (DEFAULT_GAIN, adc_zero, String::from("mV"));
    if let Some(g) = fields.get(2) {
        let (g, u) = match g.split_once('/') {
            Some((g, u)) => (g, Some(u)),
            None => (*g, None),
        };
        let g = match g.split_once('(') {
            Some((g, b)) => {
                let b = b.strip_suffix(')').ok_or_else(|| bad("gain baseline", b))?;
                baseline = b.parse().map_err(|_| bad("baseline", b))?;
                g
            }
            None => g,
        };
        gain = g.parse().map_err(|_| bad("gain", g))?;
        if gain == 0.0 {
            gain = DEFAULT_GAIN;
        }
        if let Some(u) = u {
            units = u.to_string();
        }
    }
    let initial_value = match fields.get(5) {
        Some(v) => Some(v.parse().map_err(|_| bad("initial value", v))?),
        None => None,
    };
    let description = if fields.len() > 8 {
        fields[8..].join(" ")
    } else {
        String::new()
    };

    Ok(SignalSpec {
        file_name: fields[0].to_string(),
        format,
        byte_offset,
        gain,
        baseline,
        units,
        adc_resolution,
        adc_zero,
        initial_value,
        description,
    })
}

/// Unpacks `count` 12-bit two's-complement samples from format-212 bytes.
///
/// Each pair occupies three bytes: byte 0 holds the low 8 bits of the first
/// sample, the low nibble of byte 1 its high 4 bits, the high nibble of byte 1
/// the high 4 bits of the second sample and byte 2 its low 8 bits.
pub fn decode_format212(bytes: &[u8], count: usize) -> Vec<i16> {
    let mut out = Vec::with_capacity(count);
    for chunk in bytes.chunks(3) {
        if out.len() >= count {
            break;
        }
        let b0 = chunk[0] as u16;
        let b1 = chunk.get(1).copied().unwrap_or(0) as u16;
        out.push(sign_extend_12(((b1 & 0x0F) << 8) | b0));
        if out.len() < count {
            let b2 = chunk.get(2).copied().unwrap_or(0) as u16;
            out.push(sign_extend_12(((b1 & 0xF0) << 4) | b2));
        }
    }
    out
}

#[inline]
fn sign_extend_12(v: u16) -> i16 {
    ((v << 4) as i16) >> 4
}

fn format212_bytes(n_values: u64) -> u64 {
    (n_values * 3).div_ceil(2)
}

/// Reads a record from its header, decoding format-212 signal files into mV.
pub fn read_wfdb_record<T: Scalar>(header_path: impl AsRef<Path>) -> Result<EcgRecord<T>> {
    let header_path = header_path.as_ref();
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header = parse_header(&text, &header_path.display().to_string())?;
    let dir = header_path.parent().unwrap_or_else(|| Path::new("."));

    for s in &header.signals {
        if s.format != 212 {
            return Err(Error::UnsupportedFormat {
                file: header_path.display().to_string(),
                format: s.format.to_string(),
            });
        }
    }

    // Signals sharing a file are interleaved frame by frame in header order.
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, s) in header.signals.iter().enumerate() {
        match groups.iter_mut().find(|(f, _)| *f == s.file_name) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((s.file_name.clone(), vec![i])),
        }
    }

    let mut raw: Vec<Vec<i16>> = vec![Vec::new(); header.signals.len()];
    let mut n_samples = header.n_samples;
    for (file_name, members) in &groups {
        let path = dir.join(file_name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let offset = header.signals[members[0]].byte_offset;
        let available = (bytes.len() as u64).saturating_sub(offset);
        let k = members.len() as u64;
        let n = match n_samples {
            Some(n) => n as u64,
            None => available * 2 / 3 / k,
        };
        let expected = format212_bytes(n * k);
        if available < expected {
            return Err(Error::Truncated {
                file: path.display().to_string(),
                expected: expected + offset,
                actual: bytes.len() as u64,
            });
        }
        let start = offset as usize;
        let values = decode_format212(&bytes[start..start + expected as usize], (n * k) as usize);
        for (slot, &sig) in members.iter().enumerate() {
            raw[sig] = values
                .iter()
                .skip(slot)
                .step_by(members.len())
                .copied()
                .collect();
        }
        n_samples.get_or_insert(n as usize);
    }

    let leads = header
        .signals
        .iter()
        .zip(raw)
        .enumerate()
        .map(|(i, (spec, values))| {
            let gain = T::lit(spec.gain);
            let baseline = spec.baseline;
            let samples = values
                .into_iter()
                .map(|v| T::lit(f64::from(i32::from(v) - baseline)) / gain)
                .collect();
            let name = if spec.description.is_empty() {
                format!("sig{i}")
            } else {
                spec.description.clone()
            };
            LeadSignal::new(name, samples)
        })
        .collect::<Result<Vec<_>>>()?;

    EcgRecord::new(header.record_name, header.sampling_rate_hz, leads)
}
