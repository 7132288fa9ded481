//! Baseline-wander removal and sample-rate conversion.

use crate::dataio::LeadSignal;
use crate::error::{Error, Result};
use crate::num::{cmp, Scalar};

/// Window lengths of the two cascaded baseline medians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub short_window_s: f64,
    pub long_window_s: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            short_window_s: 0.2,
            long_window_s: 0.6,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.short_window_s > 0.0 && self.short_window_s < self.long_window_s) {
            return Err(Error::Config(format!(
                "median windows must satisfy 0 < short ({}) < long ({})",
                self.short_window_s, self.long_window_s
            )));
        }
        Ok(())
    }

    /// (short, long) window lengths in samples; both odd.
    pub fn window_samples(&self, rate_hz: u32) -> (usize, usize) {
        (
            odd_window(self.short_window_s, rate_hz),
            odd_window(self.long_window_s, rate_hz),
        )
    }
}

fn odd_window(seconds: f64, rate_hz: u32) -> usize {
    let n = (seconds * rate_hz as f64).round().max(1.0) as usize;
    n | 1
}

/// Running median over an odd window `width` with replicated edges.
///
/// Keeps the window sorted and slides it one sample at a time, so the cost is
/// one binary search and one shift per sample rather than a sort per window.
pub fn median_filter<T: Scalar>(x: &[T], width: usize) -> Vec<T> {
    assert!(width % 2 == 1, "median window must be odd");
    if x.is_empty() {
        return Vec::new();
    }
    let half = width / 2;
    let last = x.len() - 1;
    let padded = |j: usize| x[j.saturating_sub(half).min(last)];

    let mut window: Vec<T> = (0..width).map(padded).collect();
    window.sort_by(cmp);
    let mut out = Vec::with_capacity(x.len());
    out.push(window[half]);
    for i in 1..x.len() {
        let leaving = padded(i - 1);
        let pos = window.partition_point(|v| cmp(v, &leaving).is_lt());
        window.remove(pos);
        let entering = padded(i - 1 + width);
        let pos = window.partition_point(|v| cmp(v, &entering).is_lt());
        window.insert(pos, entering);
        out.push(window[half]);
    }
    out
}

/// Removes baseline wander: input minus the cascade of a short then a long median.
pub fn median_denoise<T: Scalar>(
    signal: &LeadSignal<T>,
    rate_hz: u32,
    cfg: &FilterConfig,
) -> Result<LeadSignal<T>> {
    cfg.validate()?;
    let (short, long) = cfg.window_samples(rate_hz);
    if signal.len() <= long {
        return Err(Error::SignalTooShort {
            actual: signal.len(),
            required: long + 1,
        });
    }
    let baseline = median_filter(&median_filter(&signal.samples, short), long);
    let samples = signal
        .samples
        .iter()
        .zip(&baseline)
        .map(|(&x, &b)| x - b)
        .collect();
    Ok(signal.with_samples(samples))
}

/// Taps per polyphase branch of the anti-aliasing filter.
pub const TAPS_PER_PHASE: usize = 64;
/// Kaiser window shape parameter.
pub const KAISER_BETA: f64 = 8.6;

/// Rational polyphase resampler with a Kaiser-windowed sinc low-pass.
#[derive(Debug, Clone)]
pub struct Resampler<T> {
    up: usize,
    down: usize,
    /// Branch `p` holds prototype taps `p, p+up, p+2·up, …`, normalised to unit sum.
    phases: Vec<Vec<T>>,
    center: usize,
}

impl<T: Scalar> Resampler<T> {
    pub fn new(from_hz: u32, to_hz: u32) -> Result<Self> {
        if from_hz == 0 || to_hz == 0 {
            return Err(Error::Config("resampling rates must be positive".into()));
        }
        let g = gcd(from_hz as usize, to_hz as usize);
        let (up, down) = (to_hz as usize / g, from_hz as usize / g);
        let len = TAPS_PER_PHASE * up + 1;
        let center = len / 2;
        let cutoff = 1.0 / (2.0 * up.max(down) as f64);
        let i0_beta = bessel_i0(KAISER_BETA);

        let proto: Vec<f64> = (0..len)
            .map(|j| {
                let t = j as f64 - center as f64;
                let r = t / center as f64;
                let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                2.0 * cutoff * sinc(2.0 * cutoff * t) * window
            })
            .collect();
        let phases = (0..up)
            .map(|p| {
                let branch: Vec<f64> = proto.iter().skip(p).step_by(up).copied().collect();
                let sum: f64 = branch.iter().sum();
                branch.into_iter().map(|h| T::lit(h / sum)).collect()
            })
            .collect();
        Ok(Self {
            up,
            down,
            phases,
            center,
        })
    }

    /// Reduced ratio `(up, down)`.
    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        input_len * self.up / self.down
    }

    pub fn process(&self, x: &[T]) -> Vec<T> {
        if self.up == 1 && self.down == 1 {
            return x.to_vec();
        }
        if x.is_empty() {
            return Vec::new();
        }
        let last = x.len() as isize - 1;
        (0..self.output_len(x.len()))
            .map(|k| {
                // output k sits at upsampled position k·down; prototype tap j
                // multiplies upsampled sample k·down + center − j
                let q = k * self.down + self.center;
                let phase = q % self.up;
                let base = (q / self.up) as isize;
                self.phases[phase]
                    .iter()
                    .enumerate()
                    .map(|(t, &h)| h * x[(base - t as isize).clamp(0, last) as usize])
                    .sum()
            })
            .collect()
    }
}

/// Resamples a lead from `from_hz` to `to_hz`; output length is ⌊n·to/from⌋.
pub fn resample<T: Scalar>(
    signal: &LeadSignal<T>,
    from_hz: u32,
    to_hz: u32,
) -> Result<LeadSignal<T>> {
    if from_hz == to_hz {
        if from_hz == 0 {
            return Err(Error::Config("resampling rates must be positive".into()));
        }
        return Ok(signal.clone());
    }
    let r = Resampler::new(from_hz, to_hz)?;
    Ok(signal.with_samples(r.process(&signal.samples)))
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
