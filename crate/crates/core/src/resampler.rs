//! Kaiser-windowed sinc resampling between 8 kHz and 16 kHz.
//!
//! The low-pass prototype always runs at the higher of the two rates:
//! upsampling zero-stuffs then filters (polyphase, only the non-zero input
//! taps are visited), downsampling filters then keeps every second sample.
//! The filter is centred, so its `(N - 1) / 2` samples of group delay are
//! removed and the output is time-aligned with the input.

use std::f64::consts::PI;

use thiserror::Error;

use crate::media_io::AudioBuffer;

pub const DEFAULT_STOPBAND_DB: f64 = 80.0;
pub const DEFAULT_TRANSITION_FRAC: f64 = 0.05;

const SUPPORTED_RATES: [u32; 2] = [8000, 16000];

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error("unsupported rate pair {from} Hz -> {to} Hz (only 8000 <-> 16000)")]
    UnsupportedRates { from: u32, to: u32 },
    #[error("stopband attenuation must be at least 40 dB, got {0}")]
    Stopband(f64),
    #[error("transition fraction must lie in (0, 0.5), got {0}")]
    Transition(f64),
    #[error("filter was designed for {designed_from} -> {designed_to} Hz, not {from} -> {to} Hz")]
    FilterMismatch {
        designed_from: u32,
        designed_to: u32,
        from: u32,
        to: u32,
    },
}

/// Linear-phase low-pass FIR filter for one rate conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f32>,
    nominal_cutoff: f64,
    stopband_db: f64,
    beta: f64,
    fs_in: u32,
    fs_out: u32,
}

impl FirFilter {
    pub fn taps(&self) -> &[f32] {
        &self.taps
    }

    /// Cutoff in cycles per sample at the filter's operating (higher) rate.
    pub fn nominal_cutoff(&self) -> f64 {
        self.nominal_cutoff
    }

    pub fn stopband_db(&self) -> f64 {
        self.stopband_db
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rates(&self) -> (u32, u32) {
        (self.fs_in, self.fs_out)
    }

    /// Samples of delay at the operating rate, `(N - 1) / 2`.
    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }
}

/// Kaiser β for a stopband attenuation in dB.
pub fn kaiser_beta(stopband_db: f64) -> f64 {
    let a = stopband_db;
    if a > 50.0 {
        0.1102 * (a - 8.7)
    } else if a >= 21.0 {
        0.5842 * (a - 21.0).powf(0.4) + 0.07886 * (a - 21.0)
    } else {
        0.0
    }
}

/// Kaiser's length estimate `ceil((A - 7.95) / (2.285 Δω))`, bumped to the
/// next odd number, with `Δω = transition_frac · π`.
pub fn kaiser_tap_count(stopband_db: f64, transition_frac: f64) -> usize {
    let delta_omega = transition_frac * PI;
    let n = ((stopband_db - 7.95) / (2.285 * delta_omega)).ceil().max(1.0) as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let f = half / k as f64;
        term *= f * f;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn check_pair(fs_in: u32, fs_out: u32) -> Result<(), ResampleError> {
    if fs_in == fs_out || !SUPPORTED_RATES.contains(&fs_in) || !SUPPORTED_RATES.contains(&fs_out) {
        return Err(ResampleError::UnsupportedRates {
            from: fs_in,
            to: fs_out,
        });
    }
    Ok(())
}

/// Designs the anti-imaging / anti-aliasing filter for `fs_in -> fs_out`.
///
/// The cutoff sits at `0.5 (1 - transition_frac) · min(fs_in, fs_out)` Hz so
/// the transition band ends at the lower Nyquist frequency. Upsampling
/// filters carry the interpolation gain (their taps sum to 2); downsampling
/// filters have unit DC gain.
pub fn design_kaiser_sinc(
    fs_in: u32,
    fs_out: u32,
    stopband_db: f64,
    transition_frac: f64,
) -> Result<FirFilter, ResampleError> {
    check_pair(fs_in, fs_out)?;
    if !(stopband_db >= 40.0 && stopband_db.is_finite()) {
        return Err(ResampleError::Stopband(stopband_db));
    }
    if !(transition_frac > 0.0 && transition_frac < 0.5) {
        return Err(ResampleError::Transition(transition_frac));
    }
    let fs_low = f64::from(fs_in.min(fs_out));
    let fs_high = f64::from(fs_in.max(fs_out));
    let cutoff = 0.5 * (1.0 - transition_frac) * fs_low / fs_high;
    let n = kaiser_tap_count(stopband_db, transition_frac);
    let beta = kaiser_beta(stopband_db);
    let gain = if fs_out > fs_in {
        f64::from(fs_out / fs_in)
    } else {
        1.0
    };

    let mid = (n - 1) / 2;
    let i0_beta = bessel_i0(beta);
    let mut taps = vec![0.0f64; n];
    for k in 0..=mid {
        let offset = k as f64 - mid as f64;
        let r = offset / mid.max(1) as f64;
        let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
        let h = 2.0 * cutoff * sinc(2.0 * cutoff * offset) * window;
        taps[k] = h;
        taps[n - 1 - k] = h;
    }
    let sum: f64 = taps.iter().sum();
    let taps = taps.iter().map(|&h| (h * gain / sum) as f32).collect();

    Ok(FirFilter {
        taps,
        nominal_cutoff: cutoff,
        stopband_db,
        beta,
        fs_in,
        fs_out,
    })
}

/// Output length `round(len · fs_out / fs_in)` for a supported pair.
pub fn output_len(len: usize, fs_in: u32, fs_out: u32) -> usize {
    if fs_out > fs_in {
        len * (fs_out / fs_in) as usize
    } else if fs_out < fs_in {
        let factor = (fs_in / fs_out) as usize;
        // round half away from zero
        (2 * len + factor) / (2 * factor)
    } else {
        len
    }
}

fn upsample2(input: &[f32], taps: &[f32]) -> Vec<f32> {
    let delay = (taps.len() - 1) / 2;
    let out_len = input.len() * 2;
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        // y[m] = sum_k h[k] * up[m + delay - k]; up[j] is nonzero only for even j
        let pos = m + delay;
        let mut acc = 0.0f64;
        let first_k = pos % 2;
        let mut k = first_k;
        while k < taps.len() && k <= pos {
            let j = (pos - k) / 2;
            if j < input.len() {
                acc += f64::from(taps[k]) * f64::from(input[j]);
            }
            k += 2;
        }
        out.push(acc as f32);
    }
    out
}

fn downsample2(input: &[f32], taps: &[f32]) -> Vec<f32> {
    let delay = (taps.len() - 1) / 2;
    let out_len = output_len(input.len(), 2, 1);
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let pos = 2 * m + delay;
        let mut acc = 0.0f64;
        for (k, &h) in taps.iter().enumerate().take(pos + 1) {
            let j = pos - k;
            if j < input.len() {
                acc += f64::from(h) * f64::from(input[j]);
            }
        }
        out.push(acc as f32);
    }
    out
}

/// Converts `audio` to `fs_out`.
///
/// Equal rates return the input unchanged. When `filter` is `None` the
/// default design (80 dB stopband, 5 % transition) is used. Samples outside
/// the signal are treated as zero.
pub fn resample(audio: &AudioBuffer, fs_out: u32, filter: Option<&FirFilter>) -> Result<AudioBuffer, ResampleError> {
    let fs_in = audio.sample_rate();
    if fs_in == fs_out {
        return Ok(audio.clone());
    }
    check_pair(fs_in, fs_out)?;
    let designed;
    let filter = match filter {
        Some(f) => {
            if f.rates() != (fs_in, fs_out) {
                return Err(ResampleError::FilterMismatch {
                    designed_from: f.fs_in,
                    designed_to: f.fs_out,
                    from: fs_in,
                    to: fs_out,
                });
            }
            f
        }
        None => {
            designed = design_kaiser_sinc(fs_in, fs_out, DEFAULT_STOPBAND_DB, DEFAULT_TRANSITION_FRAC)?;
            &designed
        }
    };
    let samples = if fs_out > fs_in {
        upsample2(audio.samples(), filter.taps())
    } else {
        downsample2(audio.samples(), filter.taps())
    };
    Ok(AudioBuffer::new(samples, fs_out).expect("finite input and taps give finite output"))
}
