//! Binary chirp physical layer.
//!
//! A bit is carried by one of two linear FM symbols over the band
//! `[f1, f2]`: bit 0 by the up-chirp `cos(2π(f1·t + μt²/2) + φ0)`, bit 1 by
//! the down-chirp `cos(2π(f2·t − μt²/2) + φ0)`, with `μ = (f2 − f1)/T`.
//! Receivers work on the real symbol, optionally decimated by `lambda`.

mod complexity;
mod detector;

pub use complexity::{dnn_op_count, default_hidden, mf_op_count, ComplexityReport};
pub use detector::{matched_filter_detect, Detection, MatchedFilter};

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};
use crate::wire::{Reader, Writer};

/// Chirp waveform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams {
    /// Start frequency of the up-chirp (Hz).
    pub f1: f64,
    /// End frequency of the up-chirp (Hz).
    pub f2: f64,
    /// Symbol duration (s).
    pub duration: f64,
    /// Sample rate (Hz).
    pub fs: f64,
    /// Initial phase (rad).
    pub phi0: f64,
    /// Receiver decimation factor.
    pub lambda: usize,
}

impl Default for ChirpParams {
    /// 6–12 kHz band, 10 ms symbols at 96 kHz: 960 samples per symbol.
    fn default() -> Self {
        Self {
            f1: 6_000.0,
            f2: 12_000.0,
            duration: 0.010,
            fs: 96_000.0,
            phi0: 0.0,
            lambda: 1,
        }
    }
}

fn integral(x: f64) -> Option<usize> {
    let r = x.round();
    ((x - r).abs() <= 1e-9 * x.abs().max(1.0) && r >= 1.0).then_some(r as usize)
}

impl ChirpParams {
    pub fn with_lambda(mut self, lambda: usize) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let Self { f1, f2, duration, fs, phi0, lambda } = *self;
        if ![f1, f2, duration, fs, phi0].iter().all(|v| v.is_finite()) {
            return config("chirp parameters must be finite");
        }
        if !(0.0 < f1 && f1 < f2 && f2 < fs / 2.0) {
            return config(format!(
                "chirp band must satisfy 0 < f1 < f2 < fs/2 (f1={f1}, f2={f2}, fs={fs})"
            ));
        }
        if duration <= 0.0 {
            return config("symbol duration must be positive");
        }
        let Some(n) = integral(duration * fs) else {
            return config(format!("T·fs = {} is not an integer", duration * fs));
        };
        if lambda == 0 || n % lambda != 0 {
            return config(format!(
                "downsampling factor {lambda} does not divide T·fs = {n}"
            ));
        }
        Ok(())
    }

    /// Chirp rate μ (Hz/s).
    pub fn sweep_rate(&self) -> f64 {
        (self.f2 - self.f1) / self.duration
    }

    /// Samples per symbol at the full rate, `T·fs`.
    pub fn samples_per_symbol(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    /// Samples per symbol after decimation, `N1 = T·fs/λ`.
    pub fn n1(&self) -> usize {
        self.samples_per_symbol() / self.lambda.max(1)
    }
}

/// Up-chirp (bit 0) or down-chirp (bit 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChirpDirection {
    Up,
    Down,
}

impl ChirpDirection {
    pub fn for_bit(bit: u8) -> Self {
        if bit == 0 {
            Self::Up
        } else {
            Self::Down
        }
    }
}

/// A real sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub fs: f64,
}

const WAVEFORM_MAGIC: &[u8; 4] = b"UWAW";

impl Waveform {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if samples.is_empty() {
            return input("waveform must contain at least one sample");
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return input(format!("waveform sample {i} is not finite"));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return config(format!("sample rate {fs} must be positive"));
        }
        Ok(Self { samples, fs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        crate::dsp::energy(&self.samples)
    }

    /// Serializes as `UWAW`, version, integer fs, sample count, then f32
    /// samples, all little-endian.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let Some(fs) = integral(self.fs).filter(|&v| v <= u32::MAX as usize) else {
            return config(format!("sample rate {} is not an integer number of Hz", self.fs));
        };
        let mut w = Writer::default();
        w.bytes(WAVEFORM_MAGIC);
        w.u16(1);
        w.u32(fs as u32);
        w.u64(self.samples.len() as u64);
        for &s in &self.samples {
            w.f32(s as f32);
        }
        Ok(w.buf)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        r.magic(WAVEFORM_MAGIC)?;
        r.version(1)?;
        let fs = r.u32()? as f64;
        let n = r.u64()?;
        if (r.remaining() as u64) < n.saturating_mul(4) {
            return r.error(format!("truncated: header announces {n} samples"));
        }
        let samples = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Waveform::new(samples, fs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// One symbol at the full sample rate.
pub fn generate_chirp(params: &ChirpParams, direction: ChirpDirection) -> Result<Waveform> {
    params.validate()?;
    Ok(Waveform {
        samples: chirp_samples(params, direction),
        fs: params.fs,
    })
}

pub(crate) fn chirp_samples(params: &ChirpParams, direction: ChirpDirection) -> Vec<f64> {
    let mu = params.sweep_rate();
    (0..params.samples_per_symbol())
        .map(|k| {
            let t = k as f64 / params.fs;
            let cycles = match direction {
                ChirpDirection::Up => params.f1 * t + 0.5 * mu * t * t,
                ChirpDirection::Down => params.f2 * t - 0.5 * mu * t * t,
            };
            (2.0 * PI * cycles + params.phi0).cos()
        })
        .collect()
}

/// Concatenates one chirp per bit (0 → up, 1 → down).
pub fn modulate_frame(bits: &[u8], params: &ChirpParams) -> Result<Waveform> {
    params.validate()?;
    if bits.is_empty() {
        return input("cannot modulate an empty bit sequence");
    }
    if let Some(i) = bits.iter().position(|&b| b > 1) {
        return input(format!("bit {i} has value {} (expected 0 or 1)", bits[i]));
    }
    let up = chirp_samples(params, ChirpDirection::Up);
    let down = chirp_samples(params, ChirpDirection::Down);
    let mut samples = Vec::with_capacity(bits.len() * up.len());
    for &b in bits {
        samples.extend_from_slice(if b == 0 { &up } else { &down });
    }
    Ok(Waveform { samples, fs: params.fs })
}

/// Keeps every `lambda`-th sample starting at index 0.
pub fn downsample(w: &Waveform, lambda: usize) -> Result<Waveform> {
    if lambda == 0 || w.len() % lambda != 0 {
        return config(format!(
            "downsampling factor {lambda} does not divide {} samples",
            w.len()
        ));
    }
    Ok(Waveform {
        samples: decimate(&w.samples, lambda),
        fs: w.fs / lambda as f64,
    })
}

pub(crate) fn decimate(x: &[f64], lambda: usize) -> Vec<f64> {
    x.iter().step_by(lambda).copied().collect()
}
