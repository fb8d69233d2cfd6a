//! Rayleigh tapped-delay-line generator with bell-shaped Doppler spectra.

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ChannelMeta, ChannelRealization};
use crate::dsp::fft_inverse;
use crate::error::{config, Result};
use crate::rng;

/// Power spectral density of a tap process,
/// `S(f) = √a / (π·fd·(1 + a·(f/fd)²))` for `|f| ≤ fd`, zero outside.
pub fn bell_spectrum(f: f64, fd: f64, a: f64) -> Result<f64> {
    if !(fd > 0.0 && fd.is_finite()) {
        return config(format!("maximum Doppler frequency {fd} must be positive"));
    }
    if !(a > 0.0) {
        return config(format!("bell-shape parameter {a} must be positive"));
    }
    if f.abs() > fd {
        return Ok(0.0);
    }
    let r = f / fd;
    Ok(a.sqrt() / (PI * fd * (1.0 + a * r * r)))
}

/// Configuration of the exponentially decaying Rayleigh tap model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighModelConfig {
    /// Delay of the last tap (s).
    pub max_excess_delay: f64,
    /// Mean power decay between adjacent taps (dB).
    pub decay_db_per_tap: f64,
    /// Maximum Doppler frequency of the tap processes (Hz).
    pub fd: f64,
    /// Bell-shape parameter of the Doppler spectrum.
    pub a: f64,
    /// Tap spacing (s).
    pub ts: f64,
}

impl RayleighModelConfig {
    /// 12 ms excess delay, 0.66 dB/tap, `a = 9`, tap spacing `1/bandwidth`.
    pub fn for_bandwidth(bandwidth_hz: f64, fd: f64) -> Self {
        Self {
            max_excess_delay: 0.012,
            decay_db_per_tap: 0.66,
            fd,
            a: 9.0,
            ts: 1.0 / bandwidth_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_excess_delay > 0.0 && self.max_excess_delay.is_finite()) {
            return config("max_excess_delay must be positive");
        }
        if !(self.fd >= 0.0 && self.fd.is_finite()) {
            return config("fd must be non-negative");
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return config("bell-shape parameter a must be positive");
        }
        if !(self.decay_db_per_tap >= 0.0 && self.decay_db_per_tap.is_finite()) {
            return config("decay_db_per_tap must be non-negative");
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return config("tap spacing must be positive");
        }
        Ok(())
    }

    /// `⌊max_excess_delay / Ts⌋ + 1`; the last tap sits at or before the
    /// maximum excess delay.
    pub fn tap_count(&self) -> usize {
        (self.max_excess_delay / self.ts + 1e-9).floor() as usize + 1
    }

    /// Mean tap powers, normalized to unit sum.
    pub fn tap_powers(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.tap_count())
            .map(|k| 10f64.powf(-self.decay_db_per_tap * k as f64 / 10.0))
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / sum).collect()
    }
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Process rate relative to `fd` used by [`rayleigh_cir`].
pub const PROCESS_OVERSAMPLING: f64 = 16.0;
const MIN_PROCESS_LEN: usize = 256;

/// Unit-power complex Gaussian process of `len` samples at `rate` Hz whose
/// PSD follows [`bell_spectrum`]; synthesized by shaping white noise with
/// `√S(f)` in the frequency domain. `len` should be a power of two for the
/// periodogram to line up with the shaping grid.
pub fn doppler_process<R: Rng>(len: usize, rate: f64, fd: f64, a: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if rate < 2.0 * fd {
        return config(format!("process rate {rate} Hz cannot represent fd = {fd} Hz"));
    }
    let weights: Vec<f64> = (0..len)
        .map(|k| {
            let kk = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
            bell_spectrum(kk * rate / len as f64, fd, a)
        })
        .collect::<Result<_>>()?;
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return config("Doppler spectrum has no support on the process grid");
    }
    let scale = len as f64 / total;
    let mut buf: Vec<Complex64> = weights
        .iter()
        .map(|&w| complex_normal(rng) * (w * scale).sqrt())
        .collect();
    fft_inverse(len).process(&mut buf);
    let norm = 1.0 / (len as f64).sqrt();
    for v in &mut buf {
        *v *= norm;
    }
    Ok(buf)
}

/// Draws a time-varying realization covering `duration` seconds at `fs`.
///
/// Each tap is an independent complex Gaussian process with mean power from
/// [`RayleighModelConfig::tap_powers`]; with `fd = 0` taps are constant.
pub fn rayleigh_cir(cfg: &RayleighModelConfig, duration: f64, fs: f64, seed: u64) -> Result<ChannelRealization> {
    cfg.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return config("duration must be positive");
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return config("sample rate must be positive");
    }
    let steps = ((duration * fs) - 1e-9).ceil().max(1.0) as usize;
    let powers = cfg.tap_powers();
    let mut taps = Vec::with_capacity(powers.len() * steps);
    for (k, &p) in powers.iter().enumerate() {
        let mut r = rng::stream(seed, &[k as u64]);
        let amp = p.sqrt();
        if cfg.fd == 0.0 {
            let g = complex_normal(&mut r) * amp;
            let g = Complex32::new(g.re as f32, g.im as f32);
            taps.extend(std::iter::repeat_n(g, steps));
            continue;
        }
        let rate = PROCESS_OVERSAMPLING * cfg.fd;
        let needed = (duration * rate).ceil() as usize + 2;
        let len = needed.next_power_of_two().max(MIN_PROCESS_LEN);
        let proc = doppler_process(len, rate, cfg.fd, cfg.a, &mut r)?;
        for n in 0..steps {
            let pos = n as f64 / fs * rate;
            let i = pos.floor() as usize;
            let w = pos - i as f64;
            let g = (proc[i % len] * (1.0 - w) + proc[(i + 1) % len] * w) * amp;
            taps.push(Complex32::new(g.re as f32, g.im as f32));
        }
    }
    let meta = ChannelMeta::preset("SIM-P").with_doppler_coverage(cfg.fd);
    ChannelRealization::new(taps, powers.len(), steps, cfg.ts, fs, meta)
}
