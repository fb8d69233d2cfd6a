//! Time-varying underwater acoustic channel.
//!
//! The channel is a tapped delay line: `r[k] = Σ_j g_j[k]·x[k − j·D]` with
//! `D = Ts·fs` samples between taps. Complex gains act on the analytic
//! signal and the real part is kept. Platform motion, symbol timing offset
//! and white Gaussian noise are applied on top.

mod cir_file;
mod fading;

pub use cir_file::{load_cir, save_cir};
pub use fading::{
    bell_spectrum, doppler_process, rayleigh_cir, RayleighModelConfig, PROCESS_OVERSAMPLING,
};

use std::collections::BTreeMap;

use num_complex::{Complex32, Complex64};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chirp_phy::Waveform;
use crate::dsp::{analytic_signal, energy, fractional_shift, time_scale};
use crate::error::{config, input, Result};
use crate::rng;

/// Provenance of a channel realization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub model: String,
    pub environment: Option<String>,
    pub range: Option<String>,
    pub water_depth: Option<String>,
    pub tx_deployment: Option<String>,
    pub rx_deployment: Option<String>,
    pub doppler_coverage_hz: Option<f64>,
    pub extra: BTreeMap<String, String>,
}

impl ChannelMeta {
    pub fn named(model: &str) -> Self {
        Self { model: model.to_string(), ..Default::default() }
    }

    /// Catalogue entries for the simulated and measured channel sets.
    pub fn preset(name: &str) -> Self {
        let s = |v: &str| Some(v.to_string());
        let base = Self::named(name);
        match name {
            "SIM-P" => Self {
                environment: s("Rayleigh"),
                doppler_coverage_hz: Some(30.0),
                ..base
            },
            "SIM-B" => Self {
                environment: s("Default"),
                range: s("500m~8000m"),
                water_depth: s("100m"),
                tx_deployment: s("Suspended"),
                rx_deployment: s("Suspended"),
                ..base
            },
            "NOF" => Self {
                environment: s("Fjord"),
                range: s("750m"),
                water_depth: s("10m"),
                tx_deployment: s("Bottom"),
                rx_deployment: s("Bottom"),
                doppler_coverage_hz: Some(7.8),
                ..base
            },
            "NCS" => Self {
                environment: s("Shelf"),
                range: s("540m"),
                water_depth: s("80m"),
                tx_deployment: s("Bottom"),
                rx_deployment: s("Bottom"),
                doppler_coverage_hz: Some(31.4),
                ..base
            },
            "CWR" => Self {
                environment: s("Reservoir"),
                range: s("1100m, 2100m, 6000m"),
                water_depth: s("50m"),
                tx_deployment: s("Suspended"),
                rx_deployment: s("Suspended"),
                ..base
            },
            _ => base,
        }
    }

    pub fn with_doppler_coverage(mut self, hz: f64) -> Self {
        self.doppler_coverage_hz = Some(hz);
        self
    }
}

/// Tap gains `g_k[t]` on a `Ts` delay grid, sampled at `fs` in time.
///
/// Gains are stored in single precision, tap-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<Complex32>,
    num_taps: usize,
    steps: usize,
    ts: f64,
    fs: f64,
    pub meta: ChannelMeta,
}

impl ChannelRealization {
    pub fn new(
        taps: Vec<Complex32>,
        num_taps: usize,
        steps: usize,
        ts: f64,
        fs: f64,
        meta: ChannelMeta,
    ) -> Result<Self> {
        if num_taps == 0 || steps == 0 {
            return config("a channel needs at least one tap and one time step");
        }
        if taps.len() != num_taps * steps {
            return input(format!(
                "{} gains do not fill {num_taps} taps × {steps} steps",
                taps.len()
            ));
        }
        if let Some(i) = taps.iter().position(|g| !(g.re.is_finite() && g.im.is_finite())) {
            return input(format!("tap gain {i} is not finite"));
        }
        if !(ts > 0.0 && ts.is_finite() && fs > 0.0 && fs.is_finite()) {
            return config("tap spacing and sample rate must be positive");
        }
        Ok(Self { taps, num_taps, steps, ts, fs, meta })
    }

    /// Time-invariant channel from a list of gains.
    pub fn from_static_taps(gains: &[Complex64], ts: f64, fs: f64, meta: ChannelMeta) -> Result<Self> {
        let taps = gains
            .iter()
            .map(|g| Complex32::new(g.re as f32, g.im as f32))
            .collect();
        Self::new(taps, gains.len(), 1, ts, fs, meta)
    }

    /// A single unit tap.
    pub fn identity(fs: f64) -> Self {
        Self::from_static_taps(&[Complex64::new(1.0, 0.0)], 1.0 / fs, fs, ChannelMeta::named("identity"))
            .expect("identity channel is valid")
    }

    pub fn num_taps(&self) -> usize {
        self.num_taps
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn taps(&self) -> &[Complex32] {
        &self.taps
    }

    /// Gains of tap `k` over time.
    pub fn tap_series(&self, k: usize) -> &[Complex32] {
        &self.taps[k * self.steps..(k + 1) * self.steps]
    }

    /// Gain of tap `k` at time index `t`; the last step is held beyond the
    /// end of the realization.
    pub fn gain(&self, k: usize, t: usize) -> Complex64 {
        let g = self.taps[k * self.steps + t.min(self.steps - 1)];
        Complex64::new(g.re as f64, g.im as f64)
    }

    /// Delay between adjacent taps in samples.
    pub fn tap_delay_samples(&self) -> Result<usize> {
        let d = self.ts * self.fs;
        let r = d.round();
        if self.num_taps > 1 && ((d - r).abs() > 1e-6 || r < 1.0) {
            return config(format!("tap spacing Ts·fs = {d} is not a whole number of samples"));
        }
        Ok(r.max(1.0) as usize)
    }

    /// Copy restricted to time steps `start..start + len` (clamped).
    pub fn window(&self, start: usize, len: usize) -> Self {
        if self.steps == 1 {
            return self.clone();
        }
        let start = start.min(self.steps - 1);
        let len = len.min(self.steps - start).max(1);
        let mut taps = Vec::with_capacity(self.num_taps * len);
        for k in 0..self.num_taps {
            taps.extend_from_slice(&self.tap_series(k)[start..start + len]);
        }
        Self { taps, steps: len, ..self.clone() }
    }

    fn is_static_real(&self) -> bool {
        (0..self.num_taps).all(|k| {
            let row = self.tap_series(k);
            row.iter().all(|g| g.im == 0.0 && *g == row[0])
        })
    }
}

/// Reference energy the requested SNR is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SnrReference {
    /// Mean received sample power over noise variance.
    PerSample,
    /// Received energy per symbol of `samples` samples over `N0`, i.e.
    /// `Eb/N0` with noise variance `N0/2` per sample.
    PerSymbol { samples: usize },
}

/// Noise and synchronization impairments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentSpec {
    /// Signal-to-noise ratio in dB; `+∞` disables noise.
    pub snr_db: f64,
    pub snr_reference: SnrReference,
    /// Symbol timing offset in samples: output `r(k + sto)`.
    pub sto_samples: f64,
    /// Relative platform speed (m/s), positive when closing.
    pub rel_speed: f64,
    /// Speed of sound (m/s).
    pub sound_speed: f64,
}

impl Default for ImpairmentSpec {
    fn default() -> Self {
        Self {
            snr_db: f64::INFINITY,
            snr_reference: SnrReference::PerSample,
            sto_samples: 0.0,
            rel_speed: 0.0,
            sound_speed: 1500.0,
        }
    }
}

impl ImpairmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return config(format!("SNR {} dB is not usable", self.snr_db));
        }
        if !(self.sound_speed > 0.0 && self.sound_speed.is_finite()) {
            return config("sound speed must be positive");
        }
        if !(self.rel_speed.is_finite() && self.rel_speed.abs() < self.sound_speed) {
            return config("relative speed must be below the sound speed");
        }
        if !self.sto_samples.is_finite() {
            return config("symbol time offset must be finite");
        }
        if let SnrReference::PerSymbol { samples: 0 } = self.snr_reference {
            return config("symbol length for the SNR reference must be positive");
        }
        Ok(())
    }

    /// Time-scaling factor `v / c`.
    pub fn doppler_factor(&self) -> f64 {
        self.rel_speed / self.sound_speed
    }

    /// Noise standard deviation for a multipath output `y`.
    pub fn noise_sigma(&self, y: &[f64]) -> f64 {
        if self.snr_db == f64::INFINITY || y.is_empty() {
            return 0.0;
        }
        let snr = 10f64.powf(self.snr_db / 10.0);
        let e = energy(y);
        let variance = match self.snr_reference {
            SnrReference::PerSample => e / y.len() as f64 / snr,
            SnrReference::PerSymbol { samples } => {
                let es = e * samples as f64 / y.len() as f64;
                es / (2.0 * snr)
            }
        };
        variance.sqrt()
    }
}

/// Passes `x` through the tapped delay line only.
pub fn multipath(x: &[f64], h: &ChannelRealization) -> Result<Vec<f64>> {
    let d = h.tap_delay_samples()?;
    let n = x.len();
    let mut y = vec![0.0; n];
    if h.is_static_real() {
        for k in 0..h.num_taps() {
            let g = h.gain(k, 0).re;
            let off = k * d;
            if off >= n {
                break;
            }
            for (o, v) in y[off..].iter_mut().zip(x) {
                *o += g * v;
            }
        }
        return Ok(y);
    }
    let xa = analytic_signal(x);
    for (t, o) in y.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..h.num_taps() {
            let off = k * d;
            if off > t {
                break;
            }
            acc += h.gain(k, t) * xa[t - off];
        }
        *o = acc.re;
    }
    Ok(y)
}

/// Full channel: multipath, Doppler time scaling, timing offset, then
/// additive white Gaussian noise drawn from `seed`.
///
/// The output keeps the input length.
pub fn apply_channel(x: &Waveform, h: &ChannelRealization, imp: &ImpairmentSpec, seed: u64) -> Result<Waveform> {
    imp.validate()?;
    if (x.fs - h.fs()).abs() > 1e-9 * x.fs {
        return config(format!(
            "waveform rate {} Hz differs from channel rate {} Hz",
            x.fs,
            h.fs()
        ));
    }
    let y = multipath(&x.samples, h)?;
    let sigma = imp.noise_sigma(&y);
    let y = apply_doppler_samples(&y, imp.doppler_factor())?;
    let mut y = fractional_shift(&y, imp.sto_samples);
    if sigma > 0.0 {
        let mut r = rng::stream(seed, &[0x4e4f_4953_45]);
        for v in &mut y {
            let n: f64 = StandardNormal.sample(&mut r);
            *v += sigma * n;
        }
    }
    Waveform::new(y, x.fs)
}

/// `r(k) = w(k + delta)` with band-limited interpolation and zero fill.
pub fn apply_sto(w: &Waveform, delta: f64) -> Result<Waveform> {
    if !(delta.is_finite() && delta.abs() < w.len() as f64) {
        return input(format!("timing offset {delta} exceeds the waveform length"));
    }
    Ok(Waveform { samples: fractional_shift(&w.samples, delta), fs: w.fs })
}

fn apply_doppler_samples(x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha.is_finite() && alpha.abs() < 0.1) {
        return config(format!("Doppler factor {alpha} outside |α| < 0.1"));
    }
    Ok(time_scale(x, 1.0 + alpha))
}

/// `r(t) = w((1 + α)·t)`, truncated or zero-padded to the input length.
pub fn apply_doppler(w: &Waveform, alpha: f64) -> Result<Waveform> {
    Ok(Waveform { samples: apply_doppler_samples(&w.samples, alpha)?, fs: w.fs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::fft_forward;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn wf(v: Vec<f64>) -> Waveform {
        Waveform::new(v, 1000.0).unwrap()
    }

    #[test]
    fn identity_channel_passes_through() {
        let x = wf((0..64).map(|k| (k as f64 * 0.3).sin()).collect());
        let h = ChannelRealization::identity(1000.0);
        let y = apply_channel(&x, &h, &ImpairmentSpec::default(), 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn two_tap_impulse_response() {
        let mut imp = vec![0.0; 8];
        imp[0] = 1.0;
        let h = ChannelRealization::from_static_taps(
            &[Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)],
            1e-3,
            1000.0,
            ChannelMeta::named("test"),
        )
        .unwrap();
        let y = apply_channel(&wf(imp), &h, &ImpairmentSpec::default(), 0).unwrap();
        assert_eq!(y.samples, vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn complex_path_matches_real_path_for_real_taps() {
        // Force the analytic-signal path with a time-varying but real channel
        // whose gains are all equal.
        let x: Vec<f64> = (0..256).map(|k| (k as f64 * 0.71).cos() * (k as f64 * 0.05).sin()).collect();
        let taps = vec![Complex32::new(0.8, 0.0), Complex32::new(0.8, 0.0), Complex32::new(-0.3, 0.0), Complex32::new(-0.3, 0.0)];
        let h = ChannelRealization::new(taps, 2, 2, 3e-3, 1000.0, ChannelMeta::named("t")).unwrap();
        let hs = ChannelRealization::from_static_taps(
            &[Complex64::new(0.8, 0.0), Complex64::new(-0.3, 0.0)],
            3e-3,
            1000.0,
            ChannelMeta::named("t"),
        )
        .unwrap();
        let mut h_varying = h.clone();
        h_varying.taps[1] = Complex32::new(0.8, 1e-30);
        let a = multipath(&x, &h_varying).unwrap();
        let b = multipath(&x, &hs).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_db_noise_doubles_power() {
        let n = 100_000;
        let x = wf((0..n).map(|k| (2.0 * PI * 0.0123 * k as f64).cos()).collect());
        let h = ChannelRealization::identity(1000.0);
        let imp = ImpairmentSpec { snr_db: 0.0, ..Default::default() };
        let y = apply_channel(&x, &h, &imp, 5).unwrap();
        let ratio = y.energy() / x.energy();
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn nan_snr_is_rejected() {
        let x = wf(vec![1.0; 4]);
        let h = ChannelRealization::identity(1000.0);
        let imp = ImpairmentSpec { snr_db: f64::NAN, ..Default::default() };
        assert!(matches!(apply_channel(&x, &h, &imp, 0), Err(crate::Error::Config(_))));
    }

    #[test]
    fn sto_semantics() {
        let x = wf(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(apply_sto(&x, 0.0).unwrap(), x);
        assert_eq!(apply_sto(&x, 3.0).unwrap().samples, vec![4.0, 5.0, 0.0, 0.0, 0.0]);
        assert!(apply_sto(&x, 5.0).is_err());
    }

    #[test]
    fn fifteen_metres_per_second_is_one_percent() {
        let imp = ImpairmentSpec { rel_speed: 15.0, ..Default::default() };
        assert!((imp.doppler_factor() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn doppler_moves_tone_peak() {
        let n = 1 << 16;
        let fs = 96_000.0;
        let f0 = 9_000.0;
        let x = Waveform::new((0..n).map(|k| (2.0 * PI * f0 * k as f64 / fs).cos()).collect(), fs).unwrap();
        assert_eq!(apply_doppler(&x, 0.0).unwrap(), x);
        let y = apply_doppler(&x, 0.01).unwrap();
        let mut buf: Vec<Complex64> = y.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_forward(n).process(&mut buf);
        let k = (0..n / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
        let expected = 1.01 * f0 / fs * n as f64;
        assert!((k as f64 - expected).abs() <= 1.0, "bin {k} vs {expected}");
        assert!(apply_doppler(&x, 0.2).is_err());
    }

    fn burst(seed: u64) -> Vec<f64> {
        // band-limited burst with silent margins
        let fs = 96_000.0;
        (0..4096)
            .map(|k| {
                if (512..3584).contains(&k) {
                    let t = k as f64 / fs;
                    let env = (PI * (k - 512) as f64 / 3072.0).sin().powi(2);
                    env * (2.0 * PI * (7000.0 + 37.0 * seed as f64) * t).cos()
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn inverse_doppler_restores_waveform() {
        for alpha in [0.01, -0.02, 0.05] {
            let w = Waveform::new(burst(3), 96_000.0).unwrap();
            let there = apply_doppler(&w, alpha).unwrap();
            let back = apply_doppler(&there, -alpha / (1.0 + alpha)).unwrap();
            let err: f64 = back.samples.iter().zip(&w.samples).map(|(a, b)| (a - b).powi(2)).sum();
            let rel = (err / w.energy()).sqrt();
            assert!(rel < 0.01, "alpha {alpha}: rel err {rel}");
        }
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let x = wf(burst(1));
        let h = ChannelRealization::identity(1000.0);
        let imp = ImpairmentSpec { snr_db: 3.0, ..Default::default() };
        let a = apply_channel(&x, &h, &imp, 42).unwrap();
        let b = apply_channel(&x, &h, &imp, 42).unwrap();
        let c = apply_channel(&x, &h, &imp, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn channel_is_linear_without_noise(
            a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000,
        ) {
            let cfg = RayleighModelConfig { ts: 2e-3, ..RayleighModelConfig::for_bandwidth(6000.0, 25.0) };
            let h = rayleigh_cir(&cfg, 0.3, 1000.0, seed).unwrap();
            let x: Vec<f64> = (0..300).map(|k| ((k as u64 * (seed + 3)) as f64 * 0.37).sin()).collect();
            let y: Vec<f64> = (0..300).map(|k| (k as f64 * 0.11 + seed as f64).cos()).collect();
            let (x, y) = (&x[..], &y[..]);
            let mix: Vec<f64> = x.iter().zip(y).map(|(u, v)| a * u + b * v).collect();
            let imp = ImpairmentSpec { sto_samples: 1.5, rel_speed: 3.0, ..Default::default() };
            let fx = apply_channel(&Waveform::new(x.to_vec(), 1000.0).unwrap(), &h, &imp, 0).unwrap();
            let fy = apply_channel(&Waveform::new(y.to_vec(), 1000.0).unwrap(), &h, &imp, 0).unwrap();
            let fm = apply_channel(&Waveform::new(mix, 1000.0).unwrap(), &h, &imp, 0).unwrap();
            for k in 0..300 {
                let lin = a * fx.samples[k] + b * fy.samples[k];
                prop_assert!((fm.samples[k] - lin).abs() < 1e-9);
            }
        }
    }
}
