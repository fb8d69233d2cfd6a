//! Signal-processing primitives: windowed-sinc interpolation, analytic
//! signals and a couple of statistics helpers used by the receivers.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Length of the interpolation kernel in taps.
pub const SINC_TAPS: usize = 64;
const HALF: isize = (SINC_TAPS / 2) as isize;
const PHASES: usize = 512;
/// Kernel cutoff as a fraction of Nyquist. Leaves headroom for 10% time
/// compression without aliasing.
const CUTOFF: f64 = 0.9;

struct SincTable {
    // (PHASES + 1) rows of SINC_TAPS coefficients.
    rows: Vec<f64>,
}

fn blackman(x: f64) -> f64 {
    // x in [-1, 1]
    let t = PI * (x + 1.0);
    0.42 - 0.5 * t.cos() + 0.08 * (2.0 * t).cos()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

impl SincTable {
    fn build() -> Self {
        let mut rows = Vec::with_capacity((PHASES + 1) * SINC_TAPS);
        for ph in 0..=PHASES {
            let frac = ph as f64 / PHASES as f64;
            let start = rows.len();
            for m in 0..SINC_TAPS {
                // tap m sits at integer offset (m - HALF + 1) from floor(p)
                let d = frac - (m as f64 - (HALF - 1) as f64);
                let w = blackman(d / HALF as f64);
                rows.push(CUTOFF * sinc(CUTOFF * d) * w);
            }
            let sum: f64 = rows[start..].iter().sum();
            for c in &mut rows[start..] {
                *c /= sum;
            }
        }
        Self { rows }
    }

    fn row(&self, ph: usize) -> &[f64] {
        &self.rows[ph * SINC_TAPS..(ph + 1) * SINC_TAPS]
    }
}

fn table() -> &'static SincTable {
    static TABLE: OnceLock<SincTable> = OnceLock::new();
    TABLE.get_or_init(SincTable::build)
}

/// Band-limited value of `x` at fractional index `pos`; samples outside
/// the slice are zero.
pub fn interpolate_at(x: &[f64], pos: f64) -> f64 {
    let n = x.len() as isize;
    let base = pos.floor();
    let frac = pos - base;
    let base = base as isize;
    if base + HALF < 0 || base - HALF + 1 >= n {
        return 0.0;
    }
    let fph = frac * PHASES as f64;
    let ph = (fph as usize).min(PHASES - 1);
    let w = fph - ph as f64;
    let t = table();
    let (r0, r1) = (t.row(ph), t.row(ph + 1));
    let first = base - HALF + 1;
    let mut acc = 0.0;
    for m in 0..SINC_TAPS {
        let j = first + m as isize;
        if j >= 0 && j < n {
            let c = r0[m] + w * (r1[m] - r0[m]);
            acc += c * x[j as usize];
        }
    }
    acc
}

/// `out[k] = x(k + delta)`, zero-filled outside the input.
pub fn fractional_shift(x: &[f64], delta: f64) -> Vec<f64> {
    if delta == 0.0 {
        return x.to_vec();
    }
    if delta.fract() == 0.0 {
        let d = delta as isize;
        let n = x.len() as isize;
        return (0..n)
            .map(|k| {
                let j = k + d;
                if (0..n).contains(&j) {
                    x[j as usize]
                } else {
                    0.0
                }
            })
            .collect();
    }
    (0..x.len())
        .map(|k| interpolate_at(x, k as f64 + delta))
        .collect()
}

/// `out[n] = x(n * ratio)` for `n` in `0..x.len()`.
pub fn time_scale(x: &[f64], ratio: f64) -> Vec<f64> {
    if ratio == 1.0 {
        return x.to_vec();
    }
    (0..x.len())
        .map(|n| interpolate_at(x, n as f64 * ratio))
        .collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn fft_forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub fn fft_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Analytic signal `x + j·H{x}`; its real part reproduces `x`.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= gain / n as f64;
    }
    fft_inverse(n).process(&mut buf);
    buf
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Half-width of the 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_half_width(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
