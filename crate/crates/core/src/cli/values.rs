//! Textual value types accepted on the command line.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::{ChannelSpec, Interval};
use crate::uwa_channel::RayleighModelConfig;

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(v)
}

/// A list of values: `v`, `a,b,c`, or the inclusive range `start:step:stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [one] => Ok(Grid(one.split(',').map(number).collect::<Result<_, _>>()?)),
            [a, step, b] => {
                let (a, step, b) = (number(a)?, number(step)?, number(b)?);
                if !(a.is_finite() && b.is_finite() && step.is_finite()) || step == 0.0 || (b - a) / step < 0.0 {
                    return Err(format!("range `{s}` never reaches its end"));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize + 1;
                if n > 1_000_000 {
                    return Err(format!("range `{s}` has too many points"));
                }
                Ok(Grid((0..n).map(|i| a + step * i as f64).collect()))
            }
            _ => Err(format!("`{s}`: expected v, a,b,c or start:step:stop")),
        }
    }
}

/// An interval `lo:hi`, or a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span(pub f64, pub f64);

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let (lo, hi) = match parts.as_slice() {
            [v] => (number(v)?, number(v)?),
            [a, b] => (number(a)?, number(b)?),
            _ => return Err(format!("`{s}`: expected v or lo:hi")),
        };
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(format!("`{s}` is not a finite, ordered interval"));
        }
        Ok(Span(lo, hi))
    }
}

impl From<Span> for Interval {
    fn from(s: Span) -> Self {
        Interval::new(s.0, s.1)
    }
}

/// `identity`, `rayleigh`, or `cir:<path>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelArg {
    Identity,
    Rayleigh,
    Cir(PathBuf),
}

impl FromStr for ChannelArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(Self::Identity),
            "rayleigh" => Ok(Self::Rayleigh),
            _ => match s.strip_prefix("cir:") {
                Some(p) if !p.is_empty() => Ok(Self::Cir(PathBuf::from(p))),
                _ => Err(format!("unknown channel `{s}` (identity, rayleigh, cir:<path>)")),
            },
        }
    }
}

impl ChannelArg {
    pub fn to_spec(&self, bandwidth: f64, fd: f64) -> ChannelSpec {
        match self {
            Self::Identity => ChannelSpec::Identity,
            Self::Rayleigh => ChannelSpec::Rayleigh(RayleighModelConfig::for_bandwidth(bandwidth, fd)),
            Self::Cir(p) => ChannelSpec::Measured { path: p.clone() },
        }
    }
}

/// Comma-separated non-negative integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sizes(pub Vec<usize>);

impl FromStr for Sizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("`{p}` is not a count")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Sizes(v))
    }
}
