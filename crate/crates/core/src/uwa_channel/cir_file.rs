//! `UWAC` channel-impulse-response files.
//!
//! Layout (little-endian): magic `UWAC`, version `u16 = 1`, tap count
//! `u32`, time steps `u64`, `Ts` as `f64` seconds, metadata as a `u32` pair
//! count followed by `u32`-length-prefixed UTF-8 `key=value` strings, then
//! the gains as interleaved `f32` (re, im), tap-major. The sample rate of the
//! time axis travels in the `fs_hz` metadata key.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex32;

use super::{ChannelMeta, ChannelRealization};
use crate::error::Result;
use crate::wire::{Reader, Writer};

const MAGIC: &[u8; 4] = b"UWAC";

fn meta_pairs(h: &ChannelRealization) -> Vec<(String, String)> {
    let m = &h.meta;
    let mut pairs = vec![("model".to_string(), m.model.clone())];
    let opt = [
        ("environment", &m.environment),
        ("range", &m.range),
        ("water_depth", &m.water_depth),
        ("tx_deployment", &m.tx_deployment),
        ("rx_deployment", &m.rx_deployment),
    ];
    for (k, v) in opt {
        if let Some(v) = v {
            pairs.push((k.to_string(), v.clone()));
        }
    }
    if let Some(d) = m.doppler_coverage_hz {
        pairs.push(("doppler_coverage_hz".into(), format!("{d:?}")));
    }
    pairs.push(("fs_hz".into(), format!("{:?}", h.fs())));
    pairs.extend(m.extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    pairs
}

pub fn encode_cir(h: &ChannelRealization) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u16(1);
    w.u32(h.num_taps() as u32);
    w.u64(h.steps() as u64);
    w.f64(h.ts());
    let pairs = meta_pairs(h);
    w.u32(pairs.len() as u32);
    for (k, v) in pairs {
        let s = format!("{k}={v}");
        w.u32(s.len() as u32);
        w.bytes(s.as_bytes());
    }
    for g in h.taps() {
        w.f32(g.re);
        w.f32(g.im);
    }
    w.buf
}

pub fn decode_cir(data: &[u8]) -> Result<ChannelRealization> {
    let mut r = Reader::new(data);
    r.magic(MAGIC)?;
    r.version(1)?;
    let num_taps = r.u32()? as usize;
    let steps = r.u64()? as usize;
    let ts = r.f64()?;
    let count = r.u32()?;
    let mut meta = ChannelMeta::default();
    let mut fs = None;
    let mut extra = BTreeMap::new();
    for _ in 0..count {
        let at = r.offset();
        let len = r.u32()? as usize;
        let s = r.utf8(len)?;
        let Some((k, v)) = s.split_once('=') else {
            return Err(crate::Error::Parse { offset: at, message: format!("metadata entry {s:?} lacks '='") });
        };
        let v = v.to_string();
        let number = |v: &str| {
            v.parse::<f64>().map_err(|_| crate::Error::Parse {
                offset: at,
                message: format!("metadata {k} is not a number: {v:?}"),
            })
        };
        match k {
            "model" => meta.model = v,
            "environment" => meta.environment = Some(v),
            "range" => meta.range = Some(v),
            "water_depth" => meta.water_depth = Some(v),
            "tx_deployment" => meta.tx_deployment = Some(v),
            "rx_deployment" => meta.rx_deployment = Some(v),
            "doppler_coverage_hz" => meta.doppler_coverage_hz = Some(number(&v)?),
            "fs_hz" => fs = Some(number(&v)?),
            _ => {
                extra.insert(k.to_string(), v);
            }
        }
    }
    meta.extra = extra;
    let Some(fs) = fs else {
        return r.error("metadata lacks fs_hz");
    };
    let total = num_taps.saturating_mul(steps);
    if r.remaining() / 8 < total {
        return r.error(format!("truncated: {num_taps} taps × {steps} steps announced"));
    }
    let mut taps = Vec::with_capacity(total);
    for _ in 0..total {
        let re = r.f32()?;
        let im = r.f32()?;
        taps.push(Complex32::new(re, im));
    }
    r.finish()?;
    ChannelRealization::new(taps, num_taps, steps, ts, fs, meta)
}

pub fn save_cir(path: &Path, h: &ChannelRealization) -> Result<()> {
    std::fs::write(path, encode_cir(h))?;
    Ok(())
}

pub fn load_cir(path: &Path) -> Result<ChannelRealization> {
    decode_cir(&std::fs::read(path)?)
}
