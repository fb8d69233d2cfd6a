//! `UWDS` dataset files.
//!
//! Little-endian: magic, `u16` version, `u32` N₁, `u64` record count, `u16` λ;
//! then per record `f32`×N₁ samples, `u8` label, `f32` SNR (dB), `f32` STO,
//! `f32` speed, `u16` tag id; then the tag table (`u16` count, each tag a
//! `u16` length and UTF-8 bytes); then `u64` train count and the generating
//! spec as `u32`-length-prefixed JSON.

use std::path::Path;

use super::{Dataset, DatasetSpec, SymbolRecord};
use crate::error::{Error, Result};
use crate::wire::{Reader, Writer};

const MAGIC: &[u8; 4] = b"UWDS";
const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;
/// SNR, STO, speed and tag id.
pub const META_LEN: usize = 14;

pub fn encode_dataset(d: &Dataset) -> Result<Vec<u8>> {
    let n1 = d.n1();
    let count = d.train.len() + d.test.len();
    let lambda = u16::try_from(d.spec.chirp.lambda).map_err(|_| Error::Config("lambda exceeds u16".into()))?;
    let n1_u32 = u32::try_from(n1).map_err(|_| Error::Config("N1 exceeds u32".into()))?;
    let tag_count = u16::try_from(d.tags.len()).map_err(|_| Error::Config("too many channel tags".into()))?;
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u32(n1_u32);
    w.u64(count as u64);
    w.u16(lambda);
    for r in d.train.iter().chain(&d.test) {
        if r.samples.len() != n1 {
            return Err(Error::Input(format!("record has {} samples, expected {n1}", r.samples.len())));
        }
        if r.label > 1 || r.tag as usize >= d.tags.len() {
            return Err(Error::Input("record label or tag out of range".into()));
        }
        for &v in &r.samples {
            w.f32(v);
        }
        w.u8(r.label);
        w.f32(r.snr_db);
        w.f32(r.sto_samples);
        w.f32(r.rel_speed);
        w.u16(r.tag);
    }
    w.u16(tag_count);
    for t in &d.tags {
        let len = u16::try_from(t.len()).map_err(|_| Error::Config("channel tag too long".into()))?;
        w.u16(len);
        w.bytes(t.as_bytes());
    }
    w.u64(d.train.len() as u64);
    let json = serde_json::to_vec(&d.spec).map_err(|e| Error::Config(e.to_string()))?;
    w.u32(json.len() as u32);
    w.bytes(&json);
    Ok(w.buf)
}

pub fn decode_dataset(data: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(data);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let n1 = r.u32()? as usize;
    let count = r.u64()?;
    let lambda = r.u16()? as usize;
    let record_len = 4 * n1 + 1 + META_LEN;
    if (r.remaining() as u64) < count.saturating_mul(record_len as u64) {
        return r.error(format!("truncated: {count} records of {record_len} bytes announced"));
    }
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let samples = (0..n1).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let at = r.offset();
        let label = r.u8()?;
        if label > 1 {
            return Err(Error::Parse { offset: at, message: format!("label {label} is not a bit") });
        }
        records.push(SymbolRecord {
            samples,
            label,
            snr_db: r.f32()?,
            sto_samples: r.f32()?,
            rel_speed: r.f32()?,
            tag: r.u16()?,
        });
    }
    let tag_count = r.u16()? as usize;
    let mut tags = Vec::with_capacity(tag_count);
    for _ in 0..tag_count {
        let len = r.u16()? as usize;
        tags.push(r.utf8(len)?);
    }
    if let Some(bad) = records.iter().find(|x| x.tag as usize >= tags.len()) {
        return r.error(format!("tag id {} outside a table of {}", bad.tag, tags.len()));
    }
    let at = r.offset();
    let train_count = r.u64()?;
    if train_count > count {
        return Err(Error::Parse { offset: at, message: format!("train count {train_count} exceeds {count} records") });
    }
    let len = r.u32()? as usize;
    let at = r.offset();
    let spec: DatasetSpec = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::Parse { offset: at, message: format!("spec: {e}") })?;
    r.finish()?;
    if spec.n1() != n1 || spec.chirp.lambda != lambda {
        return Err(Error::Parse { offset: at, message: "spec disagrees with the header".into() });
    }
    let test = records.split_off(train_count as usize);
    Ok(Dataset { spec, tags, train: records, test })
}

pub fn save_dataset(path: &Path, d: &Dataset) -> Result<()> {
    std::fs::write(path, encode_dataset(d)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&std::fs::read(path)?)
}
