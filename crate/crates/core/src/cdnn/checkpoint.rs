//! `CDNN` checkpoints: magic, version `u16 = 1`, layer count `u8`, layer
//! sizes `u32` each, then every parameter as `f64` in canonical order.

use std::path::Path;

use super::{Layout, MlpParams};
use crate::error::{config, Result};
use crate::wire::{Reader, Writer};

const MAGIC: &[u8; 4] = b"CDNN";

pub fn encode_checkpoint(p: &MlpParams) -> Result<Vec<u8>> {
    let sizes = p.layout().sizes();
    if sizes.len() > u8::MAX as usize {
        return config("too many layers for the checkpoint format");
    }
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u16(1);
    w.u8(sizes.len() as u8);
    for &s in sizes {
        w.u32(s as u32);
    }
    for &v in p.values() {
        w.f64(v);
    }
    Ok(w.buf)
}

pub fn decode_checkpoint(data: &[u8]) -> Result<MlpParams> {
    let mut r = Reader::new(data);
    r.magic(MAGIC)?;
    r.version(1)?;
    let count = r.u8()? as usize;
    let sizes = (0..count)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let layout = match Layout::new(&sizes) {
        Ok(l) => l,
        Err(e) => return r.error(format!("invalid layer sizes: {e}")),
    };
    if r.remaining() != 8 * layout.num_params() {
        return r.error(format!(
            "expected {} parameter bytes, found {}",
            8 * layout.num_params(),
            r.remaining()
        ));
    }
    let values = (0..layout.num_params())
        .map(|_| r.f64())
        .collect::<Result<Vec<_>>>()?;
    MlpParams::from_values(layout, values)
}

pub fn save_checkpoint(path: &Path, p: &MlpParams) -> Result<()> {
    std::fs::write(path, encode_checkpoint(p)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MlpParams> {
    decode_checkpoint(&std::fs::read(path)?)
}
