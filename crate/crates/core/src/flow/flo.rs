//! Middlebury `.flo`: magic f32 202021.25, i32 width, i32 height, then
//! row-major interleaved f32 `(u, v)` pairs, all little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;
pub const FLO_HEADER_LEN: usize = 12;

pub fn encode_flo(flow: &FlowField) -> Result<Vec<u8>> {
    if flow.u().iter().chain(flow.v()).any(|x| !x.is_finite() || !(*x as f32).is_finite()) {
        return Err(Error::InvalidInput("cannot write non-finite flow".into()));
    }
    let mut out = Vec::with_capacity(FLO_HEADER_LEN + 8 * flow.u().len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (u, v) in flow.u().iter().zip(flow.v()) {
        out.extend_from_slice(&(*u as f32).to_le_bytes());
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_flo(bytes: &[u8]) -> std::result::Result<FlowField, String> {
    if bytes.len() < FLO_HEADER_LEN {
        return Err("truncated header".into());
    }
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let i32_at = |o: usize| i32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    if f32_at(0) != FLO_MAGIC {
        return Err("bad magic".into());
    }
    let (w, h) = (i32_at(4), i32_at(8));
    if w <= 0 || h <= 0 {
        return Err(format!("invalid dimensions {}x{}", w, h));
    }
    let n = w as usize * h as usize;
    if bytes.len() < FLO_HEADER_LEN + 8 * n {
        return Err("truncated file".into());
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for k in 0..n {
        u.push(f32_at(FLO_HEADER_LEN + 8 * k) as f64);
        v.push(f32_at(FLO_HEADER_LEN + 8 * k + 4) as f64);
    }
    FlowField::new(w as usize, h as usize, u, v).map_err(|e| e.to_string())
}

/// Values are stored as f32; fields already at f32 precision round-trip exactly.
pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_flo(flow)?;
    let mut f = fs::File::create(path.as_ref())?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_flo(&bytes).map_err(|msg| Error::Format { path: path.to_path_buf(), msg })
}
