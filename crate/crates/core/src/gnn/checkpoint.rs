// SPDX-License-Identifier: Apache-2.0

//! Binary checkpoint: magic, version, dims, normalisation statistics,
//! parameters, trailing CRC-32 of everything before it. Little endian.

use super::{Dims, GnnParams, Layout, Model};
use crate::error::{Error, Result};
use crate::routegraph::FeatureStats;

const MAGIC: &[u8; 8] = b"RPGNNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(model: &Model) -> Vec<u8> {
    let p = model.params();
    let stats = model.stats().to_flat();
    let mut out = Vec::with_capacity(64 + 8 * (stats.len() + p.theta.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for d in p.dims.to_array() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(stats.len() as u32).to_le_bytes());
    for x in stats {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&(p.theta.len() as u64).to_le_bytes());
    for x in &p.theta {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::CheckpointCorrupt("unexpected end of data".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::CheckpointCorrupt("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::CheckpointCorrupt("bad magic".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::CheckpointCorrupt("checksum mismatch".into()));
    }
    let mut r = Reader {
        buf: body,
        at: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mut dims = [0usize; 8];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let dims = Dims::from_array(dims);
    let ns = r.u32()? as usize;
    let stats = FeatureStats::from_flat(&r.f64s(ns)?)?;
    let np = r.u64()? as usize;
    let layout = Layout::new(&dims);
    if np != layout.total {
        return Err(Error::CheckpointCorrupt(format!(
            "parameter count {np} does not match dims ({})",
            layout.total
        )));
    }
    let theta = r.f64s(np)?;
    if r.at != body.len() {
        return Err(Error::CheckpointCorrupt("trailing bytes".into()));
    }
    Ok(Model::new(GnnParams { dims, layout, theta }, stats))
}
