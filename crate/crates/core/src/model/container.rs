// SPDX-License-Identifier: Apache-2.0
//! Compressed weight container.
//!
//! ```text
//! "BCSW" 0x01
//! per layer:
//!   name_len: u16 LE, name: [u8; name_len]
//!   group_size: u8, mode: u8 (0 dense, 1 BCS)
//!   element_count: u32 LE, group_count: u32 LE
//!   payload
//! ```
//!
//! Dense payload is `element_count` raw int8 bytes. BCS payload is, per
//! group, one index byte followed by `ceil(G/8)` bytes for every set index
//! bit, scanned sign column first and then significance 6 down to 0.

use std::path::Path;

use crate::codec::{CompressedGroup, CompressedLayer, GroupSize, Mode, Payload, ZeroColumnIndex};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BCSW";
const VERSION: u8 = 0x01;

pub fn encode_container(layers: &[CompressedLayer]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for layer in layers {
        let name = layer.name.as_bytes();
        assert!(name.len() <= u16::MAX as usize, "layer name too long");
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(layer.group_size.get() as u8);
        out.push(layer.mode() as u8);
        out.extend_from_slice(&layer.element_count.to_le_bytes());
        out.extend_from_slice(&layer.group_count.to_le_bytes());
        match &layer.payload {
            Payload::Dense(values) => out.extend(values.iter().map(|&v| v as u8)),
            Payload::Bcs(groups) => {
                for g in groups {
                    out.push(g.index.bits());
                    out.extend_from_slice(&g.columns);
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "{what} at offset {} needs {n} bytes, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

pub fn decode_container(bytes: &[u8]) -> Result<Vec<CompressedLayer>> {
    if bytes.len() < 5 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let mut r = Reader { buf: bytes, pos: 5 };
    let mut layers = Vec::new();
    while !r.done() {
        let name_len = r.u16("name length")? as usize;
        let name = String::from_utf8(r.take(name_len, "layer name")?.to_vec())
            .map_err(|_| Error::Truncated("layer name is not UTF-8".into()))?;
        let group_size = GroupSize::new(r.u8("group size")? as usize)?;
        let mode_byte = r.u8("mode")?;
        let mode = Mode::from_byte(mode_byte)
            .ok_or_else(|| Error::Truncated(format!("unknown mode byte {mode_byte}")))?;
        let element_count = r.u32("element count")?;
        let group_count = r.u32("group count")?;
        let payload = match mode {
            Mode::Dense => Payload::Dense(
                r.take(element_count as usize, "dense payload")?
                    .iter()
                    .map(|&b| b as i8)
                    .collect(),
            ),
            Mode::Bcs => {
                let per = group_size.column_bytes();
                let mut groups = Vec::with_capacity(group_count as usize);
                for _ in 0..group_count {
                    let index = ZeroColumnIndex(r.u8("group index")?);
                    let n = index.nonzero_columns() as usize * per;
                    groups.push(CompressedGroup {
                        index,
                        columns: r.take(n, "group columns")?.to_vec(),
                    });
                }
                Payload::Bcs(groups)
            }
        };
        layers.push(CompressedLayer {
            name,
            group_size,
            element_count,
            group_count,
            payload,
        });
    }
    Ok(layers)
}

pub fn write_compressed(path: impl AsRef<Path>, layers: &[CompressedLayer]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_container(layers)).map_err(|e| Error::io(path, e))
}

pub fn read_compressed(path: impl AsRef<Path>) -> Result<Vec<CompressedLayer>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes)
}
