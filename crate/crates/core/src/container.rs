//! Versioned binary container shared by checkpoint and dataset files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic       4 bytes
//! version     u16
//! count       u32                      number of sections
//! section*    name_len u16, name utf-8, payload_len u64, payload
//! digest      32 bytes                 SHA-256 of every preceding byte
//! ```
//!
//! Payload encodings are owned by the caller; [`PayloadWriter`] and
//! [`PayloadReader`] cover the primitives (u32/u64/f64 little-endian,
//! length-prefixed strings and tensors).

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numcore::Tensor;

const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub magic: [u8; 4],
    pub version: u16,
    pub sections: Vec<(String, Vec<u8>)>,
}

impl Container {
    pub fn new(magic: [u8; 4], version: u16) -> Self {
        Self {
            magic,
            version,
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, payload: Vec<u8>) {
        self.sections.push((name.to_string(), payload));
    }

    pub fn section(&self, name: &str) -> Result<&[u8]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_slice())
            .ok_or_else(|| Error::Integrity {
                offset: 0,
                message: format!("missing section `{name}`"),
            })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.magic);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, payload) in &self.sections {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(payload);
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Parses and verifies a container, rejecting other magics and versions.
    pub fn from_bytes(bytes: &[u8], magic: [u8; 4], version: u16) -> Result<Self> {
        let mut r = PayloadReader::new(bytes);
        let found_magic = r.take(4)?;
        if found_magic != magic {
            return Err(Error::Integrity {
                offset: 0,
                message: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(found_magic),
                    String::from_utf8_lossy(&magic)
                ),
            });
        }
        let found_version = r.u16()?;
        if found_version != version {
            return Err(Error::Version {
                found: found_version,
                expected: version,
            });
        }
        let count = r.u32()?;
        let mut sections = Vec::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let at = r.offset();
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Integrity {
                    offset: at as u64,
                    message: "section name is not utf-8".into(),
                })?
                .to_string();
            let len = r.u64()? as usize;
            let payload = r.take(len)?.to_vec();
            sections.push((name, payload));
        }
        let body_end = r.offset();
        let digest = r.take(DIGEST_LEN)?;
        if Sha256::digest(&bytes[..body_end]).as_slice() != digest {
            return Err(Error::Integrity {
                offset: body_end as u64,
                message: "checksum mismatch".into(),
            });
        }
        if r.offset() != bytes.len() {
            return Err(Error::Integrity {
                offset: r.offset() as u64,
                message: "trailing bytes after digest".into(),
            });
        }
        Ok(Self {
            magic,
            version,
            sections,
        })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension(format!(
            "{}.tmp",
            path.extension().and_then(|e| e.to_str()).unwrap_or("bin")
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path, magic: [u8; 4], version: u16) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, magic, version)
    }
}

#[derive(Debug, Default)]
pub struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64s(&mut self, vs: &[f64]) -> &mut Self {
        for v in vs {
            self.f64(*v);
        }
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    /// rank u32, dims u64 each, then row-major f64 values.
    pub fn tensor(&mut self, t: &Tensor) -> &mut Self {
        self.u32(t.rank() as u32);
        for &d in t.shape() {
            self.u64(d as u64);
        }
        self.f64s(t.data())
    }

    pub fn tensors<'a>(&mut self, ts: impl IntoIterator<Item = &'a Tensor>) -> &mut Self {
        let ts: Vec<&Tensor> = ts.into_iter().collect();
        self.u32(ts.len() as u32);
        for t in ts {
            self.tensor(t);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct PayloadReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            pos: 0,
            base: 0,
        }
    }

    /// Reader whose error offsets are reported relative to `base`.
    pub fn with_base(bytes: &'a [u8], base: usize) -> Self {
        Self { bytes, pos: 0, base }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Integrity {
                offset: (self.base + self.pos) as u64,
                message: format!("unexpected end of data: need {n} bytes, {} left", self.bytes.len() - self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u64()? as usize;
        let at = self.base + self.pos;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Integrity {
            offset: at as u64,
            message: "string is not utf-8".into(),
        })
    }

    pub fn tensor(&mut self) -> Result<Tensor> {
        let at = self.base + self.pos;
        let rank = self.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(Error::Integrity {
                offset: at as u64,
                message: format!("implausible tensor rank {rank}"),
            });
        }
        let shape = (0..rank).map(|_| self.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let n = match n {
            Some(n) if n > 0 && n * 8 <= self.bytes.len() - self.pos => n,
            _ => {
                return Err(Error::Integrity {
                    offset: at as u64,
                    message: format!("tensor shape {shape:?} does not fit the payload"),
                })
            }
        };
        let data = self.f64s(n)?;
        Tensor::new(shape, data)
    }

    pub fn tensors(&mut self) -> Result<Vec<Tensor>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.tensor()).collect()
    }
}
