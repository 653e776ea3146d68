//! Versioned binary checkpoint files.
//!
//! A checkpoint bundles everything needed to resume training or run
//! inference: the flat key-value configuration (architecture, schedule,
//! and training hyperparameters), the model weights, optimizer moments,
//! and training counters. Counters and moments are stored as ordinary
//! named arrays (`state.step` as a one-element array, `opt.m.<param>` /
//! `opt.v.<param>` for the Adam moments) so the codec itself stays a
//! plain named-tensor container.
//!
//! # File layout
//!
//! All integers are little-endian. Arrays are 32-bit IEEE-754 floats in
//! row-major order. The layout is fixed so implementations in other
//! languages can read and write the same files:
//!
//! | offset | size | field |
//! |--------|------|-------|
//! | 0      | 4    | magic bytes `AQDF` |
//! | 4      | 4    | format version, `u32` (currently 1) |
//! | 8      | 32   | SHA-256 digest of the config text block |
//! | 40     | 4    | config text length `N`, `u32` |
//! | 44     | `N`  | config text, UTF-8 `key = value` lines |
//! | 44+`N` | 4    | array count `K`, `u32` |
//!
//! followed by `K` array records, each:
//!
//! | size | field |
//! |------|-------|
//! | 4    | name length, `u32` |
//! | …    | name, UTF-8 (dotted, e.g. `enc0.block0.norm1.gain`) |
//! | 4    | rank `R`, `u32` |
//! | 4·`R`| dimensions, `u32` each |
//! | 4·∏d | values, `f32`, row-major |
//!
//! The digest authenticates the config block: loading verifies it, and
//! inference compares it against the configuration it was asked to run
//! with, so a checkpoint can never silently be applied to a different
//! architecture or noise schedule. Saving the same state twice produces
//! byte-identical files; in-memory `f64` values are rounded to `f32`
//! once, at save time.

use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use sha2::{Digest, Sha256};

use crate::autodiff::ParamSet;
use crate::config::FlatConfig;
use crate::error::{Error, Result};

/// First four bytes of every checkpoint file.
pub const MAGIC: [u8; 4] = *b"AQDF";
/// Current format version.
pub const VERSION: u32 = 1;

/// SHA-256 digest of a config text block.
pub fn config_digest(text: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher.finalize().into()
}

/// Lowercase hex rendering of a digest, for logs and error messages.
pub fn digest_hex(digest: &[u8; 32]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// A decoded checkpoint: configuration plus named arrays.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: FlatConfig,
    pub arrays: ParamSet,
}

impl Checkpoint {
    pub fn new(config: FlatConfig, arrays: ParamSet) -> Self {
        Self { config, arrays }
    }

    /// Digest of the canonical config text, as stored in the header.
    pub fn digest(&self) -> [u8; 32] {
        config_digest(&self.config.to_text())
    }

    /// Serializes to the binary format described in the module docs.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let text = self.config.to_text();
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        put_u32(&mut out, VERSION);
        out.extend_from_slice(&config_digest(&text));
        put_u32(&mut out, as_u32(text.len(), "config text length")?);
        out.extend_from_slice(text.as_bytes());
        put_u32(&mut out, as_u32(self.arrays.len(), "array count")?);
        for (name, value) in self.arrays.iter() {
            put_u32(&mut out, as_u32(name.len(), "array name length")?);
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, as_u32(value.ndim(), "array rank")?);
            for &d in value.shape() {
                put_u32(&mut out, as_u32(d, "array dimension")?);
            }
            for &v in value.iter() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Decodes and validates a checkpoint from raw bytes.
    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic {magic:?}: not a checkpoint file"
            )));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (this build reads version {VERSION})"
            )));
        }
        let mut stored_digest = [0u8; 32];
        stored_digest.copy_from_slice(r.take(32, "config digest")?);
        let text_len = r.u32("config text length")? as usize;
        let text = std::str::from_utf8(r.take(text_len, "config text")?)
            .map_err(|_| Error::Checkpoint("config text is not valid UTF-8".into()))?
            .to_string();
        let actual = config_digest(&text);
        if actual != stored_digest {
            return Err(Error::Checkpoint(format!(
                "config digest mismatch: header says {}, text hashes to {} (file corrupt)",
                digest_hex(&stored_digest),
                digest_hex(&actual)
            )));
        }
        let config = FlatConfig::parse(&text)?;

        let count = r.u32("array count")? as usize;
        let mut arrays = ParamSet::new();
        for i in 0..count {
            let name_len = r.u32("array name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "array name")?)
                .map_err(|_| Error::Checkpoint(format!("array {i}: name is not valid UTF-8")))?
                .to_string();
            if arrays.contains(&name) {
                return Err(Error::Checkpoint(format!("duplicate array name {name:?}")));
            }
            let rank = r.u32("array rank")? as usize;
            let mut dims = Vec::with_capacity(rank);
            let mut elements: usize = 1;
            for _ in 0..rank {
                let d = r.u32("array dimension")? as usize;
                elements = elements.checked_mul(d).ok_or_else(|| {
                    Error::Checkpoint(format!("array {name:?}: element count overflows"))
                })?;
                dims.push(d);
            }
            let raw = r.take(4 * elements, "array values")?;
            let values: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let array = ArrayD::from_shape_vec(IxDyn(&dims), values)
                .map_err(|e| Error::Checkpoint(format!("array {name:?}: {e}")))?;
            arrays.insert(name, array);
        }
        if r.pos != buf.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after last array",
                buf.len() - r.pos
            )));
        }
        Ok(Self { config, arrays })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn as_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{what} {v} exceeds u32 range")))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let slice = &self.buf[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::Checkpoint(format!(
                "file truncated while reading {what} (need {n} bytes at offset {})",
                self.pos
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
