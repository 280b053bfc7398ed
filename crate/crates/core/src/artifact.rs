//! Versioned binary container for persisted models.
//!
//! Layout: magic `SPGA`, format version (u16 LE), kind tag (u16 LE length +
//! UTF-8), payload length (u64 LE), bincode payload, SHA-256 of the payload.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SPGA";
pub const FORMAT_VERSION: u16 = 1;

pub fn encode<T: Serialize>(kind: &str, value: &T) -> Result<Vec<u8>> {
    let payload = bincode::serialize(value).map_err(|e| Error::Artifact(format!("encode {kind}: {e}")))?;
    let mut out = Vec::with_capacity(payload.len() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(kind.len() as u16).to_le_bytes());
    out.extend_from_slice(kind.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Artifact(format!("truncated artifact ({} bytes)", self.bytes.len()))
        })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }
}

pub fn decode<T: DeserializeOwned>(kind: &str, bytes: &[u8]) -> Result<T> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Artifact("not an artifact file (bad magic)".into()));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Artifact(format!(
            "artifact format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let klen = u16::from_le_bytes(c.take(2)?.try_into().unwrap()) as usize;
    let found = std::str::from_utf8(c.take(klen)?).map_err(|_| Error::Artifact("corrupt kind tag".into()))?;
    if found != kind {
        return Err(Error::Artifact(format!("artifact holds `{found}`, expected `{kind}`")));
    }
    let plen = u64::from_le_bytes(c.take(8)?.try_into().unwrap());
    let plen = usize::try_from(plen).map_err(|_| Error::Artifact("payload too large".into()))?;
    let payload = c.take(plen)?;
    let digest = c.take(32)?;
    if Sha256::digest(payload).as_slice() != digest {
        return Err(Error::Artifact("checksum mismatch".into()));
    }
    bincode::deserialize(payload).map_err(|e| Error::Artifact(format!("decode {kind}: {e}")))
}

pub fn save<T: Serialize>(kind: &str, value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(kind, value)?).map_err(|e| Error::io(path, e))
}

pub fn load<T: DeserializeOwned>(kind: &str, path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(kind, &bytes)
}
