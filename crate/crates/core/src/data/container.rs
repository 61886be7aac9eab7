//! Shared framing for the binary files: 4-byte magic, `u32` version,
//! `u32` header length, UTF-8 JSON header, little-endian `f32` payload.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn encode<H: Serialize>(magic: [u8; 4], header: &H, payload: &[f32]) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(header)?;
    let header_len = u32::try_from(header.len())
        .map_err(|_| Error::Header("header exceeds 4 GiB".into()))?;
    let mut out = Vec::with_capacity(12 + header.len() + payload.len() * 4);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Splits a file into its parsed header and the raw payload bytes. Payload
/// length is validated by the caller, which knows the declared shape.
pub(crate) fn decode<H: DeserializeOwned>(magic: [u8; 4], bytes: &[u8]) -> Result<(H, &[u8])> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            section: "magic",
            needed: 4,
            available: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != magic {
        return Err(Error::BadMagic {
            expected: magic,
            found,
        });
    }
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            section: "preamble",
            needed: 12,
            available: bytes.len(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let rest = &bytes[12..];
    if rest.len() < header_len {
        return Err(Error::Truncated {
            section: "header",
            needed: header_len,
            available: rest.len(),
        });
    }
    let header = serde_json::from_slice(&rest[..header_len])
        .map_err(|e| Error::Header(e.to_string()))?;
    Ok((header, &rest[header_len..]))
}

/// Decodes exactly `count` little-endian `f32` values.
pub(crate) fn f32_payload(bytes: &[u8], count: usize) -> Result<Vec<f32>> {
    let needed = count * 4;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            section: "payload",
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::SizeMismatch {
            declared: needed,
            actual: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    f.flush()?;
    Ok(())
}
