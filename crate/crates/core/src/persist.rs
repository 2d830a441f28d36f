//! Shared binary container: magic, JSON header, little-endian f64 arrays.

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad file magic, expected {expected:?}")]
    Magic { expected: String },
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("truncated payload")]
    Truncated,
}

pub fn write_container<W: Write, H: Serialize>(
    mut w: W,
    magic: &[u8; 8],
    header: &H,
    arrays: &[&[f64]],
) -> Result<(), PersistError> {
    let header = serde_json::to_vec(header)?;
    w.write_all(magic)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&(arrays.len() as u64).to_le_bytes())?;
    for a in arrays {
        w.write_all(&(a.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(a.len() * 8);
        for x in *a {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn has_magic(bytes: &[u8], magic: &[u8; 8]) -> bool {
    bytes.len() >= 8 && &bytes[..8] == magic
}

pub fn read_container<H: DeserializeOwned>(
    bytes: &[u8],
    magic: &[u8; 8],
) -> Result<(H, Vec<Vec<f64>>), PersistError> {
    if !has_magic(bytes, magic) {
        return Err(PersistError::Magic {
            expected: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let mut r = &bytes[8..];
    let header_len = read_u64(&mut r)? as usize;
    if r.len() < header_len {
        return Err(PersistError::Truncated);
    }
    let header = serde_json::from_slice(&r[..header_len])?;
    r = &r[header_len..];
    let n = read_u64(&mut r)? as usize;
    let mut arrays = Vec::with_capacity(n);
    for _ in 0..n {
        let len = read_u64(&mut r)? as usize;
        if r.len() < len * 8 {
            return Err(PersistError::Truncated);
        }
        let a = r[..len * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        r = &r[len * 8..];
        arrays.push(a);
    }
    Ok((header, arrays))
}

/// Byte sections under one magic, each prefixed by its length.
pub fn write_sections<W: Write>(
    mut w: W,
    magic: &[u8; 8],
    sections: &[&[u8]],
) -> Result<(), PersistError> {
    w.write_all(magic)?;
    w.write_all(&(sections.len() as u64).to_le_bytes())?;
    for s in sections {
        w.write_all(&(s.len() as u64).to_le_bytes())?;
        w.write_all(s)?;
    }
    Ok(())
}

pub fn read_sections<'a>(bytes: &'a [u8], magic: &[u8; 8]) -> Result<Vec<&'a [u8]>, PersistError> {
    if !has_magic(bytes, magic) {
        return Err(PersistError::Magic {
            expected: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let mut r = &bytes[8..];
    let n = read_u64(&mut r)? as usize;
    let mut out = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let len = read_u64(&mut r)? as usize;
        if r.len() < len {
            return Err(PersistError::Truncated);
        }
        out.push(&r[..len]);
        r = &r[len..];
    }
    Ok(out)
}

fn read_u64(r: &mut &[u8]) -> Result<u64, PersistError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| PersistError::Truncated)?;
    Ok(u64::from_le_bytes(b))
}
