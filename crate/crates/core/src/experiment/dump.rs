use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DUMP_MAGIC: &[u8; 8] = b"P4LNKDMP";
pub const DUMP_VERSION: u16 = 1;
const DTYPE_F64: u16 = 1;

/// Write `values` as little-endian f64 behind a 16-byte header:
/// magic (8), version (u16), dtype (u16), count (u32).
pub fn write_dump(path: &Path, values: &[f64]) -> Result<()> {
    let count = u32::try_from(values.len()).map_err(|_| Error::Format("dump longer than u32::MAX values".into()))?;
    let mut buf = Vec::with_capacity(16 + 8 * values.len());
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    buf.extend_from_slice(&DTYPE_F64.to_le_bytes());
    buf.extend_from_slice(&count.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != DUMP_MAGIC {
        return Err(Error::Format("not a dump file".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    let dtype = u16::from_le_bytes([bytes[10], bytes[11]]);
    if version != DUMP_VERSION || dtype != DTYPE_F64 {
        return Err(Error::Format(format!("unsupported dump version {version} / dtype {dtype}")));
    }
    let count = u32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]) as usize;
    let body = &bytes[16..];
    if body.len() != 8 * count {
        return Err(Error::Format(format!("dump holds {} bytes, header says {count} values", body.len())));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
