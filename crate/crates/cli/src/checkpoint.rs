//! Flat parameter checkpoints: `"QFCN"`, `u32` version, `u64` count, then
//! `count` little-endian `f64` values.

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"QFCN";
pub const VERSION: u32 = 1;
const HEADER: usize = 16;

pub fn encode(params: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(path: &Path, bytes: &[u8]) -> CliResult<Vec<f64>> {
    let format = |message: String| CliError::Format { path: path.to_path_buf(), message };
    if bytes.len() < HEADER {
        return Err(CliError::Truncated {
            path: path.to_path_buf(),
            expected: HEADER as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(format(format!("bad magic {:?}", &bytes[..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(format(format!("unsupported checkpoint version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let expected = HEADER as u64 + 8 * count;
    if bytes.len() as u64 != expected {
        return Err(CliError::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Writes via a temporary file and rename, so an interrupted save never
/// replaces a good checkpoint with a partial one.
pub fn save(path: &Path, params: &[f64]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(params)).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> CliResult<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        let values = vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300, -7.25];
        save(&p, &values).unwrap();
        let back = load(&p).unwrap();
        assert_eq!(
            values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            back.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"QFCN");
        assert_eq!(bytes.len(), 16 + 8 * values.len());
    }

    #[test]
    fn corrupt_files_rejected() {
        let p = Path::new("c.bin");
        let mut bytes = encode(&[1.0, 2.0]);
        assert!(decode(p, &bytes[..20]).is_err());
        bytes[0] = b'X';
        assert!(decode(p, &bytes).is_err());
    }
}
