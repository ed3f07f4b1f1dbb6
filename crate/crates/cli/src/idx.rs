//! MNIST IDX files: big-endian headers followed by raw `u8` payloads.

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const SIDE: usize = 28;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnistSet {
    /// `count × 28 × 28` pixels, row-major.
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl MnistSet {
    pub fn new(images: Vec<u8>, labels: Vec<u8>) -> CliResult<Self> {
        if images.len() != labels.len() * SIDE * SIDE {
            return Err(CliError::Assertion(format!(
                "{} image bytes do not match {} labels",
                images.len(),
                labels.len()
            )));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i * SIDE * SIDE..(i + 1) * SIDE * SIDE]
    }

    /// Keeps the first `n` examples.
    pub fn truncate(&mut self, n: usize) {
        let n = n.min(self.len());
        self.labels.truncate(n);
        self.images.truncate(n * SIDE * SIDE);
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn check_len(path: &Path, bytes: &[u8], expected: u64) -> CliResult<()> {
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(CliError::Truncated { path: path.to_path_buf(), expected, actual });
    }
    if actual > expected {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!("{} trailing bytes after payload", actual - expected),
        });
    }
    Ok(())
}

fn check_magic(path: &Path, bytes: &[u8], want: u32) -> CliResult<()> {
    check_header(path, bytes, 4)?;
    let got = read_u32(bytes, 0);
    if got != want {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!("magic {got} (0x{got:08x}), expected {want} (0x{want:08x})"),
        });
    }
    Ok(())
}

fn check_header(path: &Path, bytes: &[u8], len: u64) -> CliResult<()> {
    if (bytes.len() as u64) < len {
        return Err(CliError::Truncated {
            path: path.to_path_buf(),
            expected: len,
            actual: bytes.len() as u64,
        });
    }
    Ok(())
}

pub fn parse_images(path: &Path, bytes: &[u8]) -> CliResult<(usize, Vec<u8>)> {
    check_magic(path, bytes, IMAGE_MAGIC)?;
    check_header(path, bytes, 16)?;
    let count = read_u32(bytes, 4) as usize;
    let (rows, cols) = (read_u32(bytes, 8) as usize, read_u32(bytes, 12) as usize);
    if rows != SIDE || cols != SIDE {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!("image dims {rows}x{cols}, expected {SIDE}x{SIDE}"),
        });
    }
    check_len(path, bytes, 16 + (count * rows * cols) as u64)?;
    Ok((count, bytes[16..].to_vec()))
}

pub fn parse_labels(path: &Path, bytes: &[u8]) -> CliResult<Vec<u8>> {
    check_magic(path, bytes, LABEL_MAGIC)?;
    check_header(path, bytes, 8)?;
    let count = read_u32(bytes, 4) as u64;
    check_len(path, bytes, 8 + count)?;
    Ok(bytes[8..].to_vec())
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> CliResult<MnistSet> {
    let (count, images) = parse_images(images_path, &read_file(images_path)?)?;
    let labels = parse_labels(labels_path, &read_file(labels_path)?)?;
    if labels.len() != count {
        return Err(CliError::Format {
            path: labels_path.to_path_buf(),
            message: format!("{} labels but {count} images", labels.len()),
        });
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 9) {
        return Err(CliError::Format {
            path: labels_path.to_path_buf(),
            message: format!("label {bad} outside 0..=9"),
        });
    }
    MnistSet::new(images, labels)
}

pub fn encode_images(set: &MnistSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.images.len());
    for v in [IMAGE_MAGIC, set.len() as u32, SIDE as u32, SIDE as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&set.images);
    out
}

pub fn encode_labels(set: &MnistSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + set.labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(set.len() as u32).to_be_bytes());
    out.extend_from_slice(&set.labels);
    out
}

pub fn write_idx(set: &MnistSet, images_path: &Path, labels_path: &Path) -> CliResult<()> {
    fs::write(images_path, encode_images(set)).map_err(|e| CliError::io(images_path, e))?;
    fs::write(labels_path, encode_labels(set)).map_err(|e| CliError::io(labels_path, e))?;
    Ok(())
}
