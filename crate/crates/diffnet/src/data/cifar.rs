//! CIFAR-10 binary batch parsing.
//!
//! Each record is 1 label byte followed by 3072 pixel bytes: three 32×32
//! row-major planes, red first, then green, then blue.

use crate::error::{Error, Result};

pub const IMAGE_SIDE: usize = 32;
pub const PLANE_BYTES: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const RECORD_BYTES: usize = 1 + 3 * PLANE_BYTES;

/// One raw record: red/green/blue planes kept separate until grayscale
/// conversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CifarRecord {
    pub label: u8,
    pub rgb: Vec<u8>,
}

pub fn parse_batch(bytes: &[u8]) -> Result<Vec<CifarRecord>> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(Error::Format {
            offset: bytes.len() - bytes.len() % RECORD_BYTES,
            message: format!(
                "batch length {} is not a positive multiple of the {RECORD_BYTES}-byte record",
                bytes.len()
            ),
        });
    }
    let mut records = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    for (i, chunk) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let label = chunk[0];
        if label > 9 {
            return Err(Error::Format {
                offset: i * RECORD_BYTES,
                message: format!("record {i} has label {label}, expected 0..=9"),
            });
        }
        records.push(CifarRecord {
            label,
            rgb: chunk[1..].to_vec(),
        });
    }
    Ok(records)
}

impl CifarRecord {
    /// (r, g, b) bytes of a pixel.
    pub fn pixel(&self, row: usize, col: usize) -> (u8, u8, u8) {
        let idx = row * IMAGE_SIDE + col;
        (
            self.rgb[idx],
            self.rgb[PLANE_BYTES + idx],
            self.rgb[2 * PLANE_BYTES + idx],
        )
    }
}
