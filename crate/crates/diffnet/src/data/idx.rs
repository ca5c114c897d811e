//! IDX file parsing (the MNIST / Fashion-MNIST distribution format).
//!
//! Big-endian headers: images carry magic 0x00000803 with three dimension
//! words, labels carry 0x00000801 with one. Files may be gzip-compressed.

use std::io::Read;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// count × rows × cols raw bytes.
    pub pixels: Vec<u8>,
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let chunk = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| format_err(bytes.len(), format!("file truncated reading {what}")))?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
}

/// Gunzip if the buffer carries the gzip magic, otherwise pass through.
pub fn decompress(bytes: &[u8]) -> Result<Vec<u8>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| format_err(0, format!("gzip decode failed: {e}")))?;
        Ok(out)
    } else {
        Ok(bytes.to_vec())
    }
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32(bytes, 0, "magic number")?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(
            0,
            format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4, "image count")? as usize;
    let rows = read_u32(bytes, 8, "row count")? as usize;
    let cols = read_u32(bytes, 12, "column count")? as usize;
    if rows == 0 || cols == 0 || rows > 4096 || cols > 4096 {
        return Err(format_err(8, format!("implausible image size {rows}x{cols}")));
    }
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| format_err(4, "image payload size overflows"))?;
    let payload = &bytes[16.min(bytes.len())..];
    if payload.len() != expected {
        return Err(format_err(
            16 + payload.len().min(expected),
            format!(
                "payload holds {} bytes, header promises {expected}",
                payload.len()
            ),
        ));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload.to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, "magic number")?;
    if magic != LABELS_MAGIC {
        return Err(format_err(
            0,
            format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4, "label count")? as usize;
    let payload = &bytes[8.min(bytes.len())..];
    if payload.len() != count {
        return Err(format_err(
            8 + payload.len().min(count),
            format!("payload holds {} labels, header promises {count}", payload.len()),
        ));
    }
    Ok(payload.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn build_images(images: &[&[u8]], rows: usize, cols: usize) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&(rows as u32).to_be_bytes());
        bytes.extend_from_slice(&(cols as u32).to_be_bytes());
        for img in images {
            bytes.extend_from_slice(img);
        }
        bytes
    }

    pub(crate) fn build_labels(labels: &[u8]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        bytes.extend_from_slice(labels);
        bytes
    }

    #[test]
    fn parses_a_tiny_file() {
        let img = [0u8, 128, 255, 64];
        let bytes = build_images(&[&img], 2, 2);
        let parsed = parse_images(&bytes).unwrap();
        assert_eq!(parsed.count, 1);
        assert_eq!(parsed.rows, 2);
        assert_eq!(parsed.pixels, img);
    }

    #[test]
    fn empty_file_is_a_format_error() {
        match parse_images(&[]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(parse_labels(&[]).is_err());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = build_labels(&[1, 2, 3]);
        bytes[3] = 0x99;
        assert!(parse_labels(&bytes).is_err());
        // images magic on a labels parse
        let imgs = build_images(&[&[0; 4]], 2, 2);
        assert!(parse_labels(&imgs).is_err());
    }

    #[test]
    fn truncation_is_detected_with_offset() {
        let bytes = build_images(&[&[1u8; 9]], 3, 3);
        match parse_images(&bytes[..bytes.len() - 2]) {
            Err(Error::Format { offset, message }) => {
                assert!(offset >= 16, "{offset}: {message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn gzip_round_trip() {
        use flate2::{write::GzEncoder, Compression};
        use std::io::Write;
        let plain = build_labels(&[5, 0, 4]);
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&plain).unwrap();
        let gz = enc.finish().unwrap();
        assert_eq!(decompress(&gz).unwrap(), plain);
        assert_eq!(decompress(&plain).unwrap(), plain);
    }
}
