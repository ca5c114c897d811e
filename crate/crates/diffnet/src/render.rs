//! Image artifacts: grayscale PNGs of fields, raw f64 dumps with a text
//! header, detector-overlay intensity maps and score bar charts.

use std::path::Path;

use crate::checkpoint::write_atomic;
use crate::detector::DetectorLayout;
use crate::error::{Error, Result};
use crate::field::ComplexField;

/// 8-bit grayscale PNG.
pub fn save_png_gray(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::Shape(format!(
            "pixel buffer holds {} bytes for a {width}x{height} image",
            pixels.len()
        )));
    }
    let mut bytes: Vec<u8> = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut bytes, width as u32, height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Config(format!("png encode: {e}")))?;
        writer
            .write_image_data(pixels)
            .map_err(|e| Error::Config(format!("png encode: {e}")))?;
    }
    write_atomic(path, &bytes)
}

/// Normalize to [0, 1] by the maximum (all-zero input stays zero).
pub fn normalize_unit_max(values: &[f64]) -> Vec<f64> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        values.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; values.len()]
    }
}

fn to_u8(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Raw little-endian f64 dump with a small self-describing text header
/// (grid size, pitch, wavelength), followed by the row-major samples.
pub fn save_raw_intensity(
    path: &Path,
    field: &ComplexField,
    wavelength: f64,
    normalized: bool,
) -> Result<()> {
    let mut intensity = field.intensity();
    if normalized {
        intensity = normalize_unit_max(&intensity);
    }
    let header = format!(
        "DIFFNET-FIELD 1\ngrid_size {}\npitch {}\nwavelength {}\nkind intensity\nendian little\npayload {}\n",
        field.grid_size(),
        field.pitch(),
        wavelength,
        intensity.len() * 8
    );
    let mut bytes = header.into_bytes();
    for v in &intensity {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Normalized intensity map of a field as a grayscale PNG (max → white).
pub fn save_intensity_png(path: &Path, field: &ComplexField) -> Result<()> {
    let normalized = normalize_unit_max(&field.intensity());
    save_png_gray(
        path,
        field.grid_size(),
        field.grid_size(),
        &to_u8(&normalized),
    )
}

/// Phase map arg(u)/range as a grayscale PNG, for phase-encoded objects
/// whose intensity is featureless.
pub fn save_phase_png(path: &Path, field: &ComplexField, phase_range: f64) -> Result<()> {
    let pixels: Vec<f64> = field
        .values()
        .iter()
        .map(|v| {
            let mut p = v.arg() / phase_range;
            if p < 0.0 {
                p += 1.0;
            }
            p
        })
        .collect();
    save_png_gray(path, field.grid_size(), field.grid_size(), &to_u8(&pixels))
}

/// Pixel rectangle (row range, col range) of a detector region outline on
/// the field grid, for overlay rendering.
pub fn overlay_rects(
    layout: &DetectorLayout,
    grid_size: usize,
    pitch: f64,
) -> Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    layout
        .regions()
        .iter()
        .map(|r| r.sample_rect(grid_size, pitch))
        .collect()
}

/// Intensity map with detector rectangles drawn at full white.
pub fn save_intensity_with_overlay(
    path: &Path,
    field: &ComplexField,
    layout: &DetectorLayout,
) -> Result<()> {
    let n = field.grid_size();
    let normalized = normalize_unit_max(&field.intensity());
    // reserve the top of the range for the overlay
    let mut pixels: Vec<u8> = normalized
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 250.0).round() as u8)
        .collect();
    for (rows, cols) in overlay_rects(layout, n, field.pitch()) {
        if rows.is_empty() || cols.is_empty() {
            continue;
        }
        for col in cols.clone() {
            pixels[rows.start * n + col] = 255;
            pixels[(rows.end - 1) * n + col] = 255;
        }
        for row in rows {
            pixels[row * n + cols.start] = 255;
            pixels[row * n + cols.end - 1] = 255;
        }
    }
    save_png_gray(path, n, n, &pixels)
}

/// Bar chart of per-class values (e.g. differential scores). Bars grow
/// upward from the baseline; negative values grow downward.
pub fn save_bar_chart(path: &Path, values: &[f64], height: usize) -> Result<()> {
    const BAR_WIDTH: usize = 20;
    const GAP: usize = 5;
    if values.is_empty() {
        return Err(Error::Shape("no values to chart".into()));
    }
    let width = values.len() * (BAR_WIDTH + GAP) + GAP;
    let mut pixels = vec![0u8; width * height];
    let max_abs = values.iter().map(|v| v.abs()).fold(1e-12, f64::max);
    let baseline = height / 2;
    for (i, &v) in values.iter().enumerate() {
        let x0 = GAP + i * (BAR_WIDTH + GAP);
        let extent = ((v.abs() / max_abs) * (baseline as f64 - 2.0)).round() as usize;
        let (top, bottom) = if v >= 0.0 {
            (baseline - extent, baseline)
        } else {
            (baseline, baseline + extent)
        };
        for y in top..bottom {
            for x in x0..x0 + BAR_WIDTH {
                pixels[y * width + x] = 220;
            }
        }
    }
    // baseline line
    for x in 0..width {
        pixels[baseline * width + x] = 255;
    }
    save_png_gray(path, width, height, &pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn normalization_maxes_at_one() {
        let v = normalize_unit_max(&[0.5, 2.0, 1.0]);
        assert_eq!(v, vec![0.25, 1.0, 0.5]);
        assert_eq!(normalize_unit_max(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn png_and_raw_dump_round_trip_header() {
        let dir = tempfile::tempdir().unwrap();
        let field =
            ComplexField::uniform(16, 0.5, Complex64::new(0.5, 0.5)).unwrap();
        let png_path = dir.path().join("field.png");
        save_intensity_png(&png_path, &field).unwrap();
        assert!(png_path.exists());

        let raw_path = dir.path().join("field.f64");
        save_raw_intensity(&raw_path, &field, 1.0, true).unwrap();
        let bytes = std::fs::read(&raw_path).unwrap();
        let text = String::from_utf8_lossy(&bytes[..80.min(bytes.len())]);
        assert!(text.starts_with("DIFFNET-FIELD 1\ngrid_size 16\npitch 0.5"));
        // normalized payload ends with max 1.0
        let payload_start = bytes.len() - 16 * 16 * 8;
        let first = f64::from_le_bytes(bytes[payload_start..payload_start + 8].try_into().unwrap());
        assert_eq!(first, 1.0, "uniform field normalizes to all ones");
    }

    #[test]
    fn bar_chart_renders() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bars.png");
        save_bar_chart(&path, &[0.9, -0.4, 0.1], 100).unwrap();
        assert!(path.exists());
    }
}
