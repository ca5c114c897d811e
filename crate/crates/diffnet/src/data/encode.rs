//! Encoding grayscale images as complex input fields.
//!
//! Amplitude objects transmit between 0 (opaque) and 1, with an opaque
//! surround. Phase objects are perfectly transparent everywhere (|u| = 1)
//! and write the pixel value into the phase, with a plain transparent
//! surround.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::LabeledImage;
use crate::error::{Error, Result};
use crate::field::ComplexField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    Amplitude,
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub mode: EncodingMode,
    /// Phase depth in radians over the [0, 1] pixel range (phase mode).
    pub phase_range: f64,
    /// Integer nearest-neighbour upsampling factor; `None` picks the
    /// largest factor keeping the object within 84% of the grid.
    pub upsample: Option<usize>,
}

impl EncodingSpec {
    pub fn amplitude() -> Self {
        Self {
            mode: EncodingMode::Amplitude,
            phase_range: TAU,
            upsample: None,
        }
    }

    pub fn phase() -> Self {
        Self {
            mode: EncodingMode::Phase,
            phase_range: TAU,
            upsample: None,
        }
    }

    fn factor(&self, image_side: usize, grid_size: usize) -> Result<usize> {
        let factor = match self.upsample {
            Some(f) => f,
            None => ((grid_size as f64 * 0.84) / image_side as f64).floor() as usize,
        };
        if factor == 0 || factor * image_side > grid_size {
            return Err(Error::Config(format!(
                "{image_side}x{image_side} image upsampled x{factor} does not fit a \
                 {grid_size}x{grid_size} grid"
            )));
        }
        Ok(factor)
    }
}

/// Place an image at the centre of the field grid, upsampled by integer
/// pixel replication.
pub fn encode(
    image: &LabeledImage,
    spec: &EncodingSpec,
    grid_size: usize,
    pitch: f64,
) -> Result<ComplexField> {
    if image.width != image.height {
        return Err(Error::Config(format!(
            "only square images are supported, got {}x{}",
            image.width, image.height
        )));
    }
    let factor = spec.factor(image.width, grid_size)?;
    let object = image.width * factor;
    let offset = (grid_size - object) / 2;

    let surround = match spec.mode {
        EncodingMode::Amplitude => Complex64::new(0.0, 0.0),
        EncodingMode::Phase => Complex64::new(1.0, 0.0),
    };
    ComplexField::from_fn(grid_size, pitch, |row, col| {
        if row < offset || row >= offset + object || col < offset || col >= offset + object {
            return surround;
        }
        let pixel = image.pixel((row - offset) / factor, (col - offset) / factor) as f64;
        match spec.mode {
            EncodingMode::Amplitude => Complex64::new(pixel, 0.0),
            EncodingMode::Phase => Complex64::from_polar(1.0, spec.phase_range * pixel),
        }
    })
}
