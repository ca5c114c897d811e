//! Free-space propagation with the angular spectrum method.
//!
//! The field is zero-padded, transformed to the spatial-frequency domain,
//! multiplied by the exact transfer function
//!
//! ```text
//! H(fx, fy) = exp(i 2πd sqrt(1/λ² − fx² − fy²))    for fx² + fy² ≤ 1/λ²
//! ```
//!
//! and transformed back. Frequencies beyond the propagating circle are
//! evanescent: they are either zeroed or given a real exponential decay,
//! depending on [`EvanescentPolicy`].

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft2_forward, fft2_inverse, fft_freq};
use crate::field::ComplexField;

/// Default inter-layer spacing in wavelengths.
pub const DEFAULT_LAYER_SPACING: f64 = 40.0;

/// What to do with spatial frequencies beyond 1/λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvanescentPolicy {
    /// Zero the evanescent band. At tens of wavelengths of travel the decay
    /// factor is below e^-100, so this is the default.
    Truncate,
    /// Apply the real decay exp(−2π|d|·sqrt(fr² − 1/λ²)).
    Decay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationGeometry {
    /// Illumination wavelength; all lengths are in units of it, so this is
    /// 1.0 unless a physical unit system is wanted.
    pub wavelength: f64,
    /// Distance between consecutive diffractive layers.
    pub layer_spacing: f64,
    /// Zero-padding multiple for the FFT; 2 gives linear-convolution padding.
    pub pad_factor: usize,
    pub evanescent_policy: EvanescentPolicy,
}

impl Default for PropagationGeometry {
    fn default() -> Self {
        Self {
            wavelength: 1.0,
            layer_spacing: DEFAULT_LAYER_SPACING,
            pad_factor: 2,
            evanescent_policy: EvanescentPolicy::Truncate,
        }
    }
}

impl PropagationGeometry {
    pub fn validate(&self) -> Result<()> {
        if !self.wavelength.is_finite() || self.wavelength <= 0.0 {
            return Err(Error::Config(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if !self.layer_spacing.is_finite() || self.layer_spacing <= 0.0 {
            return Err(Error::Config(format!(
                "layer spacing must be positive, got {}",
                self.layer_spacing
            )));
        }
        if self.pad_factor < 1 {
            return Err(Error::Config("pad factor must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(PartialEq, Eq, Hash, Clone, Copy)]
struct TransferKey {
    n_padded: usize,
    pitch_bits: u64,
    distance_bits: u64,
    wavelength_bits: u64,
    policy: EvanescentPolicy,
}

static TRANSFER_CACHE: OnceLock<Mutex<HashMap<TransferKey, Arc<Vec<Complex64>>>>> =
    OnceLock::new();

fn transfer_function(
    n_padded: usize,
    pitch: f64,
    distance: f64,
    geometry: &PropagationGeometry,
) -> Arc<Vec<Complex64>> {
    let key = TransferKey {
        n_padded,
        pitch_bits: pitch.to_bits(),
        distance_bits: distance.to_bits(),
        wavelength_bits: geometry.wavelength.to_bits(),
        policy: geometry.evanescent_policy,
    };
    let cache = TRANSFER_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(h) = cache.lock().unwrap().get(&key) {
        return Arc::clone(h);
    }
    let h = Arc::new(build_transfer(n_padded, pitch, distance, geometry));
    cache.lock().unwrap().insert(key, Arc::clone(&h));
    h
}

fn build_transfer(
    n: usize,
    pitch: f64,
    distance: f64,
    geometry: &PropagationGeometry,
) -> Vec<Complex64> {
    let inv_l2 = 1.0 / (geometry.wavelength * geometry.wavelength);
    let mut h = Vec::with_capacity(n * n);
    for kr in 0..n {
        let fy = fft_freq(kr, n, pitch);
        for kc in 0..n {
            let fx = fft_freq(kc, n, pitch);
            let fr2 = fx * fx + fy * fy;
            if fr2 <= inv_l2 {
                let kz = TAU * (inv_l2 - fr2).sqrt();
                h.push(Complex64::from_polar(1.0, kz * distance));
            } else {
                match geometry.evanescent_policy {
                    EvanescentPolicy::Truncate => h.push(Complex64::new(0.0, 0.0)),
                    EvanescentPolicy::Decay => {
                        let kappa = TAU * (fr2 - inv_l2).sqrt();
                        h.push(Complex64::new((-kappa * distance.abs()).exp(), 0.0));
                    }
                }
            }
        }
    }
    h
}

fn check_input(field: &ComplexField, geometry: &PropagationGeometry) -> Result<()> {
    geometry.validate()?;
    if !field.is_finite() {
        return Err(Error::Numeric("field contains non-finite values".into()));
    }
    Ok(())
}

/// Zero-pad `field` to the centre of an n·pad square buffer.
fn pad(field: &ComplexField, n_padded: usize) -> Vec<Complex64> {
    let n = field.grid_size();
    let offset = (n_padded - n) / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); n_padded * n_padded];
    for row in 0..n {
        let src = &field.values()[row * n..(row + 1) * n];
        let dst_start = (row + offset) * n_padded + offset;
        buf[dst_start..dst_start + n].copy_from_slice(src);
    }
    buf
}

fn crop(buf: &[Complex64], n_padded: usize, n: usize, pitch: f64) -> ComplexField {
    let offset = (n_padded - n) / 2;
    let mut values = Vec::with_capacity(n * n);
    for row in 0..n {
        let start = (row + offset) * n_padded + offset;
        values.extend_from_slice(&buf[start..start + n]);
    }
    ComplexField::from_values(values, n, pitch).expect("crop preserves shape")
}

fn propagate_impl(
    field: &ComplexField,
    distance: f64,
    geometry: &PropagationGeometry,
    conjugate_transfer: bool,
) -> Result<Vec<Complex64>> {
    let n = field.grid_size();
    let n_padded = n * geometry.pad_factor;
    let mut buf = pad(field, n_padded);
    fft2_forward(&mut buf, n_padded);
    let h = transfer_function(n_padded, field.pitch(), distance, geometry);
    if conjugate_transfer {
        for (v, h) in buf.iter_mut().zip(h.iter()) {
            *v *= h.conj();
        }
    } else {
        for (v, h) in buf.iter_mut().zip(h.iter()) {
            *v *= h;
        }
    }
    fft2_inverse(&mut buf, n_padded);
    Ok(buf)
}

/// Propagate a field through free space by `distance` (negative values
/// propagate backwards). Returns a field on the same grid as the input.
pub fn propagate(
    field: &ComplexField,
    distance: f64,
    geometry: &PropagationGeometry,
) -> Result<ComplexField> {
    check_input(field, geometry)?;
    if !distance.is_finite() {
        return Err(Error::Numeric(format!("distance is not finite: {distance}")));
    }
    if distance == 0.0 {
        // H ≡ 1 for zero distance.
        return Ok(field.clone());
    }
    let n = field.grid_size();
    let n_padded = n * geometry.pad_factor;
    let buf = propagate_impl(field, distance, geometry, false)?;
    Ok(crop(&buf, n_padded, n, field.pitch()))
}

/// Like [`propagate`] but returns the full padded grid without cropping,
/// so diffraction past the input aperture stays visible. The result has
/// grid size `n × pad_factor`.
pub fn propagate_padded(
    field: &ComplexField,
    distance: f64,
    geometry: &PropagationGeometry,
) -> Result<ComplexField> {
    check_input(field, geometry)?;
    let n_padded = field.grid_size() * geometry.pad_factor;
    if distance == 0.0 {
        let buf = pad(field, n_padded);
        return ComplexField::from_values(buf, n_padded, field.pitch());
    }
    let buf = propagate_impl(field, distance, geometry, false)?;
    ComplexField::from_values(buf, n_padded, field.pitch())
}

/// Exact adjoint of [`propagate`] with respect to the real inner product
/// Re⟨u, v⟩: the same pad/FFT/crop pipeline with the conjugated transfer
/// function. Under the truncate policy this equals propagation by
/// `-distance`.
pub fn propagate_adjoint(
    cotangent: &ComplexField,
    distance: f64,
    geometry: &PropagationGeometry,
) -> Result<ComplexField> {
    check_input(cotangent, geometry)?;
    if !distance.is_finite() {
        return Err(Error::Numeric(format!("distance is not finite: {distance}")));
    }
    if distance == 0.0 {
        return Ok(cotangent.clone());
    }
    let n = cotangent.grid_size();
    let n_padded = n * geometry.pad_factor;
    let buf = propagate_impl(cotangent, distance, geometry, true)?;
    Ok(crop(&buf, n_padded, n, cotangent.pitch()))
}

/// Power of the padded spectrum restricted to the propagating circle
/// fx² + fy² ≤ 1/λ². By Parseval this is the part of the field's power
/// that survives propagation under the truncate policy.
pub fn band_limited_power(field: &ComplexField, geometry: &PropagationGeometry) -> Result<f64> {
    check_input(field, geometry)?;
    let n_padded = field.grid_size() * geometry.pad_factor;
    let mut buf = pad(field, n_padded);
    fft2_forward(&mut buf, n_padded);
    let inv_l2 = 1.0 / (geometry.wavelength * geometry.wavelength);
    let mut power = 0.0;
    for kr in 0..n_padded {
        let fy = fft_freq(kr, n_padded, field.pitch());
        for kc in 0..n_padded {
            let fx = fft_freq(kc, n_padded, field.pitch());
            if fx * fx + fy * fy <= inv_l2 {
                power += buf[kr * n_padded + kc].norm_sqr();
            }
        }
    }
    Ok(power / (n_padded * n_padded) as f64)
}
