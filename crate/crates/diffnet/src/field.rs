//! Complex scalar wave fields sampled on a square grid.
//!
//! All lengths are expressed in units of the illumination wavelength, so a
//! pitch of 0.5 means half a wavelength between neighbouring samples.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default sample spacing: one neuron is half a wavelength wide.
pub const DEFAULT_PITCH: f64 = 0.5;

/// A 2D complex wave amplitude u(x, y) on a square grid.
///
/// Values are stored row-major. Row 0 is the top of the grid (largest y);
/// the grid is centred on the optical axis, so sample (row, col) sits at
/// physical position given by [`ComplexField::coord_of`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    values: Vec<Complex64>,
    grid_size: usize,
    pitch: f64,
}

impl ComplexField {
    /// All-zero field.
    pub fn zeros(grid_size: usize, pitch: f64) -> Result<Self> {
        check_grid(grid_size, pitch)?;
        Ok(Self {
            values: vec![Complex64::new(0.0, 0.0); grid_size * grid_size],
            grid_size,
            pitch,
        })
    }

    /// Constant-amplitude field (e.g. a uniform plane wave for `value = 1`).
    pub fn uniform(grid_size: usize, pitch: f64, value: Complex64) -> Result<Self> {
        check_grid(grid_size, pitch)?;
        Ok(Self {
            values: vec![value; grid_size * grid_size],
            grid_size,
            pitch,
        })
    }

    pub fn from_values(values: Vec<Complex64>, grid_size: usize, pitch: f64) -> Result<Self> {
        check_grid(grid_size, pitch)?;
        if values.len() != grid_size * grid_size {
            return Err(Error::Shape(format!(
                "expected {}x{} = {} values, got {}",
                grid_size,
                grid_size,
                grid_size * grid_size,
                values.len()
            )));
        }
        Ok(Self {
            values,
            grid_size,
            pitch,
        })
    }

    /// Build a field by evaluating `f(row, col)` at every sample.
    pub fn from_fn(
        grid_size: usize,
        pitch: f64,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        check_grid(grid_size, pitch)?;
        let mut values = Vec::with_capacity(grid_size * grid_size);
        for row in 0..grid_size {
            for col in 0..grid_size {
                values.push(f(row, col));
            }
        }
        Ok(Self {
            values,
            grid_size,
            pitch,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Physical side length of the sampled aperture.
    pub fn side_length(&self) -> f64 {
        self.grid_size as f64 * self.pitch
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.grid_size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.values[row * self.grid_size + col] = v;
    }

    /// Physical (x, y) of a sample centre. x grows with the column index,
    /// y grows upward (decreasing row index); the grid is centred at (0, 0).
    #[inline]
    pub fn coord_of(&self, row: usize, col: usize) -> (f64, f64) {
        coord_of(self.grid_size, self.pitch, row, col)
    }

    /// Total optical power sum |u|^2 over the grid.
    pub fn total_power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Per-sample intensity |u|^2, row-major.
    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub(crate) fn check_same_shape(&self, other: &ComplexField) -> Result<()> {
        if self.grid_size != other.grid_size {
            return Err(Error::Shape(format!(
                "grid sizes differ: {} vs {}",
                self.grid_size, other.grid_size
            )));
        }
        Ok(())
    }
}

/// Sample-centre coordinate shared by fields and detector geometry.
#[inline]
pub(crate) fn coord_of(grid_size: usize, pitch: f64, row: usize, col: usize) -> (f64, f64) {
    let half = (grid_size as f64 - 1.0) / 2.0;
    let x = (col as f64 - half) * pitch;
    let y = (half - row as f64) * pitch;
    (x, y)
}

fn check_grid(grid_size: usize, pitch: f64) -> Result<()> {
    if grid_size < 2 {
        return Err(Error::Shape(format!(
            "grid size must be at least 2, got {grid_size}"
        )));
    }
    if !pitch.is_finite() || pitch <= 0.0 {
        return Err(Error::Shape(format!("pitch must be positive, got {pitch}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(ComplexField::zeros(1, 0.5).is_err());
        assert!(ComplexField::zeros(8, 0.0).is_err());
        assert!(ComplexField::zeros(8, -1.0).is_err());
        assert!(ComplexField::from_values(vec![Complex64::new(1.0, 0.0); 5], 2, 0.5).is_err());
    }

    #[test]
    fn coordinates_are_centered() {
        let f = ComplexField::zeros(5, 0.5).unwrap();
        assert_eq!(f.coord_of(2, 2), (0.0, 0.0));
        assert_eq!(f.coord_of(2, 4), (1.0, 0.0));
        assert_eq!(f.coord_of(0, 2), (0.0, 1.0));
        // even grid: samples straddle the centre
        let g = ComplexField::zeros(4, 0.5).unwrap();
        assert_eq!(g.coord_of(0, 0), (-0.75, 0.75));
        assert_eq!(g.coord_of(3, 3), (0.75, -0.75));
    }

    #[test]
    fn power_sums_squared_magnitudes() {
        let f = ComplexField::uniform(4, 0.5, Complex64::new(0.0, 2.0)).unwrap();
        assert_eq!(f.total_power(), 64.0);
    }
}
