//! In-place 2D FFT on square complex grids.
//!
//! Row transforms plus a transpose pass; plans are cached per thread so the
//! hot training loop never re-plans.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

thread_local! {
    static PLAN_CACHE: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn with_plans<R>(n: usize, f: impl FnOnce(&mut Plans) -> R) -> R {
    PLAN_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        let plans = cache.entry(n).or_insert_with(|| {
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(n);
            let inverse = planner.plan_fft_inverse(n);
            let scratch_len = forward
                .get_inplace_scratch_len()
                .max(inverse.get_inplace_scratch_len());
            Plans {
                forward,
                inverse,
                scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            }
        });
        f(plans)
    })
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalized forward 2D FFT of an n-by-n row-major buffer.
pub(crate) fn fft2_forward(buf: &mut [Complex64], n: usize) {
    debug_assert_eq!(buf.len(), n * n);
    with_plans(n, |plans| {
        for row in buf.chunks_exact_mut(n) {
            plans.forward.process_with_scratch(row, &mut plans.scratch);
        }
        transpose_square(buf, n);
        for row in buf.chunks_exact_mut(n) {
            plans.forward.process_with_scratch(row, &mut plans.scratch);
        }
        transpose_square(buf, n);
    });
}

/// Inverse 2D FFT including the 1/n^2 normalization.
pub(crate) fn fft2_inverse(buf: &mut [Complex64], n: usize) {
    debug_assert_eq!(buf.len(), n * n);
    with_plans(n, |plans| {
        for row in buf.chunks_exact_mut(n) {
            plans.inverse.process_with_scratch(row, &mut plans.scratch);
        }
        transpose_square(buf, n);
        for row in buf.chunks_exact_mut(n) {
            plans.inverse.process_with_scratch(row, &mut plans.scratch);
        }
        transpose_square(buf, n);
    });
    let norm = 1.0 / (n * n) as f64;
    for v in buf.iter_mut() {
        *v *= norm;
    }
}

/// FFT sample frequency for bin `k` of an `n`-point transform with sample
/// spacing `pitch`, in cycles per unit length.
#[inline]
pub(crate) fn fft_freq(k: usize, n: usize, pitch: f64) -> f64 {
    let k = if 2 * k <= n {
        k as f64
    } else {
        k as f64 - n as f64
    };
    k / (n as f64 * pitch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_then_inverse_is_identity() {
        let n = 16;
        let orig: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let mut buf = orig.clone();
        fft2_forward(&mut buf, n);
        fft2_inverse(&mut buf, n);
        for (a, b) in buf.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft_on_small_grid() {
        let n = 8;
        let input: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.3).cos(), (i as f64 * 0.11).sin()))
            .collect();
        let mut fast = input.clone();
        fft2_forward(&mut fast, n);

        use std::f64::consts::TAU;
        for kr in 0..n {
            for kc in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..n {
                    for c in 0..n {
                        let angle = -TAU * ((kr * r + kc * c) as f64) / n as f64;
                        acc += input[r * n + c] * Complex64::from_polar(1.0, angle);
                    }
                }
                assert!((acc - fast[kr * n + kc]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn fft_freq_layout() {
        assert_eq!(fft_freq(0, 8, 0.5), 0.0);
        assert_eq!(fft_freq(1, 8, 0.5), 0.25);
        assert_eq!(fft_freq(4, 8, 0.5), 1.0); // Nyquist
        assert_eq!(fft_freq(7, 8, 0.5), -0.25);
    }
}
