//! Unitary 2-D discrete Fourier transform on row-major grids.
//!
//! Both directions scale by `1/sqrt(H*W)`, so the transform preserves
//! the sum of squared magnitudes.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::scalar::Real;

/// Planned forward and inverse 2-D transforms for one grid shape.
///
/// Plans are immutable and `Send + Sync`; share one instance across
/// threads freely.
#[derive(Clone)]
pub struct Fft2<T: Real> {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl<T: Real> Fft2<T> {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft(width, FftDirection::Forward),
            row_inv: planner.plan_fft(width, FftDirection::Inverse),
            col_fwd: planner.plan_fft(height, FftDirection::Forward),
            col_inv: planner.plan_fft(height, FftDirection::Inverse),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn forward(&self, data: &mut Array2<Complex<T>>) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, data: &mut Array2<Complex<T>>) {
        self.run(data, &self.row_inv, &self.col_inv);
    }

    fn run(&self, data: &mut Array2<Complex<T>>, rows: &Arc<dyn Fft<T>>, cols: &Arc<dyn Fft<T>>) {
        let (h, w) = (self.height, self.width);
        assert_eq!(data.dim(), (h, w), "grid shape does not match FFT plan");
        if !data.is_standard_layout() {
            *data = data.as_standard_layout().into_owned();
        }

        let scratch_len = rows.get_inplace_scratch_len().max(cols.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); scratch_len];

        let buf = data.as_slice_mut().expect("standard layout");
        rows.process_with_scratch(buf, &mut scratch);

        let mut transposed = vec![Complex::new(T::zero(), T::zero()); h * w];
        for r in 0..h {
            for c in 0..w {
                transposed[c * h + r] = buf[r * w + c];
            }
        }
        cols.process_with_scratch(&mut transposed, &mut scratch);

        let norm = T::one() / T::lit((h * w) as f64).sqrt();
        for r in 0..h {
            for c in 0..w {
                buf[r * w + c] = transposed[c * h + r] * norm;
            }
        }
    }
}

/// One-shot unitary forward transform. Prefer a cached [`Fft2`] in loops.
#[must_use]
pub fn fft2<T: Real>(grid: &Array2<Complex<T>>) -> Array2<Complex<T>> {
    let (h, w) = grid.dim();
    let mut out = grid.to_owned();
    Fft2::new(h, w).forward(&mut out);
    out
}

/// One-shot unitary inverse transform.
#[must_use]
pub fn ifft2<T: Real>(grid: &Array2<Complex<T>>) -> Array2<Complex<T>> {
    let (h, w) = grid.dim();
    let mut out = grid.to_owned();
    Fft2::new(h, w).inverse(&mut out);
    out
}

/// Signed spatial frequency of bin `k` for an `n`-point transform with
/// sample spacing `d`, in the same order the transform emits bins.
pub fn fft_freq(k: usize, n: usize, d: f64) -> f64 {
    let k = k as i64;
    let n_i = n as i64;
    let signed = if k < (n_i + 1) / 2 { k } else { k - n_i };
    signed as f64 / (n as f64 * d)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn parseval_and_round_trip(seed in any::<u64>(), h in 1usize..24, w in 1usize..24) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = Array2::from_shape_fn((h, w), |_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let g = fft2(&f);
            let e0: f64 = f.iter().map(|v| v.norm_sqr()).sum();
            let e1: f64 = g.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((e0 - e1).abs() <= 1e-12 * e0);
            let back = ifft2(&g);
            prop_assert!(f.iter().zip(&back).all(|(a, b)| (a - b).norm() <= 1e-12));
        }
    }
}
