//! Physical sampling grid and the complex optical field container.

use ndarray::{Array2, Zip};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, config_err, Result};
use crate::fft::Fft2;
use crate::scalar::Real;

/// Default laser lines, red/green/blue, in meters.
pub const WAVELENGTH_RED: f64 = 639e-9;
pub const WAVELENGTH_GREEN: f64 = 515e-9;
pub const WAVELENGTH_BLUE: f64 = 473e-9;

/// Pixel pitch of an 8 µm phase-only SLM.
pub const DEFAULT_PIXEL_PITCH: f64 = 8e-6;

/// Wavelength, pixel pitch and grid size of one simulated channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalConfig {
    pub wavelength: f64,
    pub pixel_pitch: f64,
    pub height: usize,
    pub width: usize,
}

impl OpticalConfig {
    pub fn new(wavelength: f64, pixel_pitch: f64, height: usize, width: usize) -> Result<Self> {
        let cfg = Self {
            wavelength,
            pixel_pitch,
            height,
            width,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Red channel at the default pitch.
    pub fn with_dims(height: usize, width: usize) -> Result<Self> {
        Self::new(WAVELENGTH_RED, DEFAULT_PIXEL_PITCH, height, width)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(config_err(format!("wavelength must be > 0, got {}", self.wavelength)));
        }
        if !(self.pixel_pitch.is_finite() && self.pixel_pitch > 0.0) {
            return Err(config_err(format!("pixel pitch must be > 0, got {}", self.pixel_pitch)));
        }
        for (name, n) in [("height", self.height), ("width", self.width)] {
            if n < 2 || n % 2 != 0 {
                return Err(config_err(format!("{name} must be even and >= 2, got {n}")));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sampled complex field on an [`OpticalConfig`] grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField<T: Real> {
    values: Array2<Complex<T>>,
    config: OpticalConfig,
}

impl<T: Real> ComplexField<T> {
    /// Wraps `values`, checking shape and finiteness.
    pub fn new(values: Array2<Complex<T>>, config: OpticalConfig) -> Result<Self> {
        check_dims(config.dims(), values.dim())?;
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(config_err("field contains non-finite values"));
        }
        Ok(Self { values, config })
    }

    /// Internal constructor for values already known to be well formed.
    pub(crate) fn from_parts(values: Array2<Complex<T>>, config: OpticalConfig) -> Self {
        debug_assert_eq!(values.dim(), config.dims());
        Self { values, config }
    }

    pub fn zeros(config: OpticalConfig) -> Self {
        Self::from_parts(
            Array2::from_elem(config.dims(), Complex::new(T::zero(), T::zero())),
            config,
        )
    }

    /// `amplitude * exp(i * phase)` per pixel.
    pub fn from_amplitude_phase(amplitude: &Array2<T>, phase: &Array2<T>, config: OpticalConfig) -> Result<Self> {
        check_dims(config.dims(), amplitude.dim())?;
        check_dims(config.dims(), phase.dim())?;
        if amplitude.iter().any(|&a| a < T::zero() || !a.is_finite()) {
            return Err(config_err("amplitude must be finite and non-negative"));
        }
        let values = Zip::from(amplitude)
            .and(phase)
            .map_collect(|&a, &p| Complex::from_polar(a, p));
        Self::new(values, config)
    }

    /// Unit-amplitude field `exp(i * phase)`.
    pub fn from_phase(phase: &Array2<T>, config: OpticalConfig) -> Result<Self> {
        check_dims(config.dims(), phase.dim())?;
        Self::new(phase.mapv(|p| Complex::from_polar(T::one(), p)), config)
    }

    pub fn values(&self) -> &Array2<Complex<T>> {
        &self.values
    }

    pub fn into_values(self) -> Array2<Complex<T>> {
        self.values
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.config
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn amplitude(&self) -> Array2<T> {
        self.values.mapv(|v| v.norm())
    }

    /// Phase in (-π, π]; zero-amplitude pixels report 0.
    pub fn phase(&self) -> Array2<T> {
        self.values.mapv(phase_of)
    }

    pub fn intensity(&self) -> Array2<T> {
        self.values.mapv(|v| v.norm_sqr())
    }

    pub fn total_intensity(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr())
    }

    pub fn fft2(&self) -> Self {
        let mut out = self.values.clone();
        Fft2::new(self.config.height, self.config.width).forward(&mut out);
        Self::from_parts(out, self.config)
    }

    pub fn ifft2(&self) -> Self {
        let mut out = self.values.clone();
        Fft2::new(self.config.height, self.config.width).inverse(&mut out);
        Self::from_parts(out, self.config)
    }
}

/// Argument in (-π, π] with `arg(0) = 0`.
pub fn phase_of<T: Real>(v: Complex<T>) -> T {
    if v.re == T::zero() && v.im == T::zero() {
        return T::zero();
    }
    let p = v.im.atan2(v.re);
    // atan2 yields -π for (-x, -0.0)
    if p == -T::PI() {
        T::PI()
    } else {
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(h: usize, w: usize) -> OpticalConfig {
        OpticalConfig::with_dims(h, w).unwrap()
    }

    #[test]
    fn config_rejects_odd_and_nonpositive() {
        assert!(OpticalConfig::new(639e-9, 8e-6, 3, 4).is_err());
        assert!(OpticalConfig::new(639e-9, 8e-6, 0, 4).is_err());
        assert!(OpticalConfig::new(0.0, 8e-6, 4, 4).is_err());
        assert!(OpticalConfig::new(639e-9, -1.0, 4, 4).is_err());
        assert!(OpticalConfig::new(639e-9, 8e-6, 2, 2).is_ok());
    }

    #[test]
    fn amplitude_phase_construction() {
        let c = cfg(2, 2);
        let ones = Array2::from_elem((2, 2), 1.0);
        let f = ComplexField::from_amplitude_phase(&ones, &Array2::zeros((2, 2)), c).unwrap();
        assert!(f.values().iter().all(|v| *v == Complex::new(1.0, 0.0)));

        let f = ComplexField::from_amplitude_phase(&ones, &Array2::from_elem((2, 2), PI), c).unwrap();
        assert!(f.values().iter().all(|v| (v - Complex::new(-1.0, 0.0)).norm() < 1e-15));

        let amp = ndarray::array![[1.0, 2.0], [3.0, 4.0]];
        let f = ComplexField::from_amplitude_phase(&amp, &Array2::from_elem((2, 2), PI / 2.0), c).unwrap();
        for (v, a) in f.values().iter().zip(amp.iter()) {
            assert!((v - Complex::new(0.0, *a)).norm() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let c = cfg(4, 4);
        let amp = Array2::from_elem((2, 4), 1.0);
        let err = ComplexField::from_amplitude_phase(&amp, &Array2::zeros((2, 4)), c).unwrap_err();
        assert!(matches!(err, crate::Error::Dimension { .. }));
    }

    #[test]
    fn readouts() {
        let c = cfg(2, 2);
        let vals = ndarray::array![
            [Complex::new(3.0, 4.0), Complex::new(-1.0, 0.0)],
            [Complex::new(0.0, 0.0), Complex::new(-1.0, -0.0)]
        ];
        let f = ComplexField::new(vals, c).unwrap();
        assert_eq!(f.amplitude()[[0, 0]], 5.0);
        assert_eq!(f.intensity()[[0, 0]], 25.0);
        assert_eq!(f.phase()[[0, 1]], PI);
        assert_eq!(f.phase()[[1, 0]], 0.0);
        assert_eq!(f.phase()[[1, 1]], PI);
    }

    #[test]
    fn rejects_non_finite() {
        let c = cfg(2, 2);
        let mut vals = Array2::from_elem((2, 2), Complex::new(1.0, 0.0));
        vals[[1, 1]] = Complex::new(f64::NAN, 0.0);
        assert!(ComplexField::new(vals, c).is_err());
    }

    #[test]
    fn polar_round_trip_positive_amplitude() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let c = cfg(16, 16);
        let vals = Array2::from_shape_fn((16, 16), |_| {
            Complex::from_polar(rng.gen_range(0.1..2.0), rng.gen_range(-PI..PI))
        });
        let f = ComplexField::new(vals, c).unwrap();
        let g = ComplexField::from_amplitude_phase(&f.amplitude(), &f.phase(), c).unwrap();
        for (a, b) in f.values().iter().zip(g.values().iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
