//! Band-limited angular-spectrum propagation, the round-trip and
//! single-hop forward models, and their exact adjoints.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, RwLock};

use ndarray::{s, Array2, Zip};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::fft::{fft_freq, Fft2};
use crate::field::{ComplexField, OpticalConfig};
use crate::scalar::Real;

/// Knobs shared by every propagation call of one [`Propagator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Zero spatial frequencies beyond the sampling-derived band limit.
    pub band_limit: bool,
    /// Zero-pad to 2H x 2W before propagating, crop afterwards.
    pub padding: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            band_limit: true,
            padding: false,
        }
    }
}

impl PropagationOptions {
    pub const EXACT: Self = Self {
        band_limit: false,
        padding: false,
    };
}

/// Frequency-domain propagation kernel for a signed distance.
///
/// Every entry has magnitude exactly 0 or 1.
#[derive(Debug, Clone)]
pub struct TransferFunction<T: Real> {
    values: Array2<Complex<T>>,
    distance: f64,
    config: OpticalConfig,
    band_limited: bool,
}

impl<T: Real> TransferFunction<T> {
    /// Builds `exp(i 2π d sqrt(1/λ² - fx² - fy²))` on the FFT bin layout of
    /// `config`. Evanescent bins are zero; with `band_limit` so are bins
    /// beyond `1 / (λ sqrt((2 Δf d)² + 1))` on either axis.
    pub fn new(config: &OpticalConfig, distance: f64, band_limit: bool) -> Self {
        let (h, w) = config.dims();
        let lambda = config.wavelength;
        let pitch = config.pixel_pitch;
        let inv_l2 = 1.0 / (lambda * lambda);

        let limit = |n: usize| {
            let df = 1.0 / (n as f64 * pitch);
            1.0 / (lambda * ((2.0 * df * distance).powi(2) + 1.0).sqrt())
        };
        let (fy_max, fx_max) = (limit(h), limit(w));

        let values = Array2::from_shape_fn((h, w), |(r, c)| {
            let fy = fft_freq(r, h, pitch);
            let fx = fft_freq(c, w, pitch);
            let arg = inv_l2 - fx * fx - fy * fy;
            let outside = band_limit && (fx.abs() >= fx_max || fy.abs() >= fy_max);
            if arg <= 0.0 || outside {
                return Complex::new(T::zero(), T::zero());
            }
            let phase = TAU * fractional_cycles(distance, arg.sqrt());
            Complex::new(T::lit(phase.cos()), T::lit(phase.sin()))
        });

        Self {
            values,
            distance,
            config: *config,
            band_limited: band_limit,
        }
    }

    pub fn values(&self) -> &Array2<Complex<T>> {
        &self.values
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.config
    }

    pub fn is_band_limited(&self) -> bool {
        self.band_limited
    }
}

/// Fractional part of `distance * wavenumber` (in cycles), with the product
/// carried exactly through an FMA error term. At 30 cm the raw product is
/// ~5·10⁵ cycles, so plain rounding would leave ~10⁻¹⁰ rad of phase error and
/// break `H(r) H(-r + δ) = H(δ)`.
fn fractional_cycles(distance: f64, wavenumber: f64) -> f64 {
    let hi = distance * wavenumber;
    let lo = distance.mul_add(wavenumber, -hi);
    (hi - hi.floor() + lo).rem_euclid(1.0)
}

/// Free-function form of [`TransferFunction::new`].
pub fn transfer_function<T: Real>(config: &OpticalConfig, distance: f64, band_limit: bool) -> TransferFunction<T> {
    TransferFunction::new(config, distance, band_limit)
}

/// Propagation engine for one optical configuration.
///
/// Holds the FFT plans and a cache of transfer functions keyed by the exact
/// bit pattern of the distance. Safe to share between threads.
pub struct Propagator<T: Real> {
    config: OpticalConfig,
    options: PropagationOptions,
    work_config: OpticalConfig,
    fft: Fft2<T>,
    cache: RwLock<HashMap<u64, Arc<TransferFunction<T>>>>,
}

impl<T: Real> std::fmt::Debug for Propagator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("config", &self.config)
            .field("options", &self.options)
            .finish()
    }
}

impl<T: Real> Propagator<T> {
    pub fn new(config: OpticalConfig, options: PropagationOptions) -> Self {
        let work_config = if options.padding {
            OpticalConfig {
                height: config.height * 2,
                width: config.width * 2,
                ..config
            }
        } else {
            config
        };
        Self {
            config,
            options,
            work_config,
            fft: Fft2::new(work_config.height, work_config.width),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.config
    }

    pub fn options(&self) -> PropagationOptions {
        self.options
    }

    /// Cached kernel on the working (possibly padded) grid.
    pub fn transfer(&self, distance: f64) -> Arc<TransferFunction<T>> {
        // -0.0 and 0.0 give the same kernel
        let key = if distance == 0.0 { 0u64 } else { distance.to_bits() };
        if let Some(tf) = self.cache.read().expect("cache poisoned").get(&key) {
            return Arc::clone(tf);
        }
        let tf = Arc::new(TransferFunction::new(
            &self.work_config,
            distance,
            self.options.band_limit,
        ));
        let mut cache = self.cache.write().expect("cache poisoned");
        Arc::clone(cache.entry(key).or_insert(tf))
    }

    /// `ifft2(fft2(g) ⊙ H(d))`, or with `conj(H(d))` when `adjoint` is set.
    pub fn apply(&self, grid: &Array2<Complex<T>>, distance: f64, adjoint: bool) -> Array2<Complex<T>> {
        assert_eq!(grid.dim(), self.config.dims(), "grid does not match propagator config");
        let tf = self.transfer(distance);
        let mut work = self.pad(grid);
        self.fft.forward(&mut work);
        if adjoint {
            Zip::from(&mut work)
                .and(tf.values())
                .for_each(|v, h| *v = *v * h.conj());
        } else {
            Zip::from(&mut work).and(tf.values()).for_each(|v, h| *v = *v * *h);
        }
        self.fft.inverse(&mut work);
        self.crop(work)
    }

    fn pad(&self, grid: &Array2<Complex<T>>) -> Array2<Complex<T>> {
        if !self.options.padding {
            return grid.to_owned();
        }
        let (h, w) = self.config.dims();
        let mut out = Array2::from_elem(self.work_config.dims(), Complex::new(T::zero(), T::zero()));
        out.slice_mut(s![h / 2..h / 2 + h, w / 2..w / 2 + w]).assign(grid);
        out
    }

    fn crop(&self, work: Array2<Complex<T>>) -> Array2<Complex<T>> {
        if !self.options.padding {
            return work;
        }
        let (h, w) = self.config.dims();
        work.slice(s![h / 2..h / 2 + h, w / 2..w / 2 + w]).to_owned()
    }

    pub fn propagate(&self, field: &ComplexField<T>, distance: f64) -> ComplexField<T> {
        ComplexField::from_parts(self.apply(field.values(), distance, false), self.config)
    }

    pub fn propagate_adjoint(&self, cotangent: &ComplexField<T>, distance: f64) -> ComplexField<T> {
        ComplexField::from_parts(self.apply(cotangent.values(), distance, true), self.config)
    }

    /// Round trip out to `hop` and back to `-hop + offset`.
    pub fn forward_model_near(&self, hologram: &ComplexField<T>, hop: f64, offset: f64) -> ComplexField<T> {
        let k = self.apply(hologram.values(), hop, false);
        ComplexField::from_parts(self.apply(&k, -hop + offset, false), self.config)
    }

    pub fn forward_model_near_adjoint(&self, cotangent: &ComplexField<T>, hop: f64, offset: f64) -> ComplexField<T> {
        let k = self.apply(cotangent.values(), -hop + offset, true);
        ComplexField::from_parts(self.apply(&k, hop, true), self.config)
    }

    /// Single hop, no back-projection.
    pub fn forward_model_far(&self, hologram: &ComplexField<T>, distance: f64) -> ComplexField<T> {
        self.propagate(hologram, distance)
    }

    pub fn forward_model_far_adjoint(&self, cotangent: &ComplexField<T>, distance: f64) -> ComplexField<T> {
        self.propagate_adjoint(cotangent, distance)
    }
}

/// One-shot propagation without a persistent cache.
pub fn propagate<T: Real>(field: &ComplexField<T>, distance: f64, options: PropagationOptions) -> ComplexField<T> {
    Propagator::new(*field.config(), options).propagate(field, distance)
}

/// One-shot adjoint propagation.
pub fn propagate_adjoint<T: Real>(
    cotangent: &ComplexField<T>,
    distance: f64,
    options: PropagationOptions,
) -> ComplexField<T> {
    Propagator::new(*cotangent.config(), options).propagate_adjoint(cotangent, distance)
}

/// Where the reconstruction planes sit relative to the hologram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Planes within millimetres of the SLM, reached by a round trip through
    /// the hop distance.
    #[default]
    Near,
    /// Planes at `hop + offset`, reached by a single propagation.
    Far,
}

impl Regime {
    /// Near-regime round trips cancel exactly without a band limit, while the
    /// hop kernel's band limit would low-pass the SLM-plane image, so the band
    /// limit defaults off there.
    pub fn default_band_limit(self) -> bool {
        matches!(self, Regime::Far)
    }
}

/// Regime-specific map from hologram to each reconstruction plane.
#[derive(Debug, Clone, Copy)]
pub struct ForwardModel<'a, T: Real> {
    pub propagator: &'a Propagator<T>,
    pub regime: Regime,
    pub hop: f64,
}

impl<'a, T: Real> ForwardModel<'a, T> {
    pub fn new(propagator: &'a Propagator<T>, regime: Regime, hop: f64) -> Self {
        Self {
            propagator,
            regime,
            hop,
        }
    }

    pub fn forward(&self, hologram: &ComplexField<T>, offset: f64) -> ComplexField<T> {
        match self.regime {
            Regime::Near => self.propagator.forward_model_near(hologram, self.hop, offset),
            Regime::Far => self.propagator.forward_model_far(hologram, self.hop + offset),
        }
    }

    pub fn adjoint(&self, cotangent: &ComplexField<T>, offset: f64) -> ComplexField<T> {
        match self.regime {
            Regime::Near => self.propagator.forward_model_near_adjoint(cotangent, self.hop, offset),
            Regime::Far => self.propagator.forward_model_far_adjoint(cotangent, self.hop + offset),
        }
    }
}
