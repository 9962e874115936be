//! Double-phase encoding of a multiplane target.
//!
//! A complex value `a e^{iθ}` with `a <= 1` is the mean of the two unit
//! phasors `e^{i(θ ± arccos a)}`.

use ndarray::{Array2, Zip};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{interleave, HologramPhase, Objective, SolverConfig};
use crate::error::Result;
use crate::field::{phase_of, ComplexField, OpticalConfig};
use crate::loss::LossDomain;
use crate::scalar::Real;
use crate::targeting::PlaneTargetSet;

/// Both phase grids of a double-phase split plus the field they encode.
#[derive(Debug, Clone)]
pub struct DoublePhase<T: Real> {
    /// Complex field at the hologram plane, amplitude scaled to max 1.
    pub normalized: Array2<Complex<T>>,
    pub low: Array2<T>,
    pub high: Array2<T>,
    /// `low` and `high` interleaved on the checkerboard.
    pub hologram: HologramPhase<T>,
}

/// Splits `field` (scaled by its peak magnitude) into low/high phase grids.
pub fn double_phase_decompose<T: Real>(field: &Array2<Complex<T>>) -> (Array2<Complex<T>>, Array2<T>, Array2<T>) {
    let peak = field.iter().fold(T::zero(), |m, v| m.max(v.norm()));
    let normalized = if peak > T::zero() {
        field.mapv(|v| v / peak)
    } else {
        field.clone()
    };
    let mut low = Array2::zeros(field.dim());
    let mut high = Array2::zeros(field.dim());
    Zip::from(&mut low)
        .and(&mut high)
        .and(&normalized)
        .for_each(|l, h, &v| {
            let a = v.norm().min(T::one());
            let theta = phase_of(v);
            let spread = a.acos();
            *l = theta - spread;
            *h = theta + spread;
        });
    (normalized, low, high)
}

/// Back-propagates every plane's target (with a random phase) to the
/// hologram, sums, and double-phase encodes the result.
pub fn dp_encode<T: Real>(
    targets: &PlaneTargetSet<T>,
    optics: &OpticalConfig,
    config: &SolverConfig,
) -> Result<DoublePhase<T>> {
    config.validate()?;
    let propagator = config.propagator::<T>(optics);
    let objective = Objective::new(targets, &propagator, config)?;
    let model = objective.model();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut sum = Array2::from_elem(targets.dims(), Complex::new(T::zero(), T::zero()));
    for plane in &targets.planes {
        let amp = match config.loss_domain {
            LossDomain::Intensity => plane.target.mapv(|v| v.max(T::zero()).sqrt()),
            LossDomain::Amplitude => plane.target.clone(),
        };
        let field =
            amp.mapv(|a| Complex::from_polar(a, T::lit(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))));
        // adjoint of a unitary forward model is its inverse: plane -> hologram
        let back = model.adjoint(&ComplexField::from_parts(field, *optics), plane.offset);
        sum.zip_mut_with(back.values(), |a, &b| *a = *a + b);
    }

    let (normalized, low, high) = double_phase_decompose(&sum);
    let phase = interleave(&low, &high);
    Ok(DoublePhase {
        normalized,
        low,
        high,
        hologram: HologramPhase::new(phase, T::zero()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_amplitude_does_not_split() {
        let f = ndarray::array![[Complex::from_polar(1.0f64, 0.3)]];
        let (_, lo, hi) = double_phase_decompose(&f);
        assert!((lo[[0, 0]] - 0.3).abs() < 1e-15 && (hi[[0, 0]] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_amplitude_splits_by_right_angle() {
        let f = ndarray::array![[Complex::new(0.0f64, 0.0), Complex::new(1.0, 0.0)]];
        let (_, lo, hi) = double_phase_decompose(&f);
        assert!((lo[[0, 0]] + PI / 2.0).abs() < 1e-15);
        assert!((hi[[0, 0]] - PI / 2.0).abs() < 1e-15);
        let avg = (Complex::from_polar(1.0, lo[[0, 0]]) + Complex::from_polar(1.0, hi[[0, 0]])) / 2.0;
        assert!(avg.norm() < 1e-15);
    }

    #[test]
    fn pair_average_reproduces_field() {
        let f = Array2::from_shape_fn((8, 8), |(r, c)| {
            Complex::from_polar((r * 8 + c) as f64 / 63.0 * 3.0, r as f64 - c as f64)
        });
        let (norm, lo, hi) = double_phase_decompose(&f);
        for ((l, h), v) in lo.iter().zip(hi.iter()).zip(norm.iter()) {
            let avg = (Complex::from_polar(1.0, *l) + Complex::from_polar(1.0, *h)) / 2.0;
            assert!((avg - v).norm() < 1e-12);
        }
    }
}
