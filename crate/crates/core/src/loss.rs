//! Masked multiplane loss and its Wirtinger gradient.
//!
//! For one plane,
//!
//! ```text
//! L = m0 * mean((P - I)^2) + m1 * mean((M P - M I)^2)
//! ```
//!
//! with `I = |U|^2`. Since `M` is binary this equals
//! `mean((m0 + m1 M) (I - P)^2)`, which is what the code evaluates. The
//! cotangent returned by [`loss_gradient_wrt_field`] is `dL/d conj(U)`; a
//! real parameter `t` then has `dL/dt = 2 Re <g, dU/dt>`.

use ndarray::{Array2, Zip};
use num_complex::Complex;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, config_err, Result};
use crate::field::ComplexField;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Whole-frame term.
    pub m0: f64,
    /// In-focus term.
    pub m1: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { m0: 1.0, m1: 2.1 }
    }
}

impl LossWeights {
    pub fn new(m0: f64, m1: f64) -> Result<Self> {
        let w = Self { m0, m1 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m0 >= 0.0 && self.m1 >= 0.0) || (self.m0 == 0.0 && self.m1 == 0.0) {
            return Err(config_err(format!(
                "loss weights must be >= 0 and not both zero, got m0={} m1={}",
                self.m0, self.m1
            )));
        }
        Ok(())
    }

    fn pixel_weight<T: Real>(&self, in_focus: bool) -> T {
        if in_focus {
            T::lit(self.m0 + self.m1)
        } else {
            T::lit(self.m0)
        }
    }
}

/// What the reconstruction is compared against the target as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossDomain {
    /// `|U|^2` against the target.
    #[default]
    Intensity,
    /// `|U|` against the target.
    Amplitude,
}

/// Loss of one plane given its reconstructed image.
pub fn multiplane_loss<T: Real>(
    image: &Array2<T>,
    target: &Array2<T>,
    mask: &Array2<bool>,
    weights: &LossWeights,
) -> T {
    debug_assert_eq!(image.dim(), target.dim());
    debug_assert_eq!(image.dim(), mask.dim());
    let n = T::lit(image.len() as f64);
    let mut acc = T::zero();
    Zip::from(image).and(target).and(mask).for_each(|&i, &p, &m| {
        let d = i - p;
        acc = acc + weights.pixel_weight::<T>(m) * d * d;
    });
    acc / n
}

/// `dL/d conj(U)` for the intensity-domain loss of one plane.
pub fn loss_gradient_wrt_field<T: Real>(
    field: &ComplexField<T>,
    target: &Array2<T>,
    mask: &Array2<bool>,
    weights: &LossWeights,
) -> Result<ComplexField<T>> {
    check_dims(field.dims(), target.dim())?;
    check_dims(field.dims(), mask.dim())?;
    let (_, g) = plane_loss_and_cotangent(field.values(), target, mask, weights, LossDomain::Intensity);
    Ok(ComplexField::from_parts(g, *field.config()))
}

/// Loss value and `dL/d conj(U)` for one plane in either domain.
pub fn plane_loss_and_cotangent<T: Real>(
    field: &Array2<Complex<T>>,
    target: &Array2<T>,
    mask: &Array2<bool>,
    weights: &LossWeights,
    domain: LossDomain,
) -> (T, Array2<Complex<T>>) {
    let n = T::lit(field.len() as f64);
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let mut grad = Array2::from_elem(field.dim(), Complex::new(T::zero(), T::zero()));
    Zip::from(&mut grad)
        .and(field)
        .and(target)
        .and(mask)
        .for_each(|g, &u, &p, &m| {
            let w = weights.pixel_weight::<T>(m);
            match domain {
                LossDomain::Intensity => {
                    let d = u.norm_sqr() - p;
                    loss = loss + w * d * d;
                    // d|U|^2 / d conj(U) = U
                    *g = u * (w * two * d / n);
                }
                LossDomain::Amplitude => {
                    let a = u.norm();
                    let d = a - p;
                    loss = loss + w * d * d;
                    // d|U| / d conj(U) = U / (2|U|); zero at the origin
                    *g = if a > T::zero() {
                        u * (w * d / (a * n))
                    } else {
                        Complex::new(T::zero(), T::zero())
                    };
                }
            }
        });
    (loss / n, grad)
}

/// Central-difference partial derivatives of `loss` at the listed pixels.
///
/// Only meant as a test oracle: each coordinate costs two loss evaluations.
pub fn finite_difference_gradient<T: Real, F>(
    mut loss: F,
    params: &Array2<T>,
    step: T,
    coords: &[(usize, usize)],
) -> Vec<T>
where
    F: FnMut(&Array2<T>) -> T,
{
    assert!(step > T::zero(), "finite-difference step must be positive");
    let mut probe = params.clone();
    coords
        .iter()
        .map(|&idx| {
            let orig = probe[idx];
            probe[idx] = orig + step;
            let up = loss(&probe);
            probe[idx] = orig - step;
            let down = loss(&probe);
            probe[idx] = orig;
            (up - down) / (step + step)
        })
        .collect()
}

/// `count` distinct pixel coordinates drawn uniformly without replacement.
pub fn sample_coordinates(dims: (usize, usize), count: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = dims.0 * dims.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, total, count.min(total)).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| (i / dims.1, i % dims.1)).collect()
}
