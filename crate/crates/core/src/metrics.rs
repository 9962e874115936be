//! PSNR (full-frame and masked) and SSIM.

use ndarray::{s, Array2, Zip};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dims, config_err, Error, Result};
use crate::scalar::Real;
use crate::targeting::gaussian_kernel;

/// Peak signal-to-noise ratio in dB; identical inputs give `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    fn from_mse(mse: f64, peak: f64) -> Self {
        if mse == 0.0 {
            Psnr::Infinite
        } else {
            Psnr::Finite(10.0 * (peak * peak / mse).log10())
        }
    }

    /// dB value, `+inf` for an exact match.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.2} dB"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

// JSON has no infinity; the exact-match case is written as the string "inf".
impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Finite(v) => s.serialize_f64(*v),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Psnr::Finite(v)),
            Repr::Str(s) if s == "inf" => Ok(Psnr::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("invalid PSNR value {s:?}"))),
        }
    }
}

pub fn psnr<T: Real>(a: &Array2<T>, b: &Array2<T>, peak: f64) -> Result<Psnr> {
    check_dims(a.dim(), b.dim())?;
    if peak.is_nan() || peak <= 0.0 {
        return Err(config_err("PSNR peak must be > 0"));
    }
    let sum = Zip::from(a).and(b).fold(0.0, |acc, &x, &y| {
        let d = x.to_f64() - y.to_f64();
        acc + d * d
    });
    Ok(Psnr::from_mse(sum / a.len() as f64, peak))
}

/// PSNR with the MSE taken over pixels where `mask` is set.
pub fn masked_psnr<T: Real>(a: &Array2<T>, b: &Array2<T>, mask: &Array2<bool>, peak: f64) -> Result<Psnr> {
    check_dims(a.dim(), b.dim())?;
    check_dims(a.dim(), mask.dim())?;
    if peak.is_nan() || peak <= 0.0 {
        return Err(config_err("PSNR peak must be > 0"));
    }
    let (sum, count) = Zip::from(a).and(b).and(mask).fold((0.0, 0usize), |(s, n), &x, &y, &m| {
        if m {
            let d = x.to_f64() - y.to_f64();
            (s + d * d, n + 1)
        } else {
            (s, n)
        }
    });
    if count == 0 {
        return Err(Error::UndefinedMetric("masked PSNR over an empty mask"));
    }
    Ok(Psnr::from_mse(sum / count as f64, peak))
}

/// SSIM for images in [0, 1].
pub fn ssim<T: Real>(a: &Array2<T>, b: &Array2<T>) -> Result<f64> {
    ssim_with_range(a, b, 1.0)
}

/// Mean SSIM over all positions where an 11x11 Gaussian window (σ = 1.5)
/// fits, with `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`. Images smaller than the
/// window use one window spanning the whole image.
pub fn ssim_with_range<T: Real>(a: &Array2<T>, b: &Array2<T>, range: f64) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    if range.is_nan() || range <= 0.0 {
        return Err(config_err("SSIM dynamic range must be > 0"));
    }
    let a = a.mapv(|v| v.to_f64());
    let b = b.mapv(|v| v.to_f64());
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);

    let (h, w) = a.dim();
    let window: Array2<f64> = if h < 11 || w < 11 {
        Array2::from_elem((h, w), 1.0 / (h * w) as f64)
    } else {
        gaussian_kernel(1.5)
    };
    let (wh, ww) = window.dim();

    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - wh {
        for x in 0..=w - ww {
            let pa = a.slice(s![y..y + wh, x..x + ww]);
            let pb = b.slice(s![y..y + wh, x..x + ww]);
            let (mut ma, mut mb) = (0.0, 0.0);
            Zip::from(&pa).and(&pb).and(&window).for_each(|&p, &q, &k| {
                ma += k * p;
                mb += k * q;
            });
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            Zip::from(&pa).and(&pb).and(&window).for_each(|&p, &q, &k| {
                va += k * (p - ma) * (p - ma);
                vb += k * (q - mb) * (q - mb);
                cov += k * (p - ma) * (q - mb);
            });
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}
