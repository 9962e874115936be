//! Per-plane targets and focus masks from an RGBD scene.
//!
//! Each depth plane gets its own sharp content plus a Gaussian-blurred copy
//! of every other plane, blurred more the further away that plane sits. The
//! naive mode keeps only the sharp content and leaves the rest black.

use ndarray::{s, Array2, Zip};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, config_err, Result};
use crate::fft::Fft2;
use crate::scalar::Real;

pub const MAX_PLANES: usize = 16;

/// Target image channels and a normalized depth map, all in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdScene<T: Real> {
    channels: Vec<Array2<T>>,
    depth: Array2<T>,
}

impl<T: Real> RgbdScene<T> {
    pub fn new(channels: Vec<Array2<T>>, depth: Array2<T>) -> Result<Self> {
        if channels.is_empty() {
            return Err(config_err("scene needs at least one image channel"));
        }
        for ch in &channels {
            check_dims(depth.dim(), ch.dim())?;
        }
        let in_unit = |a: &Array2<T>| a.iter().all(|&v| v >= T::zero() && v <= T::one());
        if !channels.iter().all(in_unit) || !in_unit(&depth) {
            return Err(config_err("scene values must lie in [0, 1]"));
        }
        Ok(Self { channels, depth })
    }

    pub fn channels(&self) -> &[Array2<T>] {
        &self.channels
    }

    pub fn channel(&self, idx: usize) -> &Array2<T> {
        &self.channels[idx]
    }

    pub fn depth(&self) -> &Array2<T> {
        &self.depth
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth.dim()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetingMode {
    /// Sharp content plus blurred content from the other planes.
    #[default]
    Ours,
    /// Sharp content only, black elsewhere.
    Naive,
}

impl std::fmt::Display for TargetingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TargetingMode::Ours => "ours",
            TargetingMode::Naive => "naive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetingParams {
    pub n_planes: usize,
    /// Weight of the defocused content.
    pub w0: f64,
    /// Weight of the in-focus content.
    pub w1: f64,
    /// Overall brightness.
    pub w2: f64,
    /// Blur per plane of separation, in pixels.
    pub blur_base: f64,
    pub mode: TargetingMode,
    /// Spacing between neighbouring planes, meters.
    pub plane_spacing: f64,
}

impl Default for TargetingParams {
    fn default() -> Self {
        Self {
            n_planes: 3,
            w0: 1.0,
            w1: 1.0,
            w2: 1.0,
            blur_base: 2.0,
            mode: TargetingMode::Ours,
            plane_spacing: 1e-3,
        }
    }
}

impl TargetingParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_PLANES).contains(&self.n_planes) {
            return Err(config_err(format!(
                "n_planes must be in 1..={MAX_PLANES}, got {}",
                self.n_planes
            )));
        }
        if !(self.blur_base.is_finite() && self.blur_base >= 0.0) {
            return Err(config_err("blur_base must be >= 0"));
        }
        if self.mode == TargetingMode::Ours && !(self.w0 > 0.0 && self.w1 > 0.0 && self.w2 > 0.0) {
            return Err(config_err("targeting weights must be > 0"));
        }
        if !(self.plane_spacing.is_finite() && self.plane_spacing > 0.0) {
            return Err(config_err("plane_spacing must be > 0"));
        }
        Ok(())
    }
}

/// One reconstruction plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneTarget<T: Real> {
    /// Weighted target the solver fits.
    pub target: Array2<T>,
    /// Pixels that are in focus on this plane.
    pub mask: Array2<bool>,
    /// Unweighted blurred content from the other planes. Computed in both
    /// modes so naive runs can be scored against it.
    pub defocus: Array2<T>,
    /// Signed distance from the hologram-side reference, meters.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneTargetSet<T: Real> {
    pub planes: Vec<PlaneTarget<T>>,
    pub params: TargetingParams,
}

impl<T: Real> PlaneTargetSet<T> {
    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].target.dim()
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.planes.iter().map(|p| p.offset).collect()
    }

    /// Largest target value over the whole stack.
    pub fn peak(&self) -> T {
        self.planes
            .iter()
            .flat_map(|p| p.target.iter())
            .fold(T::zero(), |m, &v| m.max(v))
    }

    /// Builds a set from explicit targets; masks must partition the grid.
    pub fn from_planes(planes: Vec<PlaneTarget<T>>, params: TargetingParams) -> Result<Self> {
        if planes.is_empty() || planes.len() > MAX_PLANES {
            return Err(config_err("plane count must be in 1..=16"));
        }
        let dims = planes[0].target.dim();
        for p in &planes {
            check_dims(dims, p.target.dim())?;
            check_dims(dims, p.mask.dim())?;
            check_dims(dims, p.defocus.dim())?;
            if p.target.iter().any(|&v| !(v >= T::zero() && v.is_finite())) {
                return Err(config_err("targets must be finite and non-negative"));
            }
        }
        for idx in ndarray::indices(dims) {
            let hits = planes.iter().filter(|p| p.mask[idx]).count();
            if hits != 1 {
                return Err(config_err(format!("focus masks cover pixel {idx:?} {hits} times")));
            }
        }
        Ok(Self { planes, params })
    }
}

/// Plane offsets `spacing * m` over the non-zero integers closest to zero,
/// largest first so plane 0 sits nearest the viewer. Zero is skipped: the
/// intensity of a phase-only field is uniform on the hologram plane itself.
pub fn default_plane_offsets(n_planes: usize, spacing: f64) -> Vec<f64> {
    let above = n_planes.div_ceil(2) as i64;
    let below = (n_planes / 2) as i64;
    (1..=above)
        .rev()
        .chain((1..=below).map(|m| -m))
        .map(|m| m as f64 * spacing)
        .collect()
}

/// Bins depth in [0, 1] into `n_planes` equal-width bins, top edge clamped.
pub fn quantize_depth<T: Real>(depth: &Array2<T>, n_planes: usize) -> Result<Array2<usize>> {
    if !(2..=MAX_PLANES).contains(&n_planes) {
        return Err(config_err(format!(
            "n_planes must be in 2..={MAX_PLANES}, got {n_planes}"
        )));
    }
    Ok(quantize_unchecked(depth, n_planes))
}

fn quantize_unchecked<T: Real>(depth: &Array2<T>, n_planes: usize) -> Array2<usize> {
    let n = T::lit(n_planes as f64);
    depth.mapv(|d| {
        let bin = (d * n).floor().to_f64().max(0.0) as usize;
        bin.min(n_planes - 1)
    })
}

pub fn focus_masks(plane_indices: &Array2<usize>, n_planes: usize) -> Vec<Array2<bool>> {
    (0..n_planes).map(|k| plane_indices.mapv(|i| i == k)).collect()
}

/// Normalized Gaussian with radius `ceil(3σ)`; `σ = 0` gives `[[1]]`.
pub fn gaussian_kernel<T: Real>(sigma: f64) -> Array2<T> {
    if sigma <= 0.0 {
        return Array2::from_elem((1, 1), T::one());
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let size = (2 * radius + 1) as usize;
    let raw = Array2::from_shape_fn((size, size), |(r, c)| {
        let y = r as i64 - radius;
        let x = c as i64 - radius;
        (-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp()
    });
    let total: f64 = raw.sum();
    raw.mapv(|v| T::lit(v / total))
}

/// Same-size linear convolution with an odd, centered kernel. Pixels outside
/// the image count as zero.
pub fn convolve_same<T: Real>(image: &Array2<T>, kernel: &Array2<T>) -> Array2<T> {
    let (kh, kw) = kernel.dim();
    if (kh, kw) == (1, 1) {
        return image.mapv(|v| v * kernel[[0, 0]]);
    }
    let (h, w) = image.dim();
    let (ry, rx) = (kh / 2, kw / 2);
    let (ph, pw) = (h + 2 * ry, w + 2 * rx);

    let zero = Complex::new(T::zero(), T::zero());
    let mut img = Array2::from_elem((ph, pw), zero);
    img.slice_mut(s![..h, ..w])
        .zip_mut_with(image, |d, &v| *d = Complex::new(v, T::zero()));
    // kernel centre at the origin, negative lags wrapped to the far edge
    let mut ker = Array2::from_elem((ph, pw), zero);
    for ((r, c), &v) in kernel.indexed_iter() {
        let y = (r as i64 - ry as i64).rem_euclid(ph as i64) as usize;
        let x = (c as i64 - rx as i64).rem_euclid(pw as i64) as usize;
        ker[[y, x]] = Complex::new(v, T::zero());
    }

    let fft = Fft2::new(ph, pw);
    fft.forward(&mut img);
    fft.forward(&mut ker);
    let scale = T::lit(((ph * pw) as f64).sqrt());
    Zip::from(&mut img).and(&ker).for_each(|a, &b| *a = *a * b * scale);
    fft.inverse(&mut img);
    img.slice(s![..h, ..w]).mapv(|v| v.re)
}

pub fn gaussian_blur<T: Real>(image: &Array2<T>, sigma: f64) -> Array2<T> {
    convolve_same(image, &gaussian_kernel(sigma))
}

/// Builds the per-plane targets for one image channel.
///
/// `n_planes == 1` is accepted and puts everything in focus on one plane.
pub fn compose_targets<T: Real>(
    scene: &RgbdScene<T>,
    channel: usize,
    params: &TargetingParams,
) -> Result<PlaneTargetSet<T>> {
    params.validate()?;
    if channel >= scene.n_channels() {
        return Err(config_err(format!(
            "channel {channel} out of range for a {}-channel scene",
            scene.n_channels()
        )));
    }
    let n = params.n_planes;
    let image = scene.channel(channel);
    let indices = quantize_unchecked(scene.depth(), n);
    let masks = focus_masks(&indices, n);

    let layers: Vec<Array2<T>> = masks
        .iter()
        .map(|m| {
            Zip::from(m)
                .and(image)
                .map_collect(|&m, &v| if m { v } else { T::zero() })
        })
        .collect();

    let offsets = default_plane_offsets(n, params.plane_spacing);
    let (w0, w1, w2) = (T::lit(params.w0), T::lit(params.w1), T::lit(params.w2));

    let planes = (0..n)
        .map(|k| {
            let mut defocus = Array2::zeros(image.dim());
            for (j, layer) in layers.iter().enumerate() {
                if j == k || layer.iter().all(|&v| v == T::zero()) {
                    continue;
                }
                let sigma = params.blur_base * j.abs_diff(k) as f64;
                defocus.zip_mut_with(&gaussian_blur(layer, sigma), |a: &mut T, &b| *a = *a + b);
            }
            // FFT round-off can leave tiny negatives
            defocus.mapv_inplace(|v: T| v.max(T::zero()));

            let target = match params.mode {
                TargetingMode::Ours => Zip::from(&defocus)
                    .and(&layers[k])
                    .map_collect(|&d, &f| w2 * (w0 * d + w1 * f)),
                TargetingMode::Naive => layers[k].clone(),
            };
            PlaneTarget {
                target,
                mask: masks[k].clone(),
                defocus,
                offset: offsets[k],
            }
        })
        .collect();

    Ok(PlaneTargetSet {
        planes,
        params: params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn direct_convolve(image: &Array2<f64>, kernel: &Array2<f64>) -> Array2<f64> {
        let (h, w) = image.dim();
        let (kh, kw) = kernel.dim();
        let (ry, rx) = (kh as i64 / 2, kw as i64 / 2);
        Array2::from_shape_fn((h, w), |(y, x)| {
            let mut acc = 0.0;
            for ((r, c), &k) in kernel.indexed_iter() {
                let sy = y as i64 - (r as i64 - ry);
                let sx = x as i64 - (c as i64 - rx);
                if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                    acc += k * image[[sy as usize, sx as usize]];
                }
            }
            acc
        })
    }

    #[test]
    fn quantize_examples() {
        let d = Array2::<f64>::zeros((2, 2));
        assert!(quantize_depth(&d, 4).unwrap().iter().all(|&i| i == 0));
        let d = array![[1.0f64]];
        assert_eq!(quantize_depth(&d, 4).unwrap()[[0, 0]], 3);
        let d = array![[0.10f64, 0.30, 0.60, 0.90]];
        assert_eq!(quantize_depth(&d, 4).unwrap().row(0).to_vec(), vec![0, 1, 2, 3]);
        // ties go up
        let d = array![[0.25f64, 0.5]];
        assert_eq!(quantize_depth(&d, 4).unwrap().row(0).to_vec(), vec![1, 2]);
        assert!(quantize_depth(&d, 1).is_err());
        assert!(quantize_depth(&d, 17).is_err());
    }

    #[test]
    fn masks_partition() {
        let idx = Array2::from_shape_fn((4, 4), |(r, c)| (r + c) % 2);
        let m = focus_masks(&idx, 2);
        for p in ndarray::indices((4, 4)) {
            assert_ne!(m[0][p], m[1][p]);
        }
        let idx = Array2::<usize>::zeros((3, 3));
        let m = focus_masks(&idx, 2);
        assert!(m[0].iter().all(|&b| b));
        assert!(m[1].iter().all(|&b| !b));
    }

    #[test]
    fn kernel_properties() {
        assert_eq!(gaussian_kernel::<f64>(0.0), array![[1.0]]);
        for sigma in [0.5, 1.0, 2.3] {
            let k = gaussian_kernel::<f64>(sigma);
            assert!((k.sum() - 1.0).abs() < 1e-12);
            let n = k.nrows();
            for r in 0..n {
                for c in 0..n {
                    assert!((k[[r, c]] - k[[c, n - 1 - r]]).abs() < 1e-15);
                }
            }
        }
        // σ = 1: centre is 1 / Σ exp(-(x²+y²)/2) over the radius-3 window
        let k = gaussian_kernel::<f64>(1.0);
        assert_eq!(k.dim(), (7, 7));
        let mut total = 0.0;
        for y in -3i32..=3 {
            for x in -3i32..=3 {
                total += (-((x * x + y * y) as f64) / 2.0).exp();
            }
        }
        assert!((k[[3, 3]] - 1.0 / total).abs() < 1e-15);
        assert!((k[[3, 3]] - 0.1592).abs() < 1e-3);
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let image = Array2::from_shape_fn((13, 9), |(r, c)| ((r * 7 + c * 3) % 5) as f64 / 5.0);
        for sigma in [0.7, 1.5, 2.0] {
            let k = gaussian_kernel::<f64>(sigma);
            let a = convolve_same(&image, &k);
            let b = direct_convolve(&image, &k);
            let err = (&a - &b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-12, "sigma {sigma}: {err}");
        }
    }

    #[test]
    fn plane_offsets_skip_zero() {
        assert_eq!(default_plane_offsets(2, 1.0), vec![1.0, -1.0]);
        assert_eq!(default_plane_offsets(3, 1.0), vec![2.0, 1.0, -1.0]);
        assert_eq!(default_plane_offsets(4, 1.0), vec![2.0, 1.0, -1.0, -2.0]);
        assert_eq!(default_plane_offsets(1, 1.0), vec![1.0]);
    }

    fn scene(image: Array2<f64>, depth: Array2<f64>) -> RgbdScene<f64> {
        RgbdScene::new(vec![image], depth).unwrap()
    }

    #[test]
    fn single_plane_degenerate() {
        let img = Array2::from_shape_fn((6, 6), |(r, c)| (r + c) as f64 / 10.0);
        let s = scene(img.clone(), Array2::zeros((6, 6)));
        let p = TargetingParams {
            n_planes: 1,
            w1: 0.5,
            w2: 0.8,
            ..Default::default()
        };
        let t = compose_targets(&s, 0, &p).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.planes[0].mask.iter().all(|&b| b));
        for (a, b) in t.planes[0].target.iter().zip(img.iter()) {
            assert!((a - 0.4 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_occupied_plane() {
        let img = Array2::from_shape_fn((12, 12), |(r, c)| {
            if (3..9).contains(&r) && (2..7).contains(&c) {
                1.0
            } else {
                0.2
            }
        });
        let s = scene(img.clone(), Array2::zeros((12, 12)));
        let p = TargetingParams {
            n_planes: 2,
            ..Default::default()
        };
        let t = compose_targets(&s, 0, &p).unwrap();
        assert_eq!(t.planes[0].target, img);
        let blurred = direct_convolve(&img, &gaussian_kernel(2.0));
        for (a, b) in t.planes[1].target.iter().zip(blurred.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn half_images_match_direct_convolution() {
        let (h, w) = (10, 16);
        let img = Array2::from_shape_fn((h, w), |(r, c)| ((r * 3 + c) % 7) as f64 / 7.0);
        let depth = Array2::from_shape_fn((h, w), |(_, c)| if c < w / 2 { 0.0 } else { 1.0 });
        let s = scene(img.clone(), depth);
        let p = TargetingParams {
            n_planes: 2,
            blur_base: 2.0,
            ..Default::default()
        };
        let t = compose_targets(&s, 0, &p).unwrap();
        let right = Array2::from_shape_fn((h, w), |(r, c)| if c >= w / 2 { img[[r, c]] } else { 0.0 });
        let blurred = direct_convolve(&right, &gaussian_kernel(2.0));
        for ((r, c), &v) in t.planes[0].target.indexed_iter() {
            let sharp = if c < w / 2 { img[[r, c]] } else { 0.0 };
            assert!((v - (sharp + blurred[[r, c]])).abs() < 1e-12);
        }
    }

    #[test]
    fn sharp_targets_reassemble_scene_without_blur() {
        let img = Array2::from_shape_fn((8, 8), |(r, c)| ((r * c) % 5) as f64 / 4.0);
        let depth = Array2::from_shape_fn((8, 8), |(r, c)| ((r + 2 * c) % 4) as f64 / 3.0);
        let s = scene(img.clone(), depth);
        let p = TargetingParams {
            n_planes: 4,
            blur_base: 0.0,
            ..Default::default()
        };
        let t = compose_targets(&s, 0, &p).unwrap();
        let mut sum = Array2::<f64>::zeros((8, 8));
        for pl in &t.planes {
            sum += &Zip::from(&pl.target)
                .and(&pl.mask)
                .map_collect(|&v, &m| if m { v } else { 0.0 });
        }
        assert_eq!(sum, img);
    }

    #[test]
    fn naive_never_exceeds_ours() {
        let img = Array2::from_shape_fn((16, 16), |(r, c)| ((r * 5 + c * 11) % 9) as f64 / 9.0);
        let depth = Array2::from_shape_fn((16, 16), |(r, c)| ((r / 4 + c / 4) % 3) as f64 / 2.0);
        let s = scene(img, depth);
        let ours = compose_targets(&s, 0, &TargetingParams::default()).unwrap();
        let naive = compose_targets(
            &s,
            0,
            &TargetingParams {
                mode: TargetingMode::Naive,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in ours.planes.iter().zip(&naive.planes) {
            assert!(a.target.iter().zip(b.target.iter()).all(|(o, n)| *n <= *o + 1e-15));
            assert_eq!(a.mask, b.mask);
        }
    }

    #[test]
    fn blur_grows_with_plane_separation() {
        // A point on plane 0 seen from planes 1 and 2: the farther plane gets
        // a wider, lower peak.
        let mut img = Array2::<f64>::zeros((33, 33));
        img[[16, 16]] = 1.0;
        let mut depth = Array2::<f64>::from_elem((33, 33), 0.5);
        depth[[16, 16]] = 0.0;
        let s = scene(img, depth);
        let p = TargetingParams {
            n_planes: 3,
            ..Default::default()
        };
        let t = compose_targets(&s, 0, &p).unwrap();
        let peak1 = t.planes[1].defocus[[16, 16]];
        let peak2 = t.planes[2].defocus[[16, 16]];
        assert!(peak1 > peak2 && peak2 > 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        let s = scene(Array2::zeros((4, 4)), Array2::zeros((4, 4)));
        let bad = TargetingParams {
            w0: 0.0,
            ..Default::default()
        };
        assert!(compose_targets(&s, 0, &bad).is_err());
        let bad = TargetingParams {
            n_planes: 17,
            ..Default::default()
        };
        assert!(compose_targets(&s, 0, &bad).is_err());
        assert!(compose_targets(&s, 1, &TargetingParams::default()).is_err());
        let naive_zero_weights = TargetingParams {
            mode: TargetingMode::Naive,
            w0: 0.0,
            ..Default::default()
        };
        assert!(compose_targets(&s, 0, &naive_zero_weights).is_ok());
    }
}
