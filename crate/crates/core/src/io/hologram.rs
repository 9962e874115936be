//! 8-bit hologram export with a JSON sidecar, and the matching reader.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use image::GrayImage;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::report::write_json;

use crate::error::{config_err, Error, Result};
use crate::propagation::Regime;
use crate::scalar::Real;
use crate::solvers::{apply_grating, remove_grating, Algorithm};
use crate::targeting::TargetingMode;

pub const DEPTH_CONVENTION: &str = "depth 0 is the plane nearest the viewer";

/// Everything needed to re-simulate an exported hologram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HologramMetadata {
    pub wavelength: f64,
    pub pixel_pitch: f64,
    pub height: usize,
    pub width: usize,
    pub hop_distance: f64,
    pub plane_offsets: Vec<f64>,
    pub regime: Regime,
    pub band_limit: bool,
    pub padding: bool,
    pub grating: bool,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub targeting_mode: TargetingMode,
    pub software_version: String,
    pub depth_convention: String,
}

/// Path of the sidecar written next to `png`.
pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

/// Phase in radians to 8-bit levels: wrap to [0, 2π), then
/// `round(φ·255/2π)` with halves rounded up.
pub fn quantize_phase<T: Real>(phase: &Array2<T>) -> Array2<u8> {
    phase.mapv(|p| {
        let mut w = p.to_f64().rem_euclid(TAU);
        if w >= TAU {
            w = 0.0;
        }
        (w * 255.0 / TAU + 0.5).floor().min(255.0) as u8
    })
}

pub fn dequantize_phase<T: Real>(levels: &Array2<u8>) -> Array2<T> {
    levels.mapv(|v| T::lit(v as f64 * TAU / 255.0))
}

fn to_image(levels: &Array2<u8>) -> GrayImage {
    let (h, w) = levels.dim();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        image::Luma([levels[[y as usize, x as usize]]])
    })
}

/// Writes the displayed phase as an 8-bit PNG plus a `.json` sidecar. The
/// grating is added before quantization when `metadata.grating` is set.
pub fn save_hologram<T: Real>(phase: &Array2<T>, path: &Path, metadata: &HologramMetadata) -> Result<()> {
    if phase.dim() != (metadata.height, metadata.width) {
        return Err(Error::Dimension {
            expected: (metadata.height, metadata.width),
            found: phase.dim(),
        });
    }
    let shown = if metadata.grating {
        apply_grating(phase)
    } else {
        phase.clone()
    };
    to_image(&quantize_phase(&shown))
        .save(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    write_json(metadata, &sidecar_path(path))
}

/// Reads a hologram written by [`save_hologram`]. The returned phase is in
/// [0, 2π) with the grating removed.
pub fn load_hologram(path: &Path) -> Result<(Array2<f64>, HologramMetadata)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|source| Error::Io {
        path: side.clone(),
        source,
    })?;
    let metadata: HologramMetadata = serde_json::from_str(&text)?;
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let img = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::Scene {
                path: path.to_path_buf(),
                message: format!("hologram must be 8-bit grayscale, found {:?}", other.color()),
            })
        }
    };
    let (w, h) = img.dimensions();
    if (h as usize, w as usize) != (metadata.height, metadata.width) {
        return Err(config_err(format!(
            "hologram is {h}x{w} but its sidecar says {}x{}",
            metadata.height, metadata.width
        )));
    }
    let levels = Array2::from_shape_fn((h as usize, w as usize), |(r, c)| img.get_pixel(c as u32, r as u32)[0]);
    let phase = dequantize_phase::<f64>(&levels);
    let phase = if metadata.grating {
        remove_grating(&phase)
    } else {
        phase
    };
    Ok((phase, metadata))
}
