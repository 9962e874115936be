//! Focal-stack images, JSON report and loss trace.

use std::path::{Path, PathBuf};

use image::GrayImage;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::simulation::{FocalStack, ReconstructionReport};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Files written by [`save_stack_and_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct WrittenArtifacts {
    pub planes: Vec<PathBuf>,
    pub report: PathBuf,
    pub losses: PathBuf,
}

/// Writes a grayscale PNG scaled so that `scale` maps to 255.
pub fn save_intensity_png<T: Real>(image: &ndarray::Array2<T>, scale: f64, path: &Path) -> Result<()> {
    let (h, w) = image.dim();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = image[[y as usize, x as usize]].to_f64() / scale;
        image::Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
    })
    .save(path)
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(io_err(path))
}

/// One `iteration,loss` row per recorded loss.
pub fn write_loss_csv(losses: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "loss"])?;
    for (i, l) in losses.iter().enumerate() {
        w.write_record([i.to_string(), format!("{l:e}")])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            rec.get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| crate::error::config_err(format!("bad loss row in {}", path.display())))
        })
        .collect()
}

/// Per-plane PNGs normalized to the stack maximum, `report.json` and
/// `loss.csv`, all under `dir` and prefixed with `prefix`.
pub fn save_stack_and_report<T: Real>(
    stack: &FocalStack<T>,
    report: &ReconstructionReport,
    losses: &[f64],
    dir: &Path,
    prefix: &str,
) -> Result<WrittenArtifacts> {
    ensure_dir(dir)?;
    let max = stack.max_intensity().to_f64();
    let planes = stack
        .planes
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let path = dir.join(format!("{prefix}plane{k}.png"));
            save_intensity_png(&p.intensity, max, &path).map(|_| path)
        })
        .collect::<Result<Vec<_>>>()?;
    let report_path = dir.join(format!("{prefix}report.json"));
    write_json(report, &report_path)?;
    let loss_path = dir.join(format!("{prefix}loss.csv"));
    write_loss_csv(losses, &loss_path)?;
    Ok(WrittenArtifacts {
        planes,
        report: report_path,
        losses: loss_path,
    })
}
