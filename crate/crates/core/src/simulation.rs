//! Focal-stack reconstruction of a finished hologram and its scoring.

use std::time::Duration;

use ndarray::{Array2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Result};
use crate::field::{ComplexField, OpticalConfig};
use crate::loss::{multiplane_loss, LossDomain, LossWeights};
use crate::metrics::{masked_psnr, psnr, ssim_with_range, Psnr};
use crate::propagation::ForwardModel;
use crate::scalar::Real;
use crate::solvers::{HologramPhase, SolverConfig, SolverTrace};
use crate::targeting::PlaneTargetSet;

#[derive(Debug, Clone, PartialEq)]
pub struct FocalPlane<T: Real> {
    pub offset: f64,
    /// `|U|^2` at this plane.
    pub intensity: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalStack<T: Real> {
    pub planes: Vec<FocalPlane<T>>,
}

impl<T: Real> FocalStack<T> {
    pub fn max_intensity(&self) -> T {
        self.planes
            .iter()
            .flat_map(|p| p.intensity.iter())
            .fold(T::zero(), |m, &v| m.max(v))
    }

    /// Image compared against targets: intensity, or its square root in the
    /// amplitude domain.
    pub fn comparable(&self, k: usize, domain: LossDomain) -> Array2<T> {
        match domain {
            LossDomain::Intensity => self.planes[k].intensity.clone(),
            LossDomain::Amplitude => self.planes[k].intensity.mapv(|v| v.sqrt()),
        }
    }
}

/// Intensity at each offset through the same forward model the solvers use.
pub fn reconstruct_stack<T: Real>(
    hologram: &HologramPhase<T>,
    offsets: &[f64],
    optics: &OpticalConfig,
    config: &SolverConfig,
) -> Result<FocalStack<T>> {
    check_dims(optics.dims(), hologram.phase.dim())?;
    let propagator = config.propagator::<T>(optics);
    let model = ForwardModel::new(&propagator, config.regime, config.hop_distance);
    let field = ComplexField::from_phase(&hologram.effective_phase(config.regime), *optics)?;
    let planes = offsets
        .par_iter()
        .map(|&offset| FocalPlane {
            offset,
            intensity: model.forward(&field, offset).intensity(),
        })
        .collect();
    Ok(FocalStack { planes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneMetrics {
    pub offset: f64,
    /// Full objective for this plane.
    pub loss: f64,
    /// Unmasked mean squared error term.
    pub loss_full: f64,
    /// Masked (in-focus) mean squared error term.
    pub loss_in_focus: f64,
    pub psnr: Psnr,
    /// `None` when the plane has no in-focus pixels.
    pub psnr_in_focus: Option<Psnr>,
    pub psnr_out_of_focus: Option<Psnr>,
    /// Out-of-focus pixels against the blurred reference content.
    pub psnr_defocus_reference: Option<Psnr>,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub planes: Vec<PlaneMetrics>,
    pub final_objective: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub peak: f64,
    pub config: serde_json::Value,
}

fn optional(r: Result<Psnr>) -> Result<Option<Psnr>> {
    match r {
        Ok(p) => Ok(Some(p)),
        Err(crate::Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Scores every plane of `stack` against `targets`. PSNR peak and SSIM
/// range default to the largest target value.
pub fn evaluate<T: Real>(
    stack: &FocalStack<T>,
    targets: &PlaneTargetSet<T>,
    weights: &LossWeights,
    domain: LossDomain,
    peak: Option<f64>,
) -> Result<Vec<PlaneMetrics>> {
    let peak = peak.unwrap_or_else(|| targets.peak().to_f64()).max(f64::MIN_POSITIVE);
    stack
        .planes
        .iter()
        .enumerate()
        .zip(&targets.planes)
        .map(|((k, plane), tgt)| {
            let image = stack.comparable(k, domain);
            let unmasked = LossWeights { m0: 1.0, m1: 0.0 };
            let none = Array2::from_elem(image.dim(), false);
            let loss_full = multiplane_loss(&image, &tgt.target, &none, &unmasked).to_f64();
            let masked_img = Zip::from(&image)
                .and(&tgt.mask)
                .map_collect(|&v, &m| if m { v } else { T::zero() });
            let masked_tgt = Zip::from(&tgt.target)
                .and(&tgt.mask)
                .map_collect(|&v, &m| if m { v } else { T::zero() });
            let loss_in_focus = multiplane_loss(&masked_img, &masked_tgt, &none, &unmasked).to_f64();
            let outside = tgt.mask.mapv(|m| !m);
            Ok(PlaneMetrics {
                offset: plane.offset,
                loss: multiplane_loss(&image, &tgt.target, &tgt.mask, weights).to_f64(),
                loss_full,
                loss_in_focus,
                psnr: psnr(&image, &tgt.target, peak)?,
                psnr_in_focus: optional(masked_psnr(&image, &tgt.target, &tgt.mask, peak))?,
                psnr_out_of_focus: optional(masked_psnr(&image, &tgt.target, &outside, peak))?,
                psnr_defocus_reference: optional(masked_psnr(&image, &tgt.defocus, &outside, peak))?,
                ssim: ssim_with_range(&image, &tgt.target, peak)?,
            })
        })
        .collect()
}

/// Builds the full report for a finished run.
pub fn build_report<T: Real>(
    stack: &FocalStack<T>,
    targets: &PlaneTargetSet<T>,
    config: &SolverConfig,
    trace: Option<&SolverTrace<T>>,
    config_echo: serde_json::Value,
) -> Result<ReconstructionReport> {
    let planes = evaluate(stack, targets, &config.loss, config.loss_domain, None)?;
    let final_objective = planes.iter().map(|p| p.loss).sum();
    Ok(ReconstructionReport {
        planes,
        final_objective,
        iterations: trace.map_or(0, |t| t.losses.len()),
        wall_time_s: trace.map_or(Duration::ZERO, |t| t.wall_time).as_secs_f64(),
        peak: targets.peak().to_f64(),
        config: config_echo,
    })
}
