//! End-to-end runs driven by a [`RunConfig`]: targets, optimization,
//! re-simulation of exported holograms and the solver comparison.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::field::OpticalConfig;
use crate::io::report::ensure_dir;
use crate::io::{
    load_hologram, save_hologram, save_intensity_png, save_stack_and_report, write_json, HologramMetadata, RunConfig,
    DEPTH_CONVENTION,
};
use crate::metrics::Psnr;
use crate::simulation::{build_report, evaluate, reconstruct_stack, FocalStack, PlaneMetrics, ReconstructionReport};
use crate::solvers::{solve, Algorithm, HologramPhase, SolverConfig, SolverTrace};
use crate::targeting::{compose_targets, PlaneTargetSet, TargetingMode, TargetingParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// File-name prefix for one wavelength, e.g. `639nm_`.
pub fn channel_prefix(wavelength: f64) -> String {
    format!("{:.0}nm_", wavelength * 1e9)
}

/// Targets for every configured wavelength.
pub fn build_targets(cfg: &RunConfig) -> Result<Vec<(OpticalConfig, PlaneTargetSet<f64>)>> {
    build_targets_with(cfg, &cfg.targeting)
}

fn build_targets_with(cfg: &RunConfig, params: &TargetingParams) -> Result<Vec<(OpticalConfig, PlaneTargetSet<f64>)>> {
    cfg.validate()?;
    let (scene, plan) = cfg.load()?;
    plan.into_iter()
        .map(|(optics, ch)| Ok((optics, compose_targets(&scene, ch, params)?)))
        .collect()
}

/// Outcome of optimizing one wavelength.
#[derive(Debug, Clone)]
pub struct ChannelResult {
    pub optics: OpticalConfig,
    pub targets: PlaneTargetSet<f64>,
    pub trace: SolverTrace<f64>,
    pub stack: FocalStack<f64>,
    pub report: ReconstructionReport,
}

impl ChannelResult {
    /// Phase as displayed on the modulator, before any grating.
    pub fn displayed_phase(&self, solver: &SolverConfig) -> Array2<f64> {
        self.trace.hologram.effective_phase(solver.regime)
    }
}

fn config_echo(cfg: &RunConfig) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(cfg)?)
}

fn run_channel(
    cfg: &RunConfig,
    solver: &SolverConfig,
    optics: OpticalConfig,
    targets: PlaneTargetSet<f64>,
) -> Result<ChannelResult> {
    let trace = solve(&targets, &optics, solver)?;
    let stack = reconstruct_stack(&trace.hologram, &targets.offsets(), &optics, solver)?;
    let report = build_report(&stack, &targets, solver, Some(&trace), config_echo(cfg)?)?;
    Ok(ChannelResult {
        optics,
        targets,
        trace,
        stack,
        report,
    })
}

/// Runs the configured solver on every wavelength.
pub fn optimize(cfg: &RunConfig) -> Result<Vec<ChannelResult>> {
    let solver = cfg.solver_config();
    build_targets(cfg)?
        .into_iter()
        .map(|(optics, targets)| run_channel(cfg, &solver, optics, targets))
        .collect()
}

pub fn hologram_metadata(cfg: &RunConfig, optics: &OpticalConfig, offsets: &[f64]) -> HologramMetadata {
    let solver = cfg.solver_config();
    HologramMetadata {
        wavelength: optics.wavelength,
        pixel_pitch: optics.pixel_pitch,
        height: optics.height,
        width: optics.width,
        hop_distance: solver.hop_distance,
        plane_offsets: offsets.to_vec(),
        regime: solver.regime,
        band_limit: solver.propagation_options().band_limit,
        padding: solver.padding,
        grating: cfg.grating,
        seed: solver.seed,
        algorithm: solver.algorithm,
        targeting_mode: cfg.targeting.mode,
        software_version: VERSION.to_string(),
        depth_convention: DEPTH_CONVENTION.to_string(),
    }
}

/// Writes hologram, sidecar, focal stack, report and loss trace for each
/// channel, plus the resolved config as `run.toml`. Returns the hologram
/// paths.
pub fn write_optimize_outputs(cfg: &RunConfig, results: &[ChannelResult], dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let run_toml = dir.join("run.toml");
    std::fs::write(&run_toml, cfg.to_toml_string()?).map_err(|source| crate::Error::Io { path: run_toml, source })?;
    let solver = cfg.solver_config();
    results
        .iter()
        .map(|res| {
            let prefix = channel_prefix(res.optics.wavelength);
            let path = dir.join(format!("{prefix}hologram.png"));
            let meta = hologram_metadata(cfg, &res.optics, &res.targets.offsets());
            save_hologram(&res.displayed_phase(&solver), &path, &meta)?;
            save_stack_and_report(&res.stack, &res.report, &res.trace.losses, dir, &prefix)?;
            Ok(path)
        })
        .collect()
}

/// Writes target, mask and blurred-reference previews for every plane.
pub fn write_targets(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    for (optics, targets) in build_targets(cfg)? {
        let prefix = channel_prefix(optics.wavelength);
        let peak = targets.peak();
        for (k, plane) in targets.planes.iter().enumerate() {
            let mask = plane.mask.mapv(|m| if m { 1.0 } else { 0.0 });
            for (name, img, scale) in [
                ("target", &plane.target, peak),
                ("mask", &mask, 1.0),
                ("defocus", &plane.defocus, peak),
            ] {
                let path = dir.join(format!("{prefix}{name}{k}.png"));
                save_intensity_png(img, scale, &path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Solver settings that reproduce the optics recorded in a sidecar.
pub fn solver_from_metadata(meta: &HologramMetadata) -> SolverConfig {
    SolverConfig {
        algorithm: meta.algorithm,
        hop_distance: meta.hop_distance,
        regime: meta.regime,
        seed: meta.seed,
        band_limit: Some(meta.band_limit),
        padding: meta.padding,
        ..SolverConfig::default()
    }
}

/// Re-simulation of an exported hologram.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub metadata: HologramMetadata,
    pub stack: FocalStack<f64>,
    /// Present when a config supplied matching targets.
    pub metrics: Option<Vec<PlaneMetrics>>,
}

/// Loads a hologram PNG and its sidecar and simulates its focal stack. With
/// `cfg`, the stack is also scored against that config's targets for the
/// recorded wavelength.
pub fn reconstruct_file(path: &Path, cfg: Option<&RunConfig>) -> Result<Reconstruction> {
    let (phase, metadata) = load_hologram(path)?;
    let optics = OpticalConfig::new(
        metadata.wavelength,
        metadata.pixel_pitch,
        metadata.height,
        metadata.width,
    )?;
    let solver = solver_from_metadata(&metadata);
    // the file already holds the displayed phase, so no extra offset
    let hologram = HologramPhase::new(phase, 0.0);
    let stack = reconstruct_stack(&hologram, &metadata.plane_offsets, &optics, &solver)?;
    let metrics = match cfg {
        None => None,
        Some(cfg) => {
            let targets = build_targets(cfg)?
                .into_iter()
                .find(|(o, _)| (o.wavelength - metadata.wavelength).abs() <= 1e-12)
                .map(|(_, t)| t)
                .ok_or_else(|| config_err("config has no channel at the hologram's wavelength"))?;
            if targets.offsets() != metadata.plane_offsets || targets.dims() != optics.dims() {
                return Err(config_err("config targets do not match the hologram's planes"));
            }
            let solver = SolverConfig {
                loss: cfg.solver.loss,
                loss_domain: cfg.solver.loss_domain,
                ..solver
            };
            Some(evaluate(&stack, &targets, &solver.loss, solver.loss_domain, None)?)
        }
    };
    Ok(Reconstruction {
        metadata,
        stack,
        metrics,
    })
}

/// Writes the stack of a [`Reconstruction`] and, when scored, a report.
pub fn write_reconstruction(rec: &Reconstruction, dir: &Path) -> Result<()> {
    let prefix = channel_prefix(rec.metadata.wavelength);
    ensure_dir(dir)?;
    let max = rec.stack.max_intensity();
    for (k, p) in rec.stack.planes.iter().enumerate() {
        save_intensity_png(&p.intensity, max, &dir.join(format!("{prefix}recon_plane{k}.png")))?;
    }
    if let Some(m) = &rec.metrics {
        write_json(m, &dir.join(format!("{prefix}recon_metrics.json")))?;
    }
    Ok(())
}

/// One cell of the solver × targeting comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub wavelength: f64,
    pub algorithm: Algorithm,
    pub mode: TargetingMode,
    pub final_loss: f64,
    /// Means over planes that have pixels in the respective region.
    pub psnr_in_focus: f64,
    pub psnr_out_of_focus: f64,
    pub psnr_defocus_reference: f64,
    pub ssim: f64,
    pub wall_time_s: f64,
}

fn mean_db(values: impl Iterator<Item = Option<Psnr>>) -> f64 {
    let v: Vec<f64> = values.flatten().map(Psnr::db).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Runs every algorithm under both targeting modes and scores each against
/// the defocus-aware targets, so the two modes share one reference.
pub fn compare(cfg: &RunConfig) -> Result<Vec<CompareRow>> {
    let base = cfg.solver_config();
    let reference = build_targets_with(
        cfg,
        &TargetingParams {
            mode: TargetingMode::Ours,
            ..cfg.targeting.clone()
        },
    )?;
    let naive = build_targets_with(
        cfg,
        &TargetingParams {
            mode: TargetingMode::Naive,
            ..cfg.targeting.clone()
        },
    )?;
    let mut jobs = Vec::new();
    for (ch, (optics, ours)) in reference.iter().enumerate() {
        for algorithm in Algorithm::ALL {
            for (mode, targets) in [(TargetingMode::Ours, ours), (TargetingMode::Naive, &naive[ch].1)] {
                jobs.push((ch, *optics, algorithm, mode, targets));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(ch, optics, algorithm, mode, targets)| {
            let solver = SolverConfig {
                algorithm,
                ..base.clone()
            };
            let trace = solve(targets, &optics, &solver)?;
            let reference = &reference[ch].1;
            let stack = reconstruct_stack(&trace.hologram, &reference.offsets(), &optics, &solver)?;
            let metrics = evaluate(&stack, reference, &solver.loss, solver.loss_domain, None)?;
            Ok(CompareRow {
                wavelength: optics.wavelength,
                algorithm,
                mode,
                final_loss: trace.final_loss(),
                psnr_in_focus: mean_db(metrics.iter().map(|m| m.psnr_in_focus)),
                psnr_out_of_focus: mean_db(metrics.iter().map(|m| m.psnr_out_of_focus)),
                psnr_defocus_reference: mean_db(metrics.iter().map(|m| m.psnr_defocus_reference)),
                ssim: metrics.iter().map(|m| m.ssim).sum::<f64>() / metrics.len() as f64,
                wall_time_s: trace.wall_time.as_secs_f64(),
            })
        })
        .collect()
}

/// Plain-text table of [`compare`] rows.
pub fn format_compare_table(rows: &[CompareRow]) -> String {
    let mut out = format!(
        "{:>8}  {:<7} {:<6} {:>11} {:>10} {:>10} {:>10} {:>7} {:>8}\n",
        "lambda", "solver", "target", "final_loss", "in_focus", "out_focus", "defocus", "ssim", "time_s"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>6.0}nm  {:<7} {:<6} {:>11.4e} {:>10.2} {:>10.2} {:>10.2} {:>7.3} {:>8.2}\n",
            r.wavelength * 1e9,
            r.algorithm.name(),
            r.mode.to_string(),
            r.final_loss,
            r.psnr_in_focus,
            r.psnr_out_of_focus,
            r.psnr_defocus_reference,
            r.ssim,
            r.wall_time_s
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.scene.height = 16;
        cfg.scene.width = 16;
        cfg.solver.iterations = 3;
        cfg
    }

    #[test]
    fn prefix_names_the_wavelength() {
        assert_eq!(channel_prefix(639e-9), "639nm_");
        assert_eq!(channel_prefix(515e-9), "515nm_");
    }

    #[test]
    fn optimize_covers_every_wavelength() {
        let mut cfg = small();
        cfg.optics.wavelengths = vec![639e-9, 515e-9];
        let res = optimize(&cfg).unwrap();
        assert_eq!(res.len(), 2);
        assert_eq!(res[1].optics.wavelength, 515e-9);
        assert_eq!(res[0].trace.losses.len(), 3);
        assert_eq!(res[0].report.planes.len(), 3);
    }

    #[test]
    fn compare_has_six_rows_per_channel() {
        let cfg = small();
        let rows = compare(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        let table = format_compare_table(&rows);
        assert_eq!(table.lines().count(), 7);
        assert!(table.contains("sgd_dp") && table.contains("naive"));
    }

    #[test]
    fn metadata_records_resolved_band_limit() {
        let mut cfg = small();
        let optics = cfg.optics(0).unwrap();
        assert!(!hologram_metadata(&cfg, &optics, &[1e-3]).band_limit);
        cfg.solver.regime = crate::propagation::Regime::Far;
        assert!(hologram_metadata(&cfg, &optics, &[1e-3]).band_limit);
    }
}
